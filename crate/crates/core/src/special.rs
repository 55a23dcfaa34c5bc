//! Special functions: log-gamma, regularized incomplete beta, Student-t and
//! normal distribution functions, and the modified Bessel function of the
//! second kind for real order.
//!
//! Student-t functions accept fractional and infinite degrees of freedom; an
//! infinite value selects the standard normal limit.

use core::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    // Convergence takes O(sqrt(max(a, b))) terms.
    let max_iter = 200 + 20 * (a.max(b).sqrt() as usize);
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Natural log of the regularized incomplete beta `I_x(a, b)`, given both
/// `ln x` and `ln(1 - x)` so that callers can avoid cancellation.
fn ln_beta_inc_parts(a: f64, b: f64, ln_x: f64, ln_y: f64) -> f64 {
    if ln_x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if ln_y == f64::NEG_INFINITY {
        return 0.0;
    }
    let x = ln_x.exp();
    let y = ln_y.exp();
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front + beta_cf(a, b, x).ln() - a.ln()
    } else {
        let comp = (ln_front + beta_cf(b, a, y).ln() - b.ln()).exp();
        (-comp).ln_1p()
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    ln_beta_inc_parts(a, b, x.ln(), (-x).ln_1p()).exp()
}

/// `ln(df + t^2)` without overflow for huge `|t|`.
fn ln_df_plus_sq(df: f64, t: f64) -> f64 {
    let at = t.abs();
    if at > 1e100 {
        2.0 * at.ln() + (df / (at * at)).ln_1p()
    } else {
        (df + t * t).ln()
    }
}

/// Log of the upper tail `P(T > |t|)` of a Student-t with `df` degrees of freedom.
fn t_ln_upper_abs(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return -LN_2;
    }
    let ln_den = ln_df_plus_sq(df, t);
    let ln_x = df.ln() - ln_den;
    let ln_y = 2.0 * t.abs().ln() - ln_den;
    -LN_2 + ln_beta_inc_parts(0.5 * df, 0.5, ln_x, ln_y)
}

/// Log-density of the standard Student-t distribution.
pub fn t_ln_pdf(t: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal_ln_pdf(t);
    }
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln() - 0.5 * (df + 1.0) * (t * t / df).ln_1p()
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    t_ln_cdf(t, df).exp()
}

/// Student-t survival function `1 - F_T(t)`.
pub fn t_sf(t: f64, df: f64) -> f64 {
    t_ln_cdf(-t, df).exp()
}

/// Log of the Student-t CDF, accurate deep into the lower tail.
pub fn t_ln_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if df.is_infinite() {
        return normal_ln_cdf(t);
    }
    if t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    let ln_tail = t_ln_upper_abs(t, df);
    if t < 0.0 {
        ln_tail
    } else {
        (-ln_tail.exp()).ln_1p()
    }
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Log of the standard normal CDF; uses the asymptotic Mills-ratio series in
/// the far lower tail where `erfc` underflows.
pub fn normal_ln_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        normal_ln_pdf(x) - (-x).ln() + series.ln()
    }
}

/// `1/Gamma(1+x)` split into the even and odd parts used by Temme's method,
/// returned as `(gam1, gam2, 1/Gamma(1+x), 1/Gamma(1-x))`.
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    // Taylor coefficients of 1/Gamma(1+x) (A&S 6.1.34 shifted by one).
    const C: [f64; 14] = [
        1.0,
        0.577_215_664_901_532_9,
        -0.655_878_071_520_253_8,
        -0.042_002_635_034_095_2,
        0.166_538_611_382_291_5,
        -0.042_197_734_555_544_3,
        -0.009_621_971_527_877_0,
        0.007_218_943_246_663_0,
        -0.001_165_167_591_859_1,
        -0.000_215_241_674_114_9,
        0.000_128_050_282_388_2,
        -0.000_020_134_854_780_7,
        -0.000_001_250_493_482_1,
        0.000_001_133_027_232_0,
    ];
    if x.abs() < 0.1 {
        let x2 = x * x;
        let mut even = 0.0;
        let mut odd = 0.0;
        let mut p = 1.0;
        for k in 0..7 {
            even += C[2 * k] * p;
            odd += C[2 * k + 1] * p;
            p *= x2;
        }
        // 1/Gamma(1+x) = even + x*odd; 1/Gamma(1-x) = even - x*odd
        let gampl = even + x * odd;
        let gammi = even - x * odd;
        (-odd, even, gampl, gammi)
    } else {
        let gampl = 1.0 / libm::tgamma(1.0 + x);
        let gammi = 1.0 / libm::tgamma(1.0 - x);
        ((gammi - gampl) / (2.0 * x), 0.5 * (gammi + gampl), gampl, gammi)
    }
}

/// `(K_mu(x), K_{mu+1}(x))` with `|mu| <= 1/2`, multiplied by `exp(x)` when
/// `scaled` is set.
fn bessel_k_base(mu: f64, x: f64, scaled: bool) -> (f64, f64) {
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    if x < 2.0 {
        // Temme's series.
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..10_000 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let scale = if scaled { x.exp() } else { 1.0 };
        (sum * scale, sum1 * 2.0 * xi * scale)
    } else {
        // Steed's continued fraction (CF2).
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..10_000 {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let mut kmu = (PI / (2.0 * x)).sqrt() / s;
        if !scaled {
            kmu *= (-x).exp();
        }
        let k1 = kmu * (mu + x + 0.5 - h) * xi;
        (kmu, k1)
    }
}

fn bessel_k_impl(nu: f64, x: f64, scaled: bool) -> f64 {
    if x.is_nan() || nu.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    let nu = nu.abs();
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut kmu, mut k1) = bessel_k_base(mu, x, scaled);
    let xi2 = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    kmu
}

/// Modified Bessel function of the second kind `K_nu(x)` for real `nu`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_impl(nu, x, false)
}

/// Exponentially scaled `exp(x) K_nu(x)`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    bessel_k_impl(nu, x, true)
}
