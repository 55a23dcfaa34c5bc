//! Posterior archives.
//!
//! The binary layout, all integers and floats little-endian:
//!
//! ```text
//! b"MSTPPOST"  u32 version
//! str model    u32 n_sites  u32 n_indexes  u32 n_splines  u32 n_times
//! n_indexes × str index name
//! u32 n_chains, then per chain:
//!   u64 burn_in  f64 step_rho  f64 step_nu  f64 step_gamma  u32 n_draws
//!   per draw: beta, mu_beta, lambda, z_abs, sigma2, a, sigma_i, sigma_b,
//!             rho, nu, gamma, deviance   (f64 each, matrices column-major)
//! ```
//!
//! `str` is a `u32` byte length followed by UTF-8. Univariate fits store one
//! chain per index, each with `n_indexes = 1` in its states.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use mstp_core::covariance::MaternParams;
use mstp_core::model::{ChainState, Dims};
use mstp_core::sampler::{ModelFit, ModelKind, StepSizes};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"MSTPPOST";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchivedChain {
    pub burn_in: usize,
    pub steps: StepSizes,
    pub draws: Vec<ChainState>,
    pub deviance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub kind: ModelKind,
    /// Dimensions of the full problem (all indexes).
    pub dims: Dims,
    pub index_names: Vec<String>,
    pub chains: Vec<ArchivedChain>,
}

impl Archive {
    pub fn from_fit(fit: &ModelFit, dims: Dims, index_names: &[String]) -> Self {
        let chains = fit
            .components
            .iter()
            .map(|c| ArchivedChain {
                burn_in: c.burn_in,
                steps: c.final_steps,
                draws: c.draws.clone(),
                deviance: c.likelihood.deviance.clone(),
            })
            .collect();
        Archive { kind: fit.kind, dims, index_names: index_names.to_vec(), chains }
    }

    fn chain_dims(&self) -> Dims {
        if self.kind.is_univariate() {
            Dims { indexes: 1, ..self.dims }
        } else {
            self.dims
        }
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, VERSION);
        put_str(&mut buf, self.kind.name());
        for v in [self.dims.sites, self.dims.indexes, self.dims.splines, self.dims.times] {
            put_u32(&mut buf, v as u32);
        }
        for name in &self.index_names {
            put_str(&mut buf, name);
        }
        put_u32(&mut buf, self.chains.len() as u32);
        for chain in &self.chains {
            buf.extend_from_slice(&(chain.burn_in as u64).to_le_bytes());
            for v in [chain.steps.rho, chain.steps.nu, chain.steps.gamma] {
                put_f64(&mut buf, v);
            }
            put_u32(&mut buf, chain.draws.len() as u32);
            for (s, dev) in chain.draws.iter().zip(&chain.deviance) {
                for v in flatten(s).into_iter().chain([*dev]) {
                    put_f64(&mut buf, v);
                }
            }
        }
        w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| CliError::Data(format!("cannot write archive: {e}")))
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| CliError::Data(format!("cannot read archive: {e}")))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(CliError::Data("not a posterior archive (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(CliError::Data(format!("unsupported archive version {version}")));
        }
        let kind: ModelKind = cur.string()?.parse().map_err(|e| CliError::Data(format!("archive: {e}")))?;
        let mut d = [0usize; 4];
        for v in &mut d {
            *v = cur.u32()? as usize;
        }
        let dims = Dims { sites: d[0], indexes: d[1], splines: d[2], times: d[3] };
        let index_names = (0..dims.indexes).map(|_| cur.string()).collect::<Result<Vec<_>>>()?;
        let mut archive = Archive { kind, dims, index_names, chains: Vec::new() };
        let cd = archive.chain_dims();
        let n_chains = cur.u32()?;
        for _ in 0..n_chains {
            let burn_in = cur.u64()? as usize;
            let steps = StepSizes { rho: cur.f64()?, nu: cur.f64()?, gamma: cur.f64()? };
            let n_draws = cur.u32()? as usize;
            let mut draws = Vec::with_capacity(n_draws);
            let mut deviance = Vec::with_capacity(n_draws);
            for _ in 0..n_draws {
                let values = (0..state_len(cd)).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
                draws.push(unflatten(&values, cd));
                deviance.push(cur.f64()?);
            }
            archive.chains.push(ArchivedChain { burn_in, steps, draws, deviance });
        }
        if cur.pos != bytes.len() {
            return Err(CliError::Data(format!("{} trailing bytes in archive", bytes.len() - cur.pos)));
        }
        Ok(archive)
    }

    /// Column names of the CSV export, after `chain,draw`.
    pub fn csv_columns(&self) -> Vec<String> {
        let d = self.chain_dims();
        let mut cols: Vec<String> = Vec::new();
        for i in 0..d.sites {
            for p in 0..d.indexes {
                for l in 0..d.splines {
                    cols.push(format!("beta[{}.{}.{}]", i + 1, p + 1, l + 1));
                }
            }
        }
        cols.extend((0..d.indexes).map(|p| format!("mu_beta[{}]", p + 1)));
        cols.extend((0..d.indexes).map(|p| format!("lambda[{}]", p + 1)));
        cols.extend((0..d.times).map(|t| format!("z_abs[{}]", t + 1)));
        cols.extend((0..d.times).map(|t| format!("sigma2[{}]", t + 1)));
        cols.push("a".into());
        for q in 0..d.indexes {
            for p in 0..d.indexes {
                cols.push(format!("sigma_i[{}.{}]", p + 1, q + 1));
            }
        }
        for k in 0..d.splines {
            for l in 0..d.splines {
                cols.push(format!("sigma_b[{}.{}]", l + 1, k + 1));
            }
        }
        cols.extend(["rho", "nu", "gamma", "deviance"].map(String::from));
        cols
    }

    /// Draws as CSV, one row per draw, in the binary layout's value order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::Data(format!("cannot write draws: {e}"));
        let mut header = vec!["chain".to_string(), "draw".to_string()];
        header.extend(self.csv_columns());
        out.write_record(&header).map_err(err)?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (k, (s, dev)) in chain.draws.iter().zip(&chain.deviance).enumerate() {
                let mut row = vec![(c + 1).to_string(), (k + 1).to_string()];
                row.extend(flatten(s).into_iter().chain([*dev]).map(|v| v.to_string()));
                out.write_record(&row).map_err(err)?;
            }
        }
        out.flush().map_err(|e| CliError::Data(format!("cannot write draws: {e}")))
    }
}

fn state_len(d: Dims) -> usize {
    d.sites * d.indexes * d.splines
        + 2 * d.indexes
        + 2 * d.times
        + 1
        + d.indexes * d.indexes
        + d.splines * d.splines
        + 3
}

fn flatten(s: &ChainState) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend_from_slice(&s.beta);
    v.extend_from_slice(&s.mu_beta);
    v.extend_from_slice(&s.lambda);
    v.extend_from_slice(&s.z_abs);
    v.extend_from_slice(&s.sigma2);
    v.push(s.a);
    v.extend_from_slice(s.sigma_i.as_slice());
    v.extend_from_slice(s.sigma_b.as_slice());
    v.extend([s.matern.rho, s.matern.nu, s.matern.gamma]);
    v
}

fn unflatten(v: &[f64], d: Dims) -> ChainState {
    let mut pos = 0;
    let mut next = |n: usize| {
        let s = &v[pos..pos + n];
        pos += n;
        s.to_vec()
    };
    let beta = next(d.sites * d.indexes * d.splines);
    let mu_beta = next(d.indexes);
    let lambda = next(d.indexes);
    let z_abs = next(d.times);
    let sigma2 = next(d.times);
    let a = next(1)[0];
    let sigma_i = DMatrix::from_vec(d.indexes, d.indexes, next(d.indexes * d.indexes));
    let sigma_b = DMatrix::from_vec(d.splines, d.splines, next(d.splines * d.splines));
    let m = next(3);
    ChainState {
        beta,
        mu_beta,
        lambda,
        z_abs,
        sigma2,
        a,
        sigma_i,
        sigma_b,
        matern: MaternParams { rho: m[0], nu: m[1], gamma: m[2] },
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Data("archive is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CliError::Data("archive string is not UTF-8".into()))
    }
}
