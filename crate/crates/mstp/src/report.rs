//! Tabular and text outputs. Column orders here are part of the file
//! formats and are pinned by golden tests.

use std::fmt::Write as _;
use std::io::Write;

use mstp_core::diagnostics::{ChainDiagnostics, Dic, TrendSummary, Waic};
use mstp_core::extremal::ChiCurve;
use mstp_core::model::ObservationTensor;

use crate::error::{CliError, Result};

pub const TREND_COLUMNS: [&str; 8] = ["site", "lon", "lat", "index", "delta_mean", "delta_sd", "t", "significant"];
pub const DIAGNOSTIC_COLUMNS: [&str; 6] = ["chain", "parameter", "mean", "sd", "ess", "accept_rate"];
pub const TRACE_COLUMNS: [&str; 4] = ["chain", "parameter", "draw", "value"];
pub const CHI_SPATIAL_COLUMNS: [&str; 4] = ["distance", "chi", "raw", "pairs"];
pub const COMPARISON_COLUMNS: [&str; 8] =
    ["zone", "model", "dic", "waic", "mean_sd_delta", "best_dic", "best_waic", "best_mean_sd_delta"];

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("cannot write table: {e}"))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| CliError::Data(format!("cannot write table: {e}")))
}

/// One row per (site, index), sites in dataset order.
pub fn write_trend_summary<W: Write>(w: W, data: &ObservationTensor, summary: &TrendSummary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TREND_COLUMNS).map_err(csv_err)?;
    for (s, id) in data.site_ids().iter().enumerate() {
        let c = data.sites()[s];
        for (p, name) in data.index_names().iter().enumerate() {
            let k = summary.at(s, p);
            out.write_record([
                id.clone(),
                c[0].to_string(),
                c[1].to_string(),
                name.clone(),
                summary.delta_mean[k].to_string(),
                summary.delta_sd[k].to_string(),
                summary.t_value[k].to_string(),
                summary.significant[k].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(out)
}

/// `(chain label, diagnostics)` pairs; the acceptance rate fills the `ρ`,
/// `ν` and `γ` rows only.
pub fn write_diagnostics<W: Write>(w: W, chains: &[(String, ChainDiagnostics)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(DIAGNOSTIC_COLUMNS).map_err(csv_err)?;
    for (label, d) in chains {
        for par in &d.parameters {
            let accept = match par.name.as_str() {
                "rho" | "nu" => d.accept_rho_nu.to_string(),
                "gamma" => d.accept_gamma.to_string(),
                _ => String::new(),
            };
            out.write_record([
                label.clone(),
                par.name.clone(),
                par.mean.to_string(),
                par.sd.to_string(),
                par.ess.to_string(),
                accept,
            ])
            .map_err(csv_err)?;
        }
    }
    finish(out)
}

/// Long-format traces of every scalar parameter.
pub fn write_traces<W: Write>(w: W, chains: &[(String, ChainDiagnostics)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    for (label, d) in chains {
        for par in &d.parameters {
            for (k, v) in par.values.iter().enumerate() {
                out.write_record([label.as_str(), par.name.as_str(), &(k + 1).to_string(), &v.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(out)
}

/// A `P × P` matrix with a leading `index` column.
pub fn write_chi_cross<W: Write>(w: W, names: &[String], matrix: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["index".to_string()];
    header.extend(names.iter().cloned());
    out.write_record(&header).map_err(csv_err)?;
    for (name, row) in names.iter().zip(matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    finish(out)
}

/// A spatial χ curve, with a `theory` column when an overlay is supplied.
pub fn write_chi_spatial<W: Write>(w: W, curve: &ChiCurve, theory: Option<&[f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = CHI_SPATIAL_COLUMNS.to_vec();
    if theory.is_some() {
        header.push("theory");
    }
    out.write_record(&header).map_err(csv_err)?;
    for k in 0..curve.distances.len() {
        let mut rec = vec![
            curve.distances[k].to_string(),
            curve.chi[k].to_string(),
            curve.raw[k].to_string(),
            curve.counts[k].to_string(),
        ];
        if let Some(th) = theory {
            rec.push(th[k].to_string());
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    finish(out)
}

/// Inputs of the information-criteria report.
pub struct IcReport<'a> {
    pub zone: &'a str,
    pub model: &'a str,
    pub dims: (usize, usize, usize, usize),
    pub draws: usize,
    pub schedule: (usize, usize, usize),
    pub points: (&'a str, usize),
    pub dic: &'a Dic,
    pub waic: &'a Waic,
    pub mean_sd_delta: f64,
    pub acceptance: &'a [(String, f64, f64)],
}

pub fn format_ic_report(r: &IcReport<'_>) -> String {
    let mut s = String::new();
    let (n, p, t, l) = r.dims;
    let _ = writeln!(s, "zone: {}", r.zone);
    let _ = writeln!(s, "model: {}", r.model);
    let _ = writeln!(s, "sites: {n}  indexes: {p}  times: {t}  splines: {l}");
    let _ = writeln!(
        s,
        "draws: {} (iterations {}, burn-in {}, thin {})",
        r.draws, r.schedule.0, r.schedule.1, r.schedule.2
    );
    let _ = writeln!(s, "points: {} ({})", r.points.0, r.points.1);
    let _ = writeln!(s, "DIC per point: {:.6}", r.dic.per_point);
    let _ = writeln!(s, "DIC total: {:.6}  p_D: {:.6}", r.dic.total, r.dic.p_d);
    let _ = writeln!(
        s,
        "mean deviance: {:.6}  deviance at posterior mean: {:.6}",
        r.dic.mean_deviance, r.dic.deviance_at_mean
    );
    let _ = writeln!(s, "WAIC per point: {:.6}", r.waic.per_point);
    let _ = writeln!(s, "WAIC total: {:.6}  lppd: {:.6}  p_WAIC: {:.6}", r.waic.total, r.waic.lppd, r.waic.p_waic);
    let _ = writeln!(s, "mean posterior SD of delta: {:.6}", r.mean_sd_delta);
    for (label, rn, g) in r.acceptance {
        let _ = writeln!(s, "acceptance [{label}]: rho/nu {rn:.3}  gamma {g:.3}");
    }
    s
}

/// One row of the model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub zone: String,
    pub model: String,
    pub dic: f64,
    pub waic: f64,
    pub mean_sd_delta: f64,
}

/// Flags, per zone, the lowest value of each column.
pub fn best_flags(rows: &[ComparisonRow]) -> Vec<[bool; 3]> {
    let col = |r: &ComparisonRow, k: usize| [r.dic, r.waic, r.mean_sd_delta][k];
    rows.iter()
        .map(|r| {
            let mut flags = [false; 3];
            for (k, flag) in flags.iter_mut().enumerate() {
                let best = rows.iter().filter(|o| o.zone == r.zone).map(|o| col(o, k)).fold(f64::INFINITY, f64::min);
                *flag = col(r, k) == best;
            }
            flags
        })
        .collect()
}

pub fn write_comparison<W: Write>(w: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COMPARISON_COLUMNS).map_err(csv_err)?;
    for (r, f) in rows.iter().zip(best_flags(rows)) {
        out.write_record([
            r.zone.clone(),
            r.model.clone(),
            r.dic.to_string(),
            r.waic.to_string(),
            r.mean_sd_delta.to_string(),
            f[0].to_string(),
            f[1].to_string(),
            f[2].to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(out)
}

/// Fixed-width rendering of the comparison for the terminal; `*` marks the
/// lowest value per column within a zone.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut s = String::new();
    let _ =
        writeln!(s, "{:<12} {:<6} {:>14} {:>14} {:>14}", "zone", "model", "DIC/point", "WAIC/point", "mean SD(delta)");
    for (r, f) in rows.iter().zip(best_flags(rows)) {
        let cell = |v: f64, b: bool| format!("{v:.4}{}", if b { "*" } else { " " });
        let _ = writeln!(
            s,
            "{:<12} {:<6} {:>14} {:>14} {:>14}",
            r.zone,
            r.model,
            cell(r.dic, f[0]),
            cell(r.waic, f[1]),
            cell(r.mean_sd_delta, f[2])
        );
    }
    s
}
