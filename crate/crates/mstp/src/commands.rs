//! The `fit`, `simulate`, `chi` and `compare` subcommands.
//!
//! Zones (and, for `compare`, models) run on the rayon pool. Every zone
//! writes only inside its own output directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mstp_core::diagnostics::{
    chain_diagnostics, delta_decadal, dic, trend_summary, waic, ChainDiagnostics, Dic, PointPartition, TrendSummary,
    Waic,
};
use mstp_core::extremal::{chi_spatial_theoretical, empirical_chi_cross, empirical_chi_spatial, BinSpec};
use mstp_core::model::{spline_basis, Dims, ObservationTensor, SplineBasis};
use mstp_core::sampler::{fit_model, posterior_mean_state, ModelFit, ModelKind};

use crate::archive::Archive;
use crate::config::{ArchiveFormat, Points, RunConfig, Zone};
use crate::dataset::{load_dataset, save_dataset};
use crate::error::{CliError, Result};
use crate::maps::{render, save_png, symmetric_limit, T_LIMIT};
use crate::report::{
    format_comparison, format_ic_report, write_chi_cross, write_chi_spatial, write_comparison, write_diagnostics,
    write_traces, write_trend_summary, ComparisonRow, IcReport,
};
use crate::truth::TruthFile;

/// Chain seed of the `k`-th zone; zone 0 keeps the configured seed.
pub fn zone_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Everything derived from one fitted zone.
pub struct ZoneFit {
    pub zone: Zone,
    pub data: ObservationTensor,
    pub basis: SplineBasis,
    pub fit: ModelFit,
    pub summary: TrendSummary,
    pub dic: Dic,
    pub waic: Waic,
    pub diagnostics: Vec<(String, ChainDiagnostics)>,
}

pub fn fit_zone(cfg: &RunConfig, data: &ObservationTensor, zone: &Zone, seed: u64, kind: ModelKind) -> Result<ZoneFit> {
    let sub = data.select_sites(&zone.sites).map_err(|e| CliError::Data(e.to_string()))?;
    let basis = spline_basis(sub.times(), cfg.splines.count)?;
    let priors = cfg.priors.to_prior_config(&sub)?;
    let mut chain = cfg.chain.to_chain_config();
    chain.seed = seed;
    let fit = fit_model(&sub, &basis, &priors, &chain, kind)?;
    let deltas = delta_decadal(&fit, &basis)?;
    let summary = trend_summary(&deltas, sub.n_indexes(), cfg.criteria.t_threshold)?;
    let log = fit.likelihood()?;
    let points = cfg.criteria.points.into();
    let dic = dic(&log, points)?;
    let waic = waic(&log, points)?;
    let diagnostics = fit
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (label, names) = if kind.is_univariate() {
                (sub.index_names()[k].clone(), vec![sub.index_names()[k].clone()])
            } else {
                ("joint".to_string(), sub.index_names().to_vec())
            };
            Ok((label, chain_diagnostics(c, &names)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ZoneFit { zone: zone.clone(), data: sub, basis, fit, summary, dic, waic, diagnostics })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn dims_of(data: &ObservationTensor, basis: &SplineBasis) -> Dims {
    Dims { sites: data.n_sites(), indexes: data.n_indexes(), splines: basis.n_basis(), times: data.n_times() }
}

/// Writes all artifacts of a fitted zone under `dir`.
pub fn write_zone(cfg: &RunConfig, z: &ZoneFit, dir: &Path) -> Result<()> {
    mkdir(dir)?;
    write_trend_summary(create(&dir.join("trend_summary.csv"))?, &z.data, &z.summary)?;
    let archive = Archive::from_fit(&z.fit, dims_of(&z.data, &z.basis), z.data.index_names());
    match cfg.output.archive {
        ArchiveFormat::Binary => archive.write_binary(create(&dir.join("posterior.bin"))?)?,
        ArchiveFormat::Csv => archive.write_csv(create(&dir.join("posterior.csv"))?)?,
    }
    let chain = cfg.chain.to_chain_config();
    let acceptance: Vec<(String, f64, f64)> =
        z.diagnostics.iter().map(|(l, d)| (l.clone(), d.accept_rho_nu, d.accept_gamma)).collect();
    let points_name = match cfg.criteria.points {
        Points::SiteTime => "site-time",
        Points::SiteTimeIndex => "site-time-index",
    };
    let log = z.fit.likelihood()?;
    let report = format_ic_report(&IcReport {
        zone: &z.zone.name,
        model: z.fit.kind.name(),
        dims: (z.data.n_sites(), z.data.n_indexes(), z.data.n_times(), z.basis.n_basis()),
        draws: z.fit.n_draws(),
        schedule: (chain.n_iter, chain.burn_in, chain.thin),
        points: (points_name, PointPartition::from(cfg.criteria.points).count(&log)),
        dic: &z.dic,
        waic: &z.waic,
        mean_sd_delta: z.summary.mean_sd(),
        acceptance: &acceptance,
    });
    let path = dir.join("ic_report.txt");
    fs::write(&path, report).map_err(CliError::io(&path))?;
    write_diagnostics(create(&dir.join("diagnostics.csv"))?, &z.diagnostics)?;
    write_traces(create(&dir.join("trace.csv"))?, &z.diagnostics)?;
    if cfg.output.maps {
        let maps = dir.join("maps");
        mkdir(&maps)?;
        let p = z.data.n_indexes();
        for (k, name) in z.data.index_names().iter().enumerate() {
            let pick = |v: &[f64]| (0..z.data.n_sites()).map(|s| v[s * p + k]).collect::<Vec<f64>>();
            let delta = pick(&z.summary.delta_mean);
            let t = pick(&z.summary.t_value);
            save_png(
                &render(z.data.sites(), &delta, symmetric_limit(&delta), cfg.output.cell_px),
                &maps.join(format!("{name}_delta.png")),
            )?;
            save_png(&render(z.data.sites(), &t, T_LIMIT, cfg.output.cell_px), &maps.join(format!("{name}_t.png")))?;
        }
    }
    Ok(())
}

fn load_input(cfg: &RunConfig) -> Result<ObservationTensor> {
    load_dataset(cfg.input()?)
}

/// Fits the configured model in every zone; returns the zone directories.
pub fn run_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load_input(cfg)?;
    let zones = cfg.zones_for(&data)?;
    zones
        .par_iter()
        .enumerate()
        .map(|(k, zone)| {
            let dir = cfg.output.dir.join(&zone.name);
            fit_zone(cfg, &data, zone, zone_seed(cfg.chain.seed, k), cfg.model)
                .and_then(|z| write_zone(cfg, &z, &dir))
                .map(|_| dir)
                .map_err(CliError::in_zone(&zone.name))
        })
        .collect()
}

/// Writes `dataset.csv` and `truth.json` into the output directory.
pub fn run_simulate(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    let sc = &cfg.simulate;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let sim = sc.simulate(sc.n_splines(cfg.splines.count), &mut rng)?;
    mkdir(&cfg.output.dir)?;
    let data_path = cfg.output.dir.join("dataset.csv");
    let truth_path = cfg.output.dir.join("truth.json");
    save_dataset(&sim.data, &data_path)?;
    let truth = TruthFile::new(sc.model, &sim);
    fs::write(&truth_path, truth.to_json()).map_err(CliError::io(&truth_path))?;
    Ok((data_path, truth_path))
}

/// Cross-index χ matrix of a dataset, averaged over sites; the diagonal is 1.
pub fn chi_cross_matrix(data: &ObservationTensor) -> Result<Vec<Vec<f64>>> {
    let p = data.n_indexes();
    let mut m = vec![vec![1.0; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            let v = empirical_chi_cross(data, i, j)?.mean.reported;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Posterior-mean `(λ*_p, Matérn, a)` per index from an archive.
fn overlay_params(archive: &Archive) -> Result<Vec<(f64, mstp_core::covariance::MaternParams, f64)>> {
    let mut out = Vec::new();
    for chain in &archive.chains {
        let mean = posterior_mean_state(&chain.draws)?;
        for p in 0..mean.lambda.len() {
            out.push((mean.lambda_star(p), mean.matern, mean.a));
        }
    }
    Ok(out)
}

/// Writes `chi_cross.csv` and `chi_spatial_<index>.csv` per zone.
pub fn run_chi(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load_input(cfg)?;
    let zones = cfg.zones_for(&data)?;
    let overlay = match &cfg.chi.posterior {
        Some(path) => {
            let archive = Archive::read_binary(File::open(path).map_err(CliError::io(path))?)?;
            if archive.dims.indexes != data.n_indexes() {
                return Err(CliError::Config("posterior archive has a different number of indexes".into()));
            }
            Some(overlay_params(&archive)?)
        }
        None => None,
    };
    let bins = BinSpec { width: cfg.chi.bin_width, smooth: cfg.chi.smooth };
    zones
        .par_iter()
        .map(|zone| {
            let run = || -> Result<PathBuf> {
                let sub = data.select_sites(&zone.sites).map_err(|e| CliError::Data(e.to_string()))?;
                let dir = cfg.output.dir.join(&zone.name);
                mkdir(&dir)?;
                write_chi_cross(create(&dir.join("chi_cross.csv"))?, sub.index_names(), &chi_cross_matrix(&sub)?)?;
                if sub.n_sites() >= 2 {
                    for (p, name) in sub.index_names().iter().enumerate() {
                        let curve = empirical_chi_spatial(&sub, p, bins)?;
                        for w in &curve.warnings {
                            eprintln!("warning: zone {} index {name}: {w}", zone.name);
                        }
                        let theory = match &overlay {
                            Some(params) => {
                                let (ls, matern, a) = params[p];
                                Some(
                                    curve
                                        .distances
                                        .iter()
                                        .map(|&h| chi_spatial_theoretical(ls, h, &matern, a))
                                        .collect::<mstp_core::Result<Vec<f64>>>()?,
                                )
                            }
                            None => None,
                        };
                        write_chi_spatial(
                            create(&dir.join(format!("chi_spatial_{name}.csv")))?,
                            &curve,
                            theory.as_deref(),
                        )?;
                    }
                }
                Ok(dir)
            };
            run().map_err(CliError::in_zone(&zone.name))
        })
        .collect()
}

/// Fits every requested model in every zone and writes `comparison.csv`.
pub fn run_compare(cfg: &RunConfig) -> Result<(PathBuf, Vec<ComparisonRow>)> {
    cfg.validate()?;
    let data = load_input(cfg)?;
    let zones = cfg.zones_for(&data)?;
    let jobs: Vec<(usize, &Zone, ModelKind)> =
        zones.iter().enumerate().flat_map(|(k, z)| cfg.compare.models.iter().map(move |&m| (k, z, m))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, zone, kind)| {
            let z = fit_zone(cfg, &data, zone, zone_seed(cfg.chain.seed, k), kind)
                .map_err(CliError::in_zone(&zone.name))?;
            Ok(ComparisonRow {
                zone: zone.name.clone(),
                model: kind.name().to_string(),
                dic: z.dic.per_point,
                waic: z.waic.per_point,
                mean_sd_delta: z.summary.mean_sd(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    mkdir(&cfg.output.dir)?;
    let path = cfg.output.dir.join("comparison.csv");
    write_comparison(create(&path)?, &rows)?;
    print!("{}", format_comparison(&rows));
    Ok((path, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zone_seeds_distinct() {
        assert_eq!(zone_seed(42, 0), 42);
        let seeds: std::collections::HashSet<u64> = (0..100).map(|k| zone_seed(42, k)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
