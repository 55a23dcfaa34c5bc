//! Run configuration: one TOML file, overridable from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mstp_core::covariance::max_distance;
use mstp_core::diagnostics::{PointPartition, T_THRESHOLD};
use mstp_core::model::ObservationTensor;
use mstp_core::sampler::{default_a_grid, ChainConfig, ModelKind, PriorConfig};

use crate::error::{CliError, Result};
use crate::scenario::Scenario;

pub(crate) mod kind_serde {
    use mstp_core::sampler::ModelKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(kind: &ModelKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(kind.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ModelKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod kind_list_serde {
    use mstp_core::sampler::ModelKind;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(kinds: &[ModelKind], s: S) -> Result<S::Ok, S::Error> {
        kinds.iter().map(|k| k.name()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ModelKind>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineSection {
    #[serde(rename = "L")]
    pub count: usize,
}

impl Default for SplineSection {
    fn default() -> Self {
        SplineSection { count: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_window: usize,
    pub target_accept: [f64; 2],
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        ChainSection {
            iters: c.n_iter,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
            adapt_window: c.adapt_window,
            target_accept: [c.target_accept.0, c.target_accept.1],
        }
    }
}

impl ChainSection {
    pub fn to_chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_iter: self.iters,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            adapt_window: self.adapt_window,
            target_accept: (self.target_accept[0], self.target_accept[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub a_grid_max: f64,
    /// Range prior bound; the zone diameter when absent.
    pub rho_max: Option<f64>,
    pub mu_beta_sd: f64,
    pub lambda_sd: f64,
    pub iw_df: f64,
    pub iw_scale: f64,
    pub log_nu_mean: f64,
    pub log_nu_sd: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = PriorConfig::new(1.0);
        PriorSection {
            a_grid_max: 20.0,
            rho_max: None,
            mu_beta_sd: p.mu_beta_sd,
            lambda_sd: p.lambda_sd,
            iw_df: p.iw_df,
            iw_scale: p.iw_scale,
            log_nu_mean: p.log_nu_mean,
            log_nu_sd: p.log_nu_sd,
        }
    }
}

impl PriorSection {
    /// Priors for a zone; `rho_max` defaults to the zone diameter (1 for a
    /// single site).
    pub fn to_prior_config(&self, data: &ObservationTensor) -> Result<PriorConfig> {
        let diameter = max_distance(data.sites());
        let rho_max = self.rho_max.unwrap_or(if diameter > 0.0 { diameter } else { 1.0 });
        let priors = PriorConfig {
            mu_beta_sd: self.mu_beta_sd,
            lambda_sd: self.lambda_sd,
            iw_df: self.iw_df,
            iw_scale: self.iw_scale,
            a_grid: default_a_grid(self.a_grid_max),
            rho_max,
            log_nu_mean: self.log_nu_mean,
            log_nu_sd: self.log_nu_sd,
        };
        priors.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(priors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchiveFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub archive: ArchiveFormat,
    pub maps: bool,
    /// Pixels per map cell side.
    pub cell_px: u32,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("mstp-out"), archive: ArchiveFormat::Binary, maps: true, cell_px: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Points {
    #[default]
    SiteTime,
    SiteTimeIndex,
}

impl From<Points> for PointPartition {
    fn from(p: Points) -> Self {
        match p {
            Points::SiteTime => PointPartition::SiteTime,
            Points::SiteTimeIndex => PointPartition::SiteTimeIndex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriteriaSection {
    pub points: Points,
    pub t_threshold: f64,
}

impl Default for CriteriaSection {
    fn default() -> Self {
        CriteriaSection { points: Points::SiteTime, t_threshold: T_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    #[serde(with = "kind_list_serde")]
    pub models: Vec<ModelKind>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection { models: vec![ModelKind::Mgp, ModelKind::Mtp, ModelKind::Mstp] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiSection {
    /// Distance bin width; the smallest site separation when absent.
    pub bin_width: Option<f64>,
    pub smooth: bool,
    /// Posterior archive whose mean parameters give a theoretical overlay.
    pub posterior: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    #[serde(with = "kind_serde")]
    pub model: ModelKind,
    /// Named site subsets analysed separately; all sites form one zone
    /// named `all` when empty.
    pub zones: BTreeMap<String, Vec<String>>,
    pub splines: SplineSection,
    pub chain: ChainSection,
    pub priors: PriorSection,
    pub output: OutputSection,
    pub criteria: CriteriaSection,
    pub compare: CompareSection,
    pub chi: ChiSection,
    pub simulate: Scenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            model: ModelKind::Mstp,
            zones: BTreeMap::new(),
            splines: SplineSection::default(),
            chain: ChainSection::default(),
            priors: PriorSection::default(),
            output: OutputSection::default(),
            criteria: CriteriaSection::default(),
            compare: CompareSection::default(),
            chi: ChiSection::default(),
            simulate: Scenario::default(),
        }
    }
}

/// A zone resolved against a dataset: its name and site positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Zone {
    pub name: String,
    pub sites: Vec<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative input paths resolve against the config file.
        if let (Some(input), Some(dir)) = (cfg.input.as_mut(), path.parent()) {
            if input.is_relative() && !dir.as_os_str().is_empty() {
                *input = dir.join(&*input);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config always serializes")
    }

    /// Applies `key=value` overrides with dotted keys, e.g. `chain.seed=7`.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut doc: toml::Table = toml::from_str(&self.to_toml()).map_err(|e| CliError::Config(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
            let value = parse_override_value(raw.trim());
            let mut path: Vec<&str> = key.trim().split('.').collect();
            let leaf = path
                .pop()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| CliError::Config(format!("empty key in `{item}`")))?;
            let mut table = &mut doc;
            for part in path {
                table = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
            }
            table.insert(leaf.to_string(), value);
        }
        *self = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.splines.count < 4 {
            return bad(format!("splines.L must be at least 4, got {}", self.splines.count));
        }
        self.chain.to_chain_config().validate().map_err(|e| CliError::Config(format!("chain: {e}")))?;
        if !(self.priors.a_grid_max >= 0.1) {
            return bad("priors.a_grid_max must be at least 0.1".into());
        }
        if !(self.criteria.t_threshold > 0.0) {
            return bad("criteria.t_threshold must be positive".into());
        }
        if self.compare.models.is_empty() {
            return bad("compare.models must not be empty".into());
        }
        if self.zones.values().any(|z| z.is_empty()) {
            return bad("zones must name at least one site".into());
        }
        Ok(())
    }

    /// Resolves zone definitions against the dataset's site ids.
    pub fn zones_for(&self, data: &ObservationTensor) -> Result<Vec<Zone>> {
        if self.zones.is_empty() {
            return Ok(vec![Zone { name: "all".into(), sites: (0..data.n_sites()).collect() }]);
        }
        self.zones
            .iter()
            .map(|(name, ids)| {
                let mut sites = Vec::with_capacity(ids.len());
                for id in ids {
                    let k = data
                        .site_ids()
                        .iter()
                        .position(|s| s == id)
                        .ok_or_else(|| CliError::Config(format!("zone `{name}` references unknown site `{id}`")))?;
                    if sites.contains(&k) {
                        return Err(CliError::Config(format!("zone `{name}` lists site `{id}` twice")));
                    }
                    sites.push(k);
                }
                Ok(Zone { name: name.clone(), sites })
            })
            .collect()
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| CliError::Config("no input file configured".into()))
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    // Valid TOML literals (numbers, booleans, arrays, quoted strings) parse
    // as such; anything else is a bare string.
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
