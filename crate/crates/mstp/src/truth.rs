//! JSON sidecar holding the state that generated a simulated dataset.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use mstp_core::covariance::MaternParams;
use mstp_core::model::ChainState;
use mstp_core::sampler::ModelKind;

use crate::error::{CliError, Result};
use crate::scenario::SimulatedScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(with = "crate::config::kind_serde")]
    pub model: ModelKind,
    pub site_ids: Vec<String>,
    pub index_names: Vec<String>,
    pub n_splines: usize,
    /// Flattened site-slowest, then index, then spline.
    pub beta: Vec<f64>,
    pub mu_beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub z_abs: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `null` for the Gaussian limit.
    pub a: Option<f64>,
    pub sigma_i: Vec<Vec<f64>>,
    pub sigma_b: Vec<Vec<f64>>,
    pub rho: f64,
    pub nu: f64,
    pub gamma: f64,
    /// Decadal change at each (site, index), site-slowest.
    pub delta: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(name: &str, r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(CliError::Data(format!("truth `{name}` is not square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| r[i][j]))
}

impl TruthFile {
    pub fn new(model: ModelKind, sim: &SimulatedScenario) -> Self {
        let t = &sim.truth;
        TruthFile {
            model,
            site_ids: sim.data.site_ids().to_vec(),
            index_names: sim.data.index_names().to_vec(),
            n_splines: sim.basis.n_basis(),
            beta: t.beta.clone(),
            mu_beta: t.mu_beta.clone(),
            lambda: t.lambda.clone(),
            lambda_star: (0..t.lambda.len()).map(|p| t.lambda_star(p)).collect(),
            z_abs: t.z_abs.clone(),
            sigma2: t.sigma2.clone(),
            a: t.a.is_finite().then_some(t.a),
            sigma_i: rows(&t.sigma_i),
            sigma_b: rows(&t.sigma_b),
            rho: t.matern.rho,
            nu: t.matern.nu,
            gamma: t.matern.gamma,
            delta: sim.delta.clone(),
        }
    }

    pub fn to_state(&self) -> Result<ChainState> {
        let state = ChainState {
            beta: self.beta.clone(),
            mu_beta: self.mu_beta.clone(),
            lambda: self.lambda.clone(),
            z_abs: self.z_abs.clone(),
            sigma2: self.sigma2.clone(),
            a: self.a.unwrap_or(f64::INFINITY),
            sigma_i: from_rows("sigma_i", &self.sigma_i)?,
            sigma_b: from_rows("sigma_b", &self.sigma_b)?,
            matern: MaternParams { rho: self.rho, nu: self.nu, gamma: self.gamma },
        };
        state.validate(None).map_err(|e| CliError::Data(format!("truth: {e}")))?;
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("truth file: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_coverage() {
        let sc = Scenario { years: 20, ..Scenario::default() };
        let sim = sc.simulate(5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let file = TruthFile::new(ModelKind::Mstp, &sim);
        let json = file.to_json();
        let back = TruthFile::from_json(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_state().unwrap(), sim.truth);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["beta", "mu_beta", "lambda", "z_abs", "sigma2", "a", "sigma_i", "sigma_b", "rho", "nu", "gamma"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn gaussian_truth_serializes_infinite_dof_as_null() {
        let sc = Scenario { years: 20, model: ModelKind::Mgp, ..Scenario::default() };
        let sim = sc.simulate(5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let json = TruthFile::new(ModelKind::Mgp, &sim).to_json();
        assert!(json.contains("\"a\": null"));
        assert!(TruthFile::from_json(&json).unwrap().to_state().unwrap().a.is_infinite());
    }
}
