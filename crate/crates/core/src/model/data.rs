use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::covariance::Coord;
use crate::error::{domain, shape, Result};

/// Gridded observations `Y_tp(s)`: `T` time points × `n` sites × `P` indexes.
///
/// Values are stored time-slowest, then site, with the index fastest, so the
/// slice for one time point is the `nP` vector `Y_t` in site-slowest order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    y: Vec<f64>,
    site_ids: Vec<String>,
    sites: Vec<Coord>,
    times: Vec<f64>,
    index_names: Vec<String>,
}

impl ObservationTensor {
    pub fn new(
        y: Vec<f64>,
        site_ids: Vec<String>,
        sites: Vec<Coord>,
        times: Vec<f64>,
        index_names: Vec<String>,
    ) -> Result<Self> {
        let (t, n, p) = (times.len(), sites.len(), index_names.len());
        if t < 2 {
            return Err(shape(format!("need at least two time points, got {t}")));
        }
        if n == 0 || p == 0 {
            return Err(shape("need at least one site and one index"));
        }
        if site_ids.len() != n {
            return Err(shape("one site id per site is required"));
        }
        if y.len() != t * n * p {
            return Err(shape(format!("expected {} values for T={t}, n={n}, P={p}, got {}", t * n * p, y.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("time labels must be strictly increasing"));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            let (ti, rest) = (pos / (n * p), pos % (n * p));
            return Err(domain(format!(
                "missing or non-finite value at time {} site {} index {}",
                times[ti],
                site_ids[rest / p],
                index_names[rest % p]
            )));
        }
        Ok(ObservationTensor { y, site_ids, sites, times, index_names })
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_indexes(&self) -> usize {
        self.index_names.len()
    }

    pub fn get(&self, t: usize, site: usize, index: usize) -> f64 {
        self.y[(t * self.n_sites() + site) * self.n_indexes() + index]
    }

    /// The `nP` vector `Y_t`.
    pub fn at_time(&self, t: usize) -> &[f64] {
        let w = self.n_sites() * self.n_indexes();
        &self.y[t * w..(t + 1) * w]
    }

    /// Time series of one site and index.
    pub fn series(&self, site: usize, index: usize) -> Vec<f64> {
        (0..self.n_times()).map(|t| self.get(t, site, index)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn sites(&self) -> &[Coord] {
        &self.sites
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn index_names(&self) -> &[String] {
        &self.index_names
    }

    /// Sub-tensor restricted to the given sites, in the given order.
    pub fn select_sites(&self, sites: &[usize]) -> Result<Self> {
        if sites.iter().any(|&s| s >= self.n_sites()) {
            return Err(shape("site selection out of range"));
        }
        let p = self.n_indexes();
        let mut y = Vec::with_capacity(self.n_times() * sites.len() * p);
        for t in 0..self.n_times() {
            for &s in sites {
                for k in 0..p {
                    y.push(self.get(t, s, k));
                }
            }
        }
        ObservationTensor::new(
            y,
            sites.iter().map(|&s| self.site_ids[s].clone()).collect(),
            sites.iter().map(|&s| self.sites[s]).collect(),
            self.times.clone(),
            self.index_names.clone(),
        )
    }

    /// Single-index sub-tensor (`P = 1`).
    pub fn select_index(&self, index: usize) -> Result<Self> {
        if index >= self.n_indexes() {
            return Err(shape("index selection out of range"));
        }
        let mut y = Vec::with_capacity(self.n_times() * self.n_sites());
        for t in 0..self.n_times() {
            for s in 0..self.n_sites() {
                y.push(self.get(t, s, index));
            }
        }
        ObservationTensor::new(
            y,
            self.site_ids.clone(),
            self.sites.clone(),
            self.times.clone(),
            alloc::vec![self.index_names[index].clone()],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn layout_and_accessors() {
        let y: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let d = ObservationTensor::new(
            y,
            ids(2),
            vec![[0.0, 0.0], [1.0, 0.0]],
            vec![2000.0, 2001.0, 2002.0],
            vec!["a".to_string(), "b".to_string()],
        )
        .unwrap();
        assert_eq!(d.get(1, 1, 0), 6.0);
        assert_eq!(d.at_time(2), &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(d.series(0, 1), vec![1.0, 5.0, 9.0]);
        let b = d.select_index(1).unwrap();
        assert_eq!(b.values(), &[1.0, 3.0, 5.0, 7.0, 9.0, 11.0]);
        let s = d.select_sites(&[1]).unwrap();
        assert_eq!(s.series(0, 0), vec![2.0, 6.0, 10.0]);
    }

    #[test]
    fn rejects_incomplete_or_unordered() {
        let mk = |y: Vec<f64>, times: Vec<f64>| {
            ObservationTensor::new(y, ids(1), vec![[0.0, 0.0]], times, vec!["a".to_string()])
        };
        assert!(mk(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
        assert!(mk(vec![1.0, 2.0], vec![2.0, 1.0]).is_err());
        assert!(mk(vec![1.0], vec![1.0]).is_err());
        assert!(mk(vec![1.0, 2.0], vec![1.0, 2.0]).is_ok());
    }
}
