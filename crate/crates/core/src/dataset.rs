use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matnorm::ObsMatrix;

/// An ordered collection of equally sized observations with stable ids and,
/// optionally, ground truth.
///
/// Cluster labels are 1-based throughout the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    rows: usize,
    cols: usize,
    ids: Vec<String>,
    obs: Vec<ObsMatrix>,
    clusters: Option<Vec<usize>>,
    outliers: Option<Vec<bool>>,
}

impl DataSet {
    pub fn new(ids: Vec<String>, obs: Vec<ObsMatrix>) -> Result<Self> {
        let first = obs
            .first()
            .ok_or_else(|| Error::InsufficientData("empty dataset".into()))?;
        let (rows, cols) = first.shape();
        if ids.len() != obs.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} observations",
                ids.len(),
                obs.len()
            )));
        }
        if let Some((i, x)) = obs
            .iter()
            .enumerate()
            .find(|(_, x)| x.shape() != (rows, cols))
        {
            return Err(Error::Dimension(format!(
                "observation {} is {:?}, expected {rows}x{cols}",
                ids[i],
                x.shape()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self {
            rows,
            cols,
            ids,
            obs,
            clusters: None,
            outliers: None,
        })
    }

    /// Builds a dataset with ids `"1"`, `"2"`, ….
    pub fn from_observations(obs: Vec<ObsMatrix>) -> Result<Self> {
        let ids = (1..=obs.len()).map(|i| i.to_string()).collect();
        Self::new(ids, obs)
    }

    pub fn with_clusters(mut self, clusters: Vec<usize>) -> Result<Self> {
        if clusters.len() != self.len() {
            return Err(Error::Dimension(
                "cluster label count differs from n".into(),
            ));
        }
        if clusters.contains(&0) {
            return Err(Error::InvalidValue("cluster labels are 1-based".into()));
        }
        self.clusters = Some(clusters);
        Ok(self)
    }

    pub fn with_outliers(mut self, outliers: Vec<bool>) -> Result<Self> {
        if outliers.len() != self.len() {
            return Err(Error::Dimension("outlier flag count differs from n".into()));
        }
        self.outliers = Some(outliers);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn observations(&self) -> &[ObsMatrix] {
        &self.obs
    }

    pub fn get(&self, i: usize) -> &ObsMatrix {
        &self.obs[i]
    }

    pub fn clusters(&self) -> Option<&[usize]> {
        self.clusters.as_deref()
    }

    pub fn outliers(&self) -> Option<&[bool]> {
        self.outliers.as_deref()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// The observations at `keep`, in that order, with their truth.
    pub fn select(&self, keep: &[usize]) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            obs: keep.iter().map(|&i| self.obs[i].clone()).collect(),
            clusters: self
                .clusters
                .as_ref()
                .map(|c| keep.iter().map(|&i| c[i]).collect()),
            outliers: self
                .outliers
                .as_ref()
                .map(|o| keep.iter().map(|&i| o[i]).collect()),
        }
    }

    /// Everything except index `skip`.
    pub fn without(&self, skip: usize) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != skip).collect();
        self.select(&keep)
    }

    /// Everything except the given ids. Unknown ids are an error.
    pub fn without_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let mut drop = vec![false; self.len()];
        for id in ids {
            let i = self
                .index_of(id.as_ref())
                .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))?;
            drop[i] = true;
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !drop[i]).collect();
        Ok(self.select(&keep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: f64) -> ObsMatrix {
        ObsMatrix::new(1, 2, vec![v, -v]).unwrap()
    }

    #[test]
    fn rejects_mixed_shapes_and_duplicate_ids() {
        let bad = vec![obs(1.0), ObsMatrix::new(2, 1, vec![0.0, 0.0]).unwrap()];
        assert!(DataSet::from_observations(bad).is_err());
        let dup = DataSet::new(vec!["a".into(), "a".into()], vec![obs(1.0), obs(2.0)]);
        assert!(dup.is_err());
        assert!(DataSet::from_observations(vec![]).is_err());
    }

    #[test]
    fn without_keeps_order_and_truth() {
        let ds = DataSet::from_observations(vec![obs(1.0), obs(2.0), obs(3.0)])
            .unwrap()
            .with_clusters(vec![1, 2, 1])
            .unwrap();
        let sub = ds.without(1);
        assert_eq!(sub.ids(), &["1", "3"]);
        assert_eq!(sub.clusters().unwrap(), &[1, 1]);
        assert_eq!(sub.get(1), &obs(3.0));
        assert!(matches!(ds.without_ids(&["9"]), Err(Error::UnknownId(_))));
        assert_eq!(ds.without_ids(&["1", "3"]).unwrap().ids(), &["2"]);
    }
}
