//! Weighted path ensembles.

use crate::corridor::{SamplePath, TimeGrid};
use crate::error::{Error, Result};
use crate::stats;
use std::io::Write;

/// Which grid nodes an ensemble keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Full,
    Nodes(Vec<usize>),
}

impl Record {
    /// Keep the nodes closest to the given times.
    pub fn times(grid: &TimeGrid, times: &[f64]) -> Self {
        let mut nodes: Vec<usize> = times.iter().map(|&t| grid.nearest_index(t)).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Record::Nodes(nodes)
    }

    pub fn node_list(&self, grid: &TimeGrid) -> Vec<usize> {
        match self {
            Record::Full => (0..grid.len()).collect(),
            Record::Nodes(v) => v.clone(),
        }
    }

    /// This record extended with extra nodes.
    pub fn with_nodes(&self, extra: &[usize]) -> Self {
        match self {
            Record::Full => Record::Full,
            Record::Nodes(v) => {
                let mut all: Vec<usize> = v.iter().chain(extra).copied().collect();
                all.sort_unstable();
                all.dedup();
                Record::Nodes(all)
            }
        }
    }
}

/// Paths (restricted to recorded nodes) with log importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    grid: TimeGrid,
    nodes: Vec<usize>,
    values: Vec<f64>,
    log_weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn new(grid: TimeGrid, nodes: Vec<usize>, values: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        if nodes.iter().any(|&n| n >= grid.len()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("ensemble nodes must be increasing grid indices".into()));
        }
        if values.len() != nodes.len() * log_weights.len() {
            return Err(Error::Argument("ensemble values do not match paths × nodes".into()));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::degeneracy("ensemble", "log-weights must be finite or −∞"));
        }
        Ok(Self { grid, nodes, values, log_weights })
    }

    /// Build from rows of recorded values.
    pub fn from_rows(grid: TimeGrid, nodes: Vec<usize>, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * nodes.len());
        let mut lw = Vec::with_capacity(rows.len());
        for (r, w) in rows {
            values.extend_from_slice(&r);
            lw.push(w);
        }
        Self::new(grid, nodes, values, lw)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Recorded values of path `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.nodes.len();
        &self.values[i * m..(i + 1) * m]
    }

    /// Full path `i`, when every node was recorded.
    pub fn path(&self, i: usize) -> Option<SamplePath> {
        if self.nodes.len() != self.grid.len() {
            return None;
        }
        SamplePath::new(self.grid, self.row(i).to_vec()).ok()
    }

    fn column_position(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// Values of all paths at grid node `node`.
    pub fn column(&self, node: usize) -> Option<Vec<f64>> {
        let j = self.column_position(node)?;
        Some((0..self.len()).map(|i| self.row(i)[j]).collect())
    }

    /// Values at time `t`, which must be a recorded grid node.
    pub fn column_at(&self, t: f64) -> Result<Vec<f64>> {
        let node = self.grid.index_of(t).ok_or_else(|| Error::Argument(format!("t = {t} is not a grid node")))?;
        self.column(node).ok_or_else(|| Error::Argument(format!("node at t = {t} was not recorded")))
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        stats::normalized_weights(&self.log_weights).ok_or_else(|| Error::degeneracy("ensemble", "all weights are zero"))
    }

    /// (Σw)²/Σw².
    pub fn ess(&self) -> f64 {
        stats::ess(&self.log_weights)
    }

    /// Same paths with `log_weights` replaced.
    pub fn reweighted(&self, log_weights: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.nodes.clone(), self.values.clone(), log_weights)
    }

    /// CSV rows `path_id,t,value,log_weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path_id,t,value,log_weight")?;
        for i in 0..self.len() {
            for (j, &node) in self.nodes.iter().enumerate() {
                writeln!(out, "{},{},{},{}", i, self.grid.time(node), self.row(i)[j], self.log_weights[i])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_and_ess() {
        let g = TimeGrid::unit(4);
        let e = WeightedEnsemble::from_rows(g, vec![0, 2, 4], vec![(vec![0.0, 0.5, 1.0], 0.0), (vec![0.0, 0.7, 1.0], 0.0)]).unwrap();
        assert_eq!(e.column_at(0.5).unwrap(), vec![0.5, 0.7]);
        assert!(e.column_at(0.25).is_err());
        assert_eq!(e.ess(), 2.0);
        assert!(e.path(0).is_none());
        let w = e.reweighted(vec![0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(w.ess(), 1.0);
        assert!(e.reweighted(vec![f64::NEG_INFINITY; 2]).unwrap().normalized_weights().is_err());
    }
}
