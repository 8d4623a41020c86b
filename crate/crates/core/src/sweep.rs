//! Predicted vs observed regimes over an (α, β) grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DampingParams;
use crate::regime::{predicted_regime, simulate_outcome, standard_ic, LabConfig, Regime, RunStatus, NEAR_CRITICAL_BAND};

/// Initial angular momentum of the standard family, and the retry value used
/// after an escape.
pub const STANDARD_L0: f64 = 0.9;
pub const RETRY_L0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramEntry {
    pub index: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub predicted: Regime,
    pub observed: Option<Regime>,
    pub agree: bool,
    pub flags: Vec<String>,
}

impl DiagramEntry {
    pub fn near_critical(&self) -> bool {
        self.flags.iter().any(|f| f == "near-critical")
    }

    /// Counts toward the agreement score: determinate and not near-critical.
    pub fn scored(&self) -> bool {
        self.observed.is_some() && !self.near_critical()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimeDiagram {
    pub grid: Vec<DiagramEntry>,
}

impl RegimeDiagram {
    /// Combines partial diagrams; entries end up in grid order.
    pub fn merge(parts: impl IntoIterator<Item = RegimeDiagram>) -> RegimeDiagram {
        let mut grid: Vec<DiagramEntry> = parts.into_iter().flat_map(|d| d.grid).collect();
        grid.sort_by_key(|e| e.index);
        grid.dedup_by_key(|e| e.index);
        RegimeDiagram { grid }
    }

    pub fn scored(&self) -> usize {
        self.grid.iter().filter(|e| e.scored()).count()
    }

    /// Fraction of scored points that agree, `None` when nothing is scored.
    pub fn agreement(&self) -> Option<f64> {
        let n = self.scored();
        (n > 0).then(|| self.grid.iter().filter(|e| e.scored() && e.agree).count() as f64 / n as f64)
    }
}

/// Grid points in row-major order (α outer).
pub fn grid_points(alphas: &[f64], betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidGrid("empty α or β grid".into()));
    }
    let pts: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    if pts.iter().any(|&(a, b)| a == 0.0 && b == 0.0) {
        return Err(Error::InvalidGrid("grid contains the excluded point (α, β) = (0, 0)".into()));
    }
    Ok(pts)
}

/// Classifies one grid point, never failing: errors become flags.
pub fn sweep_point(index: usize, alpha: f64, beta: f64, delta: f64, lab: &LabConfig) -> DiagramEntry {
    let mut entry = DiagramEntry {
        index,
        alpha,
        beta,
        delta,
        gamma: alpha + 2.0 * beta - 3.0,
        predicted: Regime::Circularizing,
        observed: None,
        agree: false,
        flags: Vec::new(),
    };
    let params = match DampingParams::new(alpha, beta, delta) {
        Ok(p) => p,
        Err(e) => {
            entry.flags.push(format!("error:{e}"));
            return entry;
        }
    };
    entry.gamma = params.gamma();
    entry.predicted = predicted_regime(&params);
    let mut outcome = simulate_outcome(&params, &standard_ic(STANDARD_L0), lab);
    if matches!(&outcome, Ok(r) if r.status == RunStatus::Escaped) {
        entry.flags.push(format!("retry-l0={RETRY_L0}"));
        outcome = simulate_outcome(&params, &standard_ic(RETRY_L0), lab);
    }
    match outcome {
        Ok(r) => {
            entry.observed = r.regime_observed;
            for f in r.flags {
                if !entry.flags.contains(&f) {
                    entry.flags.push(f);
                }
            }
        }
        Err(e) => {
            entry.flags.push(format!("error:{e}"));
            if params.gamma().abs() < NEAR_CRITICAL_BAND {
                entry.flags.push("near-critical".into());
            }
        }
    }
    entry.agree = entry.observed == Some(entry.predicted);
    entry
}

/// Runs the grid on a pool of `jobs` workers (all cores when `None`).
pub fn sweep(alphas: &[f64], betas: &[f64], delta: f64, lab: &LabConfig, jobs: Option<usize>) -> Result<RegimeDiagram> {
    let pts = grid_points(alphas, betas)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParams(format!("δ must be finite and nonnegative, got {delta}")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let grid = pool.install(|| {
        pts.par_iter().enumerate().map(|(i, &(a, b))| sweep_point(i, a, b, delta, lab)).collect()
    });
    Ok(RegimeDiagram { grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_rejected() {
        assert!(matches!(grid_points(&[0.0, 1.0], &[0.0, 1.0]), Err(Error::InvalidGrid(_))));
        assert!(sweep(&[0.0], &[0.0], 0.2, &LabConfig::default(), Some(1)).is_err());
    }

    #[test]
    fn single_point_circularizes() {
        let d = sweep(&[0.0], &[1.0], 0.2, &LabConfig::default(), Some(1)).unwrap();
        assert_eq!(d.grid.len(), 1);
        assert_eq!(d.grid[0].predicted, Regime::Circularizing);
        assert_eq!(d.grid[0].observed, Some(Regime::Circularizing));
        assert!(d.grid[0].agree);
    }

    #[test]
    fn merge_restores_order() {
        let lab = LabConfig::default();
        let a = sweep_point(1, 2.0, 2.0, 0.5, &lab);
        let b = sweep_point(0, 0.0, 1.0, 0.1, &lab);
        let m = RegimeDiagram::merge([RegimeDiagram { grid: vec![a.clone()] }, RegimeDiagram { grid: vec![b.clone()] }]);
        assert_eq!(m.grid, vec![b, a]);
    }
}
