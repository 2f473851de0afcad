//! Maximum-likelihood fitting of nested Markov models.
//!
//! The joint probability vector is affine in the block of parameters
//! whose heads contain any single vertex `v` (no product in the Moebius
//! expansion holds two parameters with `v` in their heads). Fitting
//! cycles through the vertices, maximizing the concave restricted
//! log-likelihood over each block by backtracking gradient ascent while
//! all implied cell probabilities stay positive.

mod constraint;
mod qfit;

pub use constraint::{constraint_system, ConstraintSystem};
pub use qfit::{fit_vertex, q_fit, BlockUpdate};

use crate::params::{mask_of_lex_rank, ParamError, Parameterization, ThetaTable};
use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum FitError {
    #[error("cell {0} has zero count and smoothing is disabled")]
    ZeroCounts(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("dataset variables {0:?} do not match graph vertices {1:?}")]
    VariableMismatch(Vec<String>, Vec<String>),
    #[error("dataset malformed: {0}")]
    Malformed(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Counts over full binary assignments of the observed variables,
/// indexed by assignment mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    counts: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, counts: Vec<f64>) -> Result<Dataset, FitError> {
        if counts.len() != 1 << names.len() {
            return Err(FitError::Malformed(format!(
                "{} variables need {} cells, got {}",
                names.len(),
                1usize << names.len(),
                counts.len()
            )));
        }
        if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(FitError::Malformed("negative or non-finite count".into()));
        }
        Ok(Dataset { names, counts })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn count_at_mask(&self, mask: usize) -> f64 {
        self.counts[mask]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn has_zero_cell(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0.0)
    }

    /// Additive smoothing: `alpha` added to every cell.
    pub fn smoothed(&self, alpha: f64) -> Dataset {
        Dataset {
            names: self.names.clone(),
            counts: self.counts.iter().map(|&c| c + alpha).collect(),
        }
    }

    /// Parses the data CSV: a header of variable names with an optional
    /// final `count` column, then rows of 0/1 values. Without `count`
    /// each row is one observation.
    pub fn from_csv(text: &str) -> Result<Dataset, FitError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| FitError::Malformed("empty file".into()))?;
        let mut cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let with_count = cols.last().is_some_and(|c| c == "count");
        if with_count {
            cols.pop();
        }
        if cols.is_empty() {
            return Err(FitError::Malformed("no variable columns".into()));
        }
        let n = cols.len();
        if n > crate::vset::MAX_VERTICES {
            return Err(FitError::Malformed(format!("too many variables: {n}")));
        }
        let mut counts = vec![0.0; 1 << n];
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let want = n + usize::from(with_count);
            if fields.len() != want {
                return Err(FitError::Malformed(format!(
                    "row {}: expected {} fields, got {}",
                    lineno + 2,
                    want,
                    fields.len()
                )));
            }
            let mut mask = 0usize;
            for (v, &f) in fields[..n].iter().enumerate() {
                match f {
                    "0" => {}
                    "1" => mask |= 1 << v,
                    other => {
                        return Err(FitError::Malformed(format!(
                            "row {}: value `{other}` is not 0/1",
                            lineno + 2
                        )))
                    }
                }
            }
            let c = if with_count {
                fields[n].parse::<f64>().map_err(|e| {
                    FitError::Malformed(format!("row {}: bad count: {e}", lineno + 2))
                })?
            } else {
                1.0
            };
            counts[mask] += c;
        }
        Dataset::new(cols, counts)
    }

    /// Writes the aggregated form: header plus one row per assignment
    /// with a final `count` column, rows in lexicographic order.
    pub fn to_csv(&self) -> String {
        let n = self.n_vars();
        let mut out = String::new();
        out.push_str(&self.names.join(","));
        out.push_str(",count\n");
        for rank in 0..self.counts.len() {
            let mask = mask_of_lex_rank(rank, n);
            for v in 0..n {
                out.push_str(if (mask >> v) & 1 == 1 { "1," } else { "0," });
            }
            out.push_str(&format!("{}\n", self.counts[mask]));
        }
        out
    }

    /// Checks the variable list against a graph's vertex names.
    pub fn check_matches(&self, names: &[String]) -> Result<(), FitError> {
        if self.names != names {
            return Err(FitError::VariableMismatch(self.names.clone(), names.to_vec()));
        }
        Ok(())
    }
}

/// Configuration shared by fitting and search.
#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Outer convergence: max parameter change over a full cycle.
    pub tol: f64,
    pub max_cycles: usize,
    /// Inner convergence: gradient sup-norm below `block_tol * (1 + N)`.
    pub block_tol: f64,
    pub max_block_iters: usize,
    /// Every implied cell probability stays at or above this margin.
    pub feas_margin: f64,
    /// Additive smoothing for zero counts; `None` makes zero counts an
    /// error.
    pub smoothing: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> FitConfig {
        FitConfig {
            tol: 1e-7,
            max_cycles: 500,
            block_tol: 1e-9,
            max_block_iters: 200,
            feas_margin: 1e-9,
            smoothing: None,
        }
    }
}

/// A fitted model.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub theta: ThetaTable,
    pub loglik: f64,
    pub cycles: usize,
    pub converged: bool,
    /// Smallest observed log-likelihood change across block updates;
    /// coordinate ascent keeps this at or above roundoff.
    pub min_ascent_delta: f64,
}

impl FitResult {
    pub fn to_json(&self, param: &Parameterization, n_total: f64) -> String {
        let theta_json: serde_json::Value =
            serde_json::from_str(&param.theta_to_json(&self.theta)).expect("theta json");
        serde_json::json!({
            "loglik": self.loglik,
            "bic": bic(self.loglik, param.param_count(), n_total),
            "cycles": self.cycles,
            "converged": self.converged,
            "theta": theta_json,
        })
        .to_string()
    }
}

/// `sum_i n_i log p_i` under the expanded joint.
pub fn loglik(
    param: &Parameterization,
    theta: &ThetaTable,
    data: &Dataset,
) -> Result<f64, FitError> {
    data.check_matches(param.graph().names())?;
    let joint = param.theta_to_joint(theta)?;
    let mut total = 0.0;
    for (mask, &n) in data.counts().iter().enumerate() {
        if n > 0.0 {
            let p = joint.values[mask];
            if p <= 0.0 {
                return Err(FitError::Infeasible(format!(
                    "p = {p} at a cell with count {n}"
                )));
            }
            total += n * p.ln();
        }
    }
    Ok(total)
}

/// Bayesian information criterion, lower is better.
pub fn bic(loglik: f64, dims: usize, n_total: f64) -> f64 {
    -2.0 * loglik + dims as f64 * n_total.ln()
}

/// Closed-form maximum log-likelihood of the saturated model.
pub fn empirical_loglik(data: &Dataset) -> f64 {
    let n = data.total();
    data.counts().iter().filter(|&&c| c > 0.0).map(|&c| c * (c / n).ln()).sum()
}
