//! Blockwise coordinate ascent over the per-vertex affine restrictions.

use super::constraint::{constraint_system, ConstraintSystem};
use super::{Dataset, FitConfig, FitError, FitResult};
use crate::params::{Parameterization, ThetaTable};
use crate::vset::Vertex;

/// Result of maximizing one block.
#[derive(Clone, Debug)]
pub struct BlockUpdate {
    pub values: Vec<f64>,
    pub loglik_before: f64,
    pub loglik_after: f64,
    /// No feasible improving step above the minimum step size existed.
    pub stalled: bool,
    pub max_change: f64,
}

fn restricted_loglik(p: &[f64], counts: &[f64]) -> f64 {
    p.iter().zip(counts).map(|(&p, &n)| if n > 0.0 { n * p.ln() } else { 0.0 }).sum()
}

/// Maximizes the restricted log-likelihood of the block of `v` by
/// gradient ascent with a halving line search: a step is accepted when
/// every implied cell probability keeps the feasibility margin and the
/// Armijo condition holds.
pub fn fit_vertex(
    param: &Parameterization,
    theta: &ThetaTable,
    v: Vertex,
    data: &Dataset,
    cfg: &FitConfig,
) -> Result<(ConstraintSystem, BlockUpdate), FitError> {
    let cs = constraint_system(param, theta, v);
    let counts = data.counts();
    let grad_tol = cfg.block_tol * (1.0 + data.total());
    let mut q = cs.extract(theta);
    let mut p = cs.eval(&q);
    if let Some(i) = p.iter().position(|&x| x <= 0.0 || x.is_nan()) {
        return Err(FitError::Infeasible(format!("cell {i} has p = {}", p[i])));
    }
    let before = restricted_loglik(&p, counts);
    let mut g = before;
    let mut stalled = false;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step_hint: Option<f64> = None;
    for _ in 0..cfg.max_block_iters {
        // Ascent direction: sum_i n_i a_i / p_i.
        let mut grad = vec![0.0; q.len()];
        for (i, row) in cs.a.iter().enumerate() {
            if counts[i] > 0.0 {
                let w = counts[i] / p[i];
                for (gj, &aij) in grad.iter_mut().zip(row) {
                    *gj += w * aij;
                }
            }
        }
        let gnorm = grad.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if gnorm < grad_tol {
            break;
        }
        let gsq: f64 = grad.iter().map(|&x| x * x).sum();
        // Spectral (Barzilai-Borwein) step guess from the last accepted
        // pair; curvature is negative, so the sign flips.
        let bb = prev.as_ref().and_then(|(q0, g0)| {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for ((&a, &b), (&ga, &gb)) in q.iter().zip(q0).zip(grad.iter().zip(g0)) {
                let s = a - b;
                let y = ga - gb;
                ss += s * s;
                sy += s * y;
            }
            (sy < 0.0).then(|| ss / -sy)
        });
        let mut t = bb
            .or(step_hint.map(|h| h * 4.0))
            .unwrap_or(1.0 / (1.0 + gnorm))
            .clamp(1e-14, 1e8);
        prev = Some((q.clone(), grad.clone()));
        let mut accepted = false;
        while t >= 1e-14 {
            let q2: Vec<f64> = q.iter().zip(&grad).map(|(&x, &d)| x + t * d).collect();
            let p2 = cs.eval(&q2);
            let feasible = p2.iter().all(|&x| x >= cfg.feas_margin);
            if feasible {
                let g2 = restricted_loglik(&p2, counts);
                if g2 >= g + 1e-4 * t * gsq {
                    q = q2;
                    p = p2;
                    g = g2;
                    step_hint = Some(t);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    let max_change = cs
        .extract(theta)
        .iter()
        .zip(&q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok((
        cs,
        BlockUpdate { values: q, loglik_before: before, loglik_after: g, stalled, max_change },
    ))
}

/// Coordinate ascent over all vertices from the uniform start.
///
/// Cycles vertices in index order and stops when the largest parameter
/// change over a full cycle drops below `cfg.tol` or `cfg.max_cycles` is
/// reached. The log-likelihood never decreases across block updates.
pub fn q_fit(
    param: &Parameterization,
    data: &Dataset,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    data.check_matches(param.graph().names())?;
    let data = match (data.has_zero_cell(), cfg.smoothing) {
        (Some(cell), None) => {
            let n = param.graph().n();
            let named: Vec<String> = (0..n)
                .map(|v| format!("{}={}", data.names()[v], (cell >> v) & 1))
                .collect();
            return Err(FitError::ZeroCounts(named.join(",")));
        }
        (Some(_), Some(alpha)) => data.smoothed(alpha),
        (None, _) => data.clone(),
    };
    let mut theta = param.theta_uniform();
    let mut cycles = 0;
    let mut converged = false;
    let mut min_delta = f64::INFINITY;
    let mut last_ll = f64::NEG_INFINITY;
    while cycles < cfg.max_cycles {
        cycles += 1;
        let mut cycle_change = 0.0f64;
        for v in 0..param.graph().n() {
            let (cs, update) = fit_vertex(param, &theta, Vertex(v as u8), &data, cfg)?;
            // The affine frame changes between blocks, so monotonicity is
            // judged within one frame; re-evaluation drift across frames
            // is summation-order roundoff, checked loosely.
            debug_assert!(
                !last_ll.is_finite()
                    || (update.loglik_before - last_ll).abs()
                        <= 1e-9 * (1.0 + last_ll.abs()),
                "inconsistent log-likelihood across frames"
            );
            min_delta = min_delta.min(update.loglik_after - update.loglik_before);
            last_ll = update.loglik_after;
            cycle_change = cycle_change.max(update.max_change);
            cs.store(&mut theta, &update.values);
        }
        if cycle_change < cfg.tol {
            converged = true;
            break;
        }
    }
    // Coordinate ascent may never lose likelihood beyond roundoff.
    debug_assert!(
        !min_delta.is_finite() || min_delta >= -1e-12,
        "block update decreased the log-likelihood by {}",
        -min_delta
    );
    Ok(FitResult {
        theta,
        loglik: last_ll,
        cycles,
        converged,
        min_ascent_delta: if min_delta.is_finite() { min_delta } else { 0.0 },
    })
}
