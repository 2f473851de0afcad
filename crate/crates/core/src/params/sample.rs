//! Seeded samplers used by property tests and experiments.

use super::{KernelTable, Parameterization, ThetaTable};
use crate::graph::Admg;
use rand::Rng;

/// A strictly positive random joint table (symmetric Dirichlet, alpha 1),
/// via normalized exponentials.
pub fn random_joint<R: Rng>(graph: &Admg, rng: &mut R) -> KernelTable {
    let cells = 1usize << graph.n();
    let mut values: Vec<f64> = (0..cells)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(1e-300);
            -u.ln()
        })
        .collect();
    let total: f64 = values.iter().sum();
    for v in values.iter_mut() {
        *v /= total;
    }
    KernelTable::new(graph.clone(), values)
}

/// A random coherent parameter vector, by rejection: draw every value
/// uniformly, and when the implied joint comes too close to the boundary
/// of the simplex shrink the draw toward the (always feasible) uniform
/// parameters and retry.
///
/// Draws keep every joint cell at or above 2% of the uniform cell, so
/// the signed Moebius sums behind them stay far from cancellation noise.
pub fn random_feasible_theta<R: Rng>(param: &Parameterization, rng: &mut R) -> ThetaTable {
    let uniform = param.theta_uniform();
    let floor = 0.02 / (1usize << param.graph().n()) as f64;
    let raw: ThetaTable = ThetaTable {
        values: param
            .catalog()
            .entries
            .iter()
            .map(|e| (0..(1usize << e.tail.len())).map(|_| rng.random_range(0.02..0.98)).collect())
            .collect(),
    };
    let mut lambda = 1.0;
    loop {
        let mixed = ThetaTable {
            values: raw
                .values
                .iter()
                .zip(&uniform.values)
                .map(|(r, u)| {
                    r.iter().zip(u).map(|(&a, &b)| lambda * a + (1.0 - lambda) * b).collect()
                })
                .collect(),
        };
        match param.theta_to_joint(&mixed) {
            Ok(joint) if joint.values.iter().all(|&p| p >= floor) => return mixed,
            _ => {
                lambda *= 0.5;
                assert!(lambda > 1e-12, "uniform parameters must be feasible");
            }
        }
    }
}
