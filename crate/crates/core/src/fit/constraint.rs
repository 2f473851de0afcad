//! Per-vertex affine restriction of the parameterization.

use crate::params::{Parameterization, ThetaTable};
use crate::vset::Vertex;

/// The joint vector restricted to the parameters whose heads contain one
/// vertex: `p = A q + c`, with every other parameter held at its current
/// value. Feasibility is `A q + c >= 0`, i.e. `A q >= b` with `b = -c`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    /// Block coordinates as `(catalog entry, tail rank)` pairs.
    pub block: Vec<(usize, usize)>,
    /// Row-major `2^n x |block|` coefficient matrix.
    pub a: Vec<Vec<f64>>,
    /// Constant part per cell.
    pub c: Vec<f64>,
}

impl ConstraintSystem {
    pub fn b(&self) -> Vec<f64> {
        self.c.iter().map(|&x| -x).collect()
    }

    /// Evaluates `A q + c`.
    pub fn eval(&self, q: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.c)
            .map(|(row, &c)| c + row.iter().zip(q).map(|(a, q)| a * q).sum::<f64>())
            .collect()
    }

    /// Current block values pulled out of a full parameter table.
    pub fn extract(&self, theta: &ThetaTable) -> Vec<f64> {
        self.block.iter().map(|&(e, r)| theta.get(e, r)).collect()
    }

    /// Writes block values back into a full parameter table.
    pub fn store(&self, theta: &mut ThetaTable, q: &[f64]) {
        for (&(e, r), &v) in self.block.iter().zip(q) {
            theta.values[e][r] = v;
        }
    }
}

/// Builds the affine system for the block of `v`, evaluating all other
/// parameters at their values in `theta`.
///
/// Each Moebius term holds at most one factor from the block, because
/// the heads in a partition are disjoint; the term contributes that
/// factor's coefficient, or a constant when no head contains `v`.
pub fn constraint_system(
    param: &Parameterization,
    theta: &ThetaTable,
    v: Vertex,
) -> ConstraintSystem {
    let catalog = param.catalog();
    let block: Vec<(usize, usize)> = param
        .param_index()
        .into_iter()
        .filter(|&(e, _)| catalog.entries[e].head.contains(v))
        .collect();
    let col_of = |e: usize, r: usize| -> Option<usize> {
        block.iter().position(|&(be, br)| be == e && br == r)
    };
    let n_cells = 1usize << param.graph().n();
    let mut a = vec![vec![0.0; block.len()]; n_cells];
    let mut c = vec![0.0; n_cells];
    for (mask, terms) in param.moebius().terms.iter().enumerate() {
        for term in terms {
            let mut coef = term.sign;
            let mut col: Option<usize> = None;
            for &(e, r) in &term.factors {
                let (e, r) = (e as usize, r as usize);
                if catalog.entries[e].head.contains(v) {
                    debug_assert!(col.is_none(), "two block heads in one term");
                    col = col_of(e, r);
                    debug_assert!(col.is_some());
                } else {
                    coef *= theta.get(e, r);
                }
            }
            match col {
                Some(j) => a[mask][j] += coef,
                None => c[mask] += coef,
            }
        }
    }
    ConstraintSystem { block, a, c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::FitConfig;
    use crate::graph::Admg;
    use crate::params::sample::random_feasible_theta;
    use crate::params::Parameterization;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_vertex_system_is_identity() {
        let g = Admg::parse(1, &[], &[]).unwrap();
        let param = Parameterization::new(&g).unwrap();
        let theta = param.theta_uniform();
        let cs = constraint_system(&param, &theta, Vertex(0));
        // p(0) = theta, p(1) = 1 - theta.
        assert_eq!(cs.block.len(), 1);
        assert_eq!(cs.a[0], vec![1.0]);
        assert_eq!(cs.a[1], vec![-1.0]);
        assert_eq!(cs.c, vec![0.0, 1.0]);
        assert_eq!(cs.b(), vec![0.0, -1.0]);
    }

    #[test]
    fn saturated_graph_block_of_x1_has_8_parameters() {
        let g = Admg::parse(
            4,
            &[("x2", "x4"), ("x2", "x1"), ("x3", "x1")],
            &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
        )
        .unwrap();
        let param = Parameterization::new(&g).unwrap();
        let cs = constraint_system(&param, &param.theta_uniform(), Vertex(0));
        assert_eq!(cs.block.len(), 8);
    }

    /// The affine view must reproduce the Moebius expansion exactly at
    /// random block perturbations.
    #[test]
    fn affine_view_matches_full_expansion() {
        let graphs = [
            Admg::parse(4, &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")], &[("x1", "x3")]).unwrap(),
            Admg::parse(
                4,
                &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
                &[("x1", "x3"), ("x2", "x4")],
            )
            .unwrap(),
            Admg::parse(3, &[], &[("x1", "x2"), ("x2", "x3")]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let _ = FitConfig::default();
        for g in graphs {
            let param = Parameterization::new(&g).unwrap();
            let base = random_feasible_theta(&param, &mut rng);
            for v in 0..g.n() {
                let cs = constraint_system(&param, &base, Vertex(v as u8));
                for _ in 0..20 {
                    let mut theta = base.clone();
                    let q: Vec<f64> =
                        cs.block.iter().map(|_| rng.random_range(0.05..0.95)).collect();
                    cs.store(&mut theta, &q);
                    let via_affine = cs.eval(&q);
                    // Evaluate the full expansion term by term; the
                    // perturbed table may be incoherent, which is fine
                    // for an algebraic identity.
                    for (mask, &affine) in via_affine.iter().enumerate() {
                        let direct: f64 = param.moebius().terms[mask]
                            .iter()
                            .map(|t| {
                                t.factors.iter().fold(t.sign, |acc, &(e, r)| {
                                    acc * theta.get(e as usize, r as usize)
                                })
                            })
                            .sum();
                        assert!(
                            (affine - direct).abs() < 1e-12,
                            "affine {affine} vs direct {direct}"
                        );
                    }
                }
            }
        }
    }

    /// Finite differences along each block coordinate are constant: the
    /// restriction really is affine.
    #[test]
    fn finite_difference_slopes_are_constant() {
        let g = Admg::parse(4, &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")], &[]).unwrap();
        let param = Parameterization::new(&g).unwrap();
        let theta = param.theta_uniform();
        let cs = constraint_system(&param, &theta, Vertex(1));
        let q0 = cs.extract(&theta);
        for j in 0..cs.block.len() {
            let mut qa = q0.clone();
            let mut qb = q0.clone();
            qa[j] += 0.05;
            qb[j] += 0.10;
            let p0 = cs.eval(&q0);
            let pa = cs.eval(&qa);
            let pb = cs.eval(&qb);
            for i in 0..p0.len() {
                let s1 = (pa[i] - p0[i]) / 0.05;
                let s2 = (pb[i] - p0[i]) / 0.10;
                assert!((s1 - s2).abs() < 1e-12);
            }
        }
    }
}
