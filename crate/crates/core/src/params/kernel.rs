//! Kernel fixing and the joint-to-theta inverse map.

use super::{KernelTable, ParamError, Parameterization, ThetaTable};
use crate::vset::{VSet, Vertex};

impl KernelTable {
    /// Fixes `r` numerically: divides by `q(x_r | x_mb)` where `mb` is
    /// the Markov blanket of `r` inside the ancestor closure of its
    /// district, and moves `r` into the context of the graph.
    pub fn fix_kernel(&self, r: Vertex) -> Result<KernelTable, ParamError> {
        let g = &self.graph;
        let next_graph = g.fix(r)?;
        let mb = g.markov_blanket_for_fix(r);
        let m_v = mb.inter(g.random());
        let mr_v = m_v.insert(r);
        let margin_m = self.margin(m_v);
        let margin_mr = self.margin(mr_v);
        let keep_m = (m_v.union(g.context()).0) as usize;
        let keep_mr = (mr_v.union(g.context()).0) as usize;
        let mut values = vec![0.0; self.values.len()];
        for (m, out) in values.iter_mut().enumerate() {
            let denom = margin_mr[m & keep_mr];
            if denom == 0.0 {
                if self.values[m] == 0.0 {
                    continue;
                }
                return Err(ParamError::DivisionByZero {
                    vertex: g.name(r).to_string(),
                    assignment: self.render_assignment(m, mr_v.union(g.context())),
                });
            }
            *out = self.values[m] * margin_m[m & keep_m] / denom;
        }
        Ok(KernelTable { graph: next_graph, values })
    }

    /// Applies a whole fixing sequence.
    pub fn fix_sequence(&self, order: &[Vertex]) -> Result<KernelTable, ParamError> {
        let mut q = self.clone();
        for &r in order {
            q = q.fix_kernel(r)?;
        }
        Ok(q)
    }
}

/// Mask giving `tail` the values encoded by a lexicographic tail rank.
pub fn mask_for_tail_rank(rank: usize, tail: VSet) -> usize {
    let k = tail.len();
    let mut mask = 0usize;
    for (i, v) in tail.iter().enumerate() {
        if (rank >> (k - 1 - i)) & 1 == 1 {
            mask |= 1 << v.0;
        }
    }
    mask
}

impl Parameterization {
    /// Reads parameters off a joint table: for each intrinsic set `C`,
    /// fix `V \ C` (lexicographically first valid order), then take
    /// `theta_H(t) = q_C(X_H = 0 | x_T = t)`.
    ///
    /// Inverse of [`Parameterization::theta_to_joint`] on distributions
    /// in the model. Context coordinates outside the tail are pinned to
    /// zero; for model members the reached kernel does not depend on
    /// them.
    pub fn joint_to_theta(&self, joint: &KernelTable) -> Result<ThetaTable, ParamError> {
        assert_eq!(
            joint.graph.canonical_key(),
            self.graph().canonical_key(),
            "joint table does not match parameterization graph"
        );
        let mut values = Vec::with_capacity(self.catalog().len());
        for entry in &self.catalog().entries {
            let reached = self
                .reach()
                .entries
                .get(&entry.set)
                .expect("intrinsic set must be reachable");
            let q_c = joint.fix_sequence(&reached.witness)?;
            let head_bits = entry.head.0 as usize;
            let mut table = Vec::with_capacity(1 << entry.tail.len());
            for rank in 0..(1usize << entry.tail.len()) {
                let base = mask_for_tail_rank(rank, entry.tail);
                debug_assert_eq!(base & head_bits, 0, "head and tail are disjoint");
                let num = q_c.values[base];
                let mut den = 0.0;
                let mut h = head_bits;
                loop {
                    den += q_c.values[base | h];
                    if h == 0 {
                        break;
                    }
                    h = (h - 1) & head_bits;
                }
                if den == 0.0 {
                    return Err(ParamError::DivisionByZero {
                        vertex: self.graph().render_set(entry.head),
                        assignment: q_c.render_assignment(base, entry.tail),
                    });
                }
                table.push(num / den);
            }
            values.push(table);
        }
        Ok(ThetaTable { values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Admg;
    use crate::params::sample::{random_feasible_theta, random_joint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn verma() -> Admg {
        Admg::parse(
            4,
            &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
            &[("x1", "x3"), ("x2", "x4")],
        )
        .unwrap()
    }

    #[test]
    fn fixing_the_sink_of_a_two_vertex_dag_leaves_the_marginal() {
        let g = Admg::parse(2, &[("x1", "x2")], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_joint(&g, &mut rng);
        let fixed = p.fix_kernel(Vertex(1)).unwrap();
        // q(x1 | x2) = p(x1): dividing by p(x2 | x1) cancels the chain rule.
        let m1 = p.margin(VSet::singleton(Vertex(0)));
        for m in 0..4usize {
            assert!((fixed.values[m] - m1[m & 1]).abs() < 1e-14);
        }
        assert!(fixed.normalization_error() < 1e-12);
    }

    #[test]
    fn fixing_everything_in_a_dag_gives_the_unit_kernel() {
        let g = Admg::parse(3, &[("x1", "x2"), ("x2", "x3")], &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_joint(&g, &mut rng);
        let q = p
            .fix_sequence(&[Vertex(2), Vertex(1), Vertex(0)])
            .unwrap();
        for &v in &q.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_kernels_stay_normalized() {
        let g = verma();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_joint(&g, &mut rng);
            let q = p.fix_kernel(Vertex(3)).unwrap();
            assert!(q.normalization_error() < 1e-12);
            let q2 = q.fix_kernel(Vertex(2)).unwrap();
            assert!(q2.normalization_error() < 1e-12);
        }
    }

    #[test]
    fn verma_fix_matches_g_formula() {
        // Fixing x3 divides by p(x3 | x1, x2); the margin over x4 given
        // the rest reproduces sum_x2 p(x4|x1,x2,x3) p(x2|x1).
        let g = verma();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_joint(&g, &mut rng);
        let q = p.fix_kernel(Vertex(2)).unwrap();
        let m123 = p.margin(VSet(0b0111));
        let m12 = p.margin(VSet(0b0011));
        let m1 = p.margin(VSet(0b0001));
        for mask in 0..16usize {
            let mut want = 0.0;
            let mut got = 0.0;
            for x2 in 0..2usize {
                let cell = (mask & !0b0010) | (x2 << 1);
                want += p.values[cell] / m123[cell & 0b0111] * m12[cell & 0b0011]
                    / m1[cell & 0b0001];
                got += q.values[cell];
            }
            // q(x4, x1 | x3) summed over x2 is p(x1) * g(x4; x1, x3).
            got /= m1[mask & 0b0001];
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_on_feasible_theta() {
        let graphs = [
            verma(),
            Admg::parse(
                4,
                &[("x2", "x4"), ("x2", "x1"), ("x3", "x1")],
                &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
            )
            .unwrap(),
            Admg::parse(3, &[("x1", "x2")], &[("x2", "x3")]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for g in graphs {
            let param = Parameterization::new(&g).unwrap();
            for _ in 0..10 {
                let theta = random_feasible_theta(&param, &mut rng);
                let joint = param.theta_to_joint(&theta).unwrap();
                let back = param.joint_to_theta(&joint).unwrap();
                for (a, b) in theta.values.iter().zip(&back.values) {
                    for (x, y) in a.iter().zip(b) {
                        assert!((x - y).abs() < 1e-10, "round trip drift: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn saturated_graph_inverts_any_positive_joint() {
        let g = Admg::parse(
            4,
            &[("x2", "x4"), ("x2", "x1"), ("x3", "x1")],
            &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
        )
        .unwrap();
        let param = Parameterization::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = random_joint(&g, &mut rng);
            let theta = param.joint_to_theta(&p).unwrap();
            let back = param.theta_to_joint(&theta).unwrap();
            for (a, b) in p.values.iter().zip(&back.values) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_joint_gives_uniform_theta() {
        let g = verma();
        let param = Parameterization::new(&g).unwrap();
        let p = KernelTable::new(g.clone(), vec![1.0 / 16.0; 16]);
        let theta = param.joint_to_theta(&p).unwrap();
        for (entry, vals) in param.catalog().entries.iter().zip(&theta.values) {
            let want = 0.5f64.powi(entry.head.len() as i32);
            for &v in vals {
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dag_theta_is_conditional_zero_probability() {
        let g = Admg::parse(3, &[("x1", "x2"), ("x2", "x3")], &[]).unwrap();
        let param = Parameterization::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // A DAG-factorizing joint built from random conditionals.
        let theta = random_feasible_theta(&param, &mut rng);
        let p = param.theta_to_joint(&theta).unwrap();
        let got = param.joint_to_theta(&p).unwrap();
        for (e, entry) in param.catalog().entries.iter().enumerate() {
            let v = entry.head.first().unwrap();
            let pa = g.parents_of(v);
            let m_pa = p.margin(pa);
            let m_vpa = p.margin(pa.insert(v));
            for rank in 0..(1usize << entry.tail.len()) {
                let base = mask_for_tail_rank(rank, entry.tail);
                let want = m_vpa[base & ((pa.insert(v)).0 as usize)] / m_pa[base & (pa.0 as usize)];
                assert!((got.get(e, rank) - want).abs() < 1e-12);
            }
        }
    }
}
