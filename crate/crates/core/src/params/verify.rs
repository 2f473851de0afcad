//! Numeric verification of the nested factorization.

use super::{KernelTable, ParamError};
use crate::graph::{Admg, Reachable};
use crate::vset::{VSet, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Two valid fixing orders for the same reachable set disagreed.
    OrderMismatch,
    /// The reached kernel is not the product of its district factors.
    FactorMismatch,
    /// A district factor depends on coordinates outside the district
    /// and its parents.
    FactorDependence,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub set: VSet,
    pub kind: ViolationKind,
    pub deviation: f64,
}

/// Outcome of checking every reachable set.
#[derive(Clone, Debug, Default)]
pub struct FactorizationReport {
    pub violations: Vec<Violation>,
    pub max_order_deviation: f64,
    pub max_factor_deviation: f64,
}

impl FactorizationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Enumerates every valid fixing order of `to_fix`, in lexicographic
/// order.
pub fn all_fix_orders(g: &Admg, to_fix: VSet) -> Vec<Vec<Vertex>> {
    fn go(g: &Admg, remaining: VSet, prefix: &mut Vec<Vertex>, out: &mut Vec<Vec<Vertex>>) {
        if remaining.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for v in remaining.inter(g.fixable()).iter() {
            let next = g.fix(v).expect("fixable");
            prefix.push(v);
            go(&next, remaining.remove(v), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(g, to_fix, &mut Vec::new(), &mut out);
    out
}

/// First valid fixing order of `to_fix`, if one exists.
pub fn first_fix_order(g: &Admg, to_fix: VSet) -> Option<Vec<Vertex>> {
    fn go(g: &Admg, remaining: VSet, prefix: &mut Vec<Vertex>) -> bool {
        if remaining.is_empty() {
            return true;
        }
        for v in remaining.inter(g.fixable()).iter() {
            let next = g.fix(v).expect("fixable");
            prefix.push(v);
            if go(&next, remaining.remove(v), prefix) {
                return true;
            }
            prefix.pop();
        }
        false
    }
    let mut prefix = Vec::new();
    if go(g, to_fix, &mut prefix) {
        Some(prefix)
    } else {
        None
    }
}

/// Checks that `p` obeys the nested factorization of `g` within `tol`:
/// for every reachable set, (a) every valid fixing order yields the same
/// kernel, and (b) the reached kernel equals the product of its own
/// district factors, each depending only on its district and the
/// district's parents.
pub fn verify_nested_factorization(
    g: &Admg,
    p: &KernelTable,
    tol: f64,
) -> Result<FactorizationReport, ParamError> {
    let reach = Reachable::explore(g);
    let full = g.random();
    let mut report = FactorizationReport::default();
    for (&set, entry) in &reach.entries {
        let to_fix = full.minus(set);
        let orders = all_fix_orders(g, to_fix);
        debug_assert!(!orders.is_empty());
        let reference = p.fix_sequence(&orders[0])?;
        let mut order_dev: f64 = 0.0;
        for order in &orders[1..] {
            let other = p.fix_sequence(order)?;
            for (a, b) in reference.values.iter().zip(&other.values) {
                order_dev = order_dev.max((a - b).abs());
            }
        }
        report.max_order_deviation = report.max_order_deviation.max(order_dev);
        if order_dev > tol {
            report.violations.push(Violation {
                set,
                kind: ViolationKind::OrderMismatch,
                deviation: order_dev,
            });
        }

        let districts = entry.graph.districts();
        if !set.is_empty() {
            let mut product = vec![1.0; reference.values.len()];
            let mut factor_dev: f64 = 0.0;
            for &d in &districts {
                let rest = set.minus(d);
                let order = first_fix_order(&entry.graph, rest)
                    .expect("districts of a reachable graph are reachable");
                let factor = reference.fix_sequence(&order)?;
                // The factor may only depend on the district, its
                // parents, and nothing else.
                let scope =
                    (d.union(entry.graph.parents_of_set(d)).0) as usize;
                for m in 0..factor.values.len() {
                    let base = m & scope;
                    let dev = (factor.values[m] - factor.values[base]).abs();
                    if dev > tol {
                        factor_dev = factor_dev.max(dev);
                    }
                }
                for (acc, v) in product.iter_mut().zip(&factor.values) {
                    *acc *= v;
                }
            }
            if factor_dev > 0.0 {
                report.violations.push(Violation {
                    set,
                    kind: ViolationKind::FactorDependence,
                    deviation: factor_dev,
                });
                report.max_factor_deviation = report.max_factor_deviation.max(factor_dev);
            }
            let mut prod_dev: f64 = 0.0;
            for (a, b) in product.iter().zip(&reference.values) {
                prod_dev = prod_dev.max((a - b).abs());
            }
            report.max_factor_deviation = report.max_factor_deviation.max(prod_dev);
            if prod_dev > tol {
                report.violations.push(Violation {
                    set,
                    kind: ViolationKind::FactorMismatch,
                    deviation: prod_dev,
                });
            }
        }
    }
    Ok(report)
}

/// Largest deviation from the four-variable post-truncation independence:
/// with `g(x4; x1, x3) = sum_x2 p(x4|x1,x2,x3) p(x2|x1)`, returns
/// `max |g(x4; x1, x3) - g(x4; x1', x3)|`.
pub fn verma_residual(p: &KernelTable) -> f64 {
    assert_eq!(p.n(), 4, "verma residual is defined over four variables");
    assert!(p.graph.context().is_empty());
    let m123 = p.margin(VSet(0b0111));
    let m12 = p.margin(VSet(0b0011));
    let m1 = p.margin(VSet(0b0001));
    let g = |x1: usize, x3: usize, x4: usize| -> f64 {
        let mut total = 0.0;
        for x2 in 0..2usize {
            let cell = x1 | (x2 << 1) | (x3 << 2) | (x4 << 3);
            total +=
                p.values[cell] / m123[cell & 0b0111] * m12[cell & 0b0011] / m1[cell & 0b0001];
        }
        total
    };
    let mut worst: f64 = 0.0;
    for x3 in 0..2 {
        for x4 in 0..2 {
            worst = worst.max((g(0, x3, x4) - g(1, x3, x4)).abs());
        }
    }
    worst
}
