//! Latent projection of a DAG onto an observed margin.

use super::{Admg, GraphError};
use crate::vset::{VSet, Vertex};

/// Projects a DAG onto `observed`, keeping vertex names and relative
/// order. The result has `a -> b` when some directed path runs from `a`
/// to `b` through latent vertices only, and `a <-> b` when some latent
/// source reaches both `a` and `b` through latent-only directed paths.
pub fn latent_projection(dag: &Admg, observed: VSet) -> Result<Admg, GraphError> {
    debug_assert!(dag.is_dag(), "latent projection expects a DAG");
    let latent = dag.random().union(dag.context()).minus(observed);
    let obs_list: Vec<Vertex> = observed.iter().collect();
    let mut out = Admg::new(obs_list.iter().map(|&v| dag.name(v).to_string()))?;
    let reindex = |v: Vertex| -> Vertex {
        Vertex(obs_list.iter().position(|&u| u == v).unwrap() as u8)
    };

    // Observed vertices reachable from `start`'s children through latent
    // intermediates only.
    let reach_obs = |start: Vertex| -> VSet {
        let mut seen_latent = VSet::EMPTY;
        let mut found = VSet::EMPTY;
        let mut stack: Vec<Vertex> = dag.children_of(start).iter().collect();
        while let Some(u) = stack.pop() {
            if observed.contains(u) {
                found = found.insert(u);
            } else if !seen_latent.contains(u) {
                seen_latent = seen_latent.insert(u);
                for c in dag.children_of(u).iter() {
                    stack.push(c);
                }
            }
        }
        found
    };

    for a in observed.iter() {
        for b in reach_obs(a).iter() {
            out.add_directed(reindex(a), reindex(b))?;
        }
    }
    for l in latent.iter() {
        let targets = reach_obs(l);
        let ts: Vec<Vertex> = targets.iter().collect();
        for (i, &a) in ts.iter().enumerate() {
            for &b in &ts[i + 1..] {
                let (ra, rb) = (reindex(a), reindex(b));
                if !out.has_bidirected(ra, rb) {
                    out.add_bidirected(ra, rb)?;
                }
            }
        }
    }
    Ok(out)
}
