//! Reachable sets, intrinsic sets, recursive heads and tails, and the
//! head partition used by the Moebius parameterization.

use super::{Admg, GraphError};
use crate::vset::{VSet, Vertex};
use std::collections::BTreeMap;

/// One reachable random set with a witnessing fixing order and the
/// (order-independent) graph it reaches.
#[derive(Clone, Debug)]
pub struct ReachEntry {
    /// Lexicographically first valid order fixing `V \ set`.
    pub witness: Vec<Vertex>,
    pub graph: Admg,
}

/// All reachable sets of an ADMG, keyed by the surviving random set.
#[derive(Clone, Debug)]
pub struct Reachable {
    pub entries: BTreeMap<VSet, ReachEntry>,
}

impl Reachable {
    /// Depth-first exploration over fixable choices, memoized on the
    /// reached vertex set. Trying vertices in ascending order makes the
    /// recorded witness the lexicographically first valid fixing order
    /// for each set.
    pub fn explore(g: &Admg) -> Reachable {
        let mut entries = BTreeMap::new();
        let mut stack = vec![(g.clone(), Vec::new())];
        entries.insert(
            g.random(),
            ReachEntry { witness: Vec::new(), graph: g.clone() },
        );
        while let Some((cur, order)) = stack.pop() {
            // Descending push order so the smallest vertex is expanded
            // first (the stack reverses it).
            let fixable: Vec<Vertex> = cur.fixable().iter().collect();
            for &f in fixable.iter().rev() {
                let next = cur.fix(f).expect("fixable vertex must fix");
                match entries.entry(next.random()) {
                    std::collections::btree_map::Entry::Vacant(slot) => {
                        let mut w = order.clone();
                        w.push(f);
                        slot.insert(ReachEntry { witness: w.clone(), graph: next.clone() });
                        stack.push((next, w));
                    }
                    std::collections::btree_map::Entry::Occupied(known) => {
                        // Fixing-order invariance of the reached graph.
                        debug_assert!(
                            next == known.get().graph,
                            "reached CADMG depends on fixing order"
                        );
                    }
                }
            }
        }
        Reachable { entries }
    }

    pub fn sets(&self) -> impl Iterator<Item = VSet> + '_ {
        self.entries.keys().copied()
    }

    pub fn contains(&self, s: VSet) -> bool {
        self.entries.contains_key(&s)
    }
}

/// One intrinsic set with its recursive head and tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    /// The intrinsic set `C`: a district of a reachable subgraph.
    pub set: VSet,
    /// Recursive head: members of `C` childless in the induced subgraph.
    pub head: VSet,
    /// Tail: `(C \ head) ∪ pa(C)`.
    pub tail: VSet,
}

/// Every intrinsic set of an ADMG, in the deterministic order used for
/// parameter enumeration: by head size, then head index tuple.
#[derive(Clone, Debug)]
pub struct IntrinsicCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl IntrinsicCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry whose recursive head is exactly `head`.
    pub fn entry_for_head(&self, head: VSet) -> Option<usize> {
        self.entries.iter().position(|e| e.head == head)
    }

    /// Total parameter count: one per (head, tail assignment) pair.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| 1usize << e.tail.len()).sum()
    }
}

/// Builds the intrinsic catalog of an ADMG (context must be empty).
///
/// Heads and tails are computed in the original graph: edges inside an
/// intrinsic set and edges into its members are never deleted by the
/// fixings that reach it.
pub fn intrinsic_catalog(g: &Admg) -> Result<IntrinsicCatalog, GraphError> {
    if !g.context().is_empty() {
        return Err(GraphError::NonEmptyContext(g.render_set(g.context())));
    }
    let reach = Reachable::explore(g);
    let mut seen = std::collections::BTreeSet::new();
    let mut entries = Vec::new();
    for entry in reach.entries.values() {
        for district in entry.graph.districts() {
            if seen.insert(district) {
                let head: VSet = district
                    .iter()
                    .filter(|&v| g.children_of(v).inter(district).is_empty())
                    .collect();
                let tail = district.minus(head).union(g.parents_of_set(district)).minus(head);
                entries.push(CatalogEntry { set: district, head, tail });
            }
        }
    }
    entries.sort_by(|a, b| {
        (a.head.len(), a.head.sorted_indices()).cmp(&(b.head.len(), b.head.sorted_indices()))
    });
    // Heads are in bijection with intrinsic sets.
    for w in entries.windows(2) {
        if w[0].head == w[1].head {
            return Err(GraphError::HeadCollision(g.render_set(w[0].head)));
        }
    }
    Ok(IntrinsicCatalog { entries })
}

/// Partitions `b` into recursive heads by peeling maximal heads.
///
/// A head `H1` precedes `H2` when the intrinsic set of `H1` is contained
/// in that of `H2`; each round removes all heads within `b` maximal under
/// that order. Returns catalog entry indices.
pub fn head_partition(
    g: &Admg,
    catalog: &IntrinsicCatalog,
    b: VSet,
) -> Result<Vec<usize>, GraphError> {
    let mut out = Vec::new();
    let mut rest = b;
    while !rest.is_empty() {
        let candidates: Vec<usize> = catalog
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.head.is_subset_of(rest))
            .map(|(i, _)| i)
            .collect();
        let maximal: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| {
                !candidates.iter().any(|&j| {
                    j != i
                        && catalog.entries[i].set.is_subset_of(catalog.entries[j].set)
                        && catalog.entries[i].set != catalog.entries[j].set
                })
            })
            .collect();
        if maximal.is_empty() {
            return Err(GraphError::PartitionFailure(g.render_set(rest)));
        }
        let mut removed = VSet::EMPTY;
        for &i in &maximal {
            let h = catalog.entries[i].head;
            if !removed.inter(h).is_empty() {
                // Maximal heads overlap: not a partition.
                return Err(GraphError::PartitionFailure(g.render_set(rest)));
            }
            removed = removed.union(h);
            out.push(i);
        }
        rest = rest.minus(removed);
    }
    out.sort_unstable();
    Ok(out)
}
