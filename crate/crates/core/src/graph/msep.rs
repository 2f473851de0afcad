//! m-separation by reachability over edge-mark states.

use super::Admg;
use crate::vset::{VSet, Vertex};

/// True when every path between `x` and `y` is blocked given `z`:
/// some non-collider on the path lies in `z`, or some collider is not an
/// ancestor of `z`.
///
/// On DAGs this is d-separation.
pub fn m_separated(g: &Admg, x: VSet, y: VSet, z: VSet) -> bool {
    debug_assert!(x.inter(y).is_empty() && x.inter(z).is_empty() && y.inter(z).is_empty());
    let an_z = g.ancestors_of_set(z);
    let n = g.n();
    // State per vertex: arrived with an arrowhead at it, or with a tail.
    // visited[v][0] = tail arrival, visited[v][1] = head arrival.
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(Vertex, bool)> = Vec::new();

    let push = |stack: &mut Vec<(Vertex, bool)>,
                    visited: &mut Vec<[bool; 2]>,
                    v: Vertex,
                    head: bool|
     -> bool {
        // Returns true if we reached y.
        if y.contains(v) {
            return true;
        }
        if !visited[v.index()][head as usize] {
            visited[v.index()][head as usize] = true;
            stack.push((v, head));
        }
        false
    };

    // Leave each source along any edge; the mark at the source is
    // unconstrained.
    for s in x.iter() {
        for c in g.children_of(s).iter() {
            if push(&mut stack, &mut visited, c, true) {
                return false;
            }
        }
        for p in g.parents_of(s).iter() {
            if push(&mut stack, &mut visited, p, false) {
                return false;
            }
        }
        for b in g.spouses_of(s).iter() {
            if push(&mut stack, &mut visited, b, true) {
                return false;
            }
        }
    }

    while let Some((v, arrived_head)) = stack.pop() {
        // Departures with a tail at v (v -> c): v is a non-collider on
        // this transition regardless of arrival mark.
        if !z.contains(v) {
            for c in g.children_of(v).iter() {
                if push(&mut stack, &mut visited, c, true) {
                    return false;
                }
            }
        }
        // Departures with a head at v (v <- p or v <-> b): collider iff
        // we also arrived with a head.
        let passable = if arrived_head { an_z.contains(v) } else { !z.contains(v) };
        if passable {
            for p in g.parents_of(v).iter() {
                if push(&mut stack, &mut visited, p, false) {
                    return false;
                }
            }
            for b in g.spouses_of(v).iter() {
                if push(&mut stack, &mut visited, b, true) {
                    return false;
                }
            }
        }
    }
    true
}
