//! Acyclic directed mixed graphs (ADMGs) and conditional ADMGs.
//!
//! A graph carries two disjoint vertex classes: *random* vertices `V` and
//! *context* vertices `W`. Context vertices have no parents and no
//! spouses; they arise from the fixing operation, which moves a random
//! vertex into the context and deletes every edge pointing into it.
//!
//! Graphs are immutable values once built: the structural operations
//! (`fix`, `latent_projection`, ...) return new graphs.

mod io;
mod msep;
mod project;
mod reach;

pub use io::GraphJson;
pub use msep::m_separated;
pub use project::latent_projection;
pub use reach::{head_partition, intrinsic_catalog, CatalogEntry, IntrinsicCatalog, Reachable};

use crate::vset::{VSet, Vertex, MAX_VERTICES};
use std::sync::Arc;
use thiserror::Error;

/// Errors raised while building or transforming graphs.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum GraphError {
    #[error("too many vertices: {0} (limit {MAX_VERTICES})")]
    TooManyVertices(usize),
    #[error("duplicate vertex name `{0}`")]
    DuplicateName(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self loop at `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),
    #[error("edge {0} -> {1} would create a directed cycle")]
    Cycle(String, String),
    #[error("context vertex `{0}` may not have parents or spouses")]
    ContextEdge(String),
    #[error("vertex `{0}` is not fixable")]
    NotFixable(String),
    #[error("head partition failed: no head covers {0}")]
    PartitionFailure(String),
    #[error("two intrinsic sets share the recursive head {0}")]
    HeadCollision(String),
    #[error("operation requires an ADMG with empty context, found context {0}")]
    NonEmptyContext(String),
}

/// An acyclic directed mixed graph, possibly conditional.
#[derive(Clone, PartialEq)]
pub struct Admg {
    names: Arc<[String]>,
    random: VSet,
    context: VSet,
    parents: Vec<VSet>,
    children: Vec<VSet>,
    spouses: Vec<VSet>,
}

impl Admg {
    /// An edgeless graph whose vertices are all random, in the given order.
    pub fn new<I, S>(names: I) -> Result<Admg, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let n = names.len();
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(GraphError::DuplicateName(a.clone()));
            }
        }
        Ok(Admg {
            names: names.into(),
            random: VSet::full(n),
            context: VSet::EMPTY,
            parents: vec![VSet::EMPTY; n],
            children: vec![VSet::EMPTY; n],
            spouses: vec![VSet::EMPTY; n],
        })
    }

    /// Convenience constructor: vertices `x1..xn`, edges by name.
    pub fn parse(
        n: usize,
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Admg, GraphError> {
        let mut g = Admg::new((1..=n).map(|i| format!("x{i}")))?;
        for &(a, b) in directed {
            let (a, b) = (g.vertex(a)?, g.vertex(b)?);
            g.add_directed(a, b)?;
        }
        for &(a, b) in bidirected {
            let (a, b) = (g.vertex(a)?, g.vertex(b)?);
            g.add_bidirected(a, b)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: Vertex) -> &str {
        &self.names[v.index()]
    }

    pub fn vertex(&self, name: &str) -> Result<Vertex, GraphError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| Vertex(i as u8))
            .ok_or_else(|| GraphError::UnknownVertex(name.to_string()))
    }

    /// Random vertices `V`.
    pub fn random(&self) -> VSet {
        self.random
    }

    /// Context vertices `W`.
    pub fn context(&self) -> VSet {
        self.context
    }

    pub fn parents_of(&self, v: Vertex) -> VSet {
        self.parents[v.index()]
    }

    pub fn children_of(&self, v: Vertex) -> VSet {
        self.children[v.index()]
    }

    pub fn spouses_of(&self, v: Vertex) -> VSet {
        self.spouses[v.index()]
    }

    /// Union of parents over a set (members of the set may be included).
    pub fn parents_of_set(&self, s: VSet) -> VSet {
        s.iter().fold(VSet::EMPTY, |acc, v| acc.union(self.parents[v.index()]))
    }

    pub fn is_dag(&self) -> bool {
        self.spouses.iter().all(|s| s.is_empty())
    }

    pub fn has_directed(&self, tail: Vertex, head: Vertex) -> bool {
        self.children[tail.index()].contains(head)
    }

    pub fn has_bidirected(&self, a: Vertex, b: Vertex) -> bool {
        self.spouses[a.index()].contains(b)
    }

    /// Directed edges as `(tail, head)` pairs, sorted.
    pub fn directed_edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::new();
        for a in 0..self.n() {
            for b in self.children[a].iter() {
                out.push((Vertex(a as u8), b));
            }
        }
        out
    }

    /// Bidirected edges as `(a, b)` with `a < b`, sorted.
    pub fn bidirected_edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::new();
        for a in 0..self.n() {
            for b in self.spouses[a].iter() {
                if (a as u8) < b.0 {
                    out.push((Vertex(a as u8), b));
                }
            }
        }
        out
    }

    pub fn add_directed(&mut self, tail: Vertex, head: Vertex) -> Result<(), GraphError> {
        if tail == head {
            return Err(GraphError::SelfLoop(self.name(tail).into()));
        }
        if self.context.contains(head) {
            return Err(GraphError::ContextEdge(self.name(head).into()));
        }
        if self.has_directed(tail, head) {
            return Err(GraphError::DuplicateEdge(
                self.name(tail).into(),
                self.name(head).into(),
            ));
        }
        // Cycle iff tail is already reachable from head.
        if self.descendants_of(head).contains(tail) {
            return Err(GraphError::Cycle(self.name(tail).into(), self.name(head).into()));
        }
        self.children[tail.index()] = self.children[tail.index()].insert(head);
        self.parents[head.index()] = self.parents[head.index()].insert(tail);
        Ok(())
    }

    pub fn add_bidirected(&mut self, a: Vertex, b: Vertex) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(self.name(a).into()));
        }
        for v in [a, b] {
            if self.context.contains(v) {
                return Err(GraphError::ContextEdge(self.name(v).into()));
            }
        }
        if self.has_bidirected(a, b) {
            return Err(GraphError::DuplicateEdge(self.name(a).into(), self.name(b).into()));
        }
        self.spouses[a.index()] = self.spouses[a.index()].insert(b);
        self.spouses[b.index()] = self.spouses[b.index()].insert(a);
        Ok(())
    }

    pub fn remove_directed(&mut self, tail: Vertex, head: Vertex) {
        self.children[tail.index()] = self.children[tail.index()].remove(head);
        self.parents[head.index()] = self.parents[head.index()].remove(tail);
    }

    pub fn remove_bidirected(&mut self, a: Vertex, b: Vertex) {
        self.spouses[a.index()] = self.spouses[a.index()].remove(b);
        self.spouses[b.index()] = self.spouses[b.index()].remove(a);
    }

    /// Descendants of `v` via directed paths, including `v`.
    pub fn descendants_of(&self, v: Vertex) -> VSet {
        let mut seen = VSet::singleton(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for c in self.children[u.index()].iter() {
                if !seen.contains(c) {
                    seen = seen.insert(c);
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Ancestors of every vertex in `s` via directed paths, including `s`.
    pub fn ancestors_of_set(&self, s: VSet) -> VSet {
        let mut seen = s;
        let mut stack: Vec<Vertex> = s.iter().collect();
        while let Some(u) = stack.pop() {
            for p in self.parents[u.index()].iter() {
                if !seen.contains(p) {
                    seen = seen.insert(p);
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// The district (c-component) of `v`: its bidirected-connected
    /// component among random vertices. `v` must be random.
    pub fn district_of(&self, v: Vertex) -> VSet {
        debug_assert!(self.random.contains(v));
        let mut seen = VSet::singleton(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for s in self.spouses[u.index()].iter() {
                if self.random.contains(s) && !seen.contains(s) {
                    seen = seen.insert(s);
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// District of `v` restricted to the induced subgraph over `within`.
    pub fn district_of_in(&self, v: Vertex, within: VSet) -> VSet {
        let scope = within.inter(self.random);
        debug_assert!(scope.contains(v));
        let mut seen = VSet::singleton(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for s in self.spouses[u.index()].inter(scope).iter() {
                if !seen.contains(s) {
                    seen = seen.insert(s);
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// All districts, a partition of the random vertices, ordered by
    /// smallest member.
    pub fn districts(&self) -> Vec<VSet> {
        let mut remaining = self.random;
        let mut out = Vec::new();
        while let Some(v) = remaining.first() {
            let d = self.district_of(v);
            out.push(d);
            remaining = remaining.minus(d);
        }
        out
    }

    /// Fixable vertices: random `v` with `dis(v) ∩ de(v) = {v}`.
    pub fn fixable(&self) -> VSet {
        self.random
            .iter()
            .filter(|&v| self.district_of(v).inter(self.descendants_of(v)) == VSet::singleton(v))
            .collect()
    }

    /// The graph after fixing `r`: `r` becomes a context vertex and every
    /// edge with an arrowhead at `r` is deleted.
    pub fn fix(&self, r: Vertex) -> Result<Admg, GraphError> {
        if !self.fixable().contains(r) {
            return Err(GraphError::NotFixable(self.name(r).into()));
        }
        let mut g = self.clone();
        for p in g.parents[r.index()].iter() {
            g.children[p.index()] = g.children[p.index()].remove(r);
        }
        g.parents[r.index()] = VSet::EMPTY;
        for s in g.spouses[r.index()].iter() {
            g.spouses[s.index()] = g.spouses[s.index()].remove(r);
        }
        g.spouses[r.index()] = VSet::EMPTY;
        g.random = g.random.remove(r);
        g.context = g.context.insert(r);
        Ok(g)
    }

    /// Markov blanket used by the kernel fixing operation: with
    /// `A = an(dis(r))`, this is `(dis_A(r) \ {r}) ∪ pa(dis_A(r))`.
    pub fn markov_blanket_for_fix(&self, r: Vertex) -> VSet {
        let anc = self.ancestors_of_set(self.district_of(r));
        let dis_a = self.district_of_in(r, anc);
        dis_a.remove(r).union(self.parents_of_set(dis_a)).minus(VSet::singleton(r))
    }

    /// A topological order of the directed part (context first among ties
    /// is not guaranteed; ties broken by index).
    pub fn topological_order(&self) -> Vec<Vertex> {
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut out = Vec::with_capacity(n);
        // Pop the smallest index for determinism.
        while !ready.is_empty() {
            let i = ready.iter().enumerate().min_by_key(|(_, &v)| v).unwrap().0;
            let v = ready.swap_remove(i);
            out.push(Vertex(v as u8));
            for c in self.children[v].iter() {
                indeg[c.index()] -= 1;
                if indeg[c.index()] == 0 {
                    ready.push(c.index());
                }
            }
        }
        debug_assert_eq!(out.len(), n);
        out
    }

    /// Structural cache key: injective over graphs sharing the same
    /// labeled vertex order. Layout: `[n][|W|][W ids..][|directed|]
    /// [(tail, head)..][|bidirected|][(a, b)..]`, all lists sorted.
    pub fn canonical_key(&self) -> Vec<u8> {
        let mut key = Vec::with_capacity(4 + 2 * self.n() * self.n());
        key.push(self.n() as u8);
        let ctx = self.context.sorted_indices();
        key.push(ctx.len() as u8);
        key.extend_from_slice(&ctx);
        let dir = self.directed_edges();
        key.push(dir.len() as u8);
        for (a, b) in dir {
            key.push(a.0);
            key.push(b.0);
        }
        let bi = self.bidirected_edges();
        key.push(bi.len() as u8);
        for (a, b) in bi {
            key.push(a.0);
            key.push(b.0);
        }
        key
    }

    /// Hex rendering of [`Admg::canonical_key`], for reports and CSV.
    pub fn key_hex(&self) -> String {
        self.canonical_key().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates the CADMG conditions: acyclic directed part, and no
    /// parents or spouses on context vertices.
    pub fn validate(&self) -> Result<(), GraphError> {
        for w in self.context.iter() {
            if !self.parents[w.index()].is_empty() || !self.spouses[w.index()].is_empty() {
                return Err(GraphError::ContextEdge(self.name(w).into()));
            }
        }
        // Acyclicity: topological_order covers all vertices only for DAGs.
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for c in self.children[v].iter() {
                indeg[c.index()] -= 1;
                if indeg[c.index()] == 0 {
                    ready.push(c.index());
                }
            }
        }
        if seen != n {
            return Err(GraphError::Cycle("?".into(), "?".into()));
        }
        Ok(())
    }

    /// Render a vertex set as names, for error messages.
    pub fn render_set(&self, s: VSet) -> String {
        let names: Vec<&str> = s.iter().map(|v| self.name(v)).collect();
        format!("{{{}}}", names.join(","))
    }
}

impl std::fmt::Debug for Admg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dir: Vec<String> = self
            .directed_edges()
            .iter()
            .map(|&(a, b)| format!("{}->{}", self.name(a), self.name(b)))
            .collect();
        let bi: Vec<String> = self
            .bidirected_edges()
            .iter()
            .map(|&(a, b)| format!("{}<->{}", self.name(a), self.name(b)))
            .collect();
        write!(
            f,
            "Admg(V={}, W={}, {}; {})",
            self.render_set(self.random),
            self.render_set(self.context),
            dir.join(" "),
            bi.join(" ")
        )
    }
}
