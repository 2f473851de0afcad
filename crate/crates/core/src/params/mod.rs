//! The binary Moebius parameterization of nested Markov models.
//!
//! A model over an ADMG carries one parameter per (recursive head, tail
//! assignment) pair: `theta_H(t) = q_C(X_H = 0 | x_T = t)`, the
//! probability that the head variables are all zero in the kernel
//! reached by fixing everything outside the intrinsic set `C`.
//!
//! Joint probabilities expand as signed sums over supersets `B` of the
//! zero set of an assignment, each term a product of head parameters over
//! the head partition of `B` (an inverse Moebius transform).
//!
//! Table index convention: dense tables are indexed by assignment
//! bitmask, bit `v` holding the value of vertex `v`. External row order
//! (CSV, JSON value lists) is lexicographic with the first vertex most
//! significant; `lex_rank`/`mask_of_lex_rank` convert.

mod kernel;
pub mod sample;
mod verify;

pub use kernel::mask_for_tail_rank;
pub use verify::{
    all_fix_orders, first_fix_order, verify_nested_factorization, verma_residual,
    FactorizationReport, Violation, ViolationKind,
};

use crate::graph::{head_partition, intrinsic_catalog, Admg, GraphError, IntrinsicCatalog, Reachable};
use crate::vset::{VSet, Vertex};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum ParamError {
    #[error("parameters are infeasible: p({assignment}) = {p}")]
    Infeasible { assignment: String, p: f64 },
    #[error("zero mass while fixing `{vertex}`: conditional undefined at {assignment}")]
    DivisionByZero { vertex: String, assignment: String },
    #[error("theta table has wrong shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Lexicographic row index of an assignment mask (vertex 0 most
/// significant).
#[inline]
pub fn lex_rank(mask: usize, n: usize) -> usize {
    let mut r = 0;
    for v in 0..n {
        r = (r << 1) | ((mask >> v) & 1);
    }
    let _ = n;
    r
}

/// Inverse of [`lex_rank`].
#[inline]
pub fn mask_of_lex_rank(rank: usize, n: usize) -> usize {
    let mut m = 0;
    for v in 0..n {
        if (rank >> (n - 1 - v)) & 1 == 1 {
            m |= 1 << v;
        }
    }
    m
}

/// Rank of the values a full assignment mask gives to `tail`, in
/// lexicographic order (smallest tail vertex most significant).
#[inline]
pub fn tail_rank(mask: usize, tail: VSet) -> usize {
    let mut r = 0;
    for v in tail.iter() {
        r = (r << 1) | ((mask >> v.0) & 1);
    }
    r
}

/// One signed term of the Moebius expansion of a single assignment.
#[derive(Clone, Debug)]
pub struct MoebiusTerm {
    pub sign: f64,
    /// `(catalog entry, tail rank)` per head in the partition of `B`.
    pub factors: Vec<(u16, u16)>,
}

/// The fully resolved expansion: for each assignment mask, its terms.
#[derive(Clone, Debug)]
pub struct MoebiusMap {
    pub terms: Vec<Vec<MoebiusTerm>>,
}

/// Parameter tables for one graph: per catalog entry, `2^|tail|` values
/// in tail-lexicographic order, each inside the open unit interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTable {
    pub values: Vec<Vec<f64>>,
}

impl ThetaTable {
    #[inline]
    pub fn get(&self, entry: usize, rank: usize) -> f64 {
        self.values[entry][rank]
    }
}

/// A dense kernel `q(x_V | x_W)` over all vertices of its graph.
///
/// The table covers every assignment of `V ∪ W`; for each context
/// assignment the values over `V` sum to one.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub graph: Admg,
    pub values: Vec<f64>,
}

impl KernelTable {
    /// A joint table (empty context) from mask-indexed values.
    pub fn new(graph: Admg, values: Vec<f64>) -> KernelTable {
        assert_eq!(values.len(), 1 << graph.n());
        KernelTable { graph, values }
    }

    /// Builds from rows in lexicographic order (as in CSV files).
    pub fn from_lex_rows(graph: Admg, rows: &[f64]) -> KernelTable {
        let n = graph.n();
        assert_eq!(rows.len(), 1 << n);
        let mut values = vec![0.0; rows.len()];
        for (rank, &p) in rows.iter().enumerate() {
            values[mask_of_lex_rank(rank, n)] = p;
        }
        KernelTable { graph, values }
    }

    /// Rows in lexicographic order.
    pub fn to_lex_rows(&self) -> Vec<f64> {
        let n = self.graph.n();
        (0..self.values.len()).map(|r| self.values[mask_of_lex_rank(r, n)]).collect()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Dense margin over the coordinates in `keep` (plus context, which
    /// is always kept): `out[m & keep_bits]` sums cells agreeing on
    /// `keep ∪ W`.
    pub fn margin(&self, keep: VSet) -> Vec<f64> {
        let keep_bits = (keep.union(self.graph.context()).0) as usize;
        let mut out = vec![0.0; self.values.len()];
        for (m, &v) in self.values.iter().enumerate() {
            out[m & keep_bits] += v;
        }
        out
    }

    /// Max over context assignments of `|sum_V q - 1|`.
    pub fn normalization_error(&self) -> f64 {
        let ctx_bits = self.graph.context().0 as usize;
        let mut sums: HashMap<usize, f64> = HashMap::new();
        for (m, &v) in self.values.iter().enumerate() {
            *sums.entry(m & ctx_bits).or_insert(0.0) += v;
        }
        sums.values().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Parses the joint/kernel CSV: header of vertex names plus a final
    /// `p` column, one row per assignment. Column order must match the
    /// graph's vertex order.
    pub fn from_csv(graph: Admg, text: &str) -> Result<KernelTable, ParamError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| ParamError::Shape("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let n = graph.n();
        if cols.len() != n + 1 || cols[n] != "p" {
            return Err(ParamError::Shape(format!(
                "header must be the {n} vertex names plus `p`"
            )));
        }
        for (i, c) in cols[..n].iter().enumerate() {
            if *c != graph.names()[i] {
                return Err(ParamError::Shape(format!(
                    "column {i} is `{c}`, expected `{}`",
                    graph.names()[i]
                )));
            }
        }
        let mut values = vec![f64::NAN; 1 << n];
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n + 1 {
                return Err(ParamError::Shape(format!("row {}: wrong arity", lineno + 2)));
            }
            let mut mask = 0usize;
            for (v, &f) in fields[..n].iter().enumerate() {
                match f {
                    "0" => {}
                    "1" => mask |= 1 << v,
                    other => {
                        return Err(ParamError::Shape(format!(
                            "row {}: `{other}` is not 0/1",
                            lineno + 2
                        )))
                    }
                }
            }
            values[mask] = fields[n]
                .parse::<f64>()
                .map_err(|e| ParamError::Shape(format!("row {}: bad p: {e}", lineno + 2)))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(ParamError::Shape("missing assignment rows".into()));
        }
        Ok(KernelTable::new(graph, values))
    }

    /// Writes the table with rows in lexicographic order.
    pub fn to_csv(&self) -> String {
        let n = self.graph.n();
        let mut out = String::new();
        out.push_str(&self.graph.names().join(","));
        out.push_str(",p\n");
        for rank in 0..self.values.len() {
            let mask = mask_of_lex_rank(rank, n);
            for v in 0..n {
                out.push_str(if (mask >> v) & 1 == 1 { "1," } else { "0," });
            }
            out.push_str(&format!("{}\n", self.values[mask]));
        }
        out
    }

    /// Renders an assignment mask as `name=bit` pairs for messages.
    pub fn render_assignment(&self, mask: usize, over: VSet) -> String {
        let parts: Vec<String> = over
            .iter()
            .map(|v| format!("{}={}", self.graph.name(v), (mask >> v.0) & 1))
            .collect();
        parts.join(",")
    }
}

/// Everything needed to evaluate the parameterization of one ADMG:
/// intrinsic catalog, head partitions of every vertex subset, resolved
/// Moebius terms, and the reachability table reused when inverting.
pub struct Parameterization {
    graph: Admg,
    catalog: IntrinsicCatalog,
    partitions: Vec<Vec<u16>>,
    moebius: MoebiusMap,
    reach: Reachable,
}

impl Parameterization {
    pub fn new(graph: &Admg) -> Result<Parameterization, GraphError> {
        if !graph.context().is_empty() {
            return Err(GraphError::NonEmptyContext(graph.render_set(graph.context())));
        }
        let n = graph.n();
        let catalog = intrinsic_catalog(graph)?;
        let mut partitions = Vec::with_capacity(1 << n);
        for b in 0..(1usize << n) {
            let part = head_partition(graph, &catalog, VSet(b as u32))?;
            partitions.push(part.into_iter().map(|i| i as u16).collect());
        }
        let moebius = build_moebius(graph, &catalog, &partitions);
        let reach = Reachable::explore(graph);
        Ok(Parameterization { graph: graph.clone(), catalog, partitions, moebius, reach })
    }

    pub fn graph(&self) -> &Admg {
        &self.graph
    }

    pub fn catalog(&self) -> &IntrinsicCatalog {
        &self.catalog
    }

    pub(crate) fn reach(&self) -> &Reachable {
        &self.reach
    }

    pub fn moebius(&self) -> &MoebiusMap {
        &self.moebius
    }

    /// Head partition of a vertex subset, as catalog entry indices.
    pub fn partition_of(&self, b: VSet) -> &[u16] {
        &self.partitions[b.0 as usize]
    }

    /// Number of free parameters (model dimension).
    pub fn param_count(&self) -> usize {
        self.catalog.param_count()
    }

    /// The deterministic flat parameter order: catalog entries by (head
    /// size, head indices), tail assignments lexicographic within each.
    pub fn param_index(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.param_count());
        for (e, entry) in self.catalog.entries.iter().enumerate() {
            for rank in 0..(1usize << entry.tail.len()) {
                out.push((e, rank));
            }
        }
        out
    }

    /// Parameters of the uniform joint: `theta_H = 2^{-|H|}` for every
    /// tail assignment. Interior-feasible in every model.
    pub fn theta_uniform(&self) -> ThetaTable {
        ThetaTable {
            values: self
                .catalog
                .entries
                .iter()
                .map(|e| vec![0.5f64.powi(e.head.len() as i32); 1 << e.tail.len()])
                .collect(),
        }
    }

    fn check_shape(&self, theta: &ThetaTable) -> Result<(), ParamError> {
        if theta.values.len() != self.catalog.len() {
            return Err(ParamError::Shape(format!(
                "{} entries, catalog has {}",
                theta.values.len(),
                self.catalog.len()
            )));
        }
        for (e, vals) in theta.values.iter().enumerate() {
            let want = 1usize << self.catalog.entries[e].tail.len();
            if vals.len() != want {
                return Err(ParamError::Shape(format!(
                    "entry {e} has {} values, expected {want}",
                    vals.len()
                )));
            }
        }
        Ok(())
    }

    /// Inverse Moebius transform: expands `theta` into the joint table.
    pub fn theta_to_joint(&self, theta: &ThetaTable) -> Result<KernelTable, ParamError> {
        self.check_shape(theta)?;
        let n = self.graph.n();
        let mut values = vec![0.0; 1 << n];
        for (mask, cell) in values.iter_mut().enumerate() {
            let mut p = 0.0;
            for term in &self.moebius.terms[mask] {
                let mut prod = term.sign;
                for &(e, r) in &term.factors {
                    prod *= theta.get(e as usize, r as usize);
                }
                p += prod;
            }
            if p < 0.0 {
                return Err(ParamError::Infeasible {
                    assignment: render_mask(&self.graph, mask),
                    p,
                });
            }
            *cell = p;
        }
        Ok(KernelTable::new(self.graph.clone(), values))
    }
}

fn render_mask(g: &Admg, mask: usize) -> String {
    let parts: Vec<String> =
        (0..g.n()).map(|v| format!("{}={}", g.name(Vertex(v as u8)), (mask >> v) & 1)).collect();
    parts.join(",")
}

fn build_moebius(
    graph: &Admg,
    catalog: &IntrinsicCatalog,
    partitions: &[Vec<u16>],
) -> MoebiusMap {
    let n = graph.n();
    let full = VSet::full(n);
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 0..(1usize << n) {
        let zeros = full.minus(VSet(mask as u32));
        let ones = VSet(mask as u32);
        let mut list = Vec::with_capacity(1 << ones.len());
        for extra in ones.subsets() {
            let b = zeros.union(extra);
            let sign = if extra.len() % 2 == 0 { 1.0 } else { -1.0 };
            let factors = partitions[b.0 as usize]
                .iter()
                .map(|&e| {
                    let entry = &catalog.entries[e as usize];
                    (e, tail_rank(mask, entry.tail) as u16)
                })
                .collect();
            list.push(MoebiusTerm { sign, factors });
        }
        terms.push(list);
    }
    MoebiusMap { terms }
}

/// Concurrent-read memo of parameterizations keyed by canonical graph
/// key; repeated fits of the same graph share one build.
#[derive(Default)]
pub struct MoebiusCache {
    map: Mutex<HashMap<Vec<u8>, Arc<Parameterization>>>,
}

impl MoebiusCache {
    pub fn new() -> MoebiusCache {
        MoebiusCache::default()
    }

    pub fn get(&self, graph: &Admg) -> Result<Arc<Parameterization>, GraphError> {
        let key = graph.canonical_key();
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(Parameterization::new(graph)?);
        self.map.lock().unwrap().insert(key, built.clone());
        Ok(built)
    }
}

// ---- theta JSON ----

#[derive(Serialize, Deserialize)]
struct ThetaEntryJson {
    head: Vec<String>,
    tail: Vec<String>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ThetaJson {
    graph: crate::graph::GraphJson,
    params: Vec<ThetaEntryJson>,
}

/// Clamp applied to externally supplied parameter values, keeping them
/// inside the open unit interval.
const THETA_CLAMP: f64 = 1e-9;

impl Parameterization {
    pub fn theta_to_json(&self, theta: &ThetaTable) -> String {
        let g = &self.graph;
        let entries = self
            .catalog
            .entries
            .iter()
            .zip(&theta.values)
            .map(|(e, vals)| ThetaEntryJson {
                head: e.head.iter().map(|v| g.name(v).to_string()).collect(),
                tail: e.tail.iter().map(|v| g.name(v).to_string()).collect(),
                values: vals.clone(),
            })
            .collect();
        serde_json::to_string(&ThetaJson { graph: (&self.graph).into(), params: entries })
            .expect("theta serialization")
    }

    /// Parses a theta table, matching entries by head set and clamping
    /// values away from {0, 1}.
    pub fn theta_from_json(&self, text: &str) -> Result<ThetaTable, ParamError> {
        let parsed: ThetaJson =
            serde_json::from_str(text).map_err(|e| ParamError::Shape(e.to_string()))?;
        let mut values: Vec<Option<Vec<f64>>> = vec![None; self.catalog.len()];
        for entry in &parsed.params {
            let head: VSet = entry
                .head
                .iter()
                .map(|name| self.graph.vertex(name))
                .collect::<Result<Vec<_>, _>>()
                .map_err(ParamError::Graph)?
                .into_iter()
                .collect();
            let idx = self
                .catalog
                .entry_for_head(head)
                .ok_or_else(|| ParamError::Shape(format!("unknown head {:?}", entry.head)))?;
            let want = 1usize << self.catalog.entries[idx].tail.len();
            if entry.values.len() != want {
                return Err(ParamError::Shape(format!(
                    "head {:?} expects {want} values, got {}",
                    entry.head,
                    entry.values.len()
                )));
            }
            values[idx] = Some(
                entry
                    .values
                    .iter()
                    .map(|&v| v.clamp(THETA_CLAMP, 1.0 - THETA_CLAMP))
                    .collect(),
            );
        }
        let values: Vec<Vec<f64>> = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    ParamError::Shape(format!(
                        "missing head {}",
                        self.graph.render_set(self.catalog.entries[i].head)
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(ThetaTable { values })
    }
}
