//! BIC-scored structure learning: greedy local search with a tabu list
//! and plateau traversal.
//!
//! Without a usable theory of model equivalence the search must walk
//! across score plateaus: graphs tied at the best score queue up for
//! expansion, expanded graphs become tabu, and any strict improvement
//! clears both and jumps. The returned plateau set is read as the
//! learned equivalence class.

use crate::fit::{bic, q_fit, Dataset, FitConfig, FitError};
use crate::graph::{Admg, GraphJson};
use crate::params::MoebiusCache;
use crate::vset::Vertex;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{HashMap, HashSet, VecDeque};

/// Single-edge moves over ADMGs. Conversion moves let the search trade a
/// directed explanation for a confounded one without passing through a
/// worse-scoring graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    AddDirected(Vertex, Vertex),
    RemoveDirected(Vertex, Vertex),
    ReverseDirected(Vertex, Vertex),
    AddBidirected(Vertex, Vertex),
    RemoveBidirected(Vertex, Vertex),
    DirectedToBidirected(Vertex, Vertex),
    BidirectedToDirected(Vertex, Vertex),
}

/// Every single-edge move that yields a valid ADMG, in deterministic
/// order: move kind as declared above, then endpoint indices.
pub fn neighbors(g: &Admg) -> Vec<(Move, Admg)> {
    let n = g.n() as u8;
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b || g.has_directed(Vertex(a), Vertex(b)) {
                continue;
            }
            let mut q = g.clone();
            if q.add_directed(Vertex(a), Vertex(b)).is_ok() {
                out.push((Move::AddDirected(Vertex(a), Vertex(b)), q));
            }
        }
    }
    for (a, b) in g.directed_edges() {
        let mut q = g.clone();
        q.remove_directed(a, b);
        out.push((Move::RemoveDirected(a, b), q));
    }
    for (a, b) in g.directed_edges() {
        let mut q = g.clone();
        q.remove_directed(a, b);
        if q.add_directed(b, a).is_ok() {
            out.push((Move::ReverseDirected(a, b), q));
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if g.has_bidirected(Vertex(a), Vertex(b)) {
                continue;
            }
            let mut q = g.clone();
            if q.add_bidirected(Vertex(a), Vertex(b)).is_ok() {
                out.push((Move::AddBidirected(Vertex(a), Vertex(b)), q));
            }
        }
    }
    for (a, b) in g.bidirected_edges() {
        let mut q = g.clone();
        q.remove_bidirected(a, b);
        out.push((Move::RemoveBidirected(a, b), q));
    }
    for (a, b) in g.directed_edges() {
        if g.has_bidirected(a, b) {
            continue;
        }
        let mut q = g.clone();
        q.remove_directed(a, b);
        q.add_bidirected(a, b).expect("duplicate checked above");
        out.push((Move::DirectedToBidirected(a, b), q));
    }
    for (a, b) in g.bidirected_edges() {
        for (t, h) in [(a, b), (b, a)] {
            if g.has_directed(t, h) {
                continue;
            }
            let mut q = g.clone();
            q.remove_bidirected(a, b);
            if q.add_directed(t, h).is_ok() {
                out.push((Move::BidirectedToDirected(t, h), q));
            }
        }
    }
    out
}

/// Fit memo: canonical key -> (loglik, bic). Concurrent readers are
/// fine; racing writers store identical values.
#[derive(Default)]
pub struct ScoreCache {
    map: std::sync::RwLock<HashMap<Vec<u8>, (f64, f64)>>,
}

impl ScoreCache {
    pub fn new() -> ScoreCache {
        ScoreCache::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Memoized fit of one graph. A cache hit never refits.
pub fn score_graph(
    g: &Admg,
    data: &Dataset,
    cache: &ScoreCache,
    moebius: &MoebiusCache,
    cfg: &FitConfig,
) -> Result<(f64, f64), FitError> {
    let key = g.canonical_key();
    if let Some(&hit) = cache.map.read().unwrap().get(&key) {
        return Ok(hit);
    }
    let param = moebius.get(g).map_err(crate::params::ParamError::from)?;
    let fit = q_fit(&param, data, cfg)?;
    let scored = (fit.loglik, bic(fit.loglik, param.param_count(), data.total()));
    cache.map.write().unwrap().insert(key, scored);
    Ok(scored)
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub start: Option<Admg>,
    pub max_expansions: usize,
    /// Scores within this of the best are plateau members.
    pub plateau_tol: f64,
    pub fit: FitConfig,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            start: None,
            max_expansions: 20_000,
            plateau_tol: 1e-6,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Serialize, Clone, Debug)]
pub struct TraceEntry {
    pub graph_key: String,
    pub bic: f64,
}

/// Search outcome: the best score, every graph tied at it, and the
/// expansion trace.
#[derive(Clone, Debug)]
pub struct SearchReport {
    pub best_bic: f64,
    pub best_loglik: f64,
    pub plateau: Vec<Admg>,
    pub expansions: usize,
    pub trace: Vec<TraceEntry>,
    pub fit_failures: usize,
    pub graphs_scored: usize,
}

impl SearchReport {
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            best_bic: f64,
            plateau: Vec<GraphJson>,
            expansions: usize,
            trace: &'a [TraceEntry],
        }
        serde_json::to_string(&Out {
            best_bic: self.best_bic,
            plateau: self.plateau.iter().map(GraphJson::from).collect(),
            expansions: self.expansions,
            trace: &self.trace,
        })
        .expect("report serialization")
    }
}

/// Greedy BIC search over ADMGs starting from `cfg.start` (default: the
/// empty graph over the data variables).
///
/// Each step pops one plateau graph, scores all neighbors (in parallel,
/// merged in neighbor order), then either jumps to the best strict
/// improvement, clearing tabu and plateau, or adds equal-scoring
/// unvisited neighbors to the plateau. Terminates when the plateau queue
/// empties or `max_expansions` is reached.
pub fn tabu_search(data: &Dataset, cfg: &SearchConfig) -> Result<SearchReport, FitError> {
    let start = match &cfg.start {
        Some(g) => {
            data.check_matches(g.names())?;
            g.clone()
        }
        None => Admg::new(data.names().to_vec()).expect("dataset names are valid"),
    };
    let cache = ScoreCache::new();
    let moebius = MoebiusCache::new();
    let mut fit_failures = 0usize;

    let (mut best_ll, mut best) = score_graph(&start, data, &cache, &moebius, &cfg.fit)?;
    let mut plateau_members: HashMap<Vec<u8>, Admg> = HashMap::new();
    let mut member_order: Vec<Vec<u8>> = Vec::new();
    let start_key = start.canonical_key();
    plateau_members.insert(start_key.clone(), start.clone());
    member_order.push(start_key);
    let mut queue: VecDeque<Admg> = VecDeque::from([start]);
    let mut tabu: HashSet<Vec<u8>> = HashSet::new();
    let mut trace = Vec::new();
    let mut expansions = 0usize;

    while let Some(g) = queue.pop_front() {
        if expansions >= cfg.max_expansions {
            break;
        }
        if !tabu.insert(g.canonical_key()) {
            continue;
        }
        expansions += 1;
        trace.push(TraceEntry { graph_key: g.key_hex(), bic: best });

        let nbrs = neighbors(&g);
        let scored: Vec<(f64, f64)> = nbrs
            .par_iter()
            .map(|(_, cand)| {
                score_graph(cand, data, &cache, &moebius, &cfg.fit)
                    .unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
            })
            .collect();
        fit_failures += scored.iter().filter(|s| s.1.is_infinite()).count();

        let best_idx = (0..nbrs.len())
            .min_by(|&i, &j| scored[i].1.partial_cmp(&scored[j].1).expect("bic comparable"));
        if let Some(i) = best_idx {
            let (ll, b) = scored[i];
            if b < best - cfg.plateau_tol {
                best = b;
                best_ll = ll;
                let winner = nbrs[i].1.clone();
                plateau_members.clear();
                member_order.clear();
                let wkey = winner.canonical_key();
                plateau_members.insert(wkey.clone(), winner.clone());
                member_order.push(wkey);
                queue.clear();
                queue.push_back(winner);
                tabu.clear();
                continue;
            }
        }
        for ((_, cand), &(_, b)) in nbrs.iter().zip(&scored) {
            if (b - best).abs() <= cfg.plateau_tol {
                let ckey = cand.canonical_key();
                if !tabu.contains(&ckey) && !plateau_members.contains_key(&ckey) {
                    plateau_members.insert(ckey.clone(), cand.clone());
                    member_order.push(ckey);
                    queue.push_back(cand.clone());
                }
            }
        }
    }

    let plateau: Vec<Admg> = member_order.iter().map(|k| plateau_members[k].clone()).collect();
    Ok(SearchReport {
        best_bic: best,
        best_loglik: best_ll,
        plateau,
        expansions,
        trace,
        fit_failures,
        graphs_scored: cache.len(),
    })
}
