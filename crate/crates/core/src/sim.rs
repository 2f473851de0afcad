//! Latent-DAG simulation models and structure-recovery experiments.
//!
//! The two generators are a four-variable chain with one 16-state latent
//! confounder of x2 and x4, and a five-variable model where two 8-state
//! latents tie x2 and x4 to x5. Conditional tables are drawn from a
//! symmetric Dirichlet and rejected until every dependence implied by
//! the latent projection is bounded away from independence, giving
//! approximately faithful models whose constraints hold by construction.

use crate::fit::Dataset;
use crate::graph::{latent_projection, m_separated, Admg};
use crate::search::{tabu_search, SearchConfig, SearchReport};
use crate::vset::{VSet, Vertex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum SimError {
    #[error("no approximately faithful parameter draw in {tries} tries (gap {gap})")]
    RejectionExhausted { tries: usize, gap: f64 },
    #[error("search failed: {0}")]
    Search(String),
}

/// A DAG with designated latent vertices, per-vertex cardinalities, and
/// optional conditional probability tables.
#[derive(Clone, Debug)]
pub struct LatentDagModel {
    pub dag: Admg,
    pub observed: VSet,
    pub cardinalities: Vec<usize>,
    /// Per vertex: rows indexed by parent assignment (ascending parent
    /// index, first parent most significant), each row a distribution
    /// over the vertex's states.
    pub cpts: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimModel {
    Verma4,
    Chain5,
}

impl SimModel {
    pub fn name(self) -> &'static str {
        match self {
            SimModel::Verma4 => "verma4",
            SimModel::Chain5 => "chain5",
        }
    }

    pub fn parse(name: &str) -> Option<SimModel> {
        match name {
            "verma4" => Some(SimModel::Verma4),
            "chain5" => Some(SimModel::Chain5),
            _ => None,
        }
    }

    pub fn skeleton(self) -> LatentDagModel {
        match self {
            SimModel::Verma4 => build_verma4(),
            SimModel::Chain5 => build_chain5(),
        }
    }
}

/// x1 -> x2 -> x3 -> x4 plus u -> x2 and u -> x4 with a 16-state u.
pub fn build_verma4() -> LatentDagModel {
    let mut dag = Admg::new(["x1", "x2", "x3", "x4", "u"]).unwrap();
    for (a, b) in [(0u8, 1u8), (1, 2), (2, 3), (4, 1), (4, 3)] {
        dag.add_directed(Vertex(a), Vertex(b)).unwrap();
    }
    LatentDagModel {
        dag,
        observed: VSet::full(4),
        cardinalities: vec![2, 2, 2, 2, 16],
        cpts: None,
    }
}

/// x1 -> x2 -> x3 -> x4 plus u1 -> {x2, x5} and u2 -> {x4, x5} with
/// 8-state latents.
pub fn build_chain5() -> LatentDagModel {
    let mut dag = Admg::new(["x1", "x2", "x3", "x4", "x5", "u1", "u2"]).unwrap();
    for (a, b) in [(0u8, 1u8), (1, 2), (2, 3), (5, 1), (5, 4), (6, 4), (6, 3)] {
        dag.add_directed(Vertex(a), Vertex(b)).unwrap();
    }
    LatentDagModel {
        dag,
        observed: VSet::full(5),
        cardinalities: vec![2, 2, 2, 2, 2, 8, 8],
        cpts: None,
    }
}

impl LatentDagModel {
    /// Latent projection onto the observed margin.
    pub fn projection(&self) -> Admg {
        latent_projection(&self.dag, self.observed).expect("projection of a valid DAG")
    }

    fn parent_rank(&self, v: usize, state: &[usize]) -> usize {
        let mut rank = 0;
        for p in self.dag.parents_of(Vertex(v as u8)).iter() {
            rank = rank * self.cardinalities[p.index()] + state[p.index()];
        }
        rank
    }

    /// The exact joint over the observed (binary) vertices, by summing
    /// out the latents, indexed by assignment mask.
    pub fn exact_observed_joint(&self) -> Vec<f64> {
        let cpts = self.cpts.as_ref().expect("parameters not set");
        let n = self.dag.n();
        let order = self.dag.topological_order();
        let mut joint = vec![0.0; 1 << self.observed.len()];
        let mut state = vec![0usize; n];
        // Odometer over the full state space.
        loop {
            let mut p = 1.0;
            for &v in &order {
                let v = v.index();
                p *= cpts[v][self.parent_rank(v, &state)][state[v]];
            }
            let mut mask = 0usize;
            for (i, v) in self.observed.iter().enumerate() {
                mask |= state[v.index()] << i;
            }
            joint[mask] += p;
            let mut carry = 0;
            loop {
                if carry == n {
                    return joint;
                }
                state[carry] += 1;
                if state[carry] < self.cardinalities[carry] {
                    break;
                }
                state[carry] = 0;
                carry += 1;
            }
        }
    }

    /// Serializes the conditional tables for reproducibility.
    pub fn cpts_to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            vertices: Vec<&'a str>,
            cardinalities: &'a [usize],
            observed: Vec<&'a str>,
            cpts: &'a Option<Vec<Vec<Vec<f64>>>>,
        }
        serde_json::to_string(&Out {
            vertices: self.dag.names().iter().map(String::as_str).collect(),
            cardinalities: &self.cardinalities,
            observed: self.observed.iter().map(|v| self.dag.name(v)).collect(),
            cpts: &self.cpts,
        })
        .expect("cpt serialization")
    }

    /// Ancestral sampling of `n` draws; latents are discarded and the
    /// observed values aggregated into counts.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let cpts = self.cpts.as_ref().expect("parameters not set");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = self.dag.topological_order();
        let mut counts = vec![0.0; 1 << self.observed.len()];
        let mut state = vec![0usize; self.dag.n()];
        for _ in 0..n {
            for &v in &order {
                let vi = v.index();
                let row = &cpts[vi][self.parent_rank(vi, &state)];
                let mut u: f64 = rng.random();
                let mut s = 0usize;
                for (k, &p) in row.iter().enumerate() {
                    s = k;
                    if u < p {
                        break;
                    }
                    u -= p;
                }
                state[vi] = s;
            }
            let mut mask = 0usize;
            for (i, v) in self.observed.iter().enumerate() {
                mask |= state[v.index()] << i;
            }
            counts[mask] += 1.0;
        }
        let names: Vec<String> =
            self.observed.iter().map(|v| self.dag.name(v).to_string()).collect();
        Dataset::new(names, counts).expect("sampled counts are valid")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FaithfulnessConfig {
    /// Smallest admissible total-variation gap for every dependence the
    /// projection implies.
    pub gap: f64,
    /// Stronger floor for adjacent pairs, which must stay dependent
    /// under every conditioning set for the search to keep their edges.
    pub edge_gap: f64,
    /// Dirichlet concentration for the conditional table rows.
    pub alpha: f64,
    pub max_tries: usize,
}

impl Default for FaithfulnessConfig {
    /// Defaults reflect what Dirichlet draws can deliver: the weakest
    /// implied dependences are collider-opened and rarely exceed a few
    /// thousandths in total variation, so the global floor is small and
    /// the adjacency floor carries the real faithfulness requirement.
    /// The concentration 0.15 skews rows toward informative, low-entropy
    /// conditionals.
    fn default() -> FaithfulnessConfig {
        FaithfulnessConfig { gap: 0.005, edge_gap: 0.05, alpha: 0.15, max_tries: 10_000 }
    }
}

/// Marsaglia-Tsang gamma sampler (shape `alpha`, unit scale), with the
/// boost trick below shape one.
fn gamma_draw<R: Rng>(rng: &mut R, alpha: f64) -> f64 {
    let a = if alpha < 1.0 { alpha + 1.0 } else { alpha };
    let d = a - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = rng.random::<f64>().max(1e-300);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            let g = d * v;
            return if alpha < 1.0 {
                let b: f64 = rng.random::<f64>().max(1e-300);
                g * b.powf(1.0 / alpha)
            } else {
                g
            };
        }
    }
}

fn dirichlet_row<R: Rng>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k).map(|_| gamma_draw(rng, alpha).max(1e-12)).collect();
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    row
}

/// Conditional total-variation distance from independence of the pair
/// `(i, j)` in the context `z` (an assignment over `zbits`).
fn pair_tv(joint: &[f64], i: usize, j: usize, zbits: usize, za: usize) -> f64 {
    let ibit = 1usize << i;
    let jbit = 1usize << j;
    let mut cell = [[0.0f64; 2]; 2];
    for (m, &p) in joint.iter().enumerate() {
        if m & zbits == za {
            cell[(m & ibit != 0) as usize][(m & jbit != 0) as usize] += p;
        }
    }
    let pz: f64 = cell.iter().flatten().sum();
    if pz <= 0.0 {
        return 0.0;
    }
    let pi = [(cell[0][0] + cell[0][1]) / pz, (cell[1][0] + cell[1][1]) / pz];
    let pj = [(cell[0][0] + cell[1][0]) / pz, (cell[0][1] + cell[1][1]) / pz];
    let mut tv = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            tv += (cell[a][b] / pz - pi[a] * pj[b]).abs();
        }
    }
    0.5 * tv
}

/// Dependence strength of a pair given a conditioning set: the largest
/// conditional total-variation distance across contexts.
fn dependence_strength(joint: &[f64], i: usize, j: usize, z: VSet) -> f64 {
    let mut best: f64 = 0.0;
    for za in z.subsets() {
        best = best.max(pair_tv(joint, i, j, z.0 as usize, za.0 as usize));
    }
    best
}

/// Worst strength over every m-connected pair and conditioning set, and
/// separately over the adjacent pairs only.
fn faithfulness_margins(joint: &[f64], projection: &Admg, n_obs: usize) -> (f64, f64) {
    let mut worst = f64::INFINITY;
    let mut worst_edge = f64::INFINITY;
    for i in 0..n_obs {
        for j in (i + 1)..n_obs {
            let (vi, vj) = (Vertex(i as u8), Vertex(j as u8));
            let adjacent = projection.has_directed(vi, vj)
                || projection.has_directed(vj, vi)
                || projection.has_bidirected(vi, vj);
            let pair = VSet::singleton(vi).insert(vj);
            let rest = VSet::full(n_obs).minus(pair);
            for z in rest.subsets() {
                if !adjacent
                    && m_separated(projection, VSet::singleton(vi), VSet::singleton(vj), z)
                {
                    continue;
                }
                let strength = dependence_strength(joint, i, j, z);
                worst = worst.min(strength);
                if adjacent {
                    worst_edge = worst_edge.min(strength);
                }
            }
        }
    }
    (worst, worst_edge)
}

/// Draws conditional tables from a symmetric Dirichlet and keeps the
/// first draw whose exact observed joint is approximately faithful to
/// the projection: every implied dependence at least `gap` away from
/// independence and every adjacency at least `edge_gap`. Deterministic
/// under `seed`.
pub fn random_parameters(
    skeleton: &LatentDagModel,
    seed: u64,
    cfg: &FaithfulnessConfig,
) -> Result<LatentDagModel, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let projection = skeleton.projection();
    let n_obs = skeleton.observed.len();
    for _ in 0..cfg.max_tries {
        let cpts: Vec<Vec<Vec<f64>>> = (0..skeleton.dag.n())
            .map(|v| {
                let rows = skeleton
                    .dag
                    .parents_of(Vertex(v as u8))
                    .iter()
                    .map(|p| skeleton.cardinalities[p.index()])
                    .product::<usize>();
                (0..rows)
                    .map(|_| dirichlet_row(&mut rng, skeleton.cardinalities[v], cfg.alpha))
                    .collect()
            })
            .collect();
        let model = LatentDagModel { cpts: Some(cpts), ..skeleton.clone() };
        let joint = model.exact_observed_joint();
        let (margin, edge_margin) = faithfulness_margins(&joint, &projection, n_obs);
        if margin >= cfg.gap && edge_margin >= cfg.edge_gap {
            return Ok(model);
        }
    }
    Err(SimError::RejectionExhausted { tries: cfg.max_tries, gap: cfg.gap })
}

/// The conjectured equivalence class the search should recover: the
/// projection itself, the variant with x1 <-> x2 instead of x1 -> x2,
/// and the variant carrying both.
pub fn true_class(model: SimModel) -> Vec<Admg> {
    let base = model.skeleton().projection();
    let x1 = Vertex(0);
    let x2 = Vertex(1);
    let mut swapped = base.clone();
    swapped.remove_directed(x1, x2);
    swapped.add_bidirected(x1, x2).unwrap();
    let mut bow = base.clone();
    bow.add_bidirected(x1, x2).unwrap();
    vec![base, swapped, bow]
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryRow {
    pub model: String,
    pub n: usize,
    pub reps: usize,
    pub successes: usize,
    pub rate: f64,
}

/// Renders rows as the recovery CSV.
pub fn recovery_csv(rows: &[RecoveryRow]) -> String {
    let mut out = String::from("model,n,reps,successes,rate\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.model, r.n, r.reps, r.successes, r.rate));
    }
    out
}

/// RNG stream used for the parameter draw of one trial, exposed so the
/// conditional tables of any trial can be regenerated for dumps.
pub fn trial_parameter_seed(seed: u64, size_index: usize, rep: usize) -> u64 {
    mix_seed(seed, 2, size_index as u64, rep as u64)
}

fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e3779b97f4a7c15) ^ b.wrapping_mul(0xbf58476d1ce4e5b9)
        ^ c.wrapping_mul(0x94d049bb133111eb);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// The dataset one recovery trial searches over: a fresh approximately
/// faithful parameter draw, sampled `n` times.
pub fn trial_dataset(
    model: SimModel,
    n: usize,
    seed: u64,
    faith: &FaithfulnessConfig,
) -> Result<Dataset, SimError> {
    let params = random_parameters(&model.skeleton(), seed, faith)?;
    Ok(params.sample(n, mix_seed(seed, 1, 0, 0)))
}

/// One trial: fresh parameters, a dataset of size `n`, one search.
/// Success means the whole returned plateau lies inside the true class.
///
/// Sampled datasets at these sizes routinely leave cells empty, so when
/// the caller has not chosen a smoothing level the trial fits with the
/// default additive 0.5 per cell.
pub fn recovery_trial(
    model: SimModel,
    n: usize,
    seed: u64,
    faith: &FaithfulnessConfig,
    search: &SearchConfig,
) -> Result<(bool, SearchReport), SimError> {
    let data = trial_dataset(model, n, seed, faith)?;
    let mut search = search.clone();
    search.fit.smoothing = search.fit.smoothing.or(Some(0.5));
    let report = tabu_search(&data, &search).map_err(|e| SimError::Search(e.to_string()))?;
    let class: Vec<Vec<u8>> = true_class(model).iter().map(|g| g.canonical_key()).collect();
    let ok = !report.plateau.is_empty()
        && report.plateau.iter().all(|g| class.contains(&g.canonical_key()));
    Ok((ok, report))
}

/// Recovery rates over sample sizes. Trials run in parallel; each draws
/// its RNG stream from (seed, size index, repetition), so results do not
/// depend on scheduling.
pub fn recovery_experiment(
    model: SimModel,
    sizes: &[usize],
    reps: usize,
    seed: u64,
    faith: &FaithfulnessConfig,
    search: &SearchConfig,
) -> Result<Vec<RecoveryRow>, SimError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for (si, &n) in sizes.iter().enumerate() {
        let results: Result<Vec<bool>, SimError> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let trial_seed = trial_parameter_seed(seed, si, rep);
                recovery_trial(model, n, trial_seed, faith, search).map(|(ok, _)| ok)
            })
            .collect();
        let results = results?;
        let successes = results.iter().filter(|&&b| b).count();
        rows.push(RecoveryRow {
            model: model.name().to_string(),
            n,
            reps,
            successes,
            rate: if reps == 0 { 0.0 } else { successes as f64 / reps as f64 },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{verma_residual, KernelTable};

    #[test]
    fn verma4_projection_is_the_chain_with_one_arc() {
        let proj = build_verma4().projection();
        assert_eq!(
            proj.directed_edges(),
            vec![(Vertex(0), Vertex(1)), (Vertex(1), Vertex(2)), (Vertex(2), Vertex(3))]
        );
        assert_eq!(proj.bidirected_edges(), vec![(Vertex(1), Vertex(3))]);
    }

    #[test]
    fn chain5_projection_ties_x5_to_x2_and_x4() {
        let proj = build_chain5().projection();
        assert_eq!(
            proj.directed_edges(),
            vec![(Vertex(0), Vertex(1)), (Vertex(1), Vertex(2)), (Vertex(2), Vertex(3))]
        );
        assert_eq!(proj.bidirected_edges(), vec![(Vertex(1), Vertex(4)), (Vertex(3), Vertex(4))]);
    }

    #[test]
    fn accepted_verma4_model_satisfies_its_constraints_exactly() {
        let model = random_parameters(&build_verma4(), 11, &FaithfulnessConfig::default()).unwrap();
        let joint = model.exact_observed_joint();
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // The post-truncation independence holds by construction.
        let g = model.projection();
        let p = KernelTable::new(g.clone(), joint.clone());
        assert!(verma_residual(&p) < 1e-10);
        // The ordinary independence x1 _||_ x3 | x2 holds exactly.
        for x2 in 0..2usize {
            let cells = |m: usize| joint[m];
            let mut tv = 0.0;
            let mut pz = 0.0;
            let mut pi = [0.0; 2];
            let mut pj = [0.0; 2];
            let mut pij = [[0.0; 2]; 2];
            for m in 0..16usize {
                if (m >> 1) & 1 == x2 {
                    let (a, b) = (m & 1, (m >> 2) & 1);
                    pz += cells(m);
                    pi[a] += cells(m);
                    pj[b] += cells(m);
                    pij[a][b] += cells(m);
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    tv += (pij[a][b] / pz - pi[a] / pz * pj[b] / pz).abs();
                }
            }
            assert!(0.5 * tv < 1e-10, "conditional independence violated: {tv}");
        }
    }

    #[test]
    fn parameter_draws_are_deterministic_under_seed() {
        let a = random_parameters(&build_verma4(), 5, &FaithfulnessConfig::default()).unwrap();
        let b = random_parameters(&build_verma4(), 5, &FaithfulnessConfig::default()).unwrap();
        assert_eq!(a.cpts_to_json(), b.cpts_to_json());
        let da = a.sample(500, 9);
        let db = b.sample(500, 9);
        assert_eq!(da, db);
    }

    #[test]
    fn empty_sample_and_seeded_sample() {
        let model = random_parameters(&build_verma4(), 3, &FaithfulnessConfig::default()).unwrap();
        let empty = model.sample(0, 1);
        assert_eq!(empty.total(), 0.0);
        let d1 = model.sample(1000, 2);
        assert_eq!(d1.total(), 1000.0);
    }

    #[test]
    fn sampling_converges_to_the_exact_joint() {
        let model = random_parameters(&build_verma4(), 17, &FaithfulnessConfig::default()).unwrap();
        let joint = model.exact_observed_joint();
        let n = 200_000usize;
        let data = model.sample(n, 23);
        for (m, &p) in joint.iter().enumerate() {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let got = data.count_at_mask(m) / n as f64;
            assert!(
                (got - p).abs() < 5.0 * se + 1e-4,
                "cell {m}: {got} vs {p} (se {se})"
            );
        }
    }

    #[test]
    fn true_class_has_three_members() {
        for model in [SimModel::Verma4, SimModel::Chain5] {
            let class = true_class(model);
            assert_eq!(class.len(), 3);
            let keys: std::collections::HashSet<Vec<u8>> =
                class.iter().map(|g| g.canonical_key()).collect();
            assert_eq!(keys.len(), 3);
        }
    }
}
