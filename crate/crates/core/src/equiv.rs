//! Exhaustive census of four-vertex ADMGs: independence-model classes,
//! nested vs ordinary parameter counts, and the conjectured equivalence
//! classes of the graphs where the two counts disagree.

use crate::fit::{q_fit, Dataset, FitConfig};
use crate::graph::{intrinsic_catalog, m_separated, Admg};
use crate::params::MoebiusCache;
use crate::vset::{VSet, Vertex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum CensusError {
    #[error("census mismatch: {0}")]
    Mismatch(String),
}

/// Pattern families of the conjectured classes among discrepant graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum PatternTag {
    TypeA,
    TypeB,
    TypeC,
    TypeD,
    None,
}

impl PatternTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternTag::TypeA => "type_a",
            PatternTag::TypeB => "type_b",
            PatternTag::TypeC => "type_c",
            PatternTag::TypeD => "type_d",
            PatternTag::None => "none",
        }
    }
}

/// Census entry for one labeled ADMG.
#[derive(Clone, Debug)]
pub struct CensusRecord {
    pub graph: Admg,
    /// Bitmap over (pair, conditioning set) of m-separation statements.
    pub ci_fingerprint: u128,
    pub is_dag: bool,
    pub nested_dim: usize,
    pub ordinary_dim: usize,
    pub ci_class: usize,
    pub pattern: PatternTag,
    /// Index into the conjectured classes, when discrepant.
    pub conjectured_class: Option<usize>,
}

/// Headline counts plus per-graph records.
#[derive(Clone, Debug)]
pub struct Census {
    pub n: usize,
    pub dag_count: usize,
    pub admg_count: usize,
    pub ci_class_count: usize,
    pub dag_representable_classes: usize,
    pub mixed_only_classes: usize,
    pub discrepant_count: usize,
    pub conjectured: Option<ConjecturedCensus>,
    pub records: Vec<CensusRecord>,
}

/// The pattern-matched classes over the discrepant graphs.
#[derive(Clone, Debug)]
pub struct ConjecturedCensus {
    /// Class members as indices into `records`, with the pattern tag.
    pub classes: Vec<(PatternTag, Vec<usize>)>,
    pub type_counts: BTreeMap<PatternTag, usize>,
}

/// Every labeled DAG on `n` vertices: subsets of ordered pairs whose
/// directed part is acyclic.
pub fn enumerate_dags(n: usize) -> Vec<Admg> {
    let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let pairs: Vec<(u8, u8)> = (0..n as u8)
        .flat_map(|a| (0..n as u8).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    'subset: for mask in 0..(1u64 << pairs.len()) {
        let mut g = Admg::new(names.clone()).unwrap();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if (mask >> i) & 1 == 1 && g.add_directed(Vertex(a), Vertex(b)).is_err() {
                continue 'subset;
            }
        }
        out.push(g);
    }
    out
}

/// Every labeled ADMG on `n` vertices: each DAG crossed with each subset
/// of bidirected edges (bows included).
pub fn enumerate_admgs(n: usize) -> Vec<Admg> {
    let dags = enumerate_dags(n);
    let bipairs: Vec<(u8, u8)> = (0..n as u8)
        .flat_map(|a| ((a + 1)..n as u8).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::with_capacity(dags.len() << bipairs.len());
    for dag in &dags {
        for mask in 0..(1u64 << bipairs.len()) {
            let mut g = dag.clone();
            for (i, &(a, b)) in bipairs.iter().enumerate() {
                if (mask >> i) & 1 == 1 {
                    g.add_bidirected(Vertex(a), Vertex(b)).unwrap();
                }
            }
            out.push(g);
        }
    }
    out
}

/// Bitmap of every m-separation among singleton pairs given every
/// conditioning subset of the remaining vertices.
pub fn ci_fingerprint(g: &Admg) -> u128 {
    let n = g.n();
    let mut bit = 0usize;
    let mut fp = 0u128;
    for i in 0..n as u8 {
        for j in (i + 1)..n as u8 {
            let pair = VSet::singleton(Vertex(i)).insert(Vertex(j));
            let rest = VSet::full(n).minus(pair);
            for z in rest.subsets() {
                if m_separated(g, VSet::singleton(Vertex(i)), VSet::singleton(Vertex(j)), z) {
                    fp |= 1 << bit;
                }
                bit += 1;
            }
        }
    }
    assert!(bit <= 128, "fingerprint overflow at n = {n}");
    fp
}

/// Parameter count of the ordinary Markov (conditional-independence)
/// parameterization: heads are sets lying in one district of the
/// subgraph over their ancestors with every member barren there; the
/// tail is that district minus the head plus the district's parents.
pub fn ordinary_param_count(g: &Admg) -> usize {
    let n = g.n();
    let mut total = 0usize;
    for h in 1..(1usize << n) {
        let head = VSet(h as u32);
        let anc = g.ancestors_of_set(head);
        // Barren in the induced subgraph over anc: no member has a child
        // inside anc (the set is ancestrally closed, so any proper
        // descendant within it would start with such a child).
        let barren = head.iter().all(|v| g.children_of(v).inter(anc).is_empty());
        if !barren {
            continue;
        }
        let first = head.first().unwrap();
        let district = g.district_of_in(first, anc);
        if !head.is_subset_of(district) {
            continue;
        }
        let tail = district.minus(head).union(g.parents_of_set(district)).minus(head);
        total += 1usize << tail.len();
    }
    total
}

/// Edge lists of one pattern: `(directed, bidirected)`, 0-indexed.
type PatternEdges = (Vec<(u8, u8)>, Vec<(u8, u8)>);
/// One conjectured class: its pattern tag and member canonical keys.
type KeyedClass = (PatternTag, Vec<Vec<u8>>);

/// Pattern edge lists (on labels 1..4) of the conjectured classes.
fn patterns(tag: PatternTag) -> Vec<PatternEdges> {
    // (directed, bidirected), 0-indexed vertices.
    match tag {
        PatternTag::TypeA => vec![(vec![(0, 1), (1, 2), (2, 3)], vec![(0, 2), (0, 3)])],
        PatternTag::TypeB => vec![(vec![(0, 1), (1, 2), (1, 3)], vec![(0, 2), (0, 3)])],
        PatternTag::TypeC => vec![
            (vec![(0, 1), (1, 2), (2, 3)], vec![(0, 2), (1, 3)]),
            (vec![(0, 1), (1, 2), (0, 2), (2, 3)], vec![(1, 3)]),
            (vec![(0, 1), (1, 2), (0, 2), (2, 3)], vec![(0, 2), (1, 3)]),
            (vec![(1, 2), (0, 2), (2, 3)], vec![(0, 1), (1, 3)]),
            (vec![(0, 1), (1, 2), (0, 2), (2, 3)], vec![(0, 1), (1, 3)]),
        ],
        PatternTag::TypeD => vec![
            (vec![(0, 1), (1, 2), (2, 3)], vec![(1, 3)]),
            (vec![(1, 2), (2, 3)], vec![(0, 1), (1, 3)]),
            (vec![(0, 1), (1, 2), (2, 3)], vec![(0, 1), (1, 3)]),
        ],
        PatternTag::None => vec![],
    }
}

fn permutations(n: usize) -> Vec<Vec<u8>> {
    fn go(rest: &mut Vec<u8>, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            go(rest, prefix, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    go(&mut (0..n as u8).collect(), &mut Vec::new(), &mut out);
    out
}

fn relabeled_key(
    directed: &[(u8, u8)],
    bidirected: &[(u8, u8)],
    perm: &[u8],
    names: &[String],
) -> Vec<u8> {
    let mut g = Admg::new(names.to_vec()).unwrap();
    for &(a, b) in directed {
        g.add_directed(Vertex(perm[a as usize]), Vertex(perm[b as usize])).unwrap();
    }
    for &(a, b) in bidirected {
        g.add_bidirected(Vertex(perm[a as usize]), Vertex(perm[b as usize])).unwrap();
    }
    g.canonical_key()
}

/// Builds the conjectured classes by relabeling the pattern families,
/// then checks they tile the discrepant set exactly: 24 + 12 singleton
/// classes, 24 five-graph classes, 24 three-graph classes.
pub fn conjectured_classes(
    records: &[CensusRecord],
    discrepant: &[usize],
) -> Result<(Vec<KeyedClass>, BTreeMap<PatternTag, usize>), CensusError> {
    let names: Vec<String> = (1..=4).map(|i| format!("x{i}")).collect();
    let perms = permutations(4);
    let mut classes: Vec<KeyedClass> = Vec::new();
    for tag in [PatternTag::TypeA, PatternTag::TypeB, PatternTag::TypeC, PatternTag::TypeD] {
        let pats = patterns(tag);
        let mut seen: BTreeSet<Vec<Vec<u8>>> = BTreeSet::new();
        for perm in &perms {
            let mut keys: Vec<Vec<u8>> = pats
                .iter()
                .map(|(d, b)| relabeled_key(d, b, perm, &names))
                .collect();
            keys.sort();
            keys.dedup();
            if keys.len() != pats.len() {
                return Err(CensusError::Mismatch(format!(
                    "{} patterns collide under relabeling {perm:?}",
                    tag.as_str()
                )));
            }
            if seen.insert(keys.clone()) {
                classes.push((tag, keys));
            }
        }
    }
    let mut type_counts: BTreeMap<PatternTag, usize> = BTreeMap::new();
    for (tag, _) in &classes {
        *type_counts.entry(*tag).or_insert(0) += 1;
    }
    let expected = [(PatternTag::TypeA, 24), (PatternTag::TypeB, 12), (PatternTag::TypeC, 24), (PatternTag::TypeD, 24)];
    for (tag, want) in expected {
        let got = type_counts.get(&tag).copied().unwrap_or(0);
        if got != want {
            return Err(CensusError::Mismatch(format!(
                "{} classes: {got}, expected {want}",
                tag.as_str()
            )));
        }
    }
    // Coverage: member keys tile the discrepant set exactly once.
    let discrepant_keys: BTreeSet<Vec<u8>> =
        discrepant.iter().map(|&i| records[i].graph.canonical_key()).collect();
    let mut covered: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut member_total = 0usize;
    for (tag, keys) in &classes {
        for key in keys {
            member_total += 1;
            if !discrepant_keys.contains(key) {
                return Err(CensusError::Mismatch(format!(
                    "a {} class member is not discrepant",
                    tag.as_str()
                )));
            }
            if !covered.insert(key.clone()) {
                return Err(CensusError::Mismatch(
                    "a graph appears in two conjectured classes".into(),
                ));
            }
        }
    }
    if member_total != discrepant_keys.len() {
        return Err(CensusError::Mismatch(format!(
            "classes cover {member_total} graphs, discrepant set has {}",
            discrepant_keys.len()
        )));
    }
    Ok((classes, type_counts))
}

/// Runs the census: enumerate, fingerprint, count parameters both ways,
/// group, and (at n = 4) match the discrepant graphs against the
/// conjectured class patterns.
pub fn census(n: usize) -> Result<Census, CensusError> {
    let graphs = enumerate_admgs(n);
    let dag_count = graphs.iter().filter(|g| g.is_dag()).count();
    let admg_count = graphs.len();

    let mut records: Vec<CensusRecord> = graphs
        .into_par_iter()
        .map(|g| {
            let ci_fingerprint = ci_fingerprint(&g);
            let nested_dim =
                intrinsic_catalog(&g).expect("catalog of enumerated graph").param_count();
            let ordinary_dim = ordinary_param_count(&g);
            let is_dag = g.is_dag();
            CensusRecord {
                graph: g,
                ci_fingerprint,
                is_dag,
                nested_dim,
                ordinary_dim,
                ci_class: 0,
                pattern: PatternTag::None,
                conjectured_class: None,
            }
        })
        .collect();

    // Group by fingerprint; class ids in first-seen order.
    let mut class_of: HashMap<u128, usize> = HashMap::new();
    let mut class_has_dag: Vec<bool> = Vec::new();
    for r in records.iter_mut() {
        let next = class_of.len();
        let id = *class_of.entry(r.ci_fingerprint).or_insert(next);
        if id == class_has_dag.len() {
            class_has_dag.push(false);
        }
        class_has_dag[id] |= r.is_dag;
        r.ci_class = id;
    }
    let ci_class_count = class_of.len();
    let dag_representable = class_has_dag.iter().filter(|&&b| b).count();

    let discrepant: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].nested_dim != records[i].ordinary_dim)
        .collect();

    let conjectured = if n == 4 {
        let (classes, type_counts) = conjectured_classes(&records, &discrepant)?;
        // Attach class ids to records.
        let key_to_record: HashMap<Vec<u8>, usize> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.graph.canonical_key(), i))
            .collect();
        let mut out_classes = Vec::with_capacity(classes.len());
        for (cid, (tag, keys)) in classes.iter().enumerate() {
            let mut members = Vec::with_capacity(keys.len());
            for key in keys {
                let i = key_to_record[key];
                records[i].pattern = *tag;
                records[i].conjectured_class = Some(cid);
                members.push(i);
            }
            out_classes.push((*tag, members));
        }
        Some(ConjecturedCensus { classes: out_classes, type_counts })
    } else {
        None
    };

    Ok(Census {
        n,
        dag_count,
        admg_count,
        ci_class_count,
        dag_representable_classes: dag_representable,
        mixed_only_classes: ci_class_count - dag_representable,
        discrepant_count: discrepant.len(),
        conjectured,
        records,
    })
}

impl Census {
    /// The headline integers as summary JSON.
    pub fn summary_json(&self) -> String {
        let per_type: BTreeMap<&str, usize> = self
            .conjectured
            .as_ref()
            .map(|c| c.type_counts.iter().map(|(t, &n)| (t.as_str(), n)).collect())
            .unwrap_or_default();
        serde_json::json!({
            "n": self.n,
            "dags": self.dag_count,
            "admgs": self.admg_count,
            "ci_classes": self.ci_class_count,
            "dag_representable_classes": self.dag_representable_classes,
            "mixed_only_classes": self.mixed_only_classes,
            "discrepant": self.discrepant_count,
            "conjectured_classes": self.conjectured.as_ref().map(|c| c.classes.len()),
            "per_type": per_type,
        })
        .to_string()
    }

    /// One CSV row per graph.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("graph_key,ci_class,nested_dim,ordinary_dim,pattern,conjectured_class\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.graph.key_hex(),
                r.ci_class,
                r.nested_dim,
                r.ordinary_dim,
                r.pattern.as_str(),
                r.conjectured_class.map(|c| c.to_string()).unwrap_or_default(),
            ));
        }
        out
    }

    /// Verifies the exact expected counts for n = 4.
    pub fn check_expected(&self) -> Result<(), CensusError> {
        let want = [
            (self.dag_count, 543, "dags"),
            (self.admg_count, 34752, "admgs"),
            (self.ci_class_count, 248, "ci classes"),
            (self.dag_representable_classes, 185, "dag-representable classes"),
            (self.mixed_only_classes, 63, "mixed-only classes"),
            (self.discrepant_count, 228, "discrepant graphs"),
            (self.conjectured.as_ref().map(|c| c.classes.len()).unwrap_or(0), 84, "classes"),
        ];
        for (got, expect, what) in want {
            if got != expect {
                return Err(CensusError::Mismatch(format!("{what}: {got}, expected {expect}")));
            }
        }
        Ok(())
    }
}

/// Within-class log-likelihood agreement under the fitter, on data from
/// saturated models.
#[derive(Clone, Debug)]
pub struct ClassVerification {
    /// Per class: worst relative spread of member log-likelihoods over
    /// the datasets.
    pub per_class: Vec<f64>,
    pub max_within_spread: f64,
    /// Median across-class spread per dataset, for contrast.
    pub across_spread: f64,
}

/// Samples `n_datasets` datasets from random saturated four-variable
/// models and fits every member of every conjectured class.
pub fn verify_classes(
    census: &Census,
    n_datasets: usize,
    n_per_dataset: usize,
    seed: u64,
    cfg: &FitConfig,
) -> ClassVerification {
    let conj = census.conjectured.as_ref().expect("verify_classes needs the n=4 census");
    let names: Vec<String> = (1..=4).map(|i| format!("x{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut datasets = Vec::with_capacity(n_datasets);
    while datasets.len() < n_datasets {
        // A saturated generator bounded away from the boundary, then
        // multinomial counts, redrawn until every cell is occupied.
        let mut p = [0.0; 16];
        loop {
            let raw: Vec<f64> =
                (0..16).map(|_| -(rng.random::<f64>().max(1e-300)).ln()).collect();
            let t: f64 = raw.iter().sum();
            for (dst, &r) in p.iter_mut().zip(&raw) {
                *dst = r / t;
            }
            if p.iter().all(|&x| x >= 0.005) {
                break;
            }
        }
        let mut counts = vec![0.0; 16];
        for _ in 0..n_per_dataset {
            let mut u: f64 = rng.random();
            let mut cell = 15;
            for (k, &pk) in p.iter().enumerate() {
                if u < pk {
                    cell = k;
                    break;
                }
                u -= pk;
            }
            counts[cell] += 1.0;
        }
        if counts.iter().all(|&c| c > 0.0) {
            datasets.push(Dataset::new(names.clone(), counts).unwrap());
        }
    }

    let moebius = MoebiusCache::new();
    let results: Vec<(usize, Vec<f64>)> = conj
        .classes
        .par_iter()
        .enumerate()
        .map(|(cid, (_, members))| {
            let mut spreads = Vec::with_capacity(datasets.len());
            for data in &datasets {
                let lls: Vec<f64> = members
                    .iter()
                    .map(|&i| {
                        let param = moebius.get(&census.records[i].graph).expect("catalog");
                        q_fit(&param, data, cfg).expect("positive counts").loglik
                    })
                    .collect();
                let max = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = lls.iter().cloned().fold(f64::INFINITY, f64::min);
                let mean = lls.iter().sum::<f64>() / lls.len() as f64;
                spreads.push((max - min) / mean.abs().max(1.0));
            }
            (cid, spreads)
        })
        .collect();

    let mut per_class = vec![0.0; conj.classes.len()];
    for (cid, spreads) in &results {
        per_class[*cid] = spreads.iter().cloned().fold(0.0, f64::max);
    }
    let max_within = per_class.iter().cloned().fold(0.0, f64::max);

    // Contrast: spread of class-mean log-likelihoods on the first
    // dataset across all classes.
    let across = {
        let data = &datasets[0];
        let means: Vec<f64> = conj
            .classes
            .par_iter()
            .map(|(_, members)| {
                let lls: Vec<f64> = members
                    .iter()
                    .map(|&i| {
                        let param = moebius.get(&census.records[i].graph).expect("catalog");
                        q_fit(&param, data, cfg).expect("positive counts").loglik
                    })
                    .collect();
                lls.iter().sum::<f64>() / lls.len() as f64
            })
            .collect();
        let max = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
        (max - min) / min.abs().max(1.0)
    };

    ClassVerification { per_class, max_within_spread: max_within, across_spread: across }
}
