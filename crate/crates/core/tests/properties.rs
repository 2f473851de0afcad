//! Cross-module invariants: exhaustive small-graph sweeps and oracle
//! comparisons that back the spot checks in the unit tests.

use nmm_core::params::all_fix_orders;
use nmm_core::{
    enumerate_admgs, head_partition, intrinsic_catalog, latent_projection, m_separated, Admg,
    Parameterization, Reachable, VSet, Vertex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Every vertex subset of every small ADMG splits into disjoint heads.
#[test]
fn head_partition_tiles_every_subset() {
    let mut graphs = Vec::new();
    for n in 1..=4 {
        graphs.extend(enumerate_admgs(n));
    }
    graphs.par_iter().for_each(|g| {
        let catalog = intrinsic_catalog(g).unwrap();
        let full = g.random();
        for b in full.subsets() {
            let parts = head_partition(g, &catalog, b).unwrap();
            let mut union = VSet::EMPTY;
            for &i in &parts {
                let head = catalog.entries[i].head;
                assert!(union.inter(head).is_empty(), "{g:?}: overlapping heads for {b:?}");
                union = union.union(head);
            }
            assert_eq!(union, b, "{g:?}: heads do not cover {b:?}");
        }
    });
}

fn random_admg<R: Rng>(n: usize, rng: &mut R) -> Admg {
    let mut g = Admg::new((1..=n).map(|i| format!("x{i}"))).unwrap();
    // Directed edges respect the index order, so acyclicity is free.
    for a in 0..n as u8 {
        for b in (a + 1)..n as u8 {
            if rng.random::<f64>() < 0.3 {
                g.add_directed(Vertex(a), Vertex(b)).unwrap();
            }
            if rng.random::<f64>() < 0.25 {
                g.add_bidirected(Vertex(a), Vertex(b)).unwrap();
            }
        }
    }
    g
}

#[test]
fn head_partition_tiles_sampled_five_vertex_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let g = random_admg(5, &mut rng);
        let catalog = intrinsic_catalog(&g).unwrap();
        for b in g.random().subsets() {
            let parts = head_partition(&g, &catalog, b).unwrap();
            let mut union = VSet::EMPTY;
            for &i in &parts {
                let head = catalog.entries[i].head;
                assert!(union.inter(head).is_empty());
                union = union.union(head);
            }
            assert_eq!(union, b);
        }
    }
}

/// Classic d-separation via moralization, as an independent oracle.
fn d_separated_moral(g: &Admg, x: VSet, y: VSet, z: VSet) -> bool {
    let anc = g.ancestors_of_set(x.union(y).union(z));
    // Moral graph over the ancestral set: skeleton plus co-parents.
    let n = g.n();
    let mut adj = vec![VSet::EMPTY; n];
    let connect = |a: Vertex, b: Vertex, adj: &mut Vec<VSet>| {
        adj[a.index()] = adj[a.index()].insert(b);
        adj[b.index()] = adj[b.index()].insert(a);
    };
    for v in anc.iter() {
        for p in g.parents_of(v).inter(anc).iter() {
            connect(v, p, &mut adj);
        }
        let parents: Vec<Vertex> = g.parents_of(v).inter(anc).iter().collect();
        for (i, &a) in parents.iter().enumerate() {
            for &b in &parents[i + 1..] {
                connect(a, b, &mut adj);
            }
        }
    }
    // Separation in the moral graph after deleting z.
    let scope = anc.minus(z);
    let mut seen = x.inter(scope);
    let mut stack: Vec<Vertex> = seen.iter().collect();
    while let Some(u) = stack.pop() {
        for w in adj[u.index()].inter(scope).iter() {
            if !seen.contains(w) {
                if y.contains(w) {
                    return false;
                }
                seen = seen.insert(w);
                stack.push(w);
            }
        }
    }
    true
}

#[test]
fn m_separation_matches_moralization_on_dags() {
    let mut dags: Vec<Admg> = Vec::new();
    for n in 2..=4 {
        dags.extend(nmm_core::equiv::enumerate_dags(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let mut g = Admg::new((1..=5).map(|i| format!("x{i}"))).unwrap();
        for a in 0..5u8 {
            for b in (a + 1)..5 {
                if rng.random::<f64>() < 0.4 {
                    g.add_directed(Vertex(a), Vertex(b)).unwrap();
                }
            }
        }
        dags.push(g);
    }
    dags.par_iter().for_each(|g| {
        let n = g.n();
        for i in 0..n as u8 {
            for j in (i + 1)..n as u8 {
                let x = VSet::singleton(Vertex(i));
                let y = VSet::singleton(Vertex(j));
                let rest = VSet::full(n).minus(x).minus(y);
                for z in rest.subsets() {
                    assert_eq!(
                        m_separated(g, x, y, z),
                        d_separated_moral(g, x, y, z),
                        "{g:?}: x{} x{} | {z:?}",
                        i + 1,
                        j + 1
                    );
                }
            }
        }
    });
}

/// Latent projection preserves m-separation among the observed margin.
#[test]
fn latent_projection_preserves_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(3..=6usize);
        let mut g = Admg::new((1..=n).map(|i| format!("x{i}"))).unwrap();
        for a in 0..n as u8 {
            for b in (a + 1)..n as u8 {
                if rng.random::<f64>() < 0.4 {
                    g.add_directed(Vertex(a), Vertex(b)).unwrap();
                }
            }
        }
        let n_latent = rng.random_range(0..=2usize.min(n - 2));
        let mut latent = VSet::EMPTY;
        while latent.len() < n_latent {
            latent = latent.insert(Vertex(rng.random_range(0..n as u8)));
        }
        let observed = VSet::full(n).minus(latent);
        let proj = latent_projection(&g, observed).unwrap();
        let obs_list: Vec<Vertex> = observed.iter().collect();
        let reindex = |s: VSet| -> VSet {
            s.iter()
                .map(|v| Vertex(obs_list.iter().position(|&u| u == v).unwrap() as u8))
                .collect()
        };
        for (ii, &vi) in obs_list.iter().enumerate() {
            for &vj in &obs_list[ii + 1..] {
                let x = VSet::singleton(vi);
                let y = VSet::singleton(vj);
                let rest = observed.minus(x).minus(y);
                for z in rest.subsets() {
                    assert_eq!(
                        m_separated(&g, x, y, z),
                        m_separated(&proj, reindex(x), reindex(y), reindex(z)),
                        "{g:?} observed {observed:?}: {vi} vs {vj} given {z:?}"
                    );
                }
            }
        }
    }
}

/// Saturated graphs of every flavor carry `2^n - 1` parameters.
#[test]
fn complete_graphs_are_saturated() {
    for n in 1..=4usize {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let mut dag = Admg::new(names.clone()).unwrap();
        let mut bi = Admg::new(names.clone()).unwrap();
        let mut bow = Admg::new(names).unwrap();
        for a in 0..n as u8 {
            for b in (a + 1)..n as u8 {
                dag.add_directed(Vertex(a), Vertex(b)).unwrap();
                bi.add_bidirected(Vertex(a), Vertex(b)).unwrap();
                bow.add_directed(Vertex(a), Vertex(b)).unwrap();
                bow.add_bidirected(Vertex(a), Vertex(b)).unwrap();
            }
        }
        for g in [dag, bi, bow] {
            assert_eq!(
                intrinsic_catalog(&g).unwrap().param_count(),
                (1 << n) - 1,
                "{g:?}"
            );
        }
    }
}

/// Any two valid fixing orders reach the same graph, not just the same
/// kernel.
#[test]
fn fixing_order_graph_invariance() {
    let mut graphs = Vec::new();
    for n in 1..=3 {
        graphs.extend(enumerate_admgs(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..150 {
        graphs.push(random_admg(4, &mut rng));
    }
    graphs.par_iter().for_each(|g| {
        let reach = Reachable::explore(g);
        for set in reach.sets() {
            let orders = all_fix_orders(g, g.random().minus(set));
            let apply = |order: &[Vertex]| -> Admg {
                let mut cur = g.clone();
                for &v in order {
                    cur = cur.fix(v).unwrap();
                }
                cur
            };
            let reference = apply(&orders[0]);
            for order in &orders[1..] {
                assert_eq!(apply(order), reference, "{g:?} set {set:?}");
            }
        }
    });
}

/// Ancestral sampling is unbiased: chi-square against the exact joint
/// stays below the df=15 critical value at p = 0.001.
#[test]
fn sampling_matches_exact_joint() {
    use nmm_core::sim::{build_verma4, random_parameters, FaithfulnessConfig};
    let model = random_parameters(&build_verma4(), 7, &FaithfulnessConfig::default()).unwrap();
    let exact = model.exact_observed_joint();
    let n = 1_000_000usize;
    let data = model.sample(n, 99);
    let chi2: f64 = exact
        .iter()
        .enumerate()
        .map(|(m, &p)| {
            let expected = p * n as f64;
            let observed = data.count_at_mask(m);
            (observed - expected).powi(2) / expected
        })
        .sum();
    // Upper 0.001 quantile of chi-square with 15 degrees of freedom.
    assert!(chi2 < 37.697, "chi2 = {chi2}");
}

/// On model members of a bidirected graph, the parameters read off as
/// connected-set zero-probabilities of the joint.
#[test]
fn bidirected_parameters_are_zero_probabilities() {
    use nmm_core::params::sample::random_feasible_theta;
    let g = Admg::parse(4, &[], &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")]).unwrap();
    let param = Parameterization::new(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let p = param.theta_to_joint(&random_feasible_theta(&param, &mut rng)).unwrap();
        let theta = param.joint_to_theta(&p).unwrap();
        for (e, entry) in param.catalog().entries.iter().enumerate() {
            let want: f64 = (0..16usize)
                .filter(|m| m & (entry.set.0 as usize) == 0)
                .map(|m| p.values[m])
                .sum();
            assert!(
                (theta.get(e, 0) - want).abs() < 1e-10,
                "{:?}: {} vs {want}",
                entry.set,
                theta.get(e, 0)
            );
        }
    }
}

/// The count of distinct labeled graphs visited by one neighbor step
/// equals the count of moves, and every move validates.
#[test]
fn neighbors_are_valid_and_distinct_from_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let g = random_admg(4, &mut rng);
        let key = g.canonical_key();
        for (mv, cand) in nmm_core::neighbors(&g) {
            cand.validate().unwrap_or_else(|e| panic!("{mv:?}: {e}"));
            assert_ne!(cand.canonical_key(), key, "{mv:?} produced the same graph");
        }
    }
}

mod prop {
    use nmm_core::fit::Dataset;
    use nmm_core::{Admg, Vertex};
    use proptest::prelude::*;

    proptest! {
        /// Counts survive a CSV round trip exactly.
        #[test]
        fn dataset_csv_round_trip(counts in proptest::collection::vec(0u32..400, 8)) {
            let names: Vec<String> = (1..=3).map(|i| format!("x{i}")).collect();
            let d = Dataset::new(names, counts.iter().map(|&c| c as f64).collect()).unwrap();
            prop_assert_eq!(Dataset::from_csv(&d.to_csv()).unwrap(), d);
        }

        /// Rebuilding a graph from its own (reversed) edge lists yields
        /// the same canonical key and the same JSON.
        #[test]
        fn canonical_key_ignores_insertion_order(
            dir_bits in 0u16..(1 << 10),
            bi_bits in 0u16..(1 << 10),
        ) {
            let pairs: Vec<(u8, u8)> =
                (0..5u8).flat_map(|a| ((a + 1)..5).map(move |b| (a, b))).collect();
            let mut g = Admg::new((1..=5).map(|i| format!("x{i}"))).unwrap();
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if (dir_bits >> i) & 1 == 1 {
                    g.add_directed(Vertex(a), Vertex(b)).unwrap();
                }
                if (bi_bits >> i) & 1 == 1 {
                    g.add_bidirected(Vertex(a), Vertex(b)).unwrap();
                }
            }
            let mut rebuilt = Admg::new((1..=5).map(|i| format!("x{i}"))).unwrap();
            for &(a, b) in g.bidirected_edges().iter().rev() {
                rebuilt.add_bidirected(b, a).unwrap();
            }
            for &(a, b) in g.directed_edges().iter().rev() {
                rebuilt.add_directed(a, b).unwrap();
            }
            prop_assert_eq!(rebuilt.canonical_key(), g.canonical_key());
            prop_assert_eq!(rebuilt.to_json(), g.to_json());
        }
    }
}
