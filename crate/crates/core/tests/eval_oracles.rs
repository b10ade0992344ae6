mod common;

use lilac::data::{make_blobs, BlobsSpec, Dataset, Split};
use lilac::eval::{
    accuracy, cluster_accuracy, extract_features, hungarian, kmeans, linear_probe, FeatureMatrix,
};
use lilac::nncore::{Activation, Model};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum-cost permutation by exhaustive search.
fn brute_force(cost: &Array2<f64>) -> (f64, Vec<usize>) {
    fn go(
        cost: &Array2<f64>,
        row: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        best: &mut (f64, Vec<usize>),
    ) {
        let n = cost.nrows();
        if row == n {
            let total: f64 = cur.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
            if total < best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                go(cost, row + 1, used, cur, best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    go(
        cost,
        0,
        &mut vec![false; cost.nrows()],
        &mut Vec::new(),
        &mut best,
    );
    best
}

fn mapped_cost(cost: &Array2<f64>, mapping: &[usize]) -> f64 {
    mapping.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum()
}

#[test]
fn hungarian_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 1..=6 {
        for trial in 0..300 {
            let integer = trial % 2 == 0;
            let cost = Array2::from_shape_fn((k, k), |_| {
                if integer {
                    rng.random_range(0..10) as f64
                } else {
                    rng.random_range(-5.0..5.0)
                }
            });
            let (want, want_map) = brute_force(&cost);
            let got = hungarian(&cost).unwrap();
            let mut sorted = got.mapping.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..k).collect::<Vec<_>>());
            assert_eq!(mapped_cost(&cost, &got.mapping), want, "k={k}\n{cost}");
            assert!((got.cost - want).abs() < 1e-9);
            if !integer {
                assert_eq!(got.mapping, want_map);
            }
        }
    }
}

#[test]
fn hungarian_rejects_bad_input() {
    assert_eq!(
        hungarian(&Array2::zeros((2, 3))).unwrap_err().exit_code(),
        4
    );
    let mut cost = Array2::zeros((2, 2));
    cost[[0, 1]] = f64::NAN;
    assert_eq!(hungarian(&cost).unwrap_err().exit_code(), 4);
}

#[test]
fn cluster_accuracy_is_permutation_invariant_and_perfect_on_relabelling() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let k = 6;
    let labels: Vec<usize> = (0..600).map(|_| rng.random_range(0..k)).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng);
    let relabelled: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
    assert_eq!(cluster_accuracy(&relabelled, &labels, k).unwrap(), 100.0);

    let clusters: Vec<usize> = (0..600).map(|_| rng.random_range(0..k)).collect();
    let base = cluster_accuracy(&clusters, &labels, k).unwrap();
    let shuffled: Vec<usize> = clusters.iter().map(|&c| perm[c]).collect();
    assert_eq!(cluster_accuracy(&shuffled, &labels, k).unwrap(), base);
}

#[test]
fn random_clusters_score_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in [2usize, 5, 10] {
        let labels: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..k)).collect();
        let clusters: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..k)).collect();
        let acc = cluster_accuracy(&clusters, &labels, k).unwrap();
        let chance = 100.0 / k as f64;
        assert!((acc - chance).abs() < 5.0, "k={k} acc={acc}");
    }
}

#[test]
fn kmeans_objective_never_increases() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = common::random_matrix(300, 4, 3.0, &mut rng);
        let km = kmeans(&points, 7, seed, 200).unwrap();
        assert!(!km.objective.is_empty());
        for w in km.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", km.objective);
        }
        // the final objective matches the reported assignment
        let recomputed: f64 = points
            .rows()
            .into_iter()
            .zip(&km.assignments)
            .map(|(p, &c)| (&p - &km.centroids.row(c)).mapv(|v| v * v).sum())
            .sum();
        assert!((recomputed - km.objective.last().unwrap()).abs() < 1e-6 * recomputed.max(1.0));
        assert!(km.assignments.iter().all(|&c| c < 7));
    }
}

#[test]
fn kmeans_recovers_separated_blobs() {
    let (_, test) = make_blobs(&BlobsSpec {
        classes: 6,
        per_class: 300,
        dim: 10,
        sep: 8.0,
        seed: 3,
    })
    .unwrap();
    // a single seeding can land in a local optimum; the best of a few cannot
    let runs: Vec<_> = (0..8)
        .map(|seed| kmeans(test.features(), 6, seed, 100).unwrap())
        .collect();
    let best = runs
        .iter()
        .min_by(|a, b| {
            a.objective
                .last()
                .unwrap()
                .total_cmp(b.objective.last().unwrap())
        })
        .unwrap();
    let acc = cluster_accuracy(&best.assignments, test.labels(), 6).unwrap();
    assert!(acc >= 99.0, "cluster accuracy {acc}");
    assert_eq!(&kmeans(test.features(), 6, 0, 100).unwrap(), &runs[0]);
}

fn as_features(ds: &Dataset) -> FeatureMatrix {
    FeatureMatrix {
        features: ds.features().clone(),
        labels: ds.labels().to_vec(),
        num_labels: ds.num_labels(),
    }
}

#[test]
fn probe_separates_separable_features() {
    let (train, test) = make_blobs(&BlobsSpec {
        classes: 8,
        per_class: 250,
        dim: 16,
        sep: 6.0,
        seed: 0,
    })
    .unwrap();
    let acc = linear_probe(&as_features(&train), &as_features(&test), 1).unwrap();
    assert!(acc >= 99.0, "probe accuracy {acc}");
}

#[test]
fn probe_on_random_labels_is_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let make = |n: usize, rng: &mut ChaCha8Rng| FeatureMatrix {
        features: common::random_matrix(n, 8, 1.0, rng),
        labels: (0..n).map(|_| rng.random_range(0..4)).collect(),
        num_labels: 4,
    };
    let train = make(800, &mut rng);
    let test = make(2000, &mut rng);
    let acc = linear_probe(&train, &test, 0).unwrap();
    assert!((acc - 25.0).abs() < 5.0, "probe accuracy {acc}");
}

#[test]
fn probe_needs_two_classes() {
    let f = FeatureMatrix {
        features: Array2::ones((4, 2)),
        labels: vec![1; 4],
        num_labels: 3,
    };
    assert_eq!(linear_probe(&f, &f, 0).unwrap_err().exit_code(), 2);
}

#[test]
fn accuracy_matches_reference_predictions() {
    let (_, test) = make_blobs(&BlobsSpec {
        classes: 5,
        per_class: 100,
        dim: 6,
        sep: 1.0,
        seed: 2,
    })
    .unwrap();
    for seed in 0..4 {
        let model = Model::new(6, &[10, 7], 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let logits = common::naive_forward(&model, &common::rows(test.features()));
        let correct = logits
            .iter()
            .zip(test.labels())
            .filter(|(row, &y)| common::first_argmax(row) == y)
            .count();
        let want = 100.0 * correct as f64 / test.len() as f64;
        assert_eq!(accuracy(&model, &test).unwrap(), want);
    }
}

#[test]
fn features_are_the_penultimate_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = common::random_matrix(2500, 5, 1.0, &mut rng);
    let labels: Vec<usize> = (0..2500).map(|i| i % 3).collect();
    let ds = Dataset::new(x, labels.clone(), 3, Split::Test).unwrap();
    let model = Model::new(5, &[9, 4], 3, &mut rng).unwrap();

    let mut truncated = model.layers()[..2].to_vec();
    assert_eq!(truncated[1].activation, Activation::Relu);
    truncated[1].activation = Activation::None;
    let head = Model::from_layers(truncated).unwrap();
    let want: Vec<Vec<f64>> = common::naive_forward(&head, &common::rows(ds.features()))
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();

    let got = extract_features(&model, &ds).unwrap();
    assert_eq!(got.labels, labels);
    assert_eq!(got.features.dim(), (2500, 4));
    for (g, w) in got.features.rows().into_iter().zip(&want) {
        for (a, b) in g.iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    let single = Model::new(5, &[], 3, &mut rng).unwrap();
    assert_eq!(extract_features(&single, &ds).unwrap_err().exit_code(), 4);
}

#[test]
fn feature_matrix_flat_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fm = FeatureMatrix {
        features: common::random_matrix(7, 3, 2.0, &mut rng),
        labels: vec![0, 1, 2, 0, 1, 2, 0],
        num_labels: 3,
    };
    let path = dir.path().join("features.bin");
    fm.save_flat(&path).unwrap();
    assert_eq!(FeatureMatrix::load_flat(&path).unwrap(), fm);
}
