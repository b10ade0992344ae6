use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned centroid after each
    /// assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centre uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen centre.
fn seed_centroids(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points
        .rows()
        .into_iter()
        .map(|p| sq_dist(p, points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if nearest[pick] == 0.0 {
                pick = nearest.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // every point coincides with a centre; take any unused index
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen.push(pick);
        for (d, p) in nearest.iter_mut().zip(points.rows()) {
            *d = d.min(sq_dist(p, points.row(pick)));
        }
    }
    points.select(ndarray::Axis(0), &chosen)
}

/// Assigns each point to its nearest centroid (lowest index on ties).
fn assign(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .rows()
        .into_iter()
        .map(|p| {
            centroids
                .rows()
                .into_iter()
                .map(|c| sq_dist(p, c))
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (j, d)| if d < best.1 { (j, d) } else { best },
                )
        })
        .unzip()
}

/// Lloyd's algorithm from k-means++ seeds. Stops at an assignment fixpoint
/// or after `max_iters` rounds. A cluster that loses all its points is
/// re-seeded at the point farthest from its current centroid.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} must lie in [1, {n}]")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("k-means input must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let (mut assignments, mut dists) = assign(points, &centroids);
    let mut objective = vec![dists.iter().sum()];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &a) in points.rows().into_iter().zip(&assignments) {
            let mut row = sums.row_mut(a);
            row += &p;
            counts[a] += 1;
        }
        for (j, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = &sums.row(j) / count as f64;
                centroids.row_mut(j).assign(&mean);
            } else {
                let far = dists
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &d)| if d > dists[best] { i } else { best });
                centroids.row_mut(j).assign(&points.row(far));
                dists[far] = 0.0;
            }
        }
        let (next, next_dists) = assign(points, &centroids);
        objective.push(next_dists.iter().sum());
        dists = next_dists;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeans {
        assignments,
        centroids,
        objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [-3.0, 2.0]];
        let km = kmeans(&pts, 4, 1, 10).unwrap();
        assert_eq!(*km.objective.last().unwrap(), 0.0);
        let mut a = km.assignments.clone();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn two_far_blobs() {
        let pts = array![
            [0.0, 0.1],
            [0.1, 0.0],
            [-0.1, 0.0],
            [10.0, 10.1],
            [10.1, 10.0],
            [9.9, 10.0]
        ];
        let km = kmeans(&pts, 2, 3, 50).unwrap();
        let a = &km.assignments;
        assert!(a[0] == a[1] && a[1] == a[2]);
        assert!(a[3] == a[4] && a[4] == a[5]);
        assert_ne!(a[0], a[3]);
    }

    #[test]
    fn rejects_bad_k() {
        let pts = array![[0.0], [1.0]];
        assert!(kmeans(&pts, 0, 0, 5).is_err());
        assert!(kmeans(&pts, 3, 0, 5).is_err());
    }

    #[test]
    fn duplicate_points_still_seed() {
        let pts = array![[1.0], [1.0], [1.0]];
        let km = kmeans(&pts, 3, 0, 5).unwrap();
        assert_eq!(*km.objective.last().unwrap(), 0.0);
    }
}
