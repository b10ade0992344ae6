use ndarray::Array2;

use crate::error::{Error, Result};

/// Optimal one-to-one matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `mapping[row]` is the column assigned to `row`.
    pub mapping: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// row/column potentials, O(n³)).
pub fn hungarian(cost: &Array2<f64>) -> Result<Assignment> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::Shape(format!(
            "assignment needs a square matrix, got {n}×{m}"
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("assignment costs must be finite".into()));
    }
    // 1-based arrays; column 0 is a virtual sink.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[[r - 1, col - 1]] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    next = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = next;
            if owner[col0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut mapping = vec![0; n];
    for col in 1..=n {
        mapping[owner[col] - 1] = col - 1;
    }
    let total = mapping.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
    Ok(Assignment {
        mapping,
        cost: total,
    })
}

/// Accuracy (percent) of a clustering after matching clusters to labels so
/// as to maximise agreement.
pub fn cluster_accuracy(cluster_labels: &[usize], true_labels: &[usize], k: usize) -> Result<f64> {
    if cluster_labels.len() != true_labels.len() {
        return Err(Error::Shape(format!(
            "{} cluster labels for {} samples",
            cluster_labels.len(),
            true_labels.len()
        )));
    }
    if cluster_labels.is_empty() {
        return Ok(0.0);
    }
    let mut counts = Array2::<f64>::zeros((k, k));
    for (&c, &y) in cluster_labels.iter().zip(true_labels) {
        if c >= k || y >= k {
            return Err(Error::Config(format!("labels must lie in [0, {k})")));
        }
        counts[[c, y]] += 1.0;
    }
    let assignment = hungarian(&counts.mapv(|v| -v))?;
    Ok(100.0 * -assignment.cost / cluster_labels.len() as f64)
}
