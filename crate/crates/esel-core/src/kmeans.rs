//! K-means representative selection: cluster the pool, return the demo
//! nearest each centroid.
//!
//! Embeddings are L2-normalized before clustering so the result is consistent
//! with the cosine geometry the other methods use. Initialization is greedy
//! farthest-point seeding from a seed-chosen first point; Lloyd iteration
//! runs to convergence or 100 iterations. All ties break toward the lowest
//! pool index.

use rand::Rng;

use crate::pool::Pool;
use crate::rng::rng_from;
use crate::{Error, Real, Result};

const MAX_ITERATIONS: usize = 100;

fn normalized_rows(pool: &Pool) -> Vec<Vec<Real>> {
    pool.records()
        .iter()
        .map(|r| {
            let row: Vec<Real> = r.embedding.iter().map(|&x| x as Real).collect();
            let norm = row.iter().map(|x| x * x).sum::<Real>().sqrt();
            row.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

fn sq_dist(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest centroid index.
fn nearest_centroid(point: &[Real], centroids: &[Vec<Real>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Farthest-point seeding: start from `first`, then repeatedly take the point
/// with maximum distance to its nearest chosen seed (ties lowest index).
fn farthest_point_seeds(rows: &[Vec<Real>], k: usize, first: usize) -> Vec<usize> {
    let n = rows.len();
    let mut seeds = vec![first];
    let mut min_d: Vec<Real> = rows.iter().map(|r| sq_dist(r, &rows[first])).collect();
    while seeds.len() < k {
        let mut pick = None;
        let mut pick_d = Real::NEG_INFINITY;
        for (i, &d) in min_d.iter().enumerate() {
            if seeds.contains(&i) {
                continue;
            }
            if d > pick_d {
                pick = Some(i);
                pick_d = d;
            }
        }
        let next = pick.expect("k <= n");
        for (d, row) in min_d.iter_mut().zip(&rows[..n]) {
            *d = d.min(sq_dist(row, &rows[next]));
        }
        seeds.push(next);
    }
    seeds
}

/// Run k-means and return one representative demo index per cluster, in
/// cluster (seeding) order. Representatives are guaranteed distinct even for
/// degenerate pools where clusters empty out.
pub fn kmeans_representatives(pool: &Pool, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(Error::config(format!("k = {k} not in 1..={n}")));
    }
    let rows = normalized_rows(pool);
    let mut rng = rng_from(seed);
    let first = rng.gen_range(0..n);
    let seeds = farthest_point_seeds(&rows, k, first);
    let mut centroids: Vec<Vec<Real>> = seeds.iter().map(|&i| rows[i].clone()).collect();

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let next: Vec<usize> = rows
            .iter()
            .map(|r| nearest_centroid(r, &centroids))
            .collect();
        let converged = next == assignment;
        assignment = next;

        let mut sums = vec![vec![0.0; pool.dim()]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, &x) in sums[a].iter_mut().zip(&rows[i]) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as Real).collect();
            } else {
                // Re-seed an emptied cluster from the point farthest from its
                // assigned centroid (ties lowest index).
                let mut pick = 0;
                let mut pick_d = Real::NEG_INFINITY;
                for i in 0..n {
                    let d = sq_dist(&rows[i], &centroids[assignment[i]]);
                    if d > pick_d {
                        pick = i;
                        pick_d = d;
                    }
                }
                centroids[j] = rows[pick].clone();
            }
        }
        if converged {
            break;
        }
    }

    // Representative per cluster: member nearest the centroid, lowest index on
    // ties. Clusters left empty by a degenerate pool are filled with the
    // lowest-index demos not already chosen, keeping the k picks distinct.
    let mut reps: Vec<Option<usize>> = vec![None; k];
    for j in 0..k {
        let mut best = None;
        let mut best_d = Real::INFINITY;
        for i in 0..n {
            if assignment[i] == j {
                let d = sq_dist(&rows[i], &centroids[j]);
                if d < best_d {
                    best = Some(i);
                    best_d = d;
                }
            }
        }
        reps[j] = best;
    }
    let mut used: Vec<usize> = reps.iter().flatten().copied().collect();
    for rep in reps.iter_mut() {
        if rep.is_none() {
            let fill = (0..n).find(|i| !used.contains(i)).expect("k <= n");
            used.push(fill);
            *rep = Some(fill);
        }
    }
    Ok(reps.into_iter().map(|r| r.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{ExampleRecord, FieldSet, Role};

    fn pool_of(embeddings: &[Vec<f32>]) -> Pool {
        Pool::new(
            embeddings
                .iter()
                .enumerate()
                .map(|(i, e)| ExampleRecord {
                    id: format!("d{i}"),
                    role: Role::Demo,
                    dataset: "unit".into(),
                    fields: FieldSet {
                        question: "q".into(),
                        answer: Some("a".into()),
                        support: None,
                    },
                    embedding: e.clone(),
                    meta: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn axis_clusters_pick_lowest_index_members() {
        // After normalization the first three collapse to (1,0) and the last
        // three to (0,1); each cluster's representative is its lowest index.
        let pool = pool_of(&[
            vec![1.0, 0.0],
            vec![0.9, 0.0],
            vec![0.8, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.9],
            vec![0.0, 0.8],
        ]);
        for seed in 0..10 {
            let mut reps = kmeans_representatives(&pool, 2, seed).unwrap();
            reps.sort_unstable();
            assert_eq!(reps, vec![0, 3], "seed {seed}");
        }
    }

    #[test]
    fn k_equals_n_returns_every_demo() {
        let pool = pool_of(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.5, 0.5],
        ]);
        let mut reps = kmeans_representatives(&pool, 4, 3).unwrap();
        reps.sort_unstable();
        assert_eq!(reps, vec![0, 1, 2, 3]);
    }

    #[test]
    fn identical_demos_still_yield_k_distinct_indices() {
        let pool = pool_of(&vec![vec![2.0, 1.0]; 5]);
        let reps = kmeans_representatives(&pool, 3, 42).unwrap();
        assert_eq!(reps.len(), 3);
        let mut uniq = reps.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), 3);
    }

    #[test]
    fn deterministic_per_seed() {
        let pool = pool_of(&[
            vec![1.0, 0.1],
            vec![0.3, 0.9],
            vec![-0.8, 0.2],
            vec![0.9, -0.4],
            vec![0.2, -1.0],
        ]);
        let a = kmeans_representatives(&pool, 3, 5).unwrap();
        let b = kmeans_representatives(&pool, 3, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_k_beyond_pool() {
        let pool = pool_of(&[vec![1.0]]);
        assert!(kmeans_representatives(&pool, 2, 0).is_err());
    }
}
