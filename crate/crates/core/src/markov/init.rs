//! Seeded k-means used to initialise emission parameters.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;

const MAX_SAMPLE: usize = 4_000;
const LLOYD_ITERS: usize = 25;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(row: ArrayView1<f64>, centroids: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = sq_dist(row, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Clusters `rows` into `k` groups (k-means++ seeding, Lloyd refinement on a
/// subsample) and returns the per-row labels over the full input.
pub(crate) fn kmeans<R: Rng + ?Sized>(rows: ArrayView2<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = rows.nrows();
    if k <= 1 || n == 0 {
        return vec![0; n];
    }
    let picked: Vec<usize> = if n > MAX_SAMPLE {
        let mut idx = sample(rng, n, MAX_SAMPLE).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let data = rows.select(Axis(0), &picked);
    let m = data.nrows();
    let d = data.ncols();

    // k-means++ seeding
    let mut centroids = Array2::zeros((k, d));
    centroids.row_mut(0).assign(&data.row(rng.random_range(0..m)));
    let mut dist: Vec<f64> = data
        .axis_iter(Axis(0))
        .map(|r| sq_dist(r, centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let choice = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = m - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        centroids.row_mut(c).assign(&data.row(choice));
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            dist[i] = dist[i].min(sq_dist(r, centroids.row(c)));
        }
    }

    let mut labels = vec![0; m];
    for _ in 0..LLOYD_ITERS {
        let mut changed = false;
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            let c = nearest(r, &centroids);
            if c != labels[i] {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = Array1::<f64>::zeros(k);
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            let mut s = sums.row_mut(labels[i]);
            s += &r;
            counts[labels[i]] += 1.0;
        }
        for c in 0..k {
            if counts[c] > 0.0 {
                let mean = &sums.row(c) / counts[c];
                centroids.row_mut(c).assign(&mean);
            }
        }
        if !changed {
            break;
        }
    }

    rows.axis_iter(Axis(0))
        .map(|r| nearest(r, &centroids))
        .collect()
}
