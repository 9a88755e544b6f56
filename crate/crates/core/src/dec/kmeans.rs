//! Lloyd's K-means with k-means++ seeding and independent restarts.

use rand::Rng;

use super::model::ClusterCenters;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: ClusterCenters,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center for each row (ties to the smaller index) and its distance.
fn assign(z: &DenseMatrix, centers: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    z.iter_rows()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, row) in centers.iter_rows().enumerate() {
                let d = sq_dist(p, row);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Within-cluster SSE of a labeling, with each center at its cluster mean.
pub fn labeling_sse(z: &DenseMatrix, labels: &[usize], k: usize) -> f64 {
    let d = z.cols();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (p, &l) in z.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(p) {
            *s += v;
        }
    }
    z.iter_rows()
        .zip(labels)
        .map(|(p, &l)| {
            let c = counts[l] as f64;
            p.iter()
                .zip(&sums[l * d..(l + 1) * d])
                .map(|(v, s)| (v - s / c) * (v - s / c))
                .sum::<f64>()
        })
        .sum()
}

fn plus_plus_init<R: Rng + ?Sized>(z: &DenseMatrix, k: usize, rng: &mut R) -> DenseMatrix {
    let n = z.rows();
    let mut centers = DenseMatrix::zeros(k, z.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(z.row(first));
    let mut dist: Vec<f64> = z.iter_rows().map(|p| sq_dist(p, z.row(first))).collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(z.row(pick));
        for (d, p) in dist.iter_mut().zip(z.iter_rows()) {
            *d = d.min(sq_dist(p, z.row(pick)));
        }
    }
    centers
}

fn lloyd(z: &DenseMatrix, mut centers: DenseMatrix) -> (DenseMatrix, Vec<usize>, f64) {
    let (n, d) = z.shape();
    let k = centers.rows();
    let (mut labels, mut dist) = assign(z, &centers);
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = counts[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / cnt;
                }
            } else {
                // Re-seed an empty cluster at the point farthest from its center.
                let mut far = None;
                for i in 0..n {
                    if !taken[i] && far.is_none_or(|f: usize| dist[i] > dist[f]) {
                        far = Some(i);
                    }
                }
                if let Some(f) = far {
                    taken[f] = true;
                    dist[f] = 0.0;
                    centers.row_mut(c).copy_from_slice(z.row(f));
                }
            }
        }
        let (new_labels, new_dist) = assign(z, &centers);
        let done = new_labels == labels;
        labels = new_labels;
        dist = new_dist;
        if done {
            break;
        }
    }
    let sse = dist.iter().sum();
    (centers, labels, sse)
}

/// Best of `restarts` Lloyd runs by within-cluster SSE.
pub fn kmeans<R: Rng + ?Sized>(
    z: &DenseMatrix,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    if k == 0 || z.rows() < k {
        return Err(Error::Parameter(format!(
            "K-means needs 1 <= K <= n, got K = {k} for {} points",
            z.rows()
        )));
    }
    if restarts == 0 {
        return Err(Error::Parameter("K-means needs at least one restart".into()));
    }
    if !z.is_finite() {
        return Err(Error::Parameter("K-means input is not finite".into()));
    }
    let mut best: Option<(DenseMatrix, Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        let run = lloyd(z, plus_plus_init(z, k, rng));
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centers, labels, sse) = best.unwrap();
    Ok(KMeansResult {
        centers: ClusterCenters::new(centers)?,
        labels,
        sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k_equals_n_recovers_points() {
        let z = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![5.0, 5.0], vec![-3.0, 2.0]]).unwrap();
        let r = kmeans(&z, 3, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.sse, 0.0);
        let mut rows: Vec<Vec<f64>> = r.centers.matrix().iter_rows().map(<[f64]>::to_vec).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, vec![vec![-3.0, 2.0], vec![0.0, 1.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let z = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]]).unwrap();
        let r = kmeans(&z, 1, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.centers.matrix().row(0), &[2.0, 2.0]);
        assert_eq!(r.labels, vec![0, 0, 0]);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let z = DenseMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![9.0]]).unwrap();
        let r = kmeans(&z, 3, 4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(r.sse.abs() < 1e-12);
        assert!(r.centers.matrix().is_finite());
    }

    #[test]
    fn rejects_bad_arguments() {
        let z = DenseMatrix::zeros(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(kmeans(&z, 3, 1, &mut rng).is_err());
        assert!(kmeans(&z, 0, 1, &mut rng).is_err());
        assert!(kmeans(&z, 1, 0, &mut rng).is_err());
    }

    #[test]
    fn blobs_match_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let anchors = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)];
        let z = DenseMatrix::from_fn(12, 2, |i, j| {
            let a = anchors[i % 4];
            let base = if j == 0 { a.0 } else { a.1 };
            base + rng.random_range(-1.0..1.0)
        });
        let r = kmeans(&z, 4, 10, &mut rng).unwrap();

        // Exhaustive search over labelings with the first point fixed to 0.
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; 12];
        let total = 4usize.pow(11);
        for code in 0..total {
            let mut c = code;
            for l in labels.iter_mut().skip(1) {
                *l = c % 4;
                c /= 4;
            }
            let mut seen = [false; 4];
            labels.iter().for_each(|&l| seen[l] = true);
            if seen.iter().all(|&s| s) {
                best = best.min(labeling_sse(&z, &labels, 4));
            }
        }
        assert!((r.sse - best).abs() < 1e-9, "{} vs {best}", r.sse);
        assert!((labeling_sse(&z, &r.labels, 4) - r.sse).abs() < 1e-9);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let z = DenseMatrix::from_fn(40, 3, |_, _| g.random_range(-1.0..1.0));
        let a = kmeans(&z, 5, 4, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = kmeans(&z, 5, 4, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }
}
