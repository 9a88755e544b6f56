//! Student's-t soft assignments, sharpened targets and KL divergences.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Row-stochastic `n×K` membership matrix with strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    q: DenseMatrix,
}

impl SoftAssignment {
    /// Wraps `q` after checking that rows sum to one and entries are positive.
    pub fn new(q: DenseMatrix) -> Result<Self> {
        for (i, row) in q.iter_rows().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::Parameter(format!(
                    "row {i} is not a strictly positive distribution (sum {s})"
                )));
            }
        }
        Ok(Self { q })
    }

    pub(crate) fn from_raw(q: DenseMatrix) -> Self {
        Self { q }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn num_nodes(&self) -> usize {
        self.q.rows()
    }

    pub fn num_clusters(&self) -> usize {
        self.q.cols()
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.q
            .iter_rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Kernel values `w_ik = 1 / (1 + ‖z_i − μ_k‖²)` and their row-normalized form.
#[derive(Debug, Clone)]
pub(crate) struct KernelPass {
    pub kernel: DenseMatrix,
    pub q: DenseMatrix,
}

pub(crate) fn kernel_pass(z: &DenseMatrix, centers: &DenseMatrix) -> Result<KernelPass> {
    if z.cols() != centers.cols() {
        return Err(Error::shape(
            "soft_assignment",
            format!("embeddings have {} dims, centers {}", z.cols(), centers.cols()),
        ));
    }
    let (n, k) = (z.rows(), centers.rows());
    let mut kernel = DenseMatrix::zeros(n, k);
    let mut q = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let zi = z.row(i);
        let mut total = 0.0;
        for c in 0..k {
            let d2: f64 = zi
                .iter()
                .zip(centers.row(c))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let w = 1.0 / (1.0 + d2);
            kernel.set(i, c, w);
            total += w;
        }
        for c in 0..k {
            q.set(i, c, kernel.get(i, c) / total);
        }
    }
    Ok(KernelPass { kernel, q })
}

/// `q_ik ∝ (1 + ‖z_i − μ_k‖²)^{-1}`, normalized over clusters.
pub fn soft_assignment(z: &DenseMatrix, centers: &DenseMatrix) -> Result<SoftAssignment> {
    Ok(SoftAssignment {
        q: kernel_pass(z, centers)?.q,
    })
}

/// `p_ik ∝ q_ik² / f_k` with cluster frequencies `f_k = Σ_i q_ik`.
pub fn target_distribution(q: &SoftAssignment) -> SoftAssignment {
    let m = &q.q;
    let freq = {
        let mut f = vec![0.0; m.cols()];
        for r in m.iter_rows() {
            for (fk, v) in f.iter_mut().zip(r) {
                *fk += v;
            }
        }
        f
    };
    let mut p = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = p.row_mut(i);
        for (k, v) in row.iter_mut().enumerate() {
            let qik = m.get(i, k);
            *v = qik * qik / freq[k];
        }
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    SoftAssignment { q: p }
}

/// `Σ_i Σ_k p_ik log(p_ik / q_ik)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &DenseMatrix, q: &DenseMatrix) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::shape(
            "kl_divergence",
            format!("{:?} vs {:?}", p.shape(), q.shape()),
        ));
    }
    Ok(p.data()
        .iter()
        .zip(q.data())
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}

/// Row-wise argmax; ties go to the smallest cluster index.
pub fn hard_assign(q: &DenseMatrix) -> Vec<usize> {
    q.iter_rows()
        .map(|r| {
            let mut best = 0;
            for (k, &v) in r.iter().enumerate().skip(1) {
                if v > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Chain rule from `g_s = ∂L/∂s_ik` (with `s_ik = ‖z_i − μ_k‖²`) to the
/// embeddings and the centers.
pub(crate) fn distance_backward(
    z: &DenseMatrix,
    centers: &DenseMatrix,
    g_s: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    // dz_i = 2 (Σ_k g_ik) z_i − 2 Σ_k g_ik μ_k
    // dμ_k = 2 (Σ_i g_ik) μ_k − 2 Σ_i g_ik z_i
    let mut dz = g_s.matmul(centers)?;
    dz.scale_inplace(-2.0);
    for i in 0..z.rows() {
        let gi: f64 = g_s.row(i).iter().sum();
        for (d, zv) in dz.row_mut(i).iter_mut().zip(z.row(i)) {
            *d += 2.0 * gi * zv;
        }
    }
    let mut dmu = g_s.matmul_tn(z)?;
    dmu.scale_inplace(-2.0);
    for c in 0..centers.rows() {
        let gc: f64 = (0..g_s.rows()).map(|i| g_s.get(i, c)).sum();
        for (d, mv) in dmu.row_mut(c).iter_mut().zip(centers.row(c)) {
            *d += 2.0 * gc * mv;
        }
    }
    Ok((dz, dmu))
}

/// `∂/∂s` of `coeff · KL(target ‖ Q)` with the target held fixed:
/// `coeff · w_ik (t_ik − q_ik)`.
pub(crate) fn fixed_target_kl_grad(pass: &KernelPass, target: &DenseMatrix, coeff: f64) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(pass.q.rows(), pass.q.cols());
    for ((gv, (&w, &q)), &t) in g
        .data_mut()
        .iter_mut()
        .zip(pass.kernel.data().iter().zip(pass.q.data()))
        .zip(target.data())
    {
        *gv = coeff * w * (t - q);
    }
    g
}

/// `∂/∂s` of `coeff · KL(Q ‖ R)` through the first argument `Q`:
/// `−coeff · w_ik q_ik (log(q_ik / r_ik) − KL_i)`.
pub(crate) fn source_side_kl_grad(pass: &KernelPass, other: &DenseMatrix, coeff: f64) -> DenseMatrix {
    let (n, k) = pass.q.shape();
    let mut g = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let q = pass.q.row(i);
        let r = other.row(i);
        let logs: Vec<f64> = q.iter().zip(r).map(|(a, b)| (a / b).ln()).collect();
        let row_kl: f64 = q.iter().zip(&logs).map(|(a, l)| a * l).sum();
        for c in 0..k {
            g.set(i, c, -coeff * pass.kernel.get(i, c) * q[c] * (logs[c] - row_kl));
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn single_cluster_is_certain() {
        let q = soft_assignment(&m(&[vec![1.0, 2.0], vec![-3.0, 0.5]]), &m(&[vec![0.0, 0.0]])).unwrap();
        assert!(q.matrix().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let q = soft_assignment(&m(&[vec![0.0]]), &m(&[vec![-2.0], vec![2.0]])).unwrap();
        assert_eq!(q.matrix().row(0), &[0.5, 0.5]);
    }

    #[test]
    fn one_dimensional_hand_value() {
        // Kernels 1 and 1/2, so q = (2/3, 1/3).
        let q = soft_assignment(&m(&[vec![0.0]]), &m(&[vec![0.0], vec![1.0]])).unwrap();
        assert!((q.matrix().get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((q.matrix().get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_q_gives_uniform_p() {
        let q = SoftAssignment::new(DenseMatrix::filled(5, 4, 0.25)).unwrap();
        let p = target_distribution(&q);
        assert!(p.matrix().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_node_target_equals_q() {
        let q = SoftAssignment::new(m(&[vec![0.2, 0.5, 0.3]])).unwrap();
        let p = target_distribution(&q);
        for (a, b) in p.matrix().data().iter().zip(q.matrix().data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_rows_are_fixed_points() {
        let q = m(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = target_distribution(&SoftAssignment { q: q.clone() });
        assert_eq!(p.matrix(), &q);
    }

    #[test]
    fn kl_hand_values() {
        let p = m(&[vec![1.0, 0.0]]);
        let q = m(&[vec![0.5, 0.5]]);
        assert!((kl_divergence(&p, &q).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
        assert!(kl_divergence(&p, &m(&[vec![1.0]])).is_err());
    }

    #[test]
    fn hard_assign_tie_and_one_hot() {
        let q = m(&[vec![0.5, 0.5, 0.0], vec![0.0, 1.0, 0.0], vec![0.2, 0.3, 0.5]]);
        assert_eq!(hard_assign(&q), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn rows_sum_to_one(seed in any::<u64>(), n in 1usize..8, k in 1usize..5, d in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let z = DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-5.0..5.0));
            let c = DenseMatrix::from_fn(k, d, |_, _| rng.random_range(-5.0..5.0));
            let q = soft_assignment(&z, &c).unwrap();
            prop_assert!(q.max_row_sum_error() <= 1e-12);
            prop_assert!(q.matrix().data().iter().all(|&v| v > 0.0));
            let p = target_distribution(&q);
            prop_assert!(p.max_row_sum_error() <= 1e-12);
            let kl = kl_divergence(p.matrix(), q.matrix()).unwrap();
            prop_assert!(kl >= -1e-15);
            // Linear-scan argmax oracle.
            for (i, &lab) in hard_assign(q.matrix()).iter().enumerate() {
                let row = q.matrix().row(i);
                let mut best = 0;
                for c in 0..row.len() {
                    if row[c] > row[best] { best = c; }
                }
                prop_assert_eq!(lab, best);
            }
        }

        #[test]
        fn sharpening_keeps_argmax_with_balanced_columns(a in 0.34f64..0.98, b in 0.0f64..1.0) {
            // Rows are cyclic shifts of one distribution, so column sums match.
            let rest = 1.0 - a;
            let row = [a, rest * b, rest * (1.0 - b)];
            prop_assume!(row[1] < a && row[2] < a);
            let q = DenseMatrix::from_fn(3, 3, |i, j| row[(j + 3 - i) % 3]);
            let p = target_distribution(&SoftAssignment { q: q.clone() });
            prop_assert_eq!(hard_assign(p.matrix()), hard_assign(&q));
        }
    }
}
