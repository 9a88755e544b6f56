//! Pretraining, the joint training loop and label extraction.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::assign::{hard_assign, kl_divergence};
use super::config::{AeConfig, GaeConfig, TrainConfig};
use super::kmeans::kmeans;
use super::model::{
    ae_backward, ae_pass, ae_recon_loss, evaluate, gae_recon_grad_inplace, gae_recon_loss,
    gcn_backward, gcn_pass, inner_product_decode, ClusterCenters, GraphInput, LossTerms, ModelState, Term,
    DIVERGENCE_LIMIT,
};
use crate::error::{Error, Result};
use crate::graph::AttributedNetwork;
use crate::linalg::DenseMatrix;
use crate::metrics::{evaluate_all, hungarian_min, Scores};
use crate::nn::{Adam, LayerGrads};

fn guard(term: Term, value: f64) -> Result<f64> {
    if value.is_finite() && value.abs() <= DIVERGENCE_LIMIT {
        Ok(value)
    } else {
        Err(Error::Training {
            term: term.name().to_string(),
            value,
        })
    }
}

fn layer_slices(grads: &[LayerGrads]) -> Vec<&[f64]> {
    grads.iter().flat_map(LayerGrads::slices).collect()
}

/// Reconstruction losses seen during pretraining, one entry per epoch
/// (evaluated before that epoch's update).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PretrainReport {
    pub ae_losses: Vec<f64>,
    pub gae_losses: Vec<f64>,
}

/// Trains the AE on `L_are` and the GAE on `L_gre` independently, then seeds
/// both center matrices with K-means on the resulting embeddings.
pub fn pretrain<R: Rng + ?Sized>(
    state: &mut ModelState,
    input: &GraphInput<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<PretrainReport> {
    cfg.validate()?;
    state.validate()?;
    let x = input.attributes();
    let adj = input.net.adjacency();
    let mut report = PretrainReport::default();

    let mut ae_opt = Adam::new(cfg.lr);
    for _ in 0..cfg.pretrain_epochs {
        let fwd = ae_pass(state, x)?;
        report.ae_losses.push(guard(Term::Are, ae_recon_loss(x, fwd.x_hat())?)?);
        let dz = DenseMatrix::zeros(x.rows(), state.ae_config.embedding_dim());
        let (enc, dec) = ae_backward(state, x, &fwd, 1.0, dz)?;
        let mut grads = layer_slices(&enc);
        grads.extend(layer_slices(&dec));
        let mut params: Vec<&mut [f64]> = Vec::new();
        for l in state.encoder.iter_mut().chain(state.decoder.iter_mut()) {
            params.extend(l.param_slices_mut());
        }
        ae_opt.step(&mut params, &grads, Term::Are.name())?;
    }

    let mut gae_opt = Adam::new(cfg.lr);
    for _ in 0..cfg.pretrain_epochs {
        let fwd = gcn_pass(state, input)?;
        let mut a_hat = inner_product_decode(&fwd.z);
        report.gae_losses.push(guard(Term::Gre, gae_recon_loss(adj, &a_hat)?)?);
        gae_recon_grad_inplace(adj, &mut a_hat, 1.0);
        let mut dz = a_hat.matmul(&fwd.z)?;
        dz.scale_inplace(2.0);
        let grads = gcn_backward(state, input, &fwd, &dz)?;
        let mut params: Vec<&mut [f64]> = Vec::new();
        for l in state.gcn.iter_mut() {
            params.extend(l.param_slices_mut());
        }
        gae_opt.step(&mut params, &layer_slices(&grads), Term::Gre.name())?;
    }

    let k = state.num_clusters();
    let z_a = ae_pass(state, x)?.encoder.pop().unwrap();
    let z_g = gcn_pass(state, input)?.z;
    let ka = kmeans(&z_a, k, cfg.kmeans_restarts, rng)?;
    let kg = kmeans(&z_g, k, cfg.kmeans_restarts, rng)?;
    let perm = match_clusters(&ka.labels, &kg.labels, k);
    let old = kg.centers.matrix();
    let aligned = DenseMatrix::from_fn(k, old.cols(), |i, j| old.get(perm[i], j));
    state.centers_a = ka.centers;
    state.centers_g = ClusterCenters::new(aligned)?;
    Ok(report)
}

/// Bijection `perm` maximizing `Σ_i |{v : a_v = i, g_v = perm[i]}|`, used to
/// give graph-side cluster `i` the same meaning as attribute-side cluster `i`.
pub fn match_clusters(labels_a: &[usize], labels_g: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![vec![0.0; k]; k];
    for (&a, &g) in labels_a.iter().zip(labels_g) {
        counts[a][g] -= 1.0;
    }
    hungarian_min(&counts)
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub terms: LossTerms,
    pub total: f64,
    /// Largest deviation of a row sum of `Q_a` or `Q_g` from one.
    pub max_row_error: f64,
    /// Scores of the `Q_g` labels when ground truth was supplied.
    pub scores: Option<Scores>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Runs `cfg.max_iter` joint epochs. Each epoch recomputes the targets from the
/// current assignments, records the five terms and takes one Adam step over
/// every parameter including both center matrices.
pub fn train(
    state: &mut ModelState,
    input: &GraphInput<'_>,
    cfg: &TrainConfig,
    labels: Option<&[usize]>,
) -> Result<History> {
    cfg.validate()?;
    state.validate()?;
    let coeffs = LossTerms::coefficients(&cfg.weights);
    let mut history = History::default();
    for epoch in 0..cfg.max_iter {
        let eval = evaluate(state, input, None, Some(&coeffs))?;
        let scores = labels
            .map(|l| evaluate_all(&hard_assign(eval.q_g.matrix()), l))
            .transpose()?;
        history.epochs.push(EpochRecord {
            epoch,
            terms: eval.terms,
            total: eval.terms.total(&cfg.weights),
            max_row_error: eval.q_a.max_row_sum_error().max(eval.q_g.max_row_sum_error()),
            scores,
        });
        let grads = eval.grads.expect("gradients requested");
        let mut opt = state.optimizer.take().unwrap_or_else(|| Adam::new(cfg.lr));
        let result = opt.step(
            &mut state.param_slices_mut(super::model::ParamBlocks::All),
            &grads.slices(super::model::ParamBlocks::All),
            "joint objective",
        );
        state.optimizer = Some(opt);
        result?;
    }
    Ok(history)
}

/// The four label read-outs of a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Qg,
    Qa,
    ZgClu,
    ZaClu,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Qg, Variant::Qa, Variant::ZgClu, Variant::ZaClu];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Qg => "Qg",
            Variant::Qa => "Qa",
            Variant::ZgClu => "Zg_clu",
            Variant::ZaClu => "Za_clu",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parameter(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub qg: Vec<usize>,
    pub qa: Vec<usize>,
    pub zg_clu: Vec<usize>,
    pub za_clu: Vec<usize>,
    /// `KL(Q_g ‖ Q_a)` of the final state.
    pub consistency: f64,
}

impl Outputs {
    pub fn labels(&self, v: Variant) -> &[usize] {
        match v {
            Variant::Qg => &self.qg,
            Variant::Qa => &self.qa,
            Variant::ZgClu => &self.zg_clu,
            Variant::ZaClu => &self.za_clu,
        }
    }
}

/// Hard labels from both soft assignments and from K-means on both embeddings.
pub fn extract_outputs<R: Rng + ?Sized>(
    state: &ModelState,
    input: &GraphInput<'_>,
    restarts: usize,
    rng: &mut R,
) -> Result<Outputs> {
    let eval = evaluate(state, input, None, None)?;
    let k = state.num_clusters();
    Ok(Outputs {
        qg: hard_assign(eval.q_g.matrix()),
        qa: hard_assign(eval.q_a.matrix()),
        zg_clu: kmeans(&eval.z_g, k, restarts, rng)?.labels,
        za_clu: kmeans(&eval.z_a, k, restarts, rng)?.labels,
        consistency: kl_divergence(eval.q_g.matrix(), eval.q_a.matrix())?,
    })
}

/// Result of a complete run on one network.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: ModelState,
    pub pretrain: PretrainReport,
    pub history: History,
    pub outputs: Outputs,
}

/// Initialization, pretraining, joint training and read-out from one seeded
/// RNG stream.
pub fn fit(
    net: &AttributedNetwork,
    k: usize,
    ae: &AeConfig,
    gae: &GaeConfig,
    cfg: &TrainConfig,
    track_metrics: bool,
) -> Result<FitResult> {
    let input = GraphInput::new(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ModelState::new(ae.clone(), *gae, k, &mut rng)?;
    let pretrain_report = pretrain(&mut state, &input, cfg, &mut rng)?;
    let labels = if track_metrics { net.labels() } else { None };
    let history = train(&mut state, &input, cfg, labels)?;
    let outputs = extract_outputs(&state, &input, cfg.kmeans_restarts, &mut rng)?;
    Ok(FitResult {
        state,
        pretrain: pretrain_report,
        history,
        outputs,
    })
}
