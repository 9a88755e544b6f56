//! Parameters, forward passes, the joint objective and its gradient.

use rand::Rng;


use super::assign::{
    distance_backward, fixed_target_kl_grad, kernel_pass, kl_divergence, source_side_kl_grad,
    target_distribution, KernelPass, SoftAssignment,
};
use super::config::{AeConfig, GaeConfig, LossWeights};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, AttributedNetwork, NormalizedAdjacency};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::nn::{sigmoid, Activation, Adam, LayerGrads, LinearLayer};

/// Any term above this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Trainable `K×d` cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCenters {
    centers: DenseMatrix,
}

impl ClusterCenters {
    pub fn new(centers: DenseMatrix) -> Result<Self> {
        if centers.rows() == 0 || centers.cols() == 0 {
            return Err(Error::Parameter("cluster centers must be non-empty".into()));
        }
        if !centers.is_finite() {
            return Err(Error::Parameter("cluster centers must be finite".into()));
        }
        Ok(Self { centers })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.centers
    }

    pub fn num_clusters(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }
}

/// All trainable state of the joint model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub ae_config: AeConfig,
    pub gae_config: GaeConfig,
    pub encoder: Vec<LinearLayer>,
    pub decoder: Vec<LinearLayer>,
    /// The two graph convolution layers.
    pub gcn: Vec<LinearLayer>,
    pub centers_a: ClusterCenters,
    pub centers_g: ClusterCenters,
    /// Optimizer for the joint phase; created by the first training epoch.
    pub optimizer: Option<Adam>,
}

/// Which parameters an optimizer step touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBlocks {
    Autoencoder,
    Gae,
    All,
}

impl ModelState {
    /// Glorot weights, zero biases, zero centers.
    pub fn new<R: Rng + ?Sized>(ae: AeConfig, gae: GaeConfig, k: usize, rng: &mut R) -> Result<Self> {
        ae.validate()?;
        if k < 2 {
            return Err(Error::Parameter(format!("need at least 2 clusters, got {k}")));
        }
        let dims = &ae.layer_dims;
        let layers = ae.num_layers();
        let encoder = (0..layers)
            .map(|l| LinearLayer::new(dims[l], dims[l + 1], ae.encoder_activation(l), true, rng))
            .collect();
        let decoder = (0..layers)
            .map(|l| {
                let (i, o) = (dims[layers - l], dims[layers - l - 1]);
                LinearLayer::new(i, o, ae.decoder_activation(l), true, rng)
            })
            .collect();
        let gcn = vec![
            LinearLayer::new(ae.input_dim(), gae.hidden_dim, Activation::Relu, false, rng),
            LinearLayer::new(gae.hidden_dim, gae.output_dim, Activation::Identity, false, rng),
        ];
        Ok(Self {
            centers_a: ClusterCenters::new(DenseMatrix::zeros(k, ae.embedding_dim()))?,
            centers_g: ClusterCenters::new(DenseMatrix::zeros(k, gae.output_dim))?,
            ae_config: ae,
            gae_config: gae,
            encoder,
            decoder,
            gcn,
            optimizer: None,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.centers_a.num_clusters()
    }

    pub fn attr_dim(&self) -> usize {
        self.ae_config.input_dim()
    }

    /// Checks that every parameter shape agrees with the configs and `K`.
    pub fn validate(&self) -> Result<()> {
        let dims = &self.ae_config.layer_dims;
        let layers = self.ae_config.num_layers();
        let bad = |what: String| Err(Error::shape("model_state", what));
        if self.encoder.len() != layers || self.decoder.len() != layers {
            return bad(format!("expected {layers} encoder and decoder layers"));
        }
        for l in 0..layers {
            let e = &self.encoder[l];
            if (e.in_dim(), e.out_dim()) != (dims[l], dims[l + 1]) {
                return bad(format!("encoder layer {l} is {}x{}", e.in_dim(), e.out_dim()));
            }
            let d = &self.decoder[l];
            if (d.in_dim(), d.out_dim()) != (dims[layers - l], dims[layers - l - 1]) {
                return bad(format!("decoder layer {l} is {}x{}", d.in_dim(), d.out_dim()));
            }
        }
        let g = &self.gae_config;
        if self.gcn.len() != 2
            || (self.gcn[0].in_dim(), self.gcn[0].out_dim()) != (dims[0], g.hidden_dim)
            || (self.gcn[1].in_dim(), self.gcn[1].out_dim()) != (g.hidden_dim, g.output_dim)
        {
            return bad("GCN layers disagree with config".into());
        }
        if self.centers_a.dim() != self.ae_config.embedding_dim()
            || self.centers_g.dim() != g.output_dim
            || self.centers_a.num_clusters() != self.centers_g.num_clusters()
        {
            return bad("cluster centers disagree with embedding sizes".into());
        }
        Ok(())
    }

    /// Parameter buffers in a fixed order: encoder, decoder, GCN, centers_a, centers_g.
    pub fn param_slices_mut(&mut self, blocks: ParamBlocks) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        if blocks != ParamBlocks::Gae {
            for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
                v.extend(l.param_slices_mut());
            }
        }
        if blocks != ParamBlocks::Autoencoder {
            for l in self.gcn.iter_mut() {
                v.extend(l.param_slices_mut());
            }
        }
        if blocks == ParamBlocks::All {
            v.push(self.centers_a.centers.data_mut());
            v.push(self.centers_g.centers.data_mut());
        }
        v
    }

    pub fn param_count(&mut self) -> usize {
        self.param_slices_mut(ParamBlocks::All).iter().map(|s| s.len()).sum()
    }
}

/// Gradients laid out like [`ModelState`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub encoder: Vec<LayerGrads>,
    pub decoder: Vec<LayerGrads>,
    pub gcn: Vec<LayerGrads>,
    pub centers_a: DenseMatrix,
    pub centers_g: DenseMatrix,
}

impl ModelGrads {
    pub fn zeros_like(state: &ModelState) -> Self {
        Self {
            encoder: state.encoder.iter().map(LayerGrads::zeros_like).collect(),
            decoder: state.decoder.iter().map(LayerGrads::zeros_like).collect(),
            gcn: state.gcn.iter().map(LayerGrads::zeros_like).collect(),
            centers_a: DenseMatrix::zeros(state.centers_a.num_clusters(), state.centers_a.dim()),
            centers_g: DenseMatrix::zeros(state.centers_g.num_clusters(), state.centers_g.dim()),
        }
    }

    /// Same order as [`ModelState::param_slices_mut`].
    pub fn slices(&self, blocks: ParamBlocks) -> Vec<&[f64]> {
        let mut v = Vec::new();
        if blocks != ParamBlocks::Gae {
            for g in self.encoder.iter().chain(&self.decoder) {
                v.extend(g.slices());
            }
        }
        if blocks != ParamBlocks::Autoencoder {
            for g in &self.gcn {
                v.extend(g.slices());
            }
        }
        if blocks == ParamBlocks::All {
            v.push(self.centers_a.data());
            v.push(self.centers_g.data());
        }
        v
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices(ParamBlocks::All).concat()
    }
}

/// A network with its normalized adjacency and the propagated attributes
/// `N·X`, both fixed for the whole run.
#[derive(Debug, Clone)]
pub struct GraphInput<'a> {
    pub net: &'a AttributedNetwork,
    pub norm: NormalizedAdjacency,
    pub propagated: DenseMatrix,
}

impl<'a> GraphInput<'a> {
    pub fn new(net: &'a AttributedNetwork) -> Result<Self> {
        let norm = normalize_adjacency(net);
        let propagated = norm.matrix().spmm(net.attributes())?;
        Ok(Self {
            net,
            norm,
            propagated,
        })
    }

    pub fn attributes(&self) -> &DenseMatrix {
        self.net.attributes()
    }

    pub fn num_nodes(&self) -> usize {
        self.net.num_nodes()
    }
}

/// The five terms of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub are: f64,
    pub akl: f64,
    pub gre: f64,
    pub gkl: f64,
    pub con: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Are,
    AKl,
    Gre,
    GKl,
    Con,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Are, Term::AKl, Term::Gre, Term::GKl, Term::Con];

    pub fn name(self) -> &'static str {
        match self {
            Term::Are => "L_are",
            Term::AKl => "L_aKL",
            Term::Gre => "L_gre",
            Term::GKl => "L_gKL",
            Term::Con => "L_con",
        }
    }
}

impl LossTerms {
    pub fn get(&self, t: Term) -> f64 {
        match t {
            Term::Are => self.are,
            Term::AKl => self.akl,
            Term::Gre => self.gre,
            Term::GKl => self.gkl,
            Term::Con => self.con,
        }
    }

    fn set(&mut self, t: Term, v: f64) {
        match t {
            Term::Are => self.are = v,
            Term::AKl => self.akl = v,
            Term::Gre => self.gre = v,
            Term::GKl => self.gkl = v,
            Term::Con => self.con = v,
        }
    }

    /// Coefficients `(1, α, 1, β, γ)` of the joint objective.
    pub fn coefficients(w: &LossWeights) -> Self {
        Self {
            are: 1.0,
            akl: w.alpha,
            gre: 1.0,
            gkl: w.beta,
            con: w.gamma,
        }
    }

    /// Coefficient 1 on `t`, 0 elsewhere.
    pub fn unit(t: Term) -> Self {
        let mut c = Self::default();
        c.set(t, 1.0);
        c
    }

    pub fn dot(&self, coeffs: &LossTerms) -> f64 {
        Term::ALL.iter().map(|&t| self.get(t) * coeffs.get(t)).sum()
    }

    pub fn total(&self, w: &LossWeights) -> f64 {
        self.dot(&Self::coefficients(w))
    }

    /// Errors on the first non-finite or exploding term.
    pub fn check(&self) -> Result<()> {
        for t in Term::ALL {
            let v = self.get(t);
            if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Training {
                    term: t.name().to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Sharpened targets held fixed during one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub p_a: DenseMatrix,
    pub p_g: DenseMatrix,
}

/// Layer outputs of the autoencoder.
#[derive(Debug, Clone)]
pub(crate) struct AeForward {
    pub encoder: Vec<DenseMatrix>,
    pub decoder: Vec<DenseMatrix>,
}

impl AeForward {
    pub fn z(&self) -> &DenseMatrix {
        self.encoder.last().unwrap()
    }

    pub fn x_hat(&self) -> &DenseMatrix {
        self.decoder.last().unwrap()
    }
}

pub(crate) fn ae_pass(state: &ModelState, x: &DenseMatrix) -> Result<AeForward> {
    if x.cols() != state.attr_dim() {
        return Err(Error::shape(
            "ae_forward",
            format!("attributes have {} columns, model expects {}", x.cols(), state.attr_dim()),
        ));
    }
    let mut encoder: Vec<DenseMatrix> = Vec::with_capacity(state.encoder.len());
    for layer in &state.encoder {
        let out = layer.forward(encoder.last().unwrap_or(x))?;
        encoder.push(out);
    }
    let mut decoder: Vec<DenseMatrix> = Vec::with_capacity(state.decoder.len());
    for layer in &state.decoder {
        let out = layer.forward(decoder.last().unwrap_or_else(|| encoder.last().unwrap()))?;
        decoder.push(out);
    }
    Ok(AeForward { encoder, decoder })
}

/// Backpropagates `coeff·L_are` plus an extra embedding gradient `dz`.
pub(crate) fn ae_backward(
    state: &ModelState,
    x: &DenseMatrix,
    fwd: &AeForward,
    coeff: f64,
    mut dz: DenseMatrix,
) -> Result<(Vec<LayerGrads>, Vec<LayerGrads>)> {
    let layers = state.encoder.len();
    let mut dec_grads: Vec<LayerGrads> = state.decoder.iter().map(LayerGrads::zeros_like).collect();
    if coeff != 0.0 {
            let mut up = fwd.x_hat().clone();
        up.add_scaled(x, -1.0)?;
        up.scale_inplace(coeff / x.rows() as f64);
        for l in (0..layers).rev() {
            let input = if l == 0 { fwd.z() } else { &fwd.decoder[l - 1] };
            let (g, din) = state.decoder[l].backward_with_output(input, &fwd.decoder[l], &up)?;
            dec_grads[l] = g;
            up = din;
        }
        dz.add_scaled(&up, 1.0)?;
    }
    let mut enc_grads: Vec<LayerGrads> = state.encoder.iter().map(LayerGrads::zeros_like).collect();
    let mut up = dz;
    for l in (0..layers).rev() {
        let input = if l == 0 { x } else { &fwd.encoder[l - 1] };
        if l == 0 {
            enc_grads[0] = state.encoder[0].backward_params_only(input, &fwd.encoder[0], &up)?;
        } else {
            let (g, din) = state.encoder[l].backward_with_output(input, &fwd.encoder[l], &up)?;
            enc_grads[l] = g;
            up = din;
        }
    }
    Ok((enc_grads, dec_grads))
}

#[derive(Debug, Clone)]
pub(crate) struct GcnForward {
    pub hidden: DenseMatrix,
    pub propagated_hidden: DenseMatrix,
    pub z: DenseMatrix,
}

pub(crate) fn gcn_pass(state: &ModelState, input: &GraphInput<'_>) -> Result<GcnForward> {
    let hidden = state.gcn[0].forward(&input.propagated)?;
    let propagated_hidden = input.norm.matrix().spmm(&hidden)?;
    let z = state.gcn[1].forward(&propagated_hidden)?;
    Ok(GcnForward {
        hidden,
        propagated_hidden,
        z,
    })
}

pub(crate) fn gcn_backward(
    state: &ModelState,
    input: &GraphInput<'_>,
    fwd: &GcnForward,
    dz: &DenseMatrix,
) -> Result<Vec<LayerGrads>> {
    let (g2, du) = state.gcn[1].backward_with_output(&fwd.propagated_hidden, &fwd.z, dz)?;
    let dh = input.norm.matrix().spmm(&du)?;
    let g1 = state.gcn[0].backward_params_only(&input.propagated, &fwd.hidden, &dh)?;
    Ok(vec![g1, g2])
}

/// `(Z_a, X̂)`.
pub fn ae_forward(state: &ModelState, x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut f = ae_pass(state, x)?;
    let x_hat = f.decoder.pop().unwrap();
    let z = f.encoder.pop().unwrap();
    Ok((z, x_hat))
}

/// `‖X − X̂‖² / (2n)`.
pub fn ae_recon_loss(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape(
            "ae_recon_loss",
            format!("{:?} vs {:?}", x.shape(), x_hat.shape()),
        ));
    }
    let s: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / (2.0 * x.rows() as f64))
}

/// `Z_g = N·relu(N·X·W1)·W2`.
pub fn gcn_forward(state: &ModelState, norm: &NormalizedAdjacency, x: &DenseMatrix) -> Result<DenseMatrix> {
    if norm.matrix().rows() != x.rows() {
        return Err(Error::shape(
            "gcn_forward",
            format!("adjacency has {} rows, attributes {}", norm.matrix().rows(), x.rows()),
        ));
    }
    let propagated = norm.matrix().spmm(x)?;
    let hidden = state.gcn[0].forward(&propagated)?;
    state.gcn[1].forward(&norm.matrix().spmm(&hidden)?)
}

/// `σ(Z Zᵀ)`.
pub fn inner_product_decode(z: &DenseMatrix) -> DenseMatrix {
    let mut a = z.matmul_nt(z).expect("Z Zᵀ is always conformable");
    a.map_inplace(sigmoid);
    a
}

/// Visits every entry of `a_hat` with the matching 0/1 adjacency value.
fn for_each_with_adjacency(a: &SparseMatrix, a_hat: &mut DenseMatrix, mut f: impl FnMut(&mut f64, f64)) {
    for i in 0..a_hat.rows() {
        let (cols, vals) = a.row(i);
        let mut next = 0;
        for (j, v) in a_hat.row_mut(i).iter_mut().enumerate() {
            let aij = if next < cols.len() && cols[next] == j {
                next += 1;
                vals[next - 1]
            } else {
                0.0
            };
            f(v, aij);
        }
    }
}

/// `‖A − Â‖² / (2n)` without densifying `A`.
pub fn gae_recon_loss(a: &SparseMatrix, a_hat: &DenseMatrix) -> Result<f64> {
    if a.rows() != a_hat.rows() || a.cols() != a_hat.cols() {
        return Err(Error::shape(
            "gae_recon_loss",
            format!("adjacency {}x{} vs reconstruction {:?}", a.rows(), a.cols(), a_hat.shape()),
        ));
    }
    let mut s = 0.0;
    for i in 0..a_hat.rows() {
        let (cols, vals) = a.row(i);
        let row = a_hat.row(i);
        s += row.iter().map(|v| v * v).sum::<f64>();
        for (&j, &aij) in cols.iter().zip(vals) {
            s += aij * aij - 2.0 * aij * row[j];
        }
    }
    Ok(s / (2.0 * a_hat.rows() as f64))
}

/// Turns `Â` into `coeff · ∂L_gre/∂(ZZᵀ)` in place.
pub(crate) fn gae_recon_grad_inplace(a: &SparseMatrix, a_hat: &mut DenseMatrix, coeff: f64) {
    let scale = coeff / a_hat.rows() as f64;
    for_each_with_adjacency(a, a_hat, |v, aij| {
        let y = *v;
        *v = scale * (y - aij) * y * (1.0 - y);
    });
}

/// Everything produced by one evaluation of the objective.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub terms: LossTerms,
    pub q_a: SoftAssignment,
    pub q_g: SoftAssignment,
    pub targets: Targets,
    pub z_a: DenseMatrix,
    pub z_g: DenseMatrix,
    pub grads: Option<ModelGrads>,
}

/// Evaluates the five terms. Targets default to the sharpened current
/// assignments; gradients are produced when `coeffs` is given and treat the
/// targets as constants.
pub fn evaluate(
    state: &ModelState,
    input: &GraphInput<'_>,
    targets: Option<&Targets>,
    coeffs: Option<&LossTerms>,
) -> Result<Evaluation> {
    let x = input.attributes();
    let adj = input.net.adjacency();
    let ae = ae_pass(state, x)?;
    let gcn = gcn_pass(state, input)?;
    let mut a_hat = inner_product_decode(&gcn.z);

    let ka: KernelPass = kernel_pass(ae.z(), state.centers_a.matrix())?;
    let kg: KernelPass = kernel_pass(&gcn.z, state.centers_g.matrix())?;
    let targets = match targets {
        Some(t) => t.clone(),
        None => Targets {
            p_a: target_distribution(&SoftAssignment::from_raw(ka.q.clone())).matrix().clone(),
            p_g: target_distribution(&SoftAssignment::from_raw(kg.q.clone())).matrix().clone(),
        },
    };
    if targets.p_a.shape() != ka.q.shape() || targets.p_g.shape() != kg.q.shape() {
        return Err(Error::shape("evaluate", "targets do not match assignments"));
    }
    let terms = LossTerms {
        are: ae_recon_loss(x, ae.x_hat())?,
        akl: kl_divergence(&targets.p_a, &ka.q)?,
        gre: gae_recon_loss(adj, &a_hat)?,
        gkl: kl_divergence(&targets.p_g, &kg.q)?,
        con: kl_divergence(&kg.q, &ka.q)?,
    };
    terms.check()?;

    let grads = match coeffs {
        None => None,
        Some(c) => {
            let mut gs_a = fixed_target_kl_grad(&ka, &targets.p_a, c.akl);
            gs_a.add_scaled(&fixed_target_kl_grad(&ka, &kg.q, c.con), 1.0)?;
            let (dz_a, dmu_a) = distance_backward(ae.z(), state.centers_a.matrix(), &gs_a)?;
            let (encoder, decoder) = ae_backward(state, x, &ae, c.are, dz_a)?;

            let mut gs_g = fixed_target_kl_grad(&kg, &targets.p_g, c.gkl);
            gs_g.add_scaled(&source_side_kl_grad(&kg, &ka.q, c.con), 1.0)?;
            let (mut dz_g, dmu_g) = distance_backward(&gcn.z, state.centers_g.matrix(), &gs_g)?;
            if c.gre != 0.0 {
                gae_recon_grad_inplace(adj, &mut a_hat, c.gre);
                dz_g.add_scaled(&a_hat.matmul(&gcn.z)?, 2.0)?;
            }
            let gcn_grads = gcn_backward(state, input, &gcn, &dz_g)?;
            Some(ModelGrads {
                encoder,
                decoder,
                gcn: gcn_grads,
                centers_a: dmu_a,
                centers_g: dmu_g,
            })
        }
    };
    Ok(Evaluation {
        terms,
        q_a: SoftAssignment::from_raw(ka.q),
        q_g: SoftAssignment::from_raw(kg.q),
        targets,
        z_a: ae.encoder.last().unwrap().clone(),
        z_g: gcn.z,
        grads,
    })
}

/// Joint objective and its five terms, with targets from the current assignments.
pub fn total_loss(
    state: &ModelState,
    input: &GraphInput<'_>,
    weights: &LossWeights,
) -> Result<(f64, LossTerms)> {
    let e = evaluate(state, input, None, None)?;
    Ok((e.terms.total(weights), e.terms))
}
