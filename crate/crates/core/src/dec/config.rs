use crate::error::{Error, Result};
use crate::nn::Activation;

/// Autoencoder shape. `layer_dims` runs from the attribute dimension down to
/// the embedding dimension; the decoder mirrors it.
#[derive(Debug, Clone, PartialEq)]
pub struct AeConfig {
    pub layer_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub embedding_activation: Activation,
    pub output_activation: Activation,
}

impl AeConfig {
    /// ReLU hidden layers, linear embedding, and a sigmoid output for 0/1
    /// attributes (identity otherwise).
    pub fn new(layer_dims: Vec<usize>, binary_attributes: bool) -> Result<Self> {
        let cfg = Self {
            layer_dims,
            hidden_activation: Activation::Relu,
            embedding_activation: Activation::Identity,
            output_activation: if binary_attributes {
                Activation::Sigmoid
            } else {
                Activation::Identity
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default stack for `m` attributes: `m-256-d` when the attribute noise is
    /// at most 10%, `m-512-256-d` otherwise.
    pub fn for_attributes(m: usize, d: usize, noise_ratio: f64, binary: bool) -> Result<Self> {
        let dims = if noise_ratio <= 0.1 + 1e-12 {
            vec![m, 256, d]
        } else {
            vec![m, 512, 256, d]
        };
        Self::new(dims, binary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 3 {
            return Err(Error::Parameter(format!(
                "autoencoder needs at least two encoder layers, got dims {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Parameter(format!("zero-width layer in {:?}", self.layer_dims)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Activation of encoder layer `l`.
    pub fn encoder_activation(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            self.embedding_activation
        } else {
            self.hidden_activation
        }
    }

    /// Activation of decoder layer `l`.
    pub fn decoder_activation(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

/// Two-layer bias-free GCN encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaeConfig {
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl GaeConfig {
    pub fn new(hidden_dim: usize, output_dim: usize) -> Result<Self> {
        if hidden_dim == 0 || output_dim == 0 {
            return Err(Error::Parameter(format!(
                "GCN dims must be positive, got {hidden_dim} and {output_dim}"
            )));
        }
        Ok(Self {
            hidden_dim,
            output_dim,
        })
    }
}

/// Coefficients of the attribute-side clustering term, the graph-side
/// clustering term and the consistency term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Selected by grid search on the μ = 0.6 benchmark. A graph-side
/// self-training weight much larger than `gamma` lets the graph centers
/// drift away from the embedding and collapses `Q_g`.
impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.001,
            gamma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub kmeans_restarts: usize,
    pub max_iter: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 50,
            kmeans_restarts: 20,
            max_iter: 200,
            lr: 1e-3,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kmeans_restarts == 0 {
            return Err(Error::Parameter("kmeans_restarts must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Parameter(format!("learning rate {} must be > 0", self.lr)));
        }
        self.weights.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stacks() {
        let low = AeConfig::for_attributes(100, 64, 0.1, true).unwrap();
        assert_eq!(low.layer_dims, vec![100, 256, 64]);
        assert_eq!(low.decoder_activation(1), Activation::Sigmoid);
        assert_eq!(low.encoder_activation(1), Activation::Identity);
        assert_eq!(low.encoder_activation(0), Activation::Relu);
        let high = AeConfig::for_attributes(100, 64, 0.4, false).unwrap();
        assert_eq!(high.layer_dims, vec![100, 512, 256, 64]);
        assert_eq!(high.decoder_activation(2), Activation::Identity);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(AeConfig::new(vec![5, 3], true).is_err());
        assert!(AeConfig::new(vec![5, 0, 3], true).is_err());
        assert!(GaeConfig::new(0, 3).is_err());
        assert!(LossWeights::new(-0.1, 0.0, 0.0).is_err());
        assert!(LossWeights::new(0.0, f64::NAN, 0.0).is_err());
        let mut t = TrainConfig::default();
        t.lr = 0.0;
        assert!(t.validate().is_err());
    }
}
