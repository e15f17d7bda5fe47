use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

/// Runtime switches that remove or alter parts of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    NoVda,
    NoSmc,
    NoCfa,
    NoCma,
    /// Contrastive loss with only the aligned diagonal as positives.
    NoGuidance,
    /// Alignment and contrastive terms over every view pair instead of
    /// anchor-to-view pairs.
    AllPairsViews,
    /// Build the semantic graph from projected features instead of latents.
    GraphOnProjection,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::NoVda,
        Ablation::NoSmc,
        Ablation::NoCfa,
        Ablation::NoCma,
        Ablation::NoGuidance,
        Ablation::AllPairsViews,
        Ablation::GraphOnProjection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoVda => "no_vda",
            Ablation::NoSmc => "no_smc",
            Ablation::NoCfa => "no_cfa",
            Ablation::NoCma => "no_cma",
            Ablation::NoGuidance => "no_guidance",
            Ablation::AllPairsViews => "all_pairs_views",
            Ablation::GraphOnProjection => "graph_on_projection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}")))
    }
}

/// Where the semantic graph used by the contrastive loss comes from during
/// training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Per mini-batch, thresholded with the batch's aligned samples.
    BatchLocal,
    /// Once per epoch over all samples; batches use the induced subgraph.
    Global,
}

/// Every hyperparameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Latent dimension shared by all views.
    pub d: usize,
    /// Encoder hidden widths; decoders mirror them.
    pub hidden_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub seed: u64,
    pub ablation: BTreeSet<Ablation>,
    /// Epochs between intermediate evaluations; 0 evaluates only at the end.
    pub eval_every: usize,
    /// Divide the reconstruction loss by the batch size.
    pub rec_batch_scaling: bool,
    pub graph_mode: GraphMode,
    /// Row block size for full-dataset graph construction.
    pub graph_block_rows: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 30,
            hidden_dims: vec![1024, 1024],
            hidden_activation: Activation::Relu,
            epochs: 500,
            batch_size: 500,
            lr: 1e-4,
            lambda1: 10.0,
            lambda2: 1.0,
            tau: 1.0,
            seed: 0,
            ablation: BTreeSet::new(),
            eval_every: 0,
            rec_batch_scaling: true,
            graph_mode: GraphMode::BatchLocal,
            graph_block_rows: 256,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
        }
    }
}

impl TrainConfig {
    /// Small architecture suitable for desk-scale experiments.
    pub fn desk_scale() -> Self {
        Self {
            hidden_dims: vec![64, 64],
            ..Self::default()
        }
    }

    /// Desk-scale settings tuned for small synthetic sets: tanh hidden
    /// layers, a light alignment weight, a stronger contrastive weight and a
    /// sharper temperature.
    pub fn small_synthetic() -> Self {
        Self {
            hidden_activation: Activation::Tanh,
            epochs: 100,
            batch_size: 64,
            lr: 5e-4,
            lambda1: 0.1,
            lambda2: 3.0,
            tau: 0.1,
            ..Self::desk_scale()
        }
    }

    pub fn has(&self, a: Ablation) -> bool {
        self.ablation.contains(&a)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d < 2 {
            return fail(format!("d must be >= 2, got {}", self.d));
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return fail("lambda1 and lambda2 must be >= 0".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.hidden_dims.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        Ok(())
    }

    /// Parses flat `key = value` TOML whose keys are field names.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.epochs, c.lr, c.tau, c.lambda1, c.lambda2, c.d), (500, 1e-4, 1.0, 10.0, 1.0, 30));
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let mut c = TrainConfig::desk_scale();
        c.ablation.insert(Ablation::NoGuidance);
        let parsed = TrainConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(parsed, c);
        let partial = TrainConfig::from_toml_str("lambda1 = 0.5\nablation = [\"no_cma\"]\n").unwrap();
        assert_eq!(partial.lambda1, 0.5);
        assert!(partial.has(Ablation::NoCma));
        assert_eq!(partial.epochs, 500);
        assert!(TrainConfig::from_toml_str("lamda1 = 0.5").is_err());
    }

    #[test]
    fn invalid_configs() {
        for bad in [
            TrainConfig { tau: 0.0, ..Default::default() },
            TrainConfig { batch_size: 1, ..Default::default() },
            TrainConfig { d: 1, ..Default::default() },
            TrainConfig { lambda1: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn ablation_names() {
        for a in Ablation::ALL {
            assert_eq!(Ablation::parse(a.name()).unwrap(), a);
        }
        assert!(Ablation::parse("nope").is_err());
    }
}
