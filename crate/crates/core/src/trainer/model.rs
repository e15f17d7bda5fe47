use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::error::Result;
use crate::nn::{l2_normalize_rows, Activation, Mlp, ParamMut};
use crate::Matrix;

/// Per-view autoencoders plus the projector shared by all views.
#[derive(Debug, Clone)]
pub struct Model {
    pub encoders: Vec<Mlp>,
    pub decoders: Vec<Mlp>,
    pub projector: Mlp,
    /// Most recent training threshold for each view `v >= 1` (index `v - 1`),
    /// used when evaluation sees no aligned samples.
    pub last_thresholds: Vec<Option<f64>>,
}

impl Model {
    /// Encoder `D_v -> hidden.. -> d`, decoder mirrored, projector
    /// `d -> d -> d`. Hidden layers use the configured activation, outputs
    /// are linear.
    pub fn new(view_dims: &[usize], cfg: &TrainConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let act = cfg.hidden_activation;
        let mut encoders = Vec::with_capacity(view_dims.len());
        let mut decoders = Vec::with_capacity(view_dims.len());
        for &dv in view_dims {
            let mut dims = vec![dv];
            dims.extend(&cfg.hidden_dims);
            dims.push(cfg.d);
            encoders.push(Mlp::with_activations(&dims, act, Activation::Identity, &mut rng)?);
            dims.reverse();
            decoders.push(Mlp::with_activations(&dims, act, Activation::Identity, &mut rng)?);
        }
        let projector = Mlp::with_activations(&[cfg.d, cfg.d, cfg.d], act, Activation::Identity, &mut rng)?;
        Ok(Self {
            encoders,
            decoders,
            projector,
            last_thresholds: vec![None; view_dims.len().saturating_sub(1)],
        })
    }

    pub fn n_views(&self) -> usize {
        self.encoders.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.projector.input_dim()
    }

    /// Latent embeddings of every view, without touching caches.
    pub fn embed(&self, views: &[Matrix]) -> Result<Vec<Matrix>> {
        self.encoders.iter().zip(views).map(|(e, x)| e.predict(x)).collect()
    }

    /// Row-normalized projections of latent embeddings.
    pub fn project(&self, latents: &[Matrix]) -> Result<Vec<Matrix>> {
        latents
            .iter()
            .map(|z| Ok(l2_normalize_rows(&self.projector.predict(z)?)))
            .collect()
    }

    /// Every parameter tensor in a fixed order: encoders, decoders, projector.
    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        for (role, nets) in [("encoder", &mut self.encoders), ("decoder", &mut self.decoders)] {
            for (v, net) in nets.iter_mut().enumerate() {
                let names = net.param_names();
                for (name, values) in names.into_iter().zip(net.params_mut()) {
                    out.push(ParamMut {
                        name: format!("{role}{v}.{name}"),
                        values,
                    });
                }
            }
        }
        let names = self.projector.param_names();
        for (name, values) in names.into_iter().zip(self.projector.params_mut()) {
            out.push(ParamMut {
                name: format!("projector.{name}"),
                values,
            });
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.encoders
            .iter()
            .chain(&self.decoders)
            .chain(std::iter::once(&self.projector))
            .map(Mlp::n_params)
            .sum()
    }
}
