//! Heterogeneous graph encoder, regression head and the two training
//! regimes (end-to-end regression, contrastive pretraining followed by a
//! frozen-backbone head fit).

mod backbone;
mod checkpoint;
mod graph_ops;
mod head;
mod ssl;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use backbone::{Backbone, ForwardCache, HgnnLayer};
pub use checkpoint::{checkpoint_to_string, load_checkpoint, load_embeddings, parse_checkpoint, save_checkpoint, save_embeddings};
pub use graph_ops::{NeighborMean, Relation, RelationalAdjacency};
pub use head::{Head, HeadCache};
pub use ssl::{
    attach_head, contrastive_loss_and_grads, finetune_head, info_nce, positive_sets, predict_from_embeddings, pretrain_contrastive,
    FinetunedHead, PretrainedEncoder, SslConfig,
};
pub use train::{end_to_end_loss_and_grads, mse, train_end_to_end, EpochRecord, TrainingLog};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::geodata::RegionId;
use crate::hetgraph::HeteroGraph;
use crate::tensor::Adam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Zscore,
    Log1pZscore,
}

impl std::str::FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zscore" => Ok(TransformKind::Zscore),
            "log1p+zscore" | "log1p-zscore" => Ok(TransformKind::Log1pZscore),
            other => Err(format!("unknown label transform {other:?}")),
        }
    }
}

/// Label standardisation fitted on the training subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelTransform {
    pub kind: TransformKind,
    pub mean: f64,
    pub std: f64,
}

impl LabelTransform {
    pub fn fit(kind: TransformKind, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewLabels("cannot fit a label transform on zero values".into()));
        }
        let pre: Vec<f64> = values.iter().map(|&v| pre_transform(kind, v)).collect::<Result<_>>()?;
        let n = pre.len() as f64;
        let mean = pre.iter().sum::<f64>() / n;
        let var = pre.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(Self { kind, mean, std })
    }

    pub fn apply(&self, v: f64) -> Result<f64> {
        Ok((pre_transform(self.kind, v)? - self.mean) / self.std)
    }

    pub fn invert(&self, z: f64) -> f64 {
        let u = z * self.std + self.mean;
        match self.kind {
            TransformKind::Zscore => u,
            TransformKind::Log1pZscore => u.exp_m1(),
        }
    }
}

fn pre_transform(kind: TransformKind, v: f64) -> Result<f64> {
    match kind {
        TransformKind::Zscore => Ok(v),
        TransformKind::Log1pZscore if v > -1.0 => Ok(v.ln_1p()),
        TransformKind::Log1pZscore => Err(Error::Config(format!("log1p transform needs values > -1, got {v}"))),
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgnnConfig {
    pub n_layers: usize,
    pub hidden_dim: usize,
    #[serde(default = "default_true")]
    pub use_self_loop: bool,
    #[serde(default = "default_true")]
    pub normalize_pos: bool,
    /// Unit-normalise region embeddings before the head (set by
    /// contrastive pretraining).
    #[serde(default)]
    pub normalize_embeddings: bool,
    pub label_transform: TransformKind,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for HgnnConfig {
    fn default() -> Self {
        Self {
            n_layers: 3,
            hidden_dim: 64,
            use_self_loop: true,
            normalize_pos: true,
            normalize_embeddings: false,
            label_transform: TransformKind::Zscore,
            lr: 2e-3,
            max_epochs: 1000,
            patience: 50,
            seed: 0,
        }
    }
}

impl HgnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_layers) {
            return Err(Error::Config(format!("n_layers must be in 1..=3, got {}", self.n_layers)));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// All learnable state of the end-to-end model plus optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: HgnnConfig,
    pub backbone: Backbone,
    pub head: Head,
    /// Fitted by training; `None` means the model is untrained.
    pub transform: Option<LabelTransform>,
    pub backbone_adam: Adam,
    pub head_adam: Adam,
}

impl ModelState {
    pub fn init(config: &HgnnConfig, input_dim: usize, n_env: usize, n_soc: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let backbone = Backbone::init(
            input_dim,
            n_env,
            n_soc,
            config.hidden_dim,
            config.n_layers,
            config.use_self_loop,
            &mut rng,
        );
        let head = Head::init(config.hidden_dim, &mut rng);
        Ok(Self {
            backbone_adam: Adam::new(&backbone, config.lr),
            head_adam: Adam::new(&head, config.lr),
            config: config.clone(),
            backbone,
            head,
            transform: None,
        })
    }

    /// Region embeddings for every region.
    pub fn embed(&self, graph: &HeteroGraph, table: &FeatureTable) -> Result<crate::tensor::Matrix> {
        let adj = RelationalAdjacency::new(graph);
        let x = table.input_matrix(self.config.normalize_pos);
        let out = self.backbone.forward(&x, &adj)?.output;
        Ok(if self.config.normalize_embeddings {
            out.l2_normalize_rows().0
        } else {
            out
        })
    }
}

/// Indicator estimates for the requested regions, in request order.
pub fn predict(
    state: &ModelState,
    graph: &HeteroGraph,
    table: &FeatureTable,
    regions: &[RegionId],
) -> Result<Vec<(RegionId, f64)>> {
    let transform = state.transform.ok_or(Error::Untrained)?;
    let emb = state.embed(graph, table)?;
    let idx: Vec<usize> = regions
        .iter()
        .map(|&r| table.grid.check(r).map(|_| table.grid.index(r)))
        .collect::<Result<_>>()?;
    let out = state.head.forward(&emb.select_rows(&idx))?.output;
    Ok(regions
        .iter()
        .zip(out.data())
        .map(|(&r, &z)| (r, transform.invert(z)))
        .collect())
}
