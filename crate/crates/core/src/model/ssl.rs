//! Contrastive pretraining of the graph encoder and the frozen-backbone
//! regression head.
//!
//! Each anchor region is paired with the mean embedding of its positive set
//! (its spatial neighbours plus the regions whose environment/society
//! vectors are most cosine-similar). Scores are `a·b / τ`; the other
//! anchors' pooled positives in the batch serve as negatives.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{mse, prepare_targets, EpochRecord, TrainingLog};
use super::{Backbone, Head, HgnnConfig, LabelTransform, ModelState, RelationalAdjacency, TransformKind};
use crate::error::{Error, Result};
use crate::eval::EvalSplit;
use crate::features::FeatureTable;
use crate::geodata::{LabelSet, RegionId};
use crate::hetgraph::HeteroGraph;
use crate::tensor::{self, log_sum_exp, Adam, Matrix, Parameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SslConfig {
    pub temperature: f64,
    /// Feature-similar regions added to each positive set.
    pub top_k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Unit-normalise embeddings before scoring.
    pub normalize: bool,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            top_k: 4,
            batch_size: 256,
            epochs: 30,
            normalize: true,
            lr: 2e-3,
            seed: 0,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2".into()));
        }
        Ok(())
    }
}

/// InfoNCE over a batch: row `m` of `anchors` is positive with row `m` of
/// `positives` and negative with every other row. Returns the mean loss and
/// its gradients with respect to both inputs.
pub fn info_nce(anchors: &Matrix, positives: &Matrix, temperature: f64) -> Result<(f64, Matrix, Matrix)> {
    if anchors.shape() != positives.shape() {
        return Err(Error::Shape(format!(
            "info_nce: {:?} vs {:?}",
            anchors.shape(),
            positives.shape()
        )));
    }
    let b = anchors.rows();
    let scores = anchors.matmul_nt(positives)?.scale(1.0 / temperature);
    let mut loss = 0.0;
    for m in 0..b {
        loss += log_sum_exp(scores.row(m)) - scores.get(m, m);
    }
    loss /= b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("InfoNCE loss".into()));
    }
    let mut d_scores = scores.row_softmax();
    for m in 0..b {
        d_scores.set(m, m, d_scores.get(m, m) - 1.0);
    }
    let d_scores = d_scores.scale(1.0 / (b as f64 * temperature));
    let d_anchor = d_scores.matmul(positives)?;
    let d_pos = d_scores.matmul_tn(anchors)?;
    Ok((loss, d_anchor, d_pos))
}

/// Positive set per region: graph neighbours via region adjacency, then the
/// `top_k` most cosine-similar regions by `[env, soc]` (ties to lower id).
pub fn positive_sets(graph: &HeteroGraph, table: &FeatureTable, top_k: usize) -> Vec<Vec<usize>> {
    let n = table.len();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &graph.edges_rnr {
        sets[e.src].push(e.dst);
        sets[e.dst].push(e.src);
    }
    if top_k == 0 || n < 2 {
        return sets;
    }
    let vecs: Vec<Vec<f64>> = table
        .regions
        .iter()
        .map(|r| {
            let mut v = r.e_env.clone();
            v.extend_from_slice(&r.e_soc);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect();
    let mut sims: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        sims.clear();
        for j in 0..n {
            if j != i {
                let s: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                sims.push((s, j));
            }
        }
        let k = top_k.min(sims.len());
        sims.select_nth_unstable_by(k - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut top: Vec<(f64, usize)> = sims[..k].to_vec();
        top.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, j) in top {
            if !sets[i].contains(&j) {
                sets[i].push(j);
            }
        }
    }
    sets
}

fn pool_positives(emb: &Matrix, anchors: &[usize], sets: &[Vec<usize>]) -> Matrix {
    let mut pooled = Matrix::zeros(anchors.len(), emb.cols());
    for (m, &a) in anchors.iter().enumerate() {
        let set = &sets[a];
        let w = 1.0 / set.len() as f64;
        let row = pooled.row_mut(m);
        for &j in set {
            for (o, x) in row.iter_mut().zip(emb.row(j)) {
                *o += w * x;
            }
        }
    }
    pooled
}

/// Batch InfoNCE loss of the encoder and the gradient of every backbone
/// parameter. Anchors with an empty positive set must be filtered out first.
pub fn contrastive_loss_and_grads(
    backbone: &Backbone,
    x: &Matrix,
    adj: &RelationalAdjacency,
    anchors: &[usize],
    sets: &[Vec<usize>],
    ssl: &SslConfig,
) -> Result<(f64, Backbone)> {
    let cache = backbone.forward(x, adj)?;
    let (emb, norms) = if ssl.normalize {
        cache.output.l2_normalize_rows()
    } else {
        (cache.output.clone(), Vec::new())
    };
    let a = emb.select_rows(anchors);
    let p = pool_positives(&emb, anchors, sets);
    let (loss, d_a, d_p) = info_nce(&a, &p, ssl.temperature)?;

    let mut d_emb = emb.zeros_like();
    d_emb.scatter_add_rows(anchors, &d_a);
    for (m, &i) in anchors.iter().enumerate() {
        let set = &sets[i];
        let w = 1.0 / set.len() as f64;
        let g: Vec<f64> = d_p.row(m).iter().map(|v| v * w).collect();
        for &j in set {
            for (o, x) in d_emb.row_mut(j).iter_mut().zip(&g) {
                *o += x;
            }
        }
    }
    let d_out = if ssl.normalize {
        tensor::l2_normalize_backward(&emb, &norms, &d_emb)?
    } else {
        d_emb
    };
    let grads = backbone.backward(&cache, adj, &d_out)?;
    Ok((loss, grads))
}

/// Encoder after contrastive pretraining and its region embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedEncoder {
    pub config: HgnnConfig,
    pub backbone: Backbone,
    /// `n_regions × d`, row-major region order.
    pub embeddings: Matrix,
    /// Per-epoch mean batch loss (stored in `train_loss`; `val_loss` repeats it).
    pub log: TrainingLog,
    /// Regions skipped as anchors because they had no positives.
    pub skipped_anchors: usize,
}

pub fn pretrain_contrastive(
    graph: &HeteroGraph,
    table: &FeatureTable,
    hgnn: &HgnnConfig,
    ssl: &SslConfig,
) -> Result<PretrainedEncoder> {
    hgnn.validate()?;
    ssl.validate()?;
    let n = table.len();
    if n < ssl.batch_size {
        return Err(Error::Config(format!(
            "{n} regions cannot fill a batch of {}",
            ssl.batch_size
        )));
    }
    let adj = RelationalAdjacency::new(graph);
    let x = table.input_matrix(hgnn.normalize_pos);
    let sets = positive_sets(graph, table, ssl.top_k);
    let eligible: Vec<usize> = (0..n).filter(|&i| !sets[i].is_empty()).collect();
    let skipped = n - eligible.len();
    if skipped > 0 {
        log::warn!("{skipped} regions have no positives and are skipped as anchors");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hgnn.seed);
    let mut backbone = Backbone::init(
        table.input_dim(),
        table.n_env,
        table.n_soc,
        hgnn.hidden_dim,
        hgnn.n_layers,
        hgnn.use_self_loop,
        &mut rng,
    );
    let mut adam = Adam::new(&backbone, ssl.lr);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(ssl.seed);
    let mut log = TrainingLog {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };

    for epoch in 0..ssl.epochs {
        let mut order = eligible.clone();
        order.shuffle(&mut batch_rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for batch in order.chunks(ssl.batch_size).filter(|b| b.len() >= 2) {
            let (loss, grads) = contrastive_loss_and_grads(&backbone, &x, &adj, batch, &sets, ssl)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("contrastive loss {loss}"),
                });
            }
            adam.step(&mut backbone, &grads).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
            total += loss;
            batches += 1;
        }
        let mean = if batches > 0 { total / batches as f64 } else { 0.0 };
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: mean,
            val_loss: mean,
        });
        if mean < log.best_val_loss {
            log.best_val_loss = mean;
            log.best_epoch = epoch;
        }
    }

    let out = backbone.forward(&x, &adj)?.output;
    let embeddings = if ssl.normalize { out.l2_normalize_rows().0 } else { out };
    Ok(PretrainedEncoder {
        config: HgnnConfig {
            normalize_embeddings: ssl.normalize,
            ..hgnn.clone()
        },
        backbone,
        embeddings,
        log,
        skipped_anchors: skipped,
    })
}

impl PretrainedEncoder {
    /// Model state holding this encoder and an untrained head.
    pub fn to_state(&self) -> Result<ModelState> {
        let mut state = ModelState::init(
            &self.config,
            self.backbone.input_w.rows(),
            self.backbone.env_embed.rows(),
            self.backbone.soc_embed.rows(),
        )?;
        state.backbone = self.backbone.clone();
        state.backbone_adam = Adam::new(&state.backbone, self.config.lr);
        Ok(state)
    }
}

/// Combine a frozen encoder state with a fine-tuned head.
pub fn attach_head(mut encoder: ModelState, head: FinetunedHead) -> ModelState {
    encoder.head_adam = Adam::new(&head.head, encoder.config.lr);
    encoder.head = head.head;
    encoder.transform = Some(head.transform);
    encoder
}

/// Regression head trained on frozen embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetunedHead {
    pub head: Head,
    pub transform: LabelTransform,
    pub log: TrainingLog,
}

/// Fit only the three-layer head on `embeddings`; the embeddings are
/// borrowed immutably and never written.
pub fn finetune_head(
    embeddings: &Matrix,
    table: &FeatureTable,
    labels: &LabelSet,
    split: &EvalSplit,
    config: &HgnnConfig,
) -> Result<FinetunedHead> {
    config.validate()?;
    if embeddings.rows() != table.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows for {} regions",
            embeddings.rows(),
            table.len()
        )));
    }
    let t = prepare_targets(table, labels, split, config.label_transform)?;
    // head seed is offset so it differs from the encoder's draw
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_4ead);
    let mut head = Head::init(embeddings.cols(), &mut rng);
    let mut adam = Adam::new(&head, config.lr);
    let e_train = embeddings.select_rows(&t.train_idx);
    let e_val = embeddings.select_rows(&t.val_idx);

    let mut log = TrainingLog {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best = head.clone();
    for epoch in 0..config.max_epochs {
        let hc = head.forward(&e_train)?;
        let (train_loss, d_pred) = mse(&hc.output, &t.train_y);
        let val_loss = if t.val_idx.is_empty() {
            train_loss
        } else {
            mse(&head.forward(&e_val)?.output, &t.val_y).0
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("train loss {train_loss}, validation loss {val_loss}"),
            });
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best = head.clone();
        } else if epoch - log.best_epoch >= config.patience {
            break;
        }
        let (g, _) = head.backward(&hc, &d_pred)?;
        adam.step(&mut head, &g).map_err(|e| Error::Diverged {
            epoch,
            detail: e.to_string(),
        })?;
    }
    debug_assert!(best.num_parameters() > 0);
    Ok(FinetunedHead {
        head: best,
        transform: t.transform,
        log,
    })
}

pub fn predict_from_embeddings(
    head: &FinetunedHead,
    embeddings: &Matrix,
    table: &FeatureTable,
    regions: &[RegionId],
) -> Result<Vec<(RegionId, f64)>> {
    let idx: Vec<usize> = regions
        .iter()
        .map(|&r| table.grid.check(r).map(|_| table.grid.index(r)))
        .collect::<Result<_>>()?;
    let out = head.head.forward(&embeddings.select_rows(&idx))?.output;
    Ok(regions
        .iter()
        .zip(out.data())
        .map(|(&r, &z)| (r, head.transform.invert(z)))
        .collect())
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Zscore => "zscore",
            TransformKind::Log1pZscore => "log1p+zscore",
        }
    }
}
