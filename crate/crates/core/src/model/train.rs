use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Backbone, Head, LabelTransform, ModelState, RelationalAdjacency};
use crate::error::{Error, Result};
use crate::eval::EvalSplit;
use crate::features::FeatureTable;
use crate::geodata::{self, LabelSet, RegionId};
use crate::hetgraph::HeteroGraph;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainingLog {
    pub fn to_csv(&self, provenance: &[String]) -> String {
        let mut out = geodata::comment_block(provenance);
        out.push_str("epoch,train_loss,val_loss\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.epoch,
                geodata::fmt_f64(r.train_loss),
                geodata::fmt_f64(r.val_loss)
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: &[String]) -> Result<()> {
        geodata::write(path.as_ref(), &self.to_csv(provenance))
    }

    /// Running minimum of the validation loss, epoch by epoch.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.epochs
            .iter()
            .map(|r| {
                best = best.min(r.val_loss);
                best
            })
            .collect()
    }
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &Matrix, target: &[f64]) -> (f64, Matrix) {
    let n = target.len().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), 1);
    let mut loss = 0.0;
    for (i, (&p, &t)) in pred.data().iter().zip(target).enumerate() {
        let e = p - t;
        loss += e * e;
        grad.set(i, 0, 2.0 * e / n);
    }
    (loss / n, grad)
}

/// Training-set MSE of backbone + head and the gradients of every parameter.
pub fn end_to_end_loss_and_grads(
    backbone: &Backbone,
    head: &Head,
    x: &Matrix,
    adj: &RelationalAdjacency,
    train_idx: &[usize],
    targets: &[f64],
) -> Result<(f64, Backbone, Head)> {
    let cache = backbone.forward(x, adj)?;
    let hc = head.forward(&cache.output.select_rows(train_idx))?;
    let (loss, d_pred) = mse(&hc.output, targets);
    let (head_g, d_rows) = head.backward(&hc, &d_pred)?;
    let mut d_emb = cache.output.zeros_like();
    d_emb.scatter_add_rows(train_idx, &d_rows);
    let bb_g = backbone.backward(&cache, adj, &d_emb)?;
    Ok((loss, bb_g, head_g))
}

pub(super) struct Targets {
    pub train_idx: Vec<usize>,
    pub train_y: Vec<f64>,
    pub val_idx: Vec<usize>,
    pub val_y: Vec<f64>,
    pub transform: LabelTransform,
}

pub(super) fn prepare_targets(
    table: &FeatureTable,
    labels: &LabelSet,
    split: &EvalSplit,
    kind: super::TransformKind,
) -> Result<Targets> {
    if split.train.is_empty() {
        return Err(Error::TooFewLabels("training split is empty".into()));
    }
    let lookup: HashMap<RegionId, f64> = labels.entries.iter().copied().collect();
    let values = |rs: &[RegionId]| -> Result<Vec<f64>> {
        rs.iter()
            .map(|r| {
                lookup
                    .get(r)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("split region ({}, {}) has no label", r.x, r.y)))
            })
            .collect()
    };
    let raw_train = values(&split.train)?;
    let raw_val = values(&split.validation)?;
    let transform = LabelTransform::fit(kind, &raw_train)?;
    let tf = |v: Vec<f64>| v.into_iter().map(|y| transform.apply(y)).collect::<Result<Vec<_>>>();
    let index = |rs: &[RegionId]| -> Result<Vec<usize>> {
        rs.iter()
            .map(|&r| table.grid.check(r).map(|_| table.grid.index(r)))
            .collect()
    };
    Ok(Targets {
        train_idx: index(&split.train)?,
        train_y: tf(raw_train)?,
        val_idx: index(&split.validation)?,
        val_y: tf(raw_val)?,
        transform,
    })
}

/// Full-batch training of backbone and head on the training labels with
/// early stopping on validation MSE (in transformed label units). Returns
/// the parameters of the best validation epoch.
pub fn train_end_to_end(
    graph: &HeteroGraph,
    table: &FeatureTable,
    labels: &LabelSet,
    split: &EvalSplit,
    mut state: ModelState,
) -> Result<(ModelState, TrainingLog)> {
    state.config.validate()?;
    let cfg = state.config.clone();
    let t = prepare_targets(table, labels, split, cfg.label_transform)?;
    let adj = RelationalAdjacency::new(graph);
    let x = table.input_matrix(cfg.normalize_pos);

    let mut log = TrainingLog {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best: Option<(Backbone, Head)> = None;

    for epoch in 0..cfg.max_epochs {
        let cache = state.backbone.forward(&x, &adj)?;
        let hc = state.head.forward(&cache.output.select_rows(&t.train_idx))?;
        let (train_loss, d_pred) = mse(&hc.output, &t.train_y);
        let val_loss = if t.val_idx.is_empty() {
            train_loss
        } else {
            let vp = state.head.forward(&cache.output.select_rows(&t.val_idx))?.output;
            mse(&vp, &t.val_y).0
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
            best = Some((state.backbone.clone(), state.head.clone()));
        } else if epoch - log.best_epoch >= cfg.patience {
            break;
        }

        let (head_g, d_rows) = state.head.backward(&hc, &d_pred)?;
        let mut d_emb = cache.output.zeros_like();
        d_emb.scatter_add_rows(&t.train_idx, &d_rows);
        let bb_g = state.backbone.backward(&cache, &adj, &d_emb)?;
        state
            .backbone_adam
            .step(&mut state.backbone, &bb_g)
            .map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
        state.head_adam.step(&mut state.head, &head_g).map_err(|e| Error::Diverged {
            epoch,
            detail: e.to_string(),
        })?;
    }

    if let Some((bb, hd)) = best {
        state.backbone = bb;
        state.head = hd;
    }
    state.transform = Some(t.transform);
    Ok((state, log))
}
