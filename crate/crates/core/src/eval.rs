//! Masked-ratio experiments: splits, metrics, report/prediction files and
//! embedding similarity maps.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, IdwConfig, Sample, UkConfig};
use crate::error::{Error, Result, StageExt};
use crate::features::{self, FeatureTable};
use crate::geodata::{self, Categories, GridSpec, LabelSet, LandCoverGrid, PoiRecord, RegionId};
use crate::hetgraph::{self, HeteroGraph};
use crate::model::{self, HgnnConfig, ModelState, SslConfig, TrainingLog};
use crate::tensor::Matrix;

/// Partition of the labelled regions. Each list is sorted by region index.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    /// Hidden from training; metrics are computed here.
    pub masked: Vec<RegionId>,
    pub train: Vec<RegionId>,
    pub validation: Vec<RegionId>,
    pub masked_ratio: f64,
    pub seed: u64,
}

pub const TRAIN_FRACTION: f64 = 0.8;

pub fn make_split(labels: &LabelSet, masked_ratio: f64, seed: u64) -> Result<EvalSplit> {
    if !(masked_ratio > 0.0 && masked_ratio < 1.0) {
        return Err(Error::Config(format!("masked ratio must be in (0, 1), got {masked_ratio}")));
    }
    let mut regions: Vec<RegionId> = labels.entries.iter().map(|e| e.0).collect();
    regions.sort_by_key(|r| (r.y, r.x));
    let n = regions.len();
    let n_masked = (masked_ratio * n as f64).round() as usize;
    let available = n - n_masked.min(n);
    let n_train = (TRAIN_FRACTION * available as f64).round() as usize;
    let n_val = available - n_train;
    if n_train == 0 || n_val == 0 {
        return Err(Error::TooFewLabels(format!(
            "{n} labels at masked ratio {masked_ratio} leave {n_train} train / {n_val} validation regions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    regions.shuffle(&mut rng);
    let key = |r: &RegionId| (r.y, r.x);
    let mut masked = regions[..n_masked].to_vec();
    let mut train = regions[n_masked..n_masked + n_train].to_vec();
    let mut validation = regions[n_masked + n_train..].to_vec();
    masked.sort_by_key(key);
    train.sort_by_key(key);
    validation.sort_by_key(key);
    Ok(EvalSplit {
        masked,
        train,
        validation,
        masked_ratio,
        seed,
    })
}

fn check_pair(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::TooFewLabels("metrics need at least one value".into()));
    }
    Ok(())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / y_true.len() as f64)
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    Ok((y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / y_true.len() as f64).sqrt())
}

/// Coefficient of determination against the mean of `y_true`. NaN when
/// `y_true` is constant.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(f64::NAN);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Geohg,
    GeohgSsl,
    Idw,
    Uk,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Geohg, Method::GeohgSsl, Method::Idw, Method::Uk];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Geohg => "geohg",
            Method::GeohgSsl => "geohg-ssl",
            Method::Idw => "idw",
            Method::Uk => "uk",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Method::Idw | Method::Uk)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected geohg, geohg-ssl, idw or uk)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: Method,
    pub indicator: String,
    pub masked_ratio: f64,
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
    /// NaN (written as null) when the masked ground truth is constant.
    pub r2: f64,
    pub r2_defined: bool,
    pub n_eval: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub uk_fallbacks: usize,
    pub runtime_s: f64,
}

impl MetricReport {
    pub fn to_json(&self, config: &ExperimentConfig, include_runtime: bool) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        let obj = v.as_object_mut().expect("report serialises to an object");
        if !include_runtime {
            obj.remove("runtime_s");
        }
        obj.insert(
            "config".into(),
            serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
        );
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>, config: &ExperimentConfig, include_runtime: bool) -> Result<()> {
        geodata::write(path.as_ref(), &self.to_json(config, include_runtime)?)
    }
}

/// All inputs of one study area.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: GridSpec,
    pub landcover: LandCoverGrid,
    pub categories: Categories,
    pub pois: Vec<PoiRecord>,
    pub labels: LabelSet,
}

pub const GRID_FILE: &str = "grid.toml";
pub const LANDCOVER_FILE: &str = "landcover.txt";
pub const CATEGORIES_FILE: &str = "categories.txt";
pub const POIS_FILE: &str = "pois.csv";
pub const LABELS_FILE: &str = "labels.csv";

impl Dataset {
    /// Read the standard file set from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let grid = geodata::load_grid(dir.join(GRID_FILE)).stage("load")?;
        let landcover = geodata::load_landcover(dir.join(LANDCOVER_FILE), &grid).stage("load")?;
        let categories = geodata::load_categories(dir.join(CATEGORIES_FILE)).stage("load")?;
        let pois = geodata::load_pois(dir.join(POIS_FILE), &categories).stage("load")?;
        let labels = geodata::load_labels(dir.join(LABELS_FILE), &grid).stage("load")?;
        Ok(Self {
            grid,
            landcover,
            categories,
            pois,
            labels,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>, provenance: &[String]) -> Result<()> {
        let dir = dir.as_ref();
        geodata::save_grid(dir.join(GRID_FILE), &self.grid, provenance)?;
        geodata::save_landcover(dir.join(LANDCOVER_FILE), &self.landcover, provenance)?;
        geodata::save_categories(dir.join(CATEGORIES_FILE), &self.categories)?;
        geodata::save_pois(dir.join(POIS_FILE), &self.pois, provenance)?;
        geodata::save_labels(dir.join(LABELS_FILE), &self.labels, provenance)
    }

    pub fn featurize(&self) -> Result<FeatureTable> {
        features::featurize_all(&self.grid, &self.landcover, &self.pois, self.categories.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub masked_ratio: f64,
    pub seed: u64,
    pub theta_env: f64,
    pub theta_soc: f64,
    pub hgnn: HgnnConfig,
    pub ssl: SslConfig,
    pub idw: IdwConfig,
    pub uk: UkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            masked_ratio: 0.75,
            seed: 0,
            theta_env: 0.6,
            theta_soc: 0.9,
            hgnn: HgnnConfig::default(),
            ssl: SslConfig::default(),
            idw: IdwConfig::default(),
            uk: UkConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Copy with every model seed derived from `self.seed`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.hgnn.seed = self.seed;
        c.ssl.seed = self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.masked_ratio > 0.0 && self.masked_ratio < 1.0) {
            return Err(Error::Config(format!("masked ratio must be in (0, 1), got {}", self.masked_ratio)));
        }
        if !(self.theta_env >= 0.0) || !(self.theta_soc >= 0.0) {
            return Err(Error::Config("thresholds must be >= 0".into()));
        }
        if !(self.idw.power > 0.0) || self.idw.k_neighbors == 0 || self.uk.k_neighbors < 3 {
            return Err(Error::Config("baseline settings need power > 0, IDW k >= 1 and UK k >= 3".into()));
        }
        self.hgnn.validate()?;
        self.ssl.validate()
    }

    /// `key=value` lines for file headers.
    pub fn provenance(&self, command: &str) -> Vec<String> {
        vec![
            format!("command={command}"),
            format!("seed={}", self.seed),
            format!("config={}", serde_json::to_string(self).unwrap_or_default()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub region: RegionId,
    pub y_true: f64,
    pub y_pred: f64,
    pub is_masked: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricReport,
    pub predictions: Vec<PredictionRow>,
    pub split: EvalSplit,
    /// Training log of the learned methods.
    pub log: Option<TrainingLog>,
    /// Final region embeddings of the learned methods.
    pub embeddings: Option<Matrix>,
}

pub fn predictions_to_csv(rows: &[PredictionRow], provenance: &[String]) -> String {
    let mut out = geodata::comment_block(provenance);
    out.push_str("x_r,y_r,y_true,y_pred,is_masked\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.region.x,
            r.region.y,
            geodata::fmt_f64(r.y_true),
            geodata::fmt_f64(r.y_pred),
            r.is_masked as u8
        );
    }
    out
}

pub fn save_predictions(path: impl AsRef<Path>, rows: &[PredictionRow], provenance: &[String]) -> Result<()> {
    geodata::write(path.as_ref(), &predictions_to_csv(rows, provenance))
}

/// Features, graph and trained model predictions for every labelled region.
fn learned_predictions(
    data: &Dataset,
    method: Method,
    cfg: &ExperimentConfig,
    split: &EvalSplit,
) -> Result<(HashMap<RegionId, f64>, TrainingLog, Matrix)> {
    let table = data.featurize().stage("featurize")?;
    let graph: HeteroGraph =
        hetgraph::build_graph(&data.grid, &table, cfg.theta_env, cfg.theta_soc).stage("build-graph")?;
    let regions: Vec<RegionId> = data.labels.entries.iter().map(|e| e.0).collect();
    let (preds, log, emb) = if method == Method::Geohg {
        let state = ModelState::init(&cfg.hgnn, table.input_dim(), table.n_env, table.n_soc).stage("train")?;
        let (state, log) = model::train_end_to_end(&graph, &table, &data.labels, split, state).stage("train")?;
        let emb = state.embed(&graph, &table).stage("predict")?;
        (model::predict(&state, &graph, &table, &regions).stage("predict")?, log, emb)
    } else {
        let enc = model::pretrain_contrastive(&graph, &table, &cfg.hgnn, &cfg.ssl).stage("pretrain")?;
        let head = model::finetune_head(&enc.embeddings, &table, &data.labels, split, &cfg.hgnn).stage("finetune")?;
        let p = model::predict_from_embeddings(&head, &enc.embeddings, &table, &regions).stage("predict")?;
        (p, head.log, enc.embeddings)
    };
    Ok((preds.into_iter().collect(), log, emb))
}

fn baseline_predictions(
    data: &Dataset,
    method: Method,
    cfg: &ExperimentConfig,
    split: &EvalSplit,
) -> Result<(HashMap<RegionId, f64>, usize)> {
    let lookup: HashMap<RegionId, f64> = data.labels.entries.iter().copied().collect();
    // fit on every available region: the validation set has no role here
    let samples: Vec<Sample> = split
        .train
        .iter()
        .chain(&split.validation)
        .map(|r| Sample::at_region(*r, lookup[r]))
        .collect();
    let regions: Vec<RegionId> = data.labels.entries.iter().map(|e| e.0).collect();
    let targets: Vec<(f64, f64)> = regions.iter().map(|&r| baselines::region_point(r)).collect();
    let (values, fallbacks) = match method {
        Method::Idw => {
            let v = targets
                .iter()
                .map(|&t| baselines::idw_predict(&samples, t, cfg.idw.power, cfg.idw.k_neighbors))
                .collect::<Result<Vec<_>>>()
                .stage("idw")?;
            (v, 0)
        }
        _ => {
            let model = baselines::fit_variogram(&samples).stage("fit-variogram")?;
            baselines::uk_predict_all(&samples, &targets, &model, cfg.uk.k_neighbors).stage("kriging")?
        }
    };
    Ok((regions.into_iter().zip(values).collect(), fallbacks))
}

/// Split, fit/train on the available regions, predict every labelled
/// region and score the masked ones. All randomness comes from `cfg.seed`.
pub fn run_experiment(data: &Dataset, method: Method, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cfg = cfg.resolved();
    cfg.validate().stage("config")?;
    let start = Instant::now();
    let split = make_split(&data.labels, cfg.masked_ratio, cfg.seed).stage("split")?;

    let (preds, fallbacks, log, embeddings) = if method.is_baseline() {
        let (p, f) = baseline_predictions(data, method, &cfg, &split)?;
        (p, f, None, None)
    } else {
        let (p, log, emb) = learned_predictions(data, method, &cfg, &split)?;
        (p, 0, Some(log), Some(emb))
    };

    let masked: std::collections::HashSet<RegionId> = split.masked.iter().copied().collect();
    let mut rows: Vec<PredictionRow> = data
        .labels
        .entries
        .iter()
        .map(|&(r, y)| PredictionRow {
            region: r,
            y_true: y,
            y_pred: preds[&r],
            is_masked: masked.contains(&r),
        })
        .collect();
    rows.sort_by_key(|r| (r.region.y, r.region.x));

    let (t, p): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.is_masked).map(|r| (r.y_true, r.y_pred)).unzip();
    let r2v = r2(&t, &p).stage("score")?;
    let report = MetricReport {
        method,
        indicator: data.labels.indicator_name.clone(),
        masked_ratio: cfg.masked_ratio,
        seed: cfg.seed,
        mae: mae(&t, &p).stage("score")?,
        rmse: rmse(&t, &p).stage("score")?,
        r2: r2v,
        r2_defined: !r2v.is_nan(),
        n_eval: t.len(),
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        best_epoch: log.as_ref().map(|l| l.best_epoch),
        best_val_loss: log.as_ref().map(|l| l.best_val_loss),
        uk_fallbacks: fallbacks,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        report,
        predictions: rows,
        split,
        log,
        embeddings,
    })
}

/// One experiment per masked ratio, all with the same seed.
pub fn masked_ratio_sweep(
    data: &Dataset,
    method: Method,
    cfg: &ExperimentConfig,
    ratios: &[f64],
) -> Result<Vec<MetricReport>> {
    ratios
        .iter()
        .map(|&m| {
            let c = ExperimentConfig {
                masked_ratio: m,
                ..cfg.clone()
            };
            run_experiment(data, method, &c).map(|o| o.report)
        })
        .collect()
}

/// Plain-text table of sweep results.
pub fn sweep_table(reports: &[MetricReport]) -> String {
    let mut out = String::from("method      masked  n_eval       MAE      RMSE        R2\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:>7.2} {:>7} {:>9.4} {:>9.4} {:>9.4}",
            r.method.as_str(),
            r.masked_ratio,
            r.n_eval,
            r.mae,
            r.rmse,
            r.r2
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub anchor: usize,
    /// Cosine similarity of every row with the anchor row.
    pub values: Vec<f64>,
    /// Rows whose similarity was set to 0 because a norm was zero.
    pub zero_norm: Vec<usize>,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

pub fn similarity_map(embeddings: &Matrix, anchor: usize) -> Result<SimilarityMap> {
    if anchor >= embeddings.rows() {
        return Err(Error::Config(format!(
            "anchor row {anchor} out of range for {} embeddings",
            embeddings.rows()
        )));
    }
    let a = embeddings.row(anchor);
    let mut zero_norm = Vec::new();
    let values = (0..embeddings.rows())
        .map(|i| match cosine_similarity(a, embeddings.row(i)) {
            Some(s) => s,
            None => {
                zero_norm.push(i);
                0.0
            }
        })
        .collect();
    if !zero_norm.is_empty() {
        log::warn!("{} embeddings have zero norm; similarity set to 0", zero_norm.len());
    }
    Ok(SimilarityMap {
        anchor,
        values,
        zero_norm,
    })
}

pub fn save_similarity(path: impl AsRef<Path>, grid: &GridSpec, map: &SimilarityMap, provenance: &[String]) -> Result<()> {
    if map.values.len() != grid.n_regions() {
        return Err(Error::LengthMismatch(map.values.len(), grid.n_regions()));
    }
    let mut out = geodata::comment_block(provenance);
    out.push_str("x_r,y_r,similarity\n");
    for (i, r) in grid.regions().enumerate() {
        let _ = writeln!(out, "{},{},{}", r.x, r.y, geodata::fmt_f64(map.values[i]));
    }
    geodata::write(path.as_ref(), &out)
}
