//! Command-line front end. [`dispatch`] parses an argument vector, runs one
//! subcommand and returns the process exit status.
//!
//! Outputs go under `--out` when given, otherwise under `$GEOHG_OUT_DIR`
//! (default `geohg-out`). Every output file carries the command, seed and
//! resolved configuration in its header.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{IdwConfig, UkConfig};
use crate::error::{Error, Result, StageExt};
use crate::eval::{self, Dataset, ExperimentConfig, Method};
use crate::features;
use crate::geodata::{self, RegionId};
use crate::hetgraph;
use crate::model::{self, HgnnConfig, ModelState, SslConfig, TransformKind};
use crate::synth::{self, SynthConfig};

pub const OUT_DIR_ENV: &str = "GEOHG_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "geohg-out";

/// Task presets: hypergate thresholds tuned per indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Carbon,
    Population,
    Gdp,
    Light,
    Pm25,
}

impl Preset {
    /// `(theta_env, theta_soc)`
    pub fn thresholds(self) -> (f64, f64) {
        match self {
            Preset::Carbon => (0.6, 0.9),
            Preset::Population => (0.2, 0.9),
            Preset::Gdp => (0.4, 1.2),
            Preset::Light => (0.2, 0.9),
            Preset::Pm25 => (0.8, 0.6),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geohg", version, about = "Region indicator inference on heterogeneous geo graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic study area (data files plus ground-truth ledger).
    Synth(SynthArgs),
    /// Compute region features and write them as CSV.
    Featurize(FeaturizeArgs),
    /// Build the heterogeneous region graph.
    BuildGraph(GraphArgs),
    /// Train the graph model end to end on the available labels.
    Train(TrainArgs),
    /// Contrastive pretraining of the encoder; writes embeddings.
    Pretrain(TrainArgs),
    /// Fit the regression head on frozen pretrained embeddings.
    Finetune(FinetuneArgs),
    /// Predict every labelled region from a checkpoint.
    Predict(PredictArgs),
    /// Run an interpolation baseline.
    Baseline(BaselineArgs),
    /// Full masked-ratio experiment for one method.
    Eval(EvalArgs),
    /// Grid of experiments over thresholds, masked ratios and seeds.
    Sweep(SweepArgs),
    /// Cosine similarity of every region embedding to an anchor region.
    Similarity(SimilarityArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (default: $GEOHG_OUT_DIR or ./geohg-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OutArgs {
    fn dir(&self, sub: &str) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
                .join(sub),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 48)]
    pub cols: usize,
    #[arg(long, default_value_t = 48)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Indicator jump across the river.
    #[arg(long)]
    pub jump: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub smooth: Option<f64>,
    #[arg(long)]
    pub pixels_per_cell: Option<usize>,
    /// Full generator configuration as JSON (overrides the size flags).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory with grid.toml, landcover.txt, categories.txt, pois.csv, labels.csv.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub theta_env: Option<f64>,
    #[arg(long)]
    pub theta_soc: Option<f64>,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// zscore or log1p+zscore
    #[arg(long)]
    pub label_transform: Option<TransformKind>,
    #[arg(long)]
    pub no_self_loop: bool,
    #[arg(long)]
    pub raw_positions: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub ssl_batch: Option<usize>,
    #[arg(long)]
    pub ssl_epochs: Option<usize>,
    #[arg(long)]
    pub idw_power: Option<f64>,
    #[arg(long)]
    pub idw_k: Option<usize>,
    #[arg(long)]
    pub uk_k: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.75)]
    pub masked_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ModelArgs {
    fn resolve(&self, split: &SplitArgs) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig {
            masked_ratio: split.masked_ratio,
            seed: split.seed,
            ..ExperimentConfig::default()
        };
        if let Some(p) = self.preset {
            (c.theta_env, c.theta_soc) = p.thresholds();
        }
        let h = &mut c.hgnn;
        set(&mut c.theta_env, self.theta_env);
        set(&mut c.theta_soc, self.theta_soc);
        set(&mut h.n_layers, self.n_layers);
        set(&mut h.hidden_dim, self.hidden_dim);
        set(&mut h.lr, self.lr);
        set(&mut h.max_epochs, self.max_epochs);
        set(&mut h.patience, self.patience);
        set(&mut h.label_transform, self.label_transform);
        h.use_self_loop = !self.no_self_loop;
        h.normalize_pos = !self.raw_positions;
        let s: &mut SslConfig = &mut c.ssl;
        set(&mut s.temperature, self.temperature);
        set(&mut s.top_k, self.top_k);
        set(&mut s.batch_size, self.ssl_batch);
        set(&mut s.epochs, self.ssl_epochs);
        s.lr = c.hgnn.lr;
        let i: &mut IdwConfig = &mut c.idw;
        set(&mut i.power, self.idw_power);
        set(&mut i.k_neighbors, self.idw_k);
        let u: &mut UkConfig = &mut c.uk;
        set(&mut u.k_neighbors, self.uk_k);
        let c = c.resolved();
        c.validate().stage("config")?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint written by `pretrain`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Use these embeddings instead of recomputing them from the checkpoint.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Split used to flag masked regions in the output.
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Idw,
    Uk,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Include wall-clock runtime in the report.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// geohg, geohg-ssl, idw or uk
    #[arg(long, default_value = "geohg")]
    pub method: Method,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "geohg")]
    pub method: Method,
    /// Comma-separated list; defaults to the preset/flag value.
    #[arg(long = "theta-env-grid", alias = "theta-envs", value_delimiter = ',')]
    pub theta_env_grid: Vec<f64>,
    #[arg(long = "theta-soc-grid", alias = "theta-socs", value_delimiter = ',')]
    pub theta_soc_grid: Vec<f64>,
    #[arg(long = "masked-ratios", value_delimiter = ',')]
    pub masked_ratios: Vec<f64>,
    #[arg(long = "seeds", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Concurrent experiments.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    /// Grid of the embeddings.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Anchor region as `x,y`.
    #[arg(long, value_parser = parse_region)]
    pub anchor: RegionId,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_region(s: &str) -> std::result::Result<RegionId, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad coordinate {v:?}: {e}"));
    Ok(RegionId::new(p(x)?, p(y)?))
}

/// Parse `argv` (including the program name) and run the subcommand.
/// Returns the exit status: 0 on success, 2 on usage errors, 1 otherwise.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::BuildGraph(a) => cmd_build_graph(a),
        Command::Train(a) => cmd_train(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Finetune(a) => cmd_finetune(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Baseline(a) => {
            let method = match a.method {
                BaselineMethod::Idw => Method::Idw,
                BaselineMethod::Uk => Method::Uk,
            };
            let dir = a.out.dir("baseline");
            eval_once(&a.data.data, method, &a.model.resolve(&a.split)?, a.timing, &dir, "baseline")
        }
        Command::Eval(a) => {
            let dir = a.out.dir("eval");
            eval_once(&a.data.data, a.method, &a.model.resolve(&a.split)?, a.timing, &dir, "eval")
        }
        Command::Sweep(a) => cmd_sweep(a),
        Command::Similarity(a) => cmd_similarity(a),
    }
}

fn provenance(command: &str, cfg: &impl Serialize, seed: u64) -> Vec<String> {
    vec![
        format!("command={command}"),
        format!("seed={seed}"),
        format!("config={}", serde_json::to_string(cfg).unwrap_or_default()),
    ]
}

fn load_data(dir: &Path) -> Result<Dataset> {
    Dataset::load(dir)
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::sized(a.cols, a.rows),
    };
    cfg.seed = a.seed;
    set(&mut cfg.jump, a.jump);
    set(&mut cfg.noise_sigma, a.noise);
    set(&mut cfg.smooth_amplitude, a.smooth);
    set(&mut cfg.pixels_per_cell, a.pixels_per_cell);
    let world = synth::generate(&cfg).stage("synth")?;
    let dir = a.out.dir("data");
    world.save(&dir).stage("synth")?;
    println!(
        "wrote {}x{} world ({} POIs) to {}",
        cfg.n_cols,
        cfg.n_rows,
        world.dataset.pois.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_featurize(a: FeaturizeArgs) -> Result<()> {
    let data = load_data(&a.data.data)?;
    let table = data.featurize().stage("featurize")?;
    let path = a.out.dir("features").join("features.csv");
    let prov = provenance("featurize", &serde_json::json!({ "data": a.data.data }), 0);
    features::save_features(&path, &table, &prov).stage("featurize")?;
    println!("wrote {} regions to {}", table.len(), path.display());
    Ok(())
}

fn cmd_build_graph(a: GraphArgs) -> Result<()> {
    let cfg = a.model.resolve(&SplitArgs {
        masked_ratio: 0.75,
        seed: 0,
    })?;
    let data = load_data(&a.data.data)?;
    let table = data.featurize().stage("featurize")?;
    let g = hetgraph::build_graph(&data.grid, &table, cfg.theta_env, cfg.theta_soc).stage("build-graph")?;
    let path = a.out.dir("graph").join("graph.txt");
    let prov = provenance(
        "build-graph",
        &serde_json::json!({ "theta_env": cfg.theta_env, "theta_soc": cfg.theta_soc }),
        0,
    );
    hetgraph::save_graph(&path, &g, &prov).stage("build-graph")?;
    println!(
        "{} nodes, {} RNR, {} ELR, {} SLR edges -> {}",
        g.n_nodes(),
        g.edges_rnr.len(),
        g.edges_elr.len(),
        g.edges_slr.len(),
        path.display()
    );
    Ok(())
}

struct Prepared {
    cfg: ExperimentConfig,
    data: Dataset,
    table: features::FeatureTable,
    graph: hetgraph::HeteroGraph,
    split: eval::EvalSplit,
}

fn prepare(data_dir: &Path, model: &ModelArgs, split: &SplitArgs) -> Result<Prepared> {
    let cfg = model.resolve(split)?;
    let data = load_data(data_dir)?;
    let table = data.featurize().stage("featurize")?;
    let graph = hetgraph::build_graph(&data.grid, &table, cfg.theta_env, cfg.theta_soc).stage("build-graph")?;
    let split = eval::make_split(&data.labels, cfg.masked_ratio, cfg.seed).stage("split")?;
    Ok(Prepared {
        cfg,
        data,
        table,
        graph,
        split,
    })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let p = prepare(&a.data.data, &a.model, &a.split)?;
    let state = ModelState::init(&p.cfg.hgnn, p.table.input_dim(), p.table.n_env, p.table.n_soc).stage("train")?;
    let (state, log) = model::train_end_to_end(&p.graph, &p.table, &p.data.labels, &p.split, state).stage("train")?;
    let dir = a.out.dir("train");
    let prov = p.cfg.provenance("train");
    model::save_checkpoint(dir.join("checkpoint.txt"), &state, &prov).stage("train")?;
    log.save(dir.join("train_log.csv"), &prov).stage("train")?;
    println!(
        "best epoch {} (validation MSE {:.6}) -> {}",
        log.best_epoch,
        log.best_val_loss,
        dir.display()
    );
    Ok(())
}

fn cmd_pretrain(a: TrainArgs) -> Result<()> {
    let p = prepare(&a.data.data, &a.model, &a.split)?;
    let enc = model::pretrain_contrastive(&p.graph, &p.table, &p.cfg.hgnn, &p.cfg.ssl).stage("pretrain")?;
    let dir = a.out.dir("pretrain");
    let prov = p.cfg.provenance("pretrain");
    model::save_checkpoint(dir.join("checkpoint.txt"), &enc.to_state()?, &prov).stage("pretrain")?;
    model::save_embeddings(dir.join("embeddings.csv"), &p.data.grid, &enc.embeddings, &prov).stage("pretrain")?;
    enc.log.save(dir.join("pretrain_log.csv"), &prov).stage("pretrain")?;
    println!(
        "final contrastive loss {:.4} -> {}",
        enc.log.epochs.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(())
}

fn cmd_finetune(a: FinetuneArgs) -> Result<()> {
    let p = prepare(&a.data.data, &a.model, &a.split)?;
    let encoder = model::load_checkpoint(&a.checkpoint).stage("load")?;
    let emb = match &a.embeddings {
        Some(path) => model::load_embeddings(path, &p.data.grid).stage("load")?,
        None => encoder.embed(&p.graph, &p.table).stage("finetune")?,
    };
    let cfg = HgnnConfig {
        seed: p.cfg.hgnn.seed,
        lr: p.cfg.hgnn.lr,
        max_epochs: p.cfg.hgnn.max_epochs,
        patience: p.cfg.hgnn.patience,
        label_transform: p.cfg.hgnn.label_transform,
        ..encoder.config.clone()
    };
    let head = model::finetune_head(&emb, &p.table, &p.data.labels, &p.split, &cfg).stage("finetune")?;
    let dir = a.out.dir("finetune");
    let prov = p.cfg.provenance("finetune");
    head.log.save(dir.join("finetune_log.csv"), &prov).stage("finetune")?;
    let best = head.log.best_val_loss;
    let state = model::attach_head(encoder, head);
    model::save_checkpoint(dir.join("checkpoint.txt"), &state, &prov).stage("finetune")?;
    println!("validation MSE {best:.6} -> {}", dir.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let p = prepare(&a.data.data, &a.model, &a.split)?;
    let state = model::load_checkpoint(&a.checkpoint).stage("load")?;
    let regions: Vec<RegionId> = p.data.labels.entries.iter().map(|e| e.0).collect();
    let preds = model::predict(&state, &p.graph, &p.table, &regions).stage("predict")?;
    let masked: std::collections::HashSet<RegionId> = p.split.masked.iter().copied().collect();
    let mut rows: Vec<eval::PredictionRow> = p
        .data
        .labels
        .entries
        .iter()
        .zip(preds)
        .map(|(&(r, y), (_, v))| eval::PredictionRow {
            region: r,
            y_true: y,
            y_pred: v,
            is_masked: masked.contains(&r),
        })
        .collect();
    rows.sort_by_key(|r| (r.region.y, r.region.x));
    let path = a.out.dir("predict").join("predictions.csv");
    let mut prov = p.cfg.provenance("predict");
    prov.push(format!("checkpoint={}", a.checkpoint.display()));
    eval::save_predictions(&path, &rows, &prov).stage("predict")?;
    println!("wrote {} predictions to {}", rows.len(), path.display());
    Ok(())
}

fn write_experiment(out: &eval::ExperimentOutput, cfg: &ExperimentConfig, timing: bool, dir: &Path, command: &str) -> Result<()> {
    let prov = cfg.provenance(command);
    out.report.save(dir.join("report.json"), cfg, timing)?;
    eval::save_predictions(dir.join("predictions.csv"), &out.predictions, &prov)?;
    if let Some(log) = &out.log {
        log.save(dir.join("train_log.csv"), &prov)?;
    }
    Ok(())
}

fn eval_once(data_dir: &Path, method: Method, cfg: &ExperimentConfig, timing: bool, dir: &Path, command: &str) -> Result<()> {
    let data = load_data(data_dir)?;
    let out = eval::run_experiment(&data, method, cfg)?;
    write_experiment(&out, cfg, timing, dir, command).stage("write")?;
    let r = &out.report;
    println!(
        "{} masked={} seed={}: MAE {:.4} RMSE {:.4} R2 {:.4} (n={}) -> {}",
        r.method,
        r.masked_ratio,
        r.seed,
        r.mae,
        r.rmse,
        r.r2,
        r.n_eval,
        dir.display()
    );
    Ok(())
}

fn fmt_key(v: f64) -> String {
    format!("{v}")
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let base = a.model.resolve(&a.split)?;
    let or_default = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let envs = or_default(&a.theta_env_grid, base.theta_env);
    let socs = or_default(&a.theta_soc_grid, base.theta_soc);
    let ratios = or_default(&a.masked_ratios, base.masked_ratio);
    let seeds = if a.seeds.is_empty() { vec![base.seed] } else { a.seeds.clone() };
    let mut jobs = Vec::new();
    for &te in &envs {
        for &ts in &socs {
            for &m in &ratios {
                for &s in &seeds {
                    let cfg = ExperimentConfig {
                        theta_env: te,
                        theta_soc: ts,
                        masked_ratio: m,
                        seed: s,
                        ..base.clone()
                    }
                    .resolved();
                    cfg.validate().stage("config")?;
                    jobs.push(cfg);
                }
            }
        }
    }
    let data = load_data(&a.data.data)?;
    let dir = a.out.dir("sweep");
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<eval::MetricReport>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = a.jobs.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = jobs.get(i) else { break };
                let sub = dir.join(format!(
                    "theta_env={}_theta_soc={}_masked={}_seed={}",
                    fmt_key(cfg.theta_env),
                    fmt_key(cfg.theta_soc),
                    fmt_key(cfg.masked_ratio),
                    cfg.seed
                ));
                let res = eval::run_experiment(&data, a.method, cfg).and_then(|out| {
                    write_experiment(&out, cfg, a.timing, &sub, "sweep").stage("write")?;
                    Ok(out.report)
                });
                results.lock().expect("results lock")[i] = Some(res);
            });
        }
    });
    let results = results.into_inner().expect("results lock");
    let mut summary = geodata_comment(&provenance("sweep", &base, base.seed));
    summary.push_str("method,theta_env,theta_soc,masked_ratio,seed,mae,rmse,r2,n_eval\n");
    let mut failures = 0;
    for (cfg, r) in jobs.iter().zip(results) {
        match r.expect("every job ran") {
            Ok(r) => summary.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.method,
                cfg.theta_env,
                cfg.theta_soc,
                r.masked_ratio,
                r.seed,
                r.mae,
                r.rmse,
                r.r2,
                r.n_eval
            )),
            Err(e) => {
                failures += 1;
                eprintln!(
                    "job theta_env={} theta_soc={} masked={} seed={} failed: {e}",
                    cfg.theta_env, cfg.theta_soc, cfg.masked_ratio, cfg.seed
                );
            }
        }
    }
    let path = dir.join("summary.csv");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    std::fs::write(&path, &summary).map_err(|e| Error::io(&path, e))?;
    print!("{}", summary.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"));
    println!();
    if failures > 0 {
        return Err(Error::Config(format!("{failures} of {} sweep jobs failed", jobs.len())).at("sweep"));
    }
    Ok(())
}

fn geodata_comment(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn cmd_similarity(a: SimilarityArgs) -> Result<()> {
    let grid = geodata::load_grid(a.data.data.join(eval::GRID_FILE)).stage("load")?;
    grid.check(a.anchor).stage("similarity")?;
    let emb = model::load_embeddings(&a.embeddings, &grid).stage("load")?;
    let map = eval::similarity_map(&emb, grid.index(a.anchor)).stage("similarity")?;
    let path = a.out.dir("similarity").join("similarity.csv");
    let prov = vec![
        "command=similarity".to_string(),
        format!("anchor={},{}", a.anchor.x, a.anchor.y),
        format!("embeddings={}", a.embeddings.display()),
        format!("zero_norm_regions={}", map.zero_norm.len()),
    ];
    eval::save_similarity(&path, &grid, &map, &prov).stage("similarity")?;
    println!("wrote similarity map to {}", path.display());
    Ok(())
}
