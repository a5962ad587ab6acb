//! Contrastive pretraining of the encoder, then a regression head fitted on
//! the frozen embeddings. The encoder is saved and reloaded from a checkpoint
//! in between, as the command-line pretrain/finetune steps do.
//!
//! cargo run --release --example pretrain_finetune

use geohg::eval::{make_split, r2};
use geohg::hetgraph::build_graph;
use geohg::model::{
    attach_head, finetune_head, load_checkpoint, predict, pretrain_contrastive, save_checkpoint, HgnnConfig, SslConfig,
};
use geohg::synth::{generate, SynthConfig};
use geohg::tensor::Parameters;

fn main() -> geohg::Result<()> {
    let world = generate(&SynthConfig::sized(32, 32))?;
    let data = &world.dataset;
    let table = data.featurize()?;
    let graph = build_graph(&data.grid, &table, 0.6, 0.9)?;

    let enc = pretrain_contrastive(&graph, &table, &HgnnConfig::default(), &SslConfig::default())?;
    for e in &enc.log.epochs {
        println!("pretrain epoch {:>2}  InfoNCE {:.4}", e.epoch, e.train_loss);
    }

    let dir = std::env::temp_dir().join("geohg-pretrain-example");
    let ckpt = dir.join("encoder.txt");
    save_checkpoint(&ckpt, &enc.to_state()?, &["example=pretrain_finetune".into()])?;
    let encoder = load_checkpoint(&ckpt)?;
    let before = encoder.backbone.checksum();

    let split = make_split(&data.labels, 0.75, 0)?;
    let emb = encoder.embed(&graph, &table)?;
    let head = finetune_head(&emb, &table, &data.labels, &split, &encoder.config)?;
    let model = attach_head(encoder, head);
    assert_eq!(before, model.backbone.checksum(), "fine-tuning must not touch the encoder");

    let truth: std::collections::HashMap<_, _> = data.labels.entries.iter().copied().collect();
    let preds = predict(&model, &graph, &table, &split.masked)?;
    let y: Vec<f64> = preds.iter().map(|(r, _)| truth[r]).collect();
    let p: Vec<f64> = preds.iter().map(|(_, v)| *v).collect();
    println!("masked-region R2 after fine-tuning: {:.3}", r2(&y, &p)?);
    Ok(())
}
