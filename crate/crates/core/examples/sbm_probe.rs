//! Trains on a two-block SBM and compares probe accuracy against the
//! untrained encoder.
//!
//! `cargo run --release --example sbm_probe -- seed=0 epochs=200 lr=1e-3 eps=0.008`

use laplacegnn::augment::AugmentConfig;
use laplacegnn::centrality::CentralityConfig;
use laplacegnn::data::{generate_sbm, SbmConfig};
use laplacegnn::encoders::{EncoderKind, ModelSpec};
use laplacegnn::eval::{seeded_probe, ProbeMode};
use laplacegnn::pipeline::prepare_graph;
use laplacegnn::train::{embed, TrainConfig, TrainState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<(String, String)> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let arg = |k: &str, d: &str| {
        args.iter()
            .find(|(key, _)| key == k)
            .map_or(d.to_string(), |(_, v)| v.clone())
    };
    let seed: u64 = arg("seed", "0").parse()?;
    let epochs: usize = arg("epochs", "200").parse()?;
    let lr: f64 = arg("lr", "1e-3").parse()?;
    let eps: f64 = arg("eps", "0.008").parse()?;
    let margin: f64 = arg("margin", "0.5").parse()?;
    let d_feat: usize = arg("d_feat", "16").parse()?;
    let frac: f64 = arg("train_frac", "0.1").parse()?;
    let step: f64 = arg("step", "1.0").parse()?;
    let p_out: f64 = arg("p_out", "0.01").parse()?;
    let beta: f64 = arg("beta", "0.998").parse()?;
    let accum: usize = arg("accum", "2").parse()?;
    let ratio: f64 = arg("r", "0.5").parse()?;

    let bundle = generate_sbm(&SbmConfig {
        margin,
        d_feat,
        p_out,
        seed,
        ..Default::default()
    })?;
    let g = &bundle.graphs[0];
    let t0 = std::time::Instant::now();
    let item = prepare_graph(
        g,
        &CentralityConfig::default(),
        &AugmentConfig {
            iterations: 20,
            k: 20,
            step,
            budget_ratio: ratio,
            seed,
            ..Default::default()
        },
    )?;
    println!(
        "plan: {:.2?}, loss max {:.4} min {:.4}",
        t0.elapsed(),
        item.plan.final_loss_max,
        item.plan.final_loss_min
    );
    let spec = ModelSpec {
        kind: EncoderKind::Gcn,
        in_dim: g.features().ncols(),
        hidden: vec![64, 32],
        proj_hidden: 64,
    };
    let cfg = TrainConfig {
        epochs,
        lr,
        eps,
        seed,
        ema_decay: beta,
        accum_steps: accum,
        ..Default::default()
    };
    let mut state = TrainState::new(spec.clone(), cfg)?;
    let data = vec![item];
    let labels = g.labels().unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let base = seeded_probe(&embed(&spec, &state.student, &data)?, labels, frac, &seeds, 1e-3, ProbeMode::Logistic)?;
    let raw = seeded_probe(g.features(), labels, frac, &seeds, 1e-3, ProbeMode::Logistic)?;
    let t0 = std::time::Instant::now();
    let metrics = state.fit(&data, |_, _| Ok(()))?;
    let trained = seeded_probe(&state.embed(&data)?, labels, frac, &seeds, 1e-3, ProbeMode::Logistic)?;
    let teacher = seeded_probe(&embed(&spec, &state.teacher, &data)?, labels, frac, &seeds, 1e-3, ProbeMode::Logistic)?;
    println!("teacher probe {:.3}", teacher.mean);
    println!(
        "train {:.2?}: loss {:.4} -> {:.4}; raw {:.3} untrained {:.3} trained {:.3}",
        t0.elapsed(),
        metrics.first().map_or(0.0, |m| m.loss),
        metrics.last().map_or(0.0, |m| m.loss),
        raw.mean,
        base.mean,
        trained.mean
    );
    Ok(())
}
