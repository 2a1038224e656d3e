use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use laplacegnn::augment::AugmentationPlan;
use laplacegnn::autodiff::Tensor;
use laplacegnn::bench::{run_bench, BenchConfig};
use laplacegnn::config::{AttackKind, RunConfig, Synthetic};
use laplacegnn::data::{generate_graph_set, generate_sbm, load_edgelist_reported, DatasetBundle, DatasetPaths, Task};
use laplacegnn::encoders::{gcn_forward, gin_forward, EncoderKind, ModelSpec, Params};
use laplacegnn::eval::{dice_attack, kfold_eval, linear_probe, random_attack, seeded_probe, ProbeResult};
use laplacegnn::graph::{build_adjacency, normalized_laplacian, Graph, NormalizedLaplacian};
use laplacegnn::pipeline::{item_with_plan, prepare_bundle};
use laplacegnn::train::{mix_seed, GraphItem, TrainState};
use laplacegnn::Error;
use serde::{Deserialize, Serialize};

use crate::{BenchArgs, EvalArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys or missing inputs: exit code 2.
    Usage(String),
    /// Anything that failed while running: exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Parameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn load_data(cfg: &RunConfig) -> Result<DatasetBundle, CliError> {
    let bundle = match &cfg.data_dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(usage(format!("data.dir: `{}` is not a directory", dir.display())));
            }
            let paths = DatasetPaths::in_dir(dir);
            if !paths.edges.is_file() {
                return Err(usage(format!("data.dir: missing {}", paths.edges.display())));
            }
            if !paths.features.is_file() {
                return Err(usage(format!("data.dir: missing {}", paths.features.display())));
            }
            let (bundle, warnings) = load_edgelist_reported(&paths)?;
            for w in warnings {
                log::warn!("{w}");
            }
            bundle
        }
        None => match cfg.synthetic {
            Synthetic::Sbm => generate_sbm(&cfg.sbm)?,
            Synthetic::GraphSet => {
                let s = &cfg.graph_set;
                generate_graph_set(s.count, s.classes, s.n_min, s.n_max, s.d_feat, s.seed)?
            }
        },
    };
    let want = match bundle.task {
        Task::NodeClassification => EncoderKind::Gcn,
        Task::GraphClassification => EncoderKind::Gin,
    };
    if cfg.encoder != want {
        return Err(usage(format!(
            "model.encoder: {} data needs `{}`",
            bundle.task.name(),
            want.name()
        )));
    }
    Ok(bundle)
}

fn in_dim(bundle: &DatasetBundle) -> usize {
    bundle.graphs.first().map_or(0, |g| g.features().ncols())
}

pub fn plan_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("plan-{index:04}.txt"))
}

fn items_for(cfg: &RunConfig, bundle: &DatasetBundle, plans: Option<&Path>) -> Result<Vec<GraphItem>, CliError> {
    let Some(dir) = plans else {
        return Ok(prepare_bundle(bundle, &cfg.centrality, &cfg.augment, cfg.workers)?);
    };
    bundle
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let path = plan_path(dir, i);
            let file = File::open(&path).map_err(|e| usage(format!("plan {}: {e}", path.display())))?;
            let plan = AugmentationPlan::read_from(BufReader::new(file), &path.display().to_string())?;
            if plan.n != g.n_nodes() {
                return Err(usage(format!(
                    "plan {} is for {} nodes, graph {i} has {}",
                    path.display(),
                    plan.n,
                    g.n_nodes()
                )));
            }
            Ok(item_with_plan(g, &cfg.centrality, plan)?)
        })
        .collect()
}

#[derive(Serialize)]
struct PlanRecord<'a> {
    graph: usize,
    n: usize,
    budget: f64,
    final_loss_max: f64,
    final_loss_min: f64,
    history_max: &'a [f64],
    history_min: &'a [f64],
}

pub fn augment(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let bundle = load_data(cfg)?;
    let t0 = Instant::now();
    let items = prepare_bundle(&bundle, &cfg.centrality, &cfg.augment, cfg.workers)?;
    fs::create_dir_all(out)?;
    let mut records = BufWriter::new(File::create(out.join("augment.jsonl"))?);
    println!("graph      n     budget    loss_max    loss_min");
    for (i, item) in items.iter().enumerate() {
        let p = &item.plan;
        let mut w = BufWriter::new(File::create(plan_path(out, i))?);
        p.write_to(&mut w)?;
        w.flush()?;
        let rec = PlanRecord {
            graph: i,
            n: p.n,
            budget: p.budget,
            final_loss_max: p.final_loss_max,
            final_loss_min: p.final_loss_min,
            history_max: &p.history_max,
            history_min: &p.history_min,
        };
        serde_json::to_writer(&mut records, &rec)?;
        records.write_all(b"\n")?;
        if i < 20 {
            println!(
                "{i:>5} {:>6} {:>10.2} {:>11.6} {:>11.6}",
                p.n, p.budget, p.final_loss_max, p.final_loss_min
            );
        }
    }
    records.flush()?;
    if items.len() > 20 {
        println!("... {} graphs in total", items.len());
    }
    log::info!("plans for {} graphs in {:.2?}", items.len(), t0.elapsed());
    println!("wrote {} plan files to {}", items.len(), out.display());
    Ok(())
}

pub fn train(cfg: &RunConfig, args: &TrainArgs) -> Result<(), CliError> {
    let bundle = load_data(cfg)?;
    let items = items_for(cfg, &bundle, args.plans.as_deref())?;
    let mut state = match &args.resume {
        Some(path) => {
            if !path.is_file() {
                return Err(usage(format!("checkpoint {} does not exist", path.display())));
            }
            let mut s = TrainState::load(path)?;
            if s.spec.in_dim != in_dim(&bundle) || s.spec.kind != cfg.encoder {
                return Err(usage("checkpoint model does not match the data or model.encoder"));
            }
            s.cfg.epochs = cfg.train.epochs;
            s
        }
        None => TrainState::new(cfg.model_spec(in_dim(&bundle)), cfg.train.clone())?,
    };
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("config.txt"), cfg.to_text())?;
    let metrics_path = args.out.join("metrics.jsonl");
    let file = if args.resume.is_some() {
        OpenOptions::new().create(true).append(true).open(&metrics_path)?
    } else {
        File::create(&metrics_path)?
    };
    let mut metrics = BufWriter::new(file);
    let every = cfg.checkpoint_every;
    let out = args.out.clone();
    let t0 = Instant::now();
    let start = state.epoch;
    let mut last_loss = None;
    state
        .fit(&items, |s, m| {
            serde_json::to_writer(&mut metrics, m).map_err(|e| Error::Io(e.into()))?;
            metrics.write_all(b"\n")?;
            if every > 0 && s.epoch % every == 0 {
                metrics.flush()?;
                s.save(&out.join(format!("ckpt-{:06}.bin", s.epoch)))?;
            }
            if m.epoch % 50 == 0 {
                log::info!("epoch {} loss {:.5}", m.epoch, m.loss);
            }
            last_loss = Some(m.loss);
            Ok(())
        })
        .map_err(|e| match e {
            Error::NonFinite { .. } => CliError::Runtime(format!("training aborted: {e}")),
            other => other.into(),
        })?;
    metrics.flush()?;
    state.save(&args.out.join("checkpoint.bin"))?;
    println!(
        "trained epochs {start}..{} in {:.1}s, final loss {}",
        state.epoch,
        t0.elapsed().as_secs_f64(),
        last_loss.map_or("n/a".into(), |l| format!("{l:.6}"))
    );
    println!("checkpoint {}", args.out.join("checkpoint.bin").display());
    Ok(())
}

/// Encoder embeddings of clean graphs.
pub fn embed_graphs(spec: &ModelSpec, params: &Params, graphs: &[Graph]) -> Result<Tensor, CliError> {
    let laps: Vec<NormalizedLaplacian> = graphs.iter().map(|g| normalized_laplacian(&build_adjacency(g))).collect();
    Ok(match spec.kind {
        EncoderKind::Gcn => gcn_forward(&laps[0], graphs[0].features(), spec, params)?,
        EncoderKind::Gin => {
            let views: Vec<_> = laps.iter().zip(graphs).map(|(l, g)| (l, g.features())).collect();
            gin_forward(&views, spec, params)?
        }
    })
}

fn probe_protocol(cfg: &RunConfig, bundle: &DatasetBundle, emb: &Tensor, seed: u64) -> Result<ProbeResult, CliError> {
    let e = &cfg.eval;
    let labels = bundle
        .labels()
        .ok_or_else(|| usage("evaluation needs labels"))?;
    Ok(match bundle.task {
        Task::NodeClassification if e.train_frac > 0.0 => {
            let seeds: Vec<u64> = (0..e.seeds as u64).map(|s| mix_seed(seed, 4, s)).collect();
            seeded_probe(emb, labels, e.train_frac, &seeds, e.l2, e.mode)?
        }
        Task::NodeClassification => {
            let (train, test) = match (bundle.split("train"), bundle.split("test")) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(usage("eval.train_frac = 0 needs train and test splits")),
            };
            let mut r = linear_probe(emb, labels, train, test, e.l2, e.mode)?;
            r.protocol = "fixed-split".into();
            r
        }
        Task::GraphClassification => kfold_eval(emb, labels, e.kfold, e.repeats, seed, e.l2, e.mode)?,
    })
}

fn attacked(bundle: &DatasetBundle, kind: AttackKind, sigma: f64, seed: u64) -> Result<DatasetBundle, CliError> {
    let mut out = bundle.clone();
    for (i, g) in bundle.graphs.iter().enumerate() {
        let s = mix_seed(seed, 5, i as u64);
        out.graphs[i] = match kind {
            AttackKind::None => g.clone(),
            AttackKind::Random => random_attack(g, sigma, s)?,
            AttackKind::Dice => {
                let labels = g
                    .labels()
                    .ok_or_else(|| usage("eval.attack = dice needs node labels"))?;
                dice_attack(g, labels, sigma, s)?
            }
        };
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack: String,
    pub sigma: f64,
    pub result: ProbeResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub epochs: usize,
    pub clean: ProbeResult,
    pub attacks: Vec<AttackRow>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "task {} after {} epochs\nclean ({}): {:.4} ± {:.4} over {}\n",
            self.task,
            self.epochs,
            self.clean.protocol,
            self.clean.mean,
            self.clean.std,
            self.clean.values.len()
        );
        if !self.attacks.is_empty() {
            s.push_str("attack   sigma    mean     std\n");
            for r in &self.attacks {
                s.push_str(&format!(
                    "{:<8} {:>5.2} {:>7.4} {:>7.4}\n",
                    r.attack, r.sigma, r.result.mean, r.result.std
                ));
            }
        }
        s
    }
}

pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<(), CliError> {
    if !args.checkpoint.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", args.checkpoint.display())));
    }
    let state = TrainState::load(&args.checkpoint)?;
    let bundle = load_data(cfg)?;
    if state.spec.in_dim != in_dim(&bundle) || state.spec.kind != cfg.encoder {
        return Err(usage("checkpoint model does not match the data or model.encoder"));
    }
    let seed = state.cfg.seed;
    let emb = embed_graphs(&state.spec, &state.student, &bundle.graphs)?;
    let clean = probe_protocol(cfg, &bundle, &emb, seed)?;

    let mut attacks = Vec::new();
    let kind = cfg.eval.attack;
    if kind != AttackKind::None {
        let name = match kind {
            AttackKind::Random => "random",
            AttackKind::Dice => "dice",
            AttackKind::None => unreachable!(),
        };
        for &sigma in &cfg.eval.sigmas {
            let result = if sigma == 0.0 {
                clean.clone()
            } else {
                // poisoning: retrain from scratch on the attacked graphs
                let poisoned = attacked(&bundle, kind, sigma, cfg.eval.attack_seed)?;
                let items = prepare_bundle(&poisoned, &cfg.centrality, &cfg.augment, cfg.workers)?;
                let mut fresh = TrainState::new(state.spec.clone(), state.cfg.clone())?;
                fresh.cfg.epochs = state.epoch;
                fresh.fit(&items, |_, _| Ok(()))?;
                let emb = embed_graphs(&fresh.spec, &fresh.student, &poisoned.graphs)?;
                probe_protocol(cfg, &poisoned, &emb, seed)?
            };
            log::info!("{name} sigma {sigma}: {:.4}", result.mean);
            attacks.push(AttackRow {
                attack: name.into(),
                sigma,
                result,
            });
        }
    }
    let report = EvalReport {
        task: bundle.task.name().into(),
        epochs: state.epoch,
        clean,
        attacks,
    };
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("eval.json"), serde_json::to_string_pretty(&report)?)?;
        fs::write(out.join("eval.txt"), &text)?;
        let mut lines = BufWriter::new(File::create(out.join("eval.jsonl"))?);
        for row in &report.attacks {
            serde_json::to_writer(&mut lines, row)?;
            lines.write_all(b"\n")?;
        }
        lines.flush()?;
    }
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let cfg = BenchConfig {
        ns: args.ns.clone(),
        fixed_k: args.fixed_k,
        ks: args.ks.clone(),
        fixed_n: args.fixed_n,
        reps: args.reps,
        seed: args.seed,
        ..Default::default()
    };
    let report = run_bench(&cfg)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_roundtrip() {
        let clean = ProbeResult::from_values("seeded-2", vec![0.75, 0.8125]);
        let report = EvalReport {
            task: "node-classification".into(),
            epochs: 3,
            clean: clean.clone(),
            attacks: vec![AttackRow {
                attack: "random".into(),
                sigma: 0.05,
                result: clean,
            }],
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_text(), report.to_text());
    }
}
