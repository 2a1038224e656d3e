//! Plain-text `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Every key has a default; unknown
//! keys and malformed values are reported with the key name.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::augment::AugmentConfig;
use crate::centrality::{CentralityConfig, Measure};
use crate::data::SbmConfig;
use crate::encoders::{EncoderKind, ModelSpec, PerturbSite};
use crate::error::{Error, Result};
use crate::eval::ProbeMode;
use crate::spectral::Objective;
use crate::train::{Optimizer, TrainConfig};

/// Where graphs come from when no dataset directory is given.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Synthetic {
    Sbm,
    GraphSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Random,
    Dice,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphSetConfig {
    pub count: usize,
    pub classes: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub d_feat: usize,
    pub seed: u64,
}

impl Default for GraphSetConfig {
    fn default() -> Self {
        Self {
            count: 40,
            classes: 2,
            n_min: 12,
            n_max: 20,
            d_feat: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub mode: ProbeMode,
    pub l2: f64,
    pub seeds: usize,
    /// Train fraction for seeded splits; `0` uses the dataset's own splits.
    pub train_frac: f64,
    /// Folds for graph tasks; `0` disables k-fold.
    pub kfold: usize,
    pub repeats: usize,
    pub attack: AttackKind,
    pub sigmas: Vec<f64>,
    pub attack_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: ProbeMode::Logistic,
            l2: 1e-3,
            seeds: 10,
            train_frac: 0.1,
            kfold: 10,
            repeats: 5,
            attack: AttackKind::None,
            sigmas: vec![0.0, 0.05, 0.2],
            attack_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub synthetic: Synthetic,
    pub sbm: SbmConfig,
    pub graph_set: GraphSetConfig,
    pub centrality: CentralityConfig,
    pub augment: AugmentConfig,
    pub encoder: EncoderKind,
    /// `None` picks the encoder's default widths.
    pub hidden: Option<Vec<usize>>,
    pub proj_hidden: usize,
    pub train: TrainConfig,
    pub checkpoint_every: usize,
    pub eval: EvalConfig,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            synthetic: Synthetic::Sbm,
            sbm: SbmConfig::default(),
            graph_set: GraphSetConfig::default(),
            centrality: CentralityConfig::default(),
            augment: AugmentConfig::default(),
            encoder: EncoderKind::Gcn,
            hidden: None,
            proj_hidden: 512,
            train: TrainConfig::default(),
            checkpoint_every: 0,
            eval: EvalConfig::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected true/false, got `{v}`"))),
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn model_spec(&self, in_dim: usize) -> ModelSpec {
        let mut spec = match self.encoder {
            EncoderKind::Gcn => ModelSpec::gcn(in_dim),
            EncoderKind::Gin => ModelSpec::gin(in_dim),
        };
        if let Some(h) = &self.hidden {
            spec.hidden = h.clone();
        }
        spec.proj_hidden = self.proj_hidden;
        spec
    }

    /// Parses a config file body on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "<config>".into(),
                line: no + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| bad(pair, "override must look like key=value"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key;
        match key {
            "data.dir" => self.data_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "data.synthetic" => {
                self.synthetic = match v {
                    "sbm" => Synthetic::Sbm,
                    "graphs" => Synthetic::GraphSet,
                    _ => return Err(bad(k, "expected sbm or graphs")),
                }
            }
            "sbm.n" => self.sbm.n = num(k, v)?,
            "sbm.blocks" => self.sbm.blocks = num(k, v)?,
            "sbm.p_in" => self.sbm.p_in = num(k, v)?,
            "sbm.p_out" => self.sbm.p_out = num(k, v)?,
            "sbm.d_feat" => self.sbm.d_feat = num(k, v)?,
            "sbm.margin" => self.sbm.margin = num(k, v)?,
            "sbm.noise" => self.sbm.noise = num(k, v)?,
            "sbm.train_frac" => self.sbm.train_frac = num(k, v)?,
            "sbm.val_frac" => self.sbm.val_frac = num(k, v)?,
            "sbm.seed" => self.sbm.seed = num(k, v)?,
            "graphs.count" => self.graph_set.count = num(k, v)?,
            "graphs.classes" => self.graph_set.classes = num(k, v)?,
            "graphs.n_min" => self.graph_set.n_min = num(k, v)?,
            "graphs.n_max" => self.graph_set.n_max = num(k, v)?,
            "graphs.d_feat" => self.graph_set.d_feat = num(k, v)?,
            "graphs.seed" => self.graph_set.seed = num(k, v)?,
            "centrality.measures" => {
                self.centrality.measures = v
                    .split(',')
                    .map(|m| Measure::parse(m).ok_or_else(|| bad(k, format!("unknown measure `{m}`"))))
                    .collect::<Result<Vec<_>>>()?;
            }
            "centrality.weights" => {
                self.centrality.weights = if v == "uniform" { None } else { Some(list(k, v)?) };
            }
            "centrality.damping" => {
                let d: f64 = num(k, v)?;
                for m in &mut self.centrality.measures {
                    if let Measure::PageRank { damping } = m {
                        *damping = d;
                    }
                }
            }
            "centrality.katz_alpha" => {
                let a = if v == "auto" { None } else { Some(num(k, v)?) };
                for m in &mut self.centrality.measures {
                    if let Measure::Katz { alpha } = m {
                        *alpha = a;
                    }
                }
            }
            "centrality.tol" => self.centrality.tol = num(k, v)?,
            "centrality.max_iter" => self.centrality.max_iter = num(k, v)?,
            "augment.budget_ratio" => self.augment.budget_ratio = num(k, v)?,
            "augment.step" => self.augment.step = num(k, v)?,
            "augment.iterations" => self.augment.iterations = num(k, v)?,
            "augment.k" => self.augment.k = num(k, v)?,
            "augment.decay" => self.augment.decay = boolean(k, v)?,
            "augment.objective" => {
                self.augment.objective = match v {
                    "spectral" => Objective::SpectralDistance,
                    "eigennorm" => Objective::EigenNorm,
                    _ => return Err(bad(k, "expected spectral or eigennorm")),
                }
            }
            "augment.rho" => self.augment.rho = num(k, v)?,
            "augment.eigen_tol" => self.augment.eigen_tol = num(k, v)?,
            "augment.eigen_max_iter" => self.augment.eigen_max_iter = num(k, v)?,
            "augment.seed" => self.augment.seed = num(k, v)?,
            "model.encoder" => {
                self.encoder = EncoderKind::parse(v).ok_or_else(|| bad(k, "expected gcn or gin"))?;
            }
            "model.hidden" => self.hidden = if v == "auto" { None } else { Some(list(k, v)?) },
            "model.proj_hidden" => self.proj_hidden = num(k, v)?,
            "train.epochs" => self.train.epochs = num(k, v)?,
            "train.lr" => self.train.lr = num(k, v)?,
            "train.weight_decay" => self.train.weight_decay = num(k, v)?,
            "train.ema_decay" => self.train.ema_decay = num(k, v)?,
            "train.eps" => self.train.eps = num(k, v)?,
            "train.pgd_step" => self.train.pgd_step = if v == "auto" { None } else { Some(num(k, v)?) },
            "train.pgd_steps" => self.train.pgd_steps = num(k, v)?,
            "train.accum_steps" => self.train.accum_steps = num(k, v)?,
            "train.optimizer" => {
                self.train.optimizer = match v {
                    "adam" => Optimizer::Adam,
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(bad(k, "expected adam or sgd")),
                }
            }
            "train.adam_beta1" => self.train.adam_beta1 = num(k, v)?,
            "train.adam_beta2" => self.train.adam_beta2 = num(k, v)?,
            "train.site" => {
                self.train.site = match v {
                    "first" => PerturbSite::FirstHidden,
                    "last" => PerturbSite::LastHidden,
                    _ => return Err(bad(k, "expected first or last")),
                }
            }
            "train.symmetric" => self.train.symmetric = boolean(k, v)?,
            "train.resample_views" => self.train.resample_views = boolean(k, v)?,
            "train.rho" => self.train.rho = num(k, v)?,
            "train.seed" => self.train.seed = num(k, v)?,
            "train.checkpoint_every" => self.checkpoint_every = num(k, v)?,
            "eval.mode" => {
                self.eval.mode = match v {
                    "logistic" => ProbeMode::Logistic,
                    "ridge" => ProbeMode::Ridge,
                    _ => return Err(bad(k, "expected logistic or ridge")),
                }
            }
            "eval.l2" => self.eval.l2 = num(k, v)?,
            "eval.seeds" => self.eval.seeds = num(k, v)?,
            "eval.train_frac" => self.eval.train_frac = num(k, v)?,
            "eval.kfold" => self.eval.kfold = num(k, v)?,
            "eval.repeats" => self.eval.repeats = num(k, v)?,
            "eval.attack" => {
                self.eval.attack = match v {
                    "none" => AttackKind::None,
                    "random" => AttackKind::Random,
                    "dice" => AttackKind::Dice,
                    _ => return Err(bad(k, "expected none, random or dice")),
                }
            }
            "eval.sigmas" => self.eval.sigmas = list(k, v)?,
            "eval.attack_seed" => self.eval.attack_seed = num(k, v)?,
            "workers" => self.workers = num(k, v)?,
            _ => return Err(bad(k, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |key: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Parameter { name, reason } => bad(&format!("{key}.{name}"), reason),
                other => other,
            })
        };
        wrap("augment", self.augment.validate())?;
        wrap("train", self.train.validate())?;
        wrap("model", self.model_spec(1).validate())?;
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        if self.eval.sigmas.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(bad("eval.sigmas", "every sigma must lie in [0, 1]"));
        }
        if !(self.eval.train_frac >= 0.0 && self.eval.train_frac < 1.0) {
            return Err(bad("eval.train_frac", "must lie in [0, 1)"));
        }
        if self.eval.seeds == 0 {
            return Err(bad("eval.seeds", "must be at least 1"));
        }
        if let Some(w) = &self.centrality.weights {
            if w.len() != self.centrality.measures.len() {
                return Err(bad("centrality.weights", "one weight per measure"));
            }
        }
        Ok(())
    }

    /// Every key with its current value, in file syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("data.dir", self.data_dir.as_ref().map_or(String::new(), |p| p.display().to_string()));
        kv(
            "data.synthetic",
            match self.synthetic {
                Synthetic::Sbm => "sbm",
                Synthetic::GraphSet => "graphs",
            }
            .into(),
        );
        kv("sbm.n", self.sbm.n.to_string());
        kv("sbm.blocks", self.sbm.blocks.to_string());
        kv("sbm.p_in", format!("{:?}", self.sbm.p_in));
        kv("sbm.p_out", format!("{:?}", self.sbm.p_out));
        kv("sbm.d_feat", self.sbm.d_feat.to_string());
        kv("sbm.margin", format!("{:?}", self.sbm.margin));
        kv("sbm.noise", format!("{:?}", self.sbm.noise));
        kv("sbm.train_frac", format!("{:?}", self.sbm.train_frac));
        kv("sbm.val_frac", format!("{:?}", self.sbm.val_frac));
        kv("sbm.seed", self.sbm.seed.to_string());
        kv("graphs.count", self.graph_set.count.to_string());
        kv("graphs.classes", self.graph_set.classes.to_string());
        kv("graphs.n_min", self.graph_set.n_min.to_string());
        kv("graphs.n_max", self.graph_set.n_max.to_string());
        kv("graphs.d_feat", self.graph_set.d_feat.to_string());
        kv("graphs.seed", self.graph_set.seed.to_string());
        kv(
            "centrality.measures",
            self.centrality.measures.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        kv("centrality.weights", self.centrality.weights.as_ref().map_or("uniform".into(), |w| join(w)));
        for m in &self.centrality.measures {
            match m {
                Measure::PageRank { damping } => kv("centrality.damping", format!("{damping:?}")),
                Measure::Katz { alpha } => {
                    kv("centrality.katz_alpha", alpha.map_or("auto".into(), |a| format!("{a:?}")))
                }
                Measure::Degree => {}
            }
        }
        kv("centrality.tol", format!("{:?}", self.centrality.tol));
        kv("centrality.max_iter", self.centrality.max_iter.to_string());
        let a = &self.augment;
        kv("augment.budget_ratio", format!("{:?}", a.budget_ratio));
        kv("augment.step", format!("{:?}", a.step));
        kv("augment.iterations", a.iterations.to_string());
        kv("augment.k", a.k.to_string());
        kv("augment.decay", a.decay.to_string());
        kv(
            "augment.objective",
            match a.objective {
                Objective::SpectralDistance => "spectral",
                Objective::EigenNorm => "eigennorm",
            }
            .into(),
        );
        kv("augment.rho", format!("{:?}", a.rho));
        kv("augment.eigen_tol", format!("{:?}", a.eigen_tol));
        kv("augment.eigen_max_iter", a.eigen_max_iter.to_string());
        kv("augment.seed", a.seed.to_string());
        kv("model.encoder", self.encoder.name().into());
        kv("model.hidden", self.hidden.as_ref().map_or("auto".into(), |h| join(h)));
        kv("model.proj_hidden", self.proj_hidden.to_string());
        let t = &self.train;
        kv("train.epochs", t.epochs.to_string());
        kv("train.lr", format!("{:?}", t.lr));
        kv("train.weight_decay", format!("{:?}", t.weight_decay));
        kv("train.ema_decay", format!("{:?}", t.ema_decay));
        kv("train.eps", format!("{:?}", t.eps));
        kv("train.pgd_step", t.pgd_step.map_or("auto".into(), |a| format!("{a:?}")));
        kv("train.pgd_steps", t.pgd_steps.to_string());
        kv("train.accum_steps", t.accum_steps.to_string());
        kv(
            "train.optimizer",
            match t.optimizer {
                Optimizer::Adam => "adam",
                Optimizer::Sgd => "sgd",
            }
            .into(),
        );
        kv("train.adam_beta1", format!("{:?}", t.adam_beta1));
        kv("train.adam_beta2", format!("{:?}", t.adam_beta2));
        kv(
            "train.site",
            match t.site {
                PerturbSite::FirstHidden => "first",
                PerturbSite::LastHidden => "last",
            }
            .into(),
        );
        kv("train.symmetric", t.symmetric.to_string());
        kv("train.resample_views", t.resample_views.to_string());
        kv("train.rho", format!("{:?}", t.rho));
        kv("train.seed", t.seed.to_string());
        kv("train.checkpoint_every", self.checkpoint_every.to_string());
        let e = &self.eval;
        kv(
            "eval.mode",
            match e.mode {
                ProbeMode::Logistic => "logistic",
                ProbeMode::Ridge => "ridge",
            }
            .into(),
        );
        kv("eval.l2", format!("{:?}", e.l2));
        kv("eval.seeds", e.seeds.to_string());
        kv("eval.train_frac", format!("{:?}", e.train_frac));
        kv("eval.kfold", e.kfold.to_string());
        kv("eval.repeats", e.repeats.to_string());
        kv(
            "eval.attack",
            match e.attack {
                AttackKind::None => "none",
                AttackKind::Random => "random",
                AttackKind::Dice => "dice",
            }
            .into(),
        );
        kv("eval.sigmas", e.sigmas.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","));
        kv("eval.attack_seed", e.attack_seed.to_string());
        kv("workers", self.workers.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let c = RunConfig::default();
        assert_eq!(c.augment.budget_ratio, 0.5);
        assert_eq!(c.augment.k, 100);
        assert_eq!(c.train.eps, 0.008);
        assert_eq!(c.train.ema_decay, 0.998);
        assert_eq!(c.train.pgd_steps, 3);
        assert_eq!(c.train.accum_steps, 2);
        assert_eq!(c.train.lr, 1e-5);
        assert_eq!(c.train.weight_decay, 8e-4);
        assert_eq!(c.model_spec(3).hidden, vec![512, 256]);
        assert_eq!(c.eval.sigmas, vec![0.0, 0.05, 0.2]);
    }

    #[test]
    fn text_roundtrip() {
        let mut c = RunConfig::default();
        c.set("model.encoder", "gin").unwrap();
        c.set("train.eps", "0").unwrap();
        c.set("centrality.katz_alpha", "0.05").unwrap();
        c.set("eval.sigmas", "0,0.2").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = RunConfig::default();
        match c.set("train.nope", "1").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "train.nope"),
            e => panic!("{e}"),
        }
        match c.set("augment.k", "many").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "augment.k"),
            e => panic!("{e}"),
        }
        c.set("augment.budget_ratio", "2").unwrap();
        match c.validate().unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "augment.budget_ratio"),
            e => panic!("{e}"),
        }
        assert!(RunConfig::from_text("just words").is_err());
    }
}
