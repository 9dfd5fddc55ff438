//! Run configuration: JSON file values overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use slocc_synth::catalog::{Catalog, Representative};
use slocc_synth::gates::{parse_gate_kinds, GateSet};
use slocc_synth::qlearn::TrainConfig;
use slocc_synth::termspace::{parse_termset, TermSet};

pub const DEFAULT_GATES: &str = "x,h,cnot,ccnot,ch";
pub const DEFAULT_INITIAL: &str = "0000";
pub const DEFAULT_OUT: &str = "out";

/// Every field is optional so that a config file and flags can be layered.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog class id (e.g. B1.1) or parameter-free family label
    #[arg(long)]
    pub class: Option<String>,
    /// Explicit objective term-set, e.g. 0000,0111
    #[arg(long)]
    pub objective: Option<String>,
    /// Comma-separated gate kinds from x,h,cnot,ccnot,ch
    #[arg(long)]
    pub gates: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub reward: Option<f64>,
    /// Episodes per run
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Changing-rate threshold, in percent
    #[arg(long)]
    pub cr_threshold: Option<f64>,
    #[arg(long)]
    pub max_runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial basis term
    #[arg(long)]
    pub initial: Option<String>,
    /// Artifact root directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `flags` win over fields set here.
    pub fn overlay(self, flags: &RunConfig) -> RunConfig {
        let f = flags.clone();
        RunConfig {
            class: f.class.or(self.class),
            objective: f.objective.or(self.objective),
            gates: f.gates.or(self.gates),
            alpha: f.alpha.or(self.alpha),
            gamma: f.gamma.or(self.gamma),
            reward: f.reward.or(self.reward),
            episodes: f.episodes.or(self.episodes),
            cr_threshold: f.cr_threshold.or(self.cr_threshold),
            max_runs: f.max_runs.or(self.max_runs),
            seed: f.seed.or(self.seed),
            initial: f.initial.or(self.initial),
            out: f.out.or(self.out),
        }
    }

    /// Reads `config` if given and overlays `flags` on it.
    pub fn layered(config: Option<&Path>, flags: &RunConfig) -> Result<RunConfig> {
        let base = match config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(flags))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let target = Target::resolve(self.class.as_deref(), self.objective.as_deref())?;
        let kinds = parse_gate_kinds(self.gates.as_deref().unwrap_or(DEFAULT_GATES))?;
        let gates = GateSet::new(&kinds)?;
        let d = TrainConfig::default();
        let train = TrainConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma: self.gamma.unwrap_or(d.gamma),
            reward_value: self.reward.unwrap_or(d.reward_value),
            episodes_per_run: self.episodes.unwrap_or(d.episodes_per_run),
            cr_threshold_percent: self.cr_threshold.unwrap_or(d.cr_threshold_percent),
            max_runs: self.max_runs.unwrap_or(d.max_runs),
            rng_seed: self.seed.unwrap_or(d.rng_seed),
        };
        train.validate()?;
        let initial = parse_termset(self.initial.as_deref().unwrap_or(DEFAULT_INITIAL))?;
        if initial.shell() != 1 {
            bail!("initial state must be a single basis term, got {{{initial}}}");
        }
        let effective = RunConfig {
            class: self.class.clone(),
            objective: Some(target.terms.to_string()),
            gates: Some(gates.kinds_string()),
            alpha: Some(train.alpha),
            gamma: Some(train.gamma),
            reward: Some(train.reward_value),
            episodes: Some(train.episodes_per_run),
            cr_threshold: Some(train.cr_threshold_percent),
            max_runs: Some(train.max_runs),
            seed: Some(train.rng_seed),
            initial: Some(initial.to_string()),
            out: Some(self.out.clone().unwrap_or_else(|| DEFAULT_OUT.into())),
        };
        Ok(Resolved {
            target,
            gates,
            train,
            initial,
            effective,
        })
    }
}

/// A fully specified run.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub target: Target,
    pub gates: GateSet,
    pub train: TrainConfig,
    pub initial: TermSet,
    /// Every field populated; echoed into reports.
    pub effective: RunConfig,
}

impl Resolved {
    pub fn out_root(&self) -> &Path {
        self.effective
            .out
            .as_deref()
            .expect("effective config sets out")
    }

    /// `<out>/<target>/<gate hash>`
    pub fn artifact_dir(&self) -> PathBuf {
        self.out_root()
            .join(&self.target.label)
            .join(gate_hash(&self.gates))
    }
}

#[derive(Clone, Debug)]
pub struct Target {
    /// Class id, family label, or the term-set with `_` separators.
    pub label: String,
    pub terms: TermSet,
    /// Known only for catalog targets.
    pub state: Option<Representative>,
}

impl Target {
    pub fn resolve(class: Option<&str>, objective: Option<&str>) -> Result<Target> {
        match (class, objective) {
            (Some(c), None) => {
                let state = Catalog::builtin().target(c)?;
                Ok(Target {
                    label: c.to_string(),
                    terms: state.terms,
                    state: Some(state),
                })
            }
            (None, Some(o)) => {
                let terms = parse_termset(o)?;
                Ok(Target {
                    label: terms.to_string().replace(',', "_"),
                    terms,
                    state: None,
                })
            }
            (Some(_), Some(_)) => bail!("give either --class or --objective, not both"),
            (None, None) => bail!("one of --class or --objective is required"),
        }
    }
}

/// First 8 hex digits of the SHA-256 of the canonical gate-kind list.
pub fn gate_hash(gates: &GateSet) -> String {
    Sha256::digest(gates.kinds_string().as_bytes())
        .iter()
        .take(4)
        .map(|b| format!("{b:02x}"))
        .collect()
}
