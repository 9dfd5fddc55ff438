//! Self-describing text persistence for trained Q-matrices.
//!
//! ```text
//! slocc-qmatrix 1
//! max_terms 2
//! objective 0000,0111
//! alpha 0.8
//! gamma 0.8
//! reward_value 100
//! episodes_per_run 10000
//! cr_threshold_percent 10
//! max_runs 200
//! rng_algorithm chacha8/rand-0.8-gen_range
//! rng_seed 7
//! actions 20
//! action X(A)
//! ...
//! states 136
//! 0000 0 80 0 ...
//! ```
//!
//! Each value row starts with its term-set and holds the shortest decimal
//! representation that round-trips to the same `f64`.

use std::fmt::Write as _;

use super::{QMatrix, TrainConfig};
use crate::error::{Error, Result};
use crate::gates::GateSet;
use crate::termspace::{enumerate_environment, parse_termset, Environment, TermSet};

const MAGIC: &str = "slocc-qmatrix 1";

#[derive(Clone, Debug, PartialEq)]
pub struct QMatrixFile {
    pub max_terms: usize,
    pub objective: TermSet,
    pub config: TrainConfig,
    pub rng_algorithm: String,
    pub action_labels: Vec<String>,
    pub q: QMatrix,
}

impl QMatrixFile {
    pub fn gate_set(&self) -> Result<GateSet> {
        GateSet::from_labels(&self.action_labels)
    }

    pub fn environment(&self) -> Result<Environment> {
        enumerate_environment(self.max_terms)
    }

    pub fn to_text(&self, env: &Environment) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(MAGIC.to_string());
        line(format!("max_terms {}", self.max_terms));
        line(format!("objective {}", self.objective));
        line(format!("alpha {}", c.alpha));
        line(format!("gamma {}", c.gamma));
        line(format!("reward_value {}", c.reward_value));
        line(format!("episodes_per_run {}", c.episodes_per_run));
        line(format!("cr_threshold_percent {}", c.cr_threshold_percent));
        line(format!("max_runs {}", c.max_runs));
        line(format!("rng_algorithm {}", self.rng_algorithm));
        line(format!("rng_seed {}", c.rng_seed));
        line(format!("actions {}", self.action_labels.len()));
        for label in &self.action_labels {
            line(format!("action {label}"));
        }
        line(format!("states {}", self.q.n_states()));
        for s in 0..self.q.n_states() {
            let mut row = env.state(s).to_string();
            for v in self.q.row(s) {
                write!(row, " {v}").unwrap();
            }
            line(row);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines.next().ok_or_else(|| Error::QMatrixFormat {
                line: text.lines().count() + 1,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let (n, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(Error::QMatrixFormat {
                line: n,
                message: format!("expected `{MAGIC}`"),
            });
        }
        fn field<'a>(entry: (usize, &'a str), key: &str) -> Result<(usize, &'a str)> {
            let (n, l) = entry;
            match l.trim().split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim())),
                _ => Err(Error::QMatrixFormat {
                    line: n,
                    message: format!("expected `{key} <value>`"),
                }),
            }
        }
        fn num<T: std::str::FromStr>(entry: (usize, &str)) -> Result<T> {
            entry.1.parse().map_err(|_| Error::QMatrixFormat {
                line: entry.0,
                message: format!("cannot parse `{}`", entry.1),
            })
        }
        let max_terms: usize = num(field(next("max_terms")?, "max_terms")?)?;
        let (n, obj) = field(next("objective")?, "objective")?;
        let objective = parse_termset(obj).map_err(|e| Error::QMatrixFormat {
            line: n,
            message: e.to_string(),
        })?;
        let config = TrainConfig {
            alpha: num(field(next("alpha")?, "alpha")?)?,
            gamma: num(field(next("gamma")?, "gamma")?)?,
            reward_value: num(field(next("reward_value")?, "reward_value")?)?,
            episodes_per_run: num(field(next("episodes_per_run")?, "episodes_per_run")?)?,
            cr_threshold_percent: num(field(
                next("cr_threshold_percent")?,
                "cr_threshold_percent",
            )?)?,
            max_runs: num(field(next("max_runs")?, "max_runs")?)?,
            rng_seed: 0,
        };
        let rng_algorithm = field(next("rng_algorithm")?, "rng_algorithm")?
            .1
            .to_string();
        let config = TrainConfig {
            rng_seed: num(field(next("rng_seed")?, "rng_seed")?)?,
            ..config
        };
        let n_actions: usize = num(field(next("actions")?, "actions")?)?;
        let mut action_labels = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            action_labels.push(field(next("action")?, "action")?.1.to_string());
        }
        let states_entry = field(next("states")?, "states")?;
        let n_states: usize = num(states_entry)?;
        let env = enumerate_environment(max_terms).map_err(|e| Error::QMatrixFormat {
            line: 2,
            message: e.to_string(),
        })?;
        if env.len() != n_states {
            return Err(Error::QMatrixFormat {
                line: states_entry.0,
                message: format!("{n_states} states, environment has {}", env.len()),
            });
        }
        let mut values = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            let (n, row) = next("value row")?;
            let mut fields = row.split_whitespace();
            let label = fields.next().unwrap_or("");
            if label != env.state(s).to_string() {
                return Err(Error::QMatrixFormat {
                    line: n,
                    message: format!("expected row for {{{}}}, found `{label}`", env.state(s)),
                });
            }
            let before = values.len();
            for f in fields {
                values.push(num::<f64>((n, f))?);
            }
            if values.len() - before != n_actions {
                return Err(Error::QMatrixFormat {
                    line: n,
                    message: format!(
                        "expected {n_actions} values, found {}",
                        values.len() - before
                    ),
                });
            }
        }
        Ok(QMatrixFile {
            max_terms,
            objective,
            config,
            rng_algorithm,
            action_labels,
            q: QMatrix::from_values(n_states, n_actions, values)?,
        })
    }
}
