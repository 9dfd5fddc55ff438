//! Serializable run reports.

use std::fmt;

use serde::Serialize;
use slocc_synth::qlearn::TrainReport;

use crate::config::RunConfig;

/// Outcome of a command, ordered from best to worst for exit-code purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    NotConverged,
    VerificationFail,
    NoPolicy,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::VerificationFail => 2,
            Status::NoPolicy => 3,
            Status::NotConverged => 4,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::NotConverged => "not-converged",
            Status::VerificationFail => "verification-fail",
            Status::NoPolicy => "no-policy",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub runs_executed: usize,
    pub episodes_executed: usize,
    pub skipped_episodes: usize,
    pub converged: bool,
    pub cr_history: Vec<f64>,
    pub positive_entries: usize,
    pub rng_algorithm: String,
    pub rng_seed: u64,
}

impl From<&TrainReport> for TrainingSummary {
    fn from(r: &TrainReport) -> Self {
        TrainingSummary {
            runs_executed: r.runs_executed,
            episodes_executed: r.episodes_executed,
            skipped_episodes: r.skipped_episodes,
            converged: r.converged,
            cr_history: r.cr_history.clone(),
            positive_entries: r.final_q.count_positive(),
            rng_algorithm: r.rng_algorithm.to_string(),
            rng_seed: r.rng_seed,
        }
    }
}

/// Simulated output compared with the target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub expected_support: String,
    pub simulated_support: String,
    pub support_pass: bool,
    /// Present when the target amplitudes are known.
    pub fidelity: Option<f64>,
    pub max_amplitude_deviation: Option<f64>,
    pub amplitudes_match: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PostprocessSummary {
    /// Indices of the H/CH steps turned into rotations.
    pub replaced_steps: Vec<usize>,
    pub angles: Vec<f64>,
    pub residual: f64,
    pub start: usize,
    pub fidelity: f64,
    pub circuit: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthesisReport {
    pub config: RunConfig,
    pub target: String,
    pub objective: String,
    pub gate_set: String,
    pub gate_hash: String,
    pub training: TrainingSummary,
    pub bfs_optimal_length: Option<usize>,
    pub circuit: Option<Vec<String>>,
    pub circuit_length: Option<usize>,
    pub extraction_error: Option<String>,
    pub verification: Option<Verification>,
    pub postprocess: Option<PostprocessSummary>,
    /// Why post-processing was attempted and failed, or skipped.
    pub postprocess_note: Option<String>,
    pub status: Status,
    pub exit_code: i32,
}

impl SynthesisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub(crate) fn circuit_lines(c: &impl ToString) -> Vec<String> {
    c.to_string().lines().map(str::to_string).collect()
}
