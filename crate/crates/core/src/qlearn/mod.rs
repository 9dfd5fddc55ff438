//! Reward matrix, one-step episodic Q-learning, the changing-rate
//! convergence test, greedy circuit extraction and a BFS optimality oracle.

mod persist;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use persist::QMatrixFile;

use crate::error::{Error, Result};
use crate::gates::{transition, Circuit, GateAction, GateSet};
use crate::termspace::{enumerate_environment, Environment, TermSet};

/// Identifier of the episode random stream: ChaCha with 8 rounds seeded via
/// `seed_from_u64`, sampled with `gen_range` from rand 0.8.
pub const RNG_ALGORITHM: &str = "chacha8/rand-0.8-gen_range";

pub const DEFAULT_MAX_STEPS: usize = 64;

const NONE: u32 = u32::MAX;

/// Successor of every (state, action) pair, `None` when the result leaves
/// the environment.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    n_states: usize,
    n_actions: usize,
    next: Vec<u32>,
    offsets: Vec<u32>,
    applicable: Vec<u16>,
}

impl TransitionTable {
    pub fn build(env: &Environment, gates: &GateSet) -> Self {
        let n_states = env.len();
        let n_actions = gates.len();
        let mut next = Vec::with_capacity(n_states * n_actions);
        let mut offsets = Vec::with_capacity(n_states + 1);
        let mut applicable = Vec::new();
        offsets.push(0);
        for &s in env.states() {
            for (a, action) in gates.actions().iter().enumerate() {
                match transition(s, action, env) {
                    Some(t) => {
                        next.push(env.id(t).expect("bounded transition stays inside") as u32);
                        applicable.push(a as u16);
                    }
                    None => next.push(NONE),
                }
            }
            offsets.push(applicable.len() as u32);
        }
        TransitionTable {
            n_states,
            n_actions,
            next,
            offsets,
            applicable,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn next(&self, state: usize, action: usize) -> Option<usize> {
        match self.next[state * self.n_actions + action] {
            NONE => None,
            id => Some(id as usize),
        }
    }

    /// Action indices whose result stays in the environment, ascending.
    #[inline]
    pub fn applicable(&self, state: usize) -> &[u16] {
        &self.applicable[self.offsets[state] as usize..self.offsets[state + 1] as usize]
    }
}

/// Dense state × action table of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QMatrix {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QMatrix {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {n_states}×{n_actions} matrix",
                values.len()
            )));
        }
        Ok(QMatrix {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_states, self.n_actions)
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.n_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.n_actions..(state + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn count_positive(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Rewards: `reward_value` on every pair whose transition lands on the
/// objective, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix {
    objective: TermSet,
    reward_value: f64,
    values: QMatrix,
}

impl RMatrix {
    pub fn from_table(
        objective: TermSet,
        env: &Environment,
        table: &TransitionTable,
        reward_value: f64,
    ) -> Result<Self> {
        let goal = objective_id(objective, env)?;
        if !(reward_value > 0.0 && reward_value.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reward must be positive, got {reward_value}"
            )));
        }
        let mut values = QMatrix::zeros(table.n_states(), table.n_actions());
        for s in 0..table.n_states() {
            for &a in table.applicable(s) {
                if table.next(s, a as usize) == Some(goal) {
                    values.set(s, a as usize, reward_value);
                }
            }
        }
        Ok(RMatrix {
            objective,
            reward_value,
            values,
        })
    }

    pub fn objective(&self) -> TermSet {
        self.objective
    }

    pub fn reward_value(&self) -> f64 {
        self.reward_value
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values.get(state, action)
    }

    pub fn as_matrix(&self) -> &QMatrix {
        &self.values
    }
}

fn objective_id(objective: TermSet, env: &Environment) -> Result<usize> {
    let id = env.id(objective).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "objective {{{objective}}} is not in the environment"
        ))
    })?;
    if objective.shell() != env.max_terms() {
        return Err(Error::InvalidArgument(format!(
            "objective has {} terms but the environment is sized for {}",
            objective.shell(),
            env.max_terms()
        )));
    }
    Ok(id)
}

pub fn build_r_matrix(
    objective: TermSet,
    env: &Environment,
    gates: &GateSet,
    reward_value: f64,
) -> Result<RMatrix> {
    RMatrix::from_table(
        objective,
        env,
        &TransitionTable::build(env, gates),
        reward_value,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub reward_value: f64,
    pub episodes_per_run: usize,
    pub cr_threshold_percent: f64,
    pub max_runs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.8,
            gamma: 0.8,
            reward_value: 100.0,
            episodes_per_run: 10_000,
            cr_threshold_percent: 10.0,
            max_runs: 200,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.reward_value > 0.0 && self.reward_value.is_finite()) {
            return bad(format!(
                "reward must be positive, got {}",
                self.reward_value
            ));
        }
        if self.episodes_per_run == 0 || self.max_runs == 0 {
            return bad("episodes_per_run and max_runs must be positive".into());
        }
        if self.cr_threshold_percent.is_nan() || self.cr_threshold_percent <= 0.0 {
            return bad(format!(
                "cr threshold must be positive, got {}",
                self.cr_threshold_percent
            ));
        }
        Ok(())
    }

    /// Upper bound every Q value respects: the geometric series of rewards.
    pub fn q_bound(&self) -> f64 {
        self.reward_value / (1.0 - self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpisodeOutcome {
    Updated {
        state: usize,
        action: usize,
    },
    /// The drawn state has no action that stays in the environment.
    Skipped {
        state: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub runs_executed: usize,
    pub episodes_executed: usize,
    pub skipped_episodes: usize,
    /// Changing rate of each run, in percent.
    pub cr_history: Vec<f64>,
    pub converged: bool,
    pub final_q: QMatrix,
    pub rng_algorithm: &'static str,
    pub rng_seed: u64,
}

/// Changing rate between two snapshots, in percent:
/// `100 · Σ|after − before| / max(Σ|before|, 1e-12)`, saturating at 100
/// when `before` is all zero and `after` is not.
///
/// # Panics
/// If the shapes differ.
pub fn changing_rate(before: &QMatrix, after: &QMatrix) -> f64 {
    assert_eq!(
        before.shape(),
        after.shape(),
        "changing rate needs equal shapes"
    );
    let delta: f64 = before
        .values
        .iter()
        .zip(&after.values)
        .map(|(b, a)| (a - b).abs())
        .sum();
    let base: f64 = before.values.iter().map(|b| b.abs()).sum();
    if base == 0.0 {
        return if delta == 0.0 { 0.0 } else { 100.0 };
    }
    100.0 * delta / base.max(1e-12)
}

/// Resumable training state: the Q-matrix, the episode stream and the
/// changing rate of every block run so far.
pub struct Trainer<'a> {
    problem: &'a Problem,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    q: QMatrix,
    cr_history: Vec<f64>,
    skipped: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(problem: &'a Problem, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            problem,
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            q: problem.zero_q(),
            cr_history: Vec::new(),
            skipped: 0,
        })
    }

    /// Runs one block of `episodes_per_run` episodes and returns its
    /// changing rate.
    pub fn run(&mut self) -> f64 {
        let before = self.q.clone();
        for _ in 0..self.cfg.episodes_per_run {
            let outcome = self
                .problem
                .train_episode(&mut self.q, &self.cfg, &mut self.rng);
            if let EpisodeOutcome::Skipped { .. } = outcome {
                self.skipped += 1;
            }
        }
        let cr = changing_rate(&before, &self.q);
        self.cr_history.push(cr);
        cr
    }

    pub fn q(&self) -> &QMatrix {
        &self.q
    }

    pub fn cr_history(&self) -> &[f64] {
        &self.cr_history
    }

    pub fn into_report(self, converged: bool) -> TrainReport {
        TrainReport {
            runs_executed: self.cr_history.len(),
            episodes_executed: self.cr_history.len() * self.cfg.episodes_per_run,
            skipped_episodes: self.skipped,
            cr_history: self.cr_history,
            converged,
            final_q: self.q,
            rng_algorithm: RNG_ALGORITHM,
            rng_seed: self.cfg.rng_seed,
        }
    }
}

/// Everything needed to learn one objective: environment, gate set,
/// transition table and reward matrix.
#[derive(Clone, Debug)]
pub struct Problem {
    env: Environment,
    gates: GateSet,
    table: TransitionTable,
    r: RMatrix,
    goal: usize,
}

impl Problem {
    /// Environment sized to the objective's term count.
    pub fn new(objective: TermSet, gates: GateSet, reward_value: f64) -> Result<Self> {
        let env = enumerate_environment(objective.shell())?;
        Problem::with_environment(objective, env, gates, reward_value)
    }

    pub fn with_environment(
        objective: TermSet,
        env: Environment,
        gates: GateSet,
        reward_value: f64,
    ) -> Result<Self> {
        let table = TransitionTable::build(&env, &gates);
        let r = RMatrix::from_table(objective, &env, &table, reward_value)?;
        let goal = env.require(objective)?;
        Ok(Problem {
            env,
            gates,
            table,
            r,
            goal,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn gates(&self) -> &GateSet {
        &self.gates
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn r(&self) -> &RMatrix {
        &self.r
    }

    pub fn objective(&self) -> TermSet {
        self.r.objective()
    }

    pub fn zero_q(&self) -> QMatrix {
        QMatrix::zeros(self.env.len(), self.gates.len())
    }

    /// One episode: a uniformly drawn state, a uniformly drawn applicable
    /// action, and the Bellman update of that single cell.
    pub fn train_episode<R: Rng>(
        &self,
        q: &mut QMatrix,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> EpisodeOutcome {
        debug_assert_eq!(q.shape(), self.r.as_matrix().shape());
        let state = rng.gen_range(0..self.env.len());
        let actions = self.table.applicable(state);
        if actions.is_empty() {
            return EpisodeOutcome::Skipped { state };
        }
        let action = actions[rng.gen_range(0..actions.len())] as usize;
        self.bellman_update(q, state, action, cfg);
        EpisodeOutcome::Updated { state, action }
    }

    /// `Q(s,a) ← Q(s,a)(1−α) + α(R(s,a) + γ·max_a' Q(s',a'))`, the max taken
    /// over the actions applicable at the successor `s'`.
    ///
    /// # Panics
    /// If `action` leaves the environment from `state`.
    pub fn bellman_update(&self, q: &mut QMatrix, state: usize, action: usize, cfg: &TrainConfig) {
        let next = self
            .table
            .next(state, action)
            .expect("update needs an applicable action");
        let future = self.best_value(q, next);
        let reward = self.r.get(state, action);
        let old = q.get(state, action);
        q.set(
            state,
            action,
            old * (1.0 - cfg.alpha) + cfg.alpha * (reward + cfg.gamma * future),
        );
    }

    fn best_value(&self, q: &QMatrix, state: usize) -> f64 {
        self.table
            .applicable(state)
            .iter()
            .map(|&a| q.get(state, a as usize))
            .fold(0.0, f64::max)
    }

    /// Runs blocks of `episodes_per_run` episodes until the changing rate of
    /// a block drops to the threshold or `max_runs` blocks have run. A block
    /// that leaves an all-zero Q-matrix untouched does not count as converged.
    pub fn train_until_converged(&self, cfg: &TrainConfig) -> Result<TrainReport> {
        let mut trainer = Trainer::new(self, cfg)?;
        let mut converged = false;
        for _ in 0..cfg.max_runs {
            let cr = trainer.run();
            if cr <= cfg.cr_threshold_percent && trainer.q().count_positive() > 0 {
                converged = true;
                break;
            }
        }
        Ok(trainer.into_report(converged))
    }

    /// Greedy walk from `initial`: at each state take the applicable action
    /// with the largest Q value, lowest index on ties.
    pub fn extract_circuit(
        &self,
        q: &QMatrix,
        initial: TermSet,
        max_steps: usize,
    ) -> Result<Circuit> {
        if max_steps == 0 {
            return Err(Error::InvalidArgument(
                "max_steps must be at least 1".into(),
            ));
        }
        if q.shape() != (self.env.len(), self.gates.len()) {
            return Err(Error::InvalidArgument(format!(
                "q-matrix shape {:?} does not match the problem",
                q.shape()
            )));
        }
        let mut state = self.env.require(initial)?;
        let mut visited = vec![false; self.env.len()];
        visited[state] = true;
        let mut steps: Vec<GateAction> = Vec::new();
        while state != self.goal {
            if steps.len() == max_steps {
                return Err(Error::BudgetExceeded { steps: max_steps });
            }
            let mut best: Option<(usize, f64)> = None;
            for &a in self.table.applicable(state) {
                let v = q.get(state, a as usize);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((a as usize, v));
                }
            }
            let action = match best {
                Some((a, v)) if v > 0.0 => a,
                _ => {
                    return Err(Error::NoPolicy {
                        state: self.env.state(state),
                    })
                }
            };
            let next = self.table.next(state, action).expect("applicable");
            if visited[next] {
                return Err(Error::LoopDetected {
                    state: self.env.state(next),
                });
            }
            visited[next] = true;
            steps.push(self.gates.actions()[action]);
            state = next;
        }
        Circuit::from_initial_set(initial, steps)
    }

    /// Minimum number of gates from `initial` to the objective over the
    /// symbolic transitions, or `None` when unreachable.
    pub fn bfs_shortest(&self, initial: TermSet) -> Result<Option<usize>> {
        Ok(self.bfs_path(initial)?.map(|p| p.len()))
    }

    /// One shortest action sequence (lowest action index first) to the objective.
    pub fn bfs_path(&self, initial: TermSet) -> Result<Option<Vec<usize>>> {
        let start = self.env.require(initial)?;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.env.len()];
        let mut seen = vec![false; self.env.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            if s == self.goal {
                let mut path = Vec::new();
                let mut cur = s;
                while let Some((prev, a)) = parent[cur] {
                    path.push(a);
                    cur = prev;
                }
                path.reverse();
                return Ok(Some(path));
            }
            for &a in self.table.applicable(s) {
                let t = self.table.next(s, a as usize).expect("applicable");
                if !seen[t] {
                    seen[t] = true;
                    parent[t] = Some((s, a as usize));
                    queue.push_back(t);
                }
            }
        }
        Ok(None)
    }
}

/// Trains on `objective` inside `env` with the given gate set.
pub fn train_until_converged(
    objective: TermSet,
    env: &Environment,
    gates: &GateSet,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    Problem::with_environment(objective, env.clone(), gates.clone(), cfg.reward_value)?
        .train_until_converged(cfg)
}

/// Shortest gate count from `initial` to `objective`, `None` when unreachable.
pub fn bfs_shortest(
    objective: TermSet,
    env: &Environment,
    gates: &GateSet,
    initial: TermSet,
) -> Result<Option<usize>> {
    let table = TransitionTable::build(env, gates);
    let start = env.require(initial)?;
    let goal = env.require(objective)?;
    let mut dist = vec![usize::MAX; env.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        if s == goal {
            return Ok(Some(dist[s]));
        }
        for &a in table.applicable(s) {
            let t = table.next(s, a as usize).expect("applicable");
            if dist[t] == usize::MAX {
                dist[t] = dist[s] + 1;
                queue.push_back(t);
            }
        }
    }
    Ok(None)
}
