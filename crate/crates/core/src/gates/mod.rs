//! Gate actions, their symbolic effect on term-sets, and the exact
//! statevector simulator that backs both.

mod circuit;
mod statevector;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use circuit::{simulate, Circuit};
pub use statevector::{support, StateVector, SUPPORT_TOL};

use crate::error::{Error, Result};
use crate::termspace::{qubit_from_name, qubit_mask, qubit_name, BasisTerm, Environment, TermSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    X,
    H,
    Cnot,
    Ccnot,
    Ch,
    U,
    Cu,
}

impl GateKind {
    /// Kinds available to the learner, in action-enumeration order.
    pub const SYNTHESIS: [GateKind; 5] = [
        GateKind::X,
        GateKind::H,
        GateKind::Cnot,
        GateKind::Ccnot,
        GateKind::Ch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Ccnot => "CCNOT",
            GateKind::Ch => "CH",
            GateKind::U => "U",
            GateKind::Cu => "CU",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::X | GateKind::H | GateKind::U => 1,
            GateKind::Cnot | GateKind::Ch | GateKind::Cu => 2,
            GateKind::Ccnot => 3,
        }
    }

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::U | GateKind::Cu)
    }

    pub fn is_permutation(self) -> bool {
        matches!(self, GateKind::X | GateKind::Cnot | GateKind::Ccnot)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(GateKind::X),
            "h" => Ok(GateKind::H),
            "cnot" | "cx" => Ok(GateKind::Cnot),
            "ccnot" | "toffoli" | "ccx" => Ok(GateKind::Ccnot),
            "ch" => Ok(GateKind::Ch),
            "u" => Ok(GateKind::U),
            "cu" => Ok(GateKind::Cu),
            other => Err(Error::InvalidArgument(format!(
                "unknown gate kind `{other}`"
            ))),
        }
    }
}

/// Parses a comma-separated kind list such as `x,h,cnot`.
pub fn parse_gate_kinds(text: &str) -> Result<Vec<GateKind>> {
    let mut kinds = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<GateKind>>>()?;
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("empty gate list".into()));
    }
    Ok(kinds)
}

/// One gate placed on concrete qubits. Qubit indices follow the A..D order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateAction {
    X {
        target: usize,
    },
    H {
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Controls are kept sorted ascending.
    Ccnot {
        controls: [usize; 2],
        target: usize,
    },
    Ch {
        control: usize,
        target: usize,
    },
    U {
        target: usize,
        theta: f64,
    },
    Cu {
        control: usize,
        target: usize,
        theta: f64,
    },
}

impl GateAction {
    /// Validated constructor. `qubits` lists controls first, target last.
    pub fn new(kind: GateKind, qubits: &[usize], theta: Option<f64>) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return Err(Error::InvalidArgument(format!(
                "{kind} acts on {} qubit(s), got {}",
                kind.arity(),
                qubits.len()
            )));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= 4) {
            return Err(Error::InvalidArgument(format!(
                "qubit index {q} out of range"
            )));
        }
        for i in 0..qubits.len() {
            if qubits[i + 1..].contains(&qubits[i]) {
                return Err(Error::InvalidArgument(format!(
                    "{kind} needs distinct qubits, `{}` repeated",
                    qubit_name(qubits[i])
                )));
            }
        }
        if kind.is_parametric() != theta.is_some() {
            return Err(Error::InvalidArgument(format!(
                "{kind}: angle {}",
                if kind.is_parametric() {
                    "missing"
                } else {
                    "not accepted"
                }
            )));
        }
        let theta = theta.unwrap_or(0.0);
        Ok(match kind {
            GateKind::X => GateAction::X { target: qubits[0] },
            GateKind::H => GateAction::H { target: qubits[0] },
            GateKind::U => GateAction::U {
                target: qubits[0],
                theta,
            },
            GateKind::Cnot => GateAction::Cnot {
                control: qubits[0],
                target: qubits[1],
            },
            GateKind::Ch => GateAction::Ch {
                control: qubits[0],
                target: qubits[1],
            },
            GateKind::Cu => GateAction::Cu {
                control: qubits[0],
                target: qubits[1],
                theta,
            },
            GateKind::Ccnot => {
                let (c1, c2) = (qubits[0].min(qubits[1]), qubits[0].max(qubits[1]));
                GateAction::Ccnot {
                    controls: [c1, c2],
                    target: qubits[2],
                }
            }
        })
    }

    pub fn kind(&self) -> GateKind {
        match self {
            GateAction::X { .. } => GateKind::X,
            GateAction::H { .. } => GateKind::H,
            GateAction::Cnot { .. } => GateKind::Cnot,
            GateAction::Ccnot { .. } => GateKind::Ccnot,
            GateAction::Ch { .. } => GateKind::Ch,
            GateAction::U { .. } => GateKind::U,
            GateAction::Cu { .. } => GateKind::Cu,
        }
    }

    /// Qubits in role order: controls first, target last.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateAction::X { target } | GateAction::H { target } | GateAction::U { target, .. } => {
                vec![target]
            }
            GateAction::Cnot { control, target }
            | GateAction::Ch { control, target }
            | GateAction::Cu {
                control, target, ..
            } => vec![control, target],
            GateAction::Ccnot { controls, target } => vec![controls[0], controls[1], target],
        }
    }

    pub fn target(&self) -> usize {
        *self.qubits().last().expect("every gate has a target")
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            GateAction::U { theta, .. } | GateAction::Cu { theta, .. } => Some(theta),
            _ => None,
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        match self {
            GateAction::U { target, .. } => GateAction::U { target, theta },
            GateAction::Cu {
                control, target, ..
            } => GateAction::Cu {
                control,
                target,
                theta,
            },
            other => other,
        }
    }

    /// Stable label such as `H(C)`, `CNOT(A→B)` or `CCNOT(A,B→C)`.
    /// Angles are not part of the label.
    pub fn label(&self) -> String {
        let q = self.qubits();
        let name = self.kind().name();
        match q.len() {
            1 => format!("{name}({})", qubit_name(q[0])),
            2 => format!("{name}({}→{})", qubit_name(q[0]), qubit_name(q[1])),
            _ => format!(
                "{name}({},{}→{})",
                qubit_name(q[0]),
                qubit_name(q[1]),
                qubit_name(q[2])
            ),
        }
    }

    /// Inverse of [`GateAction::label`] for non-parametric kinds.
    pub fn from_label(label: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed gate label `{label}`"));
        let open = label.find('(').ok_or_else(bad)?;
        let body = label[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let kind: GateKind = label[..open].parse()?;
        if kind.is_parametric() {
            return Err(bad());
        }
        let qubits = body
            .split(['→', ','])
            .map(|n| qubit_from_name(n.trim()).ok_or_else(bad))
            .collect::<Result<Vec<_>>>()?;
        GateAction::new(kind, &qubits, None)
    }
}

impl fmt::Display for GateAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Ordered list of every placement of the enabled kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    kinds: Vec<GateKind>,
    actions: Vec<GateAction>,
}

impl GateSet {
    pub fn new(kinds: &[GateKind]) -> Result<Self> {
        let mut kinds = kinds.to_vec();
        kinds.sort();
        kinds.dedup();
        if let Some(k) = kinds.iter().find(|k| k.is_parametric()) {
            return Err(Error::InvalidArgument(format!(
                "{k} is parametric and cannot be a learner action"
            )));
        }
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("gate set is empty".into()));
        }
        let mut actions = Vec::new();
        for &kind in &kinds {
            match kind.arity() {
                1 => {
                    for t in 0..4 {
                        actions.push(GateAction::new(kind, &[t], None)?);
                    }
                }
                2 => {
                    for c in 0..4 {
                        for t in (0..4).filter(|&t| t != c) {
                            actions.push(GateAction::new(kind, &[c, t], None)?);
                        }
                    }
                }
                _ => {
                    for c1 in 0..4 {
                        for c2 in c1 + 1..4 {
                            for t in (0..4).filter(|&t| t != c1 && t != c2) {
                                actions.push(GateAction::new(kind, &[c1, c2, t], None)?);
                            }
                        }
                    }
                }
            }
        }
        Ok(GateSet { kinds, actions })
    }

    /// The full learner set {X, H, CNOT, CCNOT, CH}.
    pub fn full() -> Self {
        GateSet::new(&GateKind::SYNTHESIS).expect("synthesis kinds are valid")
    }

    /// Rebuilds a gate set from its action labels, preserving their order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let actions = labels
            .iter()
            .map(|l| GateAction::from_label(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut kinds: Vec<GateKind> = actions.iter().map(GateAction::kind).collect();
        kinds.sort();
        kinds.dedup();
        Ok(GateSet { kinds, actions })
    }

    pub fn kinds(&self) -> &[GateKind] {
        &self.kinds
    }

    pub fn actions(&self) -> &[GateAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.actions.iter().map(GateAction::label).collect()
    }

    pub fn position(&self, action: &GateAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    /// Lowercase kind list, e.g. `x,h,cnot`.
    pub fn kinds_string(&self) -> String {
        self.kinds
            .iter()
            .map(|k| k.name().to_ascii_lowercase())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Bit-level action of a permutation gate on one basis term.
///
/// # Panics
/// If `action` is not X, CNOT or CCNOT.
pub fn apply_permutation(term: BasisTerm, action: &GateAction) -> BasisTerm {
    let index = term.index();
    let flips = match *action {
        GateAction::X { .. } => true,
        GateAction::Cnot { control, .. } => index & qubit_mask(control) != 0,
        GateAction::Ccnot { controls, .. } => {
            let m = qubit_mask(controls[0]) | qubit_mask(controls[1]);
            index & m == m
        }
        ref other => panic!("{} is not a permutation gate", other.label()),
    };
    if flips {
        term.flip(action.target())
    } else {
        term
    }
}

/// Symbolic effect of a gate on a term-set.
///
/// The set is read as a uniform positive superposition, the gate applied
/// exactly, and the support of the result returned. Results with more than
/// `env.max_terms()` terms are outside the environment and give `None`.
///
/// # Panics
/// If `action` is parametric.
pub fn transition(s: TermSet, action: &GateAction, env: &Environment) -> Option<TermSet> {
    assert!(
        !action.kind().is_parametric(),
        "symbolic transition is undefined for parametric gate {}",
        action.label()
    );
    let next = if action.kind().is_permutation() {
        TermSet::from_terms(s.terms().map(|t| apply_permutation(t, action)))
            .expect("permutations are bijective")
    } else {
        let v = StateVector::uniform(s).apply(action);
        support(&v, SUPPORT_TOL).expect("unitary output is never zero")
    };
    (next.shell() <= env.max_terms()).then_some(next)
}

/// Applies a gate to a statevector. Same as [`StateVector::apply`].
pub fn apply_gate(v: &StateVector, action: &GateAction) -> StateVector {
    v.apply(action)
}
