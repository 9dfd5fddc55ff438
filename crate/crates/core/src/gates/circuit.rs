use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::{GateAction, GateKind, StateVector};
use crate::error::{Error, Result};
use crate::termspace::{qubit_from_name, qubit_name, BasisTerm, TermSet};

/// Gate sequence applied to a single basis state.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    initial: BasisTerm,
    steps: Vec<GateAction>,
}

impl Circuit {
    pub fn new(initial: BasisTerm, steps: Vec<GateAction>) -> Self {
        Circuit { initial, steps }
    }

    /// Builds a circuit from a term-set initial state, which must be a singleton.
    pub fn from_initial_set(initial: TermSet, steps: Vec<GateAction>) -> Result<Self> {
        if initial.shell() != 1 {
            return Err(Error::InvalidArgument(format!(
                "circuit must start from a single basis term, got {{{initial}}}"
            )));
        }
        let term = initial.terms().next().expect("singleton");
        Ok(Circuit::new(term, steps))
    }

    pub fn initial(&self) -> BasisTerm {
        self.initial
    }

    pub fn initial_set(&self) -> TermSet {
        TermSet::singleton(self.initial)
    }

    pub fn steps(&self) -> &[GateAction] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [GateAction] {
        &mut self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn parametric_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|a| a.kind().is_parametric())
            .count()
    }

    /// Simulates with the angles stored in the parametric steps.
    pub fn output(&self) -> StateVector {
        let mut v = StateVector::basis(self.initial);
        for a in &self.steps {
            v.apply_in_place(a);
        }
        v
    }

    /// Best-effort OpenQASM 2.0 export. CH maps to `ch`; U(θ) and CU(θ) are
    /// a (controlled) Z followed by a (controlled) Y rotation by θ.
    pub fn to_qasm(&self) -> String {
        let q = |i: usize| format!("q[{i}]");
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[4];\n");
        for i in (0..4).filter(|&i| self.initial.bit(i)) {
            writeln!(out, "x {};", q(i)).unwrap();
        }
        for a in &self.steps {
            let line = match *a {
                GateAction::X { target } => format!("x {};", q(target)),
                GateAction::H { target } => format!("h {};", q(target)),
                GateAction::Cnot { control, target } => format!("cx {},{};", q(control), q(target)),
                GateAction::Ccnot { controls, target } => {
                    format!("ccx {},{},{};", q(controls[0]), q(controls[1]), q(target))
                }
                GateAction::Ch { control, target } => format!("ch {},{};", q(control), q(target)),
                GateAction::U { target, theta } => format!(
                    "z {t};\nu3({},0,0) {t};",
                    format_angle(theta),
                    t = q(target)
                ),
                GateAction::Cu {
                    control,
                    target,
                    theta,
                } => format!(
                    "cz {c},{t};\ncu3({},0,0) {c},{t};",
                    format_angle(theta),
                    c = q(control),
                    t = q(target)
                ),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// Simulates `c` from its initial basis state, substituting `angles` into the
/// parametric steps in order.
pub fn simulate(c: &Circuit, angles: &[f64]) -> Result<StateVector> {
    let expected = c.parametric_count();
    if angles.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "circuit has {expected} parametric step(s), got {} angle(s)",
            angles.len()
        )));
    }
    let mut angles = angles.iter();
    let mut v = StateVector::basis(c.initial);
    for a in &c.steps {
        let a = match a.theta() {
            Some(_) => a.with_theta(*angles.next().expect("count checked")),
            None => *a,
        };
        v.apply_in_place(&a);
    }
    Ok(v)
}

/// Formats an angle with 17 significant digits in positional notation.
pub fn format_angle(theta: f64) -> String {
    if theta == 0.0 || !theta.is_finite() {
        return format!("{theta}");
    }
    let exponent = theta.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(0) as usize;
    format!("{theta:.decimals$}")
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "INIT {}", self.initial)?;
        for a in &self.steps {
            let head = match a.theta() {
                Some(theta) => format!("{}({})", a.kind().name(), format_angle(theta)),
                None => a.kind().name().to_string(),
            };
            let qubits: Vec<String> = a
                .qubits()
                .into_iter()
                .map(|q| qubit_name(q).to_string())
                .collect();
            writeln!(f, "{head} {}", qubits.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut initial = None;
        let mut steps = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| Error::CircuitParse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let head = fields.next().expect("line is not empty");
            let rest: Vec<&str> = fields.collect();
            if initial.is_none() {
                if head != "INIT" || rest.len() != 1 {
                    return Err(err(format!("expected `INIT <term>`, found `{line}`")));
                }
                let term: BasisTerm = rest[0].parse().map_err(|e: Error| err(e.to_string()))?;
                initial = Some(term);
                continue;
            }
            let (kind, theta) = match head.split_once('(') {
                Some((name, arg)) => {
                    let arg = arg
                        .strip_suffix(')')
                        .ok_or_else(|| err(format!("unclosed angle in `{head}`")))?;
                    let theta: f64 = arg.parse().map_err(|_| err(format!("bad angle `{arg}`")))?;
                    (name, Some(theta))
                }
                None => (head, None),
            };
            let kind: GateKind = kind.parse().map_err(|e: Error| err(e.to_string()))?;
            let qubits = rest
                .iter()
                .map(|q| qubit_from_name(q).ok_or_else(|| err(format!("unknown qubit `{q}`"))))
                .collect::<Result<Vec<_>>>()?;
            let action = GateAction::new(kind, &qubits, theta).map_err(|e| err(e.to_string()))?;
            steps.push(action);
        }
        let initial = initial.ok_or(Error::CircuitParse {
            line: text.lines().count().max(1),
            message: "missing `INIT` line".into(),
        })?;
        Ok(Circuit::new(initial, steps))
    }
}
