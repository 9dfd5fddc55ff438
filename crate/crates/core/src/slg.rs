//! State-link graph: environment states as nodes, positive Q entries as
//! directed edges, with DOT and JSON export.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{transition, Circuit, GateSet};
use crate::qlearn::QMatrix;
use crate::termspace::{Environment, TermSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub terms: TermSet,
    pub shell: usize,
    /// Incident edges, in and out.
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: TermSet,
    pub action: String,
    pub dst: TermSet,
    pub q: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateLinkGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// One node per environment state, one edge per strictly positive Q entry,
/// ordered by source state then action index.
///
/// # Panics
/// If the Q-matrix shape does not match `env` × `gates`.
pub fn build_slg(q: &QMatrix, env: &Environment, gates: &GateSet) -> StateLinkGraph {
    assert_eq!(
        q.shape(),
        (env.len(), gates.len()),
        "q-matrix shape mismatch"
    );
    let mut degree = vec![0usize; env.len()];
    let mut edges = Vec::new();
    for (s, &src) in env.states().iter().enumerate() {
        for (a, action) in gates.actions().iter().enumerate() {
            let value = q.get(s, a);
            if value <= 0.0 {
                continue;
            }
            let dst =
                transition(src, action, env).expect("positive Q implies an applicable action");
            degree[s] += 1;
            degree[env.id(dst).expect("successor is in the environment")] += 1;
            edges.push(Edge {
                src,
                action: action.label(),
                dst,
                q: value,
            });
        }
    }
    let nodes = env
        .states()
        .iter()
        .zip(degree)
        .map(|(&terms, degree)| Node {
            terms,
            shell: terms.shell(),
            degree,
        })
        .collect();
    StateLinkGraph { nodes, edges }
}

impl StateLinkGraph {
    /// Node count per shell, index 0 holding shell 1.
    pub fn shell_histogram(&self) -> Vec<usize> {
        let max = self.nodes.iter().map(|n| n.shell).max().unwrap_or(0);
        let mut h = vec![0; max];
        for n in &self.nodes {
            h[n.shell - 1] += 1;
        }
        h
    }

    /// Whether some edge joins shell `i` and shell `j`, in either direction.
    pub fn connects(&self, i: usize, j: usize) -> bool {
        self.edges.iter().any(|e| {
            let (a, b) = (e.src.shell(), e.dst.shell());
            (a, b) == (i, j) || (a, b) == (j, i)
        })
    }

    /// Whether some edge spans the boundary between shells `k` and `k + 1`,
    /// that is, joins a shell at most `k` to a shell above `k`.
    pub fn crosses_boundary(&self, k: usize) -> bool {
        self.edges.iter().any(|e| {
            let (a, b) = (e.src.shell(), e.dst.shell());
            a.min(b) <= k && k < a.max(b)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("slg json: {e}")))
    }

    /// DOT digraph with one cluster per shell. Edges listed in `highlight`
    /// as (source, action label, destination) are drawn bold red.
    pub fn to_dot(&self, highlight: &[(TermSet, String, TermSet)]) -> String {
        let marked: BTreeSet<(TermSet, &str, TermSet)> = highlight
            .iter()
            .map(|(s, a, d)| (*s, a.as_str(), *d))
            .collect();
        let mut out = String::from("digraph slg {\n  node [shape=circle, fontsize=8];\n");
        for (i, shell) in self.shell_histogram().iter().enumerate() {
            if *shell == 0 {
                continue;
            }
            let k = i + 1;
            writeln!(out, "  subgraph cluster_shell{k} {{").unwrap();
            writeln!(out, "    label=\"shell {k}\";\n    rank=same;").unwrap();
            for n in self.nodes.iter().filter(|n| n.shell == k) {
                writeln!(out, "    \"{}\" [degree={}];", n.terms, n.degree).unwrap();
            }
            out.push_str("  }\n");
        }
        for e in &self.edges {
            let style = if marked.contains(&(e.src, e.action.as_str(), e.dst)) {
                ", color=red, penwidth=3"
            } else {
                ""
            };
            writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", q={}{style}];",
                e.src, e.dst, e.action, e.q
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Symbolic (source, action, destination) steps walked by `c` in `env`.
pub fn circuit_path(c: &Circuit, env: &Environment) -> Result<Vec<(TermSet, String, TermSet)>> {
    let mut state = c.initial_set();
    let mut path = Vec::with_capacity(c.len());
    for action in c.steps() {
        let next = transition(state, action, env).ok_or(Error::NotInEnvironment { state })?;
        path.push((state, action.label(), next));
        state = next;
    }
    Ok(path)
}
