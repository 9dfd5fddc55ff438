//! Basis terms, term-sets and the bounded environment the learner explores.
//!
//! Qubit A is the most significant bit of a basis index: `0b1000` is `|1000⟩`,
//! i.e. qubit A set and B, C, D clear. Every string in the catalog follows
//! this convention.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const NUM_QUBITS: usize = 4;
pub const NUM_TERMS: usize = 1 << NUM_QUBITS;

const QUBIT_NAMES: [char; NUM_QUBITS] = ['A', 'B', 'C', 'D'];

/// Human-facing name of a qubit index (`0 -> 'A'`).
pub fn qubit_name(qubit: usize) -> char {
    QUBIT_NAMES[qubit]
}

pub fn qubit_from_name(name: &str) -> Option<usize> {
    match name {
        "A" | "a" => Some(0),
        "B" | "b" => Some(1),
        "C" | "c" => Some(2),
        "D" | "d" => Some(3),
        _ => None,
    }
}

/// Bit mask of a qubit inside a basis index.
#[inline]
pub const fn qubit_mask(qubit: usize) -> usize {
    1 << (NUM_QUBITS - 1 - qubit)
}

/// One of the sixteen computational basis states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisTerm(u8);

impl BasisTerm {
    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_TERMS {
            Ok(BasisTerm(index as u8))
        } else {
            Err(Error::InvalidArgument(format!(
                "basis index {index} outside [0, {NUM_TERMS})"
            )))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn bit(self, qubit: usize) -> bool {
        self.index() & qubit_mask(qubit) != 0
    }

    #[inline]
    pub fn flip(self, qubit: usize) -> Self {
        BasisTerm(self.0 ^ qubit_mask(qubit) as u8)
    }

    pub fn all() -> impl Iterator<Item = BasisTerm> {
        (0..NUM_TERMS as u8).map(BasisTerm)
    }
}

impl fmt::Display for BasisTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

impl FromStr for BasisTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::TermParse {
            token: s.to_string(),
            reason: reason.to_string(),
        };
        if s.len() != NUM_QUBITS {
            return Err(fail("expected 4 binary digits"));
        }
        let mut index = 0usize;
        for ch in s.chars() {
            index <<= 1;
            match ch {
                '0' => {}
                '1' => index |= 1,
                _ => return Err(fail("only 0 and 1 are allowed")),
            }
        }
        BasisTerm::new(index)
    }
}

/// Coefficient-free encoding of a state: the set of basis terms with a
/// nonzero amplitude. Stored as a 16-bit membership mask.
///
/// Ordering is by shell (term count) first, then by mask value, which is the
/// same order [`Environment`] assigns dense ids in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TermSet(u16);

impl TermSet {
    pub fn from_mask(mask: u16) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidArgument("term-set must not be empty".into()));
        }
        Ok(TermSet(mask))
    }

    pub fn singleton(term: BasisTerm) -> Self {
        TermSet(1 << term.index())
    }

    /// Builds a term-set, rejecting duplicates and the empty input.
    pub fn from_terms<I: IntoIterator<Item = BasisTerm>>(terms: I) -> Result<Self> {
        let mut mask = 0u16;
        for t in terms {
            let bit = 1u16 << t.index();
            if mask & bit != 0 {
                return Err(Error::TermParse {
                    token: t.to_string(),
                    reason: "duplicate term".into(),
                });
            }
            mask |= bit;
        }
        TermSet::from_mask(mask)
    }

    #[inline]
    pub fn mask(self) -> u16 {
        self.0
    }

    /// Number of terms, i.e. the shell the set lives in.
    #[inline]
    pub fn shell(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn contains(self, term: BasisTerm) -> bool {
        self.0 & (1 << term.index()) != 0
    }

    /// Members in ascending order.
    pub fn terms(self) -> impl Iterator<Item = BasisTerm> {
        let mask = self.0;
        BasisTerm::all().filter(move |t| mask & (1 << t.index()) != 0)
    }
}

/// Number of terms in a term-set.
pub fn shell(s: TermSet) -> usize {
    s.shell()
}

/// Parses the comma-separated textual form, e.g. `"0000,0111"`.
pub fn parse_termset(text: &str) -> Result<TermSet> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Err(Error::TermParse {
            token: text.to_string(),
            reason: "empty term-set".into(),
        });
    }
    let terms = cleaned
        .split(',')
        .map(str::parse::<BasisTerm>)
        .collect::<Result<Vec<_>>>()?;
    TermSet::from_terms(terms)
}

impl Ord for TermSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.shell().cmp(&other.shell()).then(self.0.cmp(&other.0))
    }
}

impl PartialOrd for TermSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in self.terms() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for TermSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_termset(s)
    }
}

impl serde::Serialize for TermSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for TermSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_termset(&text).map_err(serde::de::Error::custom)
    }
}

const NO_ID: u32 = u32::MAX;

/// All term-sets with at most `max_terms` members, densely indexed.
#[derive(Clone, Debug)]
pub struct Environment {
    max_terms: usize,
    states: Vec<TermSet>,
    ids: Vec<u32>,
}

impl Environment {
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[TermSet] {
        &self.states
    }

    #[inline]
    pub fn state(&self, id: usize) -> TermSet {
        self.states[id]
    }

    #[inline]
    pub fn id(&self, s: TermSet) -> Option<usize> {
        match self.ids[s.mask() as usize] {
            NO_ID => None,
            id => Some(id as usize),
        }
    }

    pub fn contains(&self, s: TermSet) -> bool {
        self.id(s).is_some()
    }

    /// Dense id of `s`, or [`Error::NotInEnvironment`].
    pub fn require(&self, s: TermSet) -> Result<usize> {
        self.id(s).ok_or(Error::NotInEnvironment { state: s })
    }

    /// Number of states per shell, index 0 holding shell 1.
    pub fn shell_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.max_terms];
        for s in &self.states {
            sizes[s.shell() - 1] += 1;
        }
        sizes
    }
}

/// Enumerates every term-set with `1..=max_terms` members, ordered by shell
/// and then by ascending mask.
pub fn enumerate_environment(max_terms: usize) -> Result<Environment> {
    if !(1..=NUM_TERMS).contains(&max_terms) {
        return Err(Error::InvalidArgument(format!(
            "max_terms must lie in [1, {NUM_TERMS}], got {max_terms}"
        )));
    }
    let mut states: Vec<TermSet> = (1..=u16::MAX)
        .filter(|m| m.count_ones() as usize <= max_terms)
        .map(TermSet)
        .collect();
    states.sort();
    let mut ids = vec![NO_ID; 1 << NUM_TERMS];
    for (id, s) in states.iter().enumerate() {
        ids[s.mask() as usize] = id as u32;
    }
    Ok(Environment {
        max_terms,
        states,
        ids,
    })
}
