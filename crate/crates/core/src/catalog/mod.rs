//! The nine four-qubit entanglement families and the 49 SLOCC classes
//! inside them, loaded from `data/catalog.toml`.

mod condition;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use condition::{Clause, Condition, Verdict, ZERO_TOL};

use crate::error::{Error, Result};
use crate::gates::{support, StateVector, SUPPORT_TOL};
use crate::termspace::{parse_termset, TermSet, NUM_TERMS};

const BUILTIN: &str = include_str!("../../data/catalog.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "G_abcd")]
    Gabcd,
    #[serde(rename = "L_abc2")]
    Labc2,
    #[serde(rename = "L_a2b2")]
    La2b2,
    #[serde(rename = "L_ab3")]
    Lab3,
    #[serde(rename = "L_a4")]
    La4,
    #[serde(rename = "L_a2_0_3p1")]
    La2031,
    #[serde(rename = "L_0_5p3")]
    L053,
    #[serde(rename = "L_0_7p1")]
    L071,
    #[serde(rename = "L_0_3p1_0_3p1")]
    L031031,
}

impl FamilyId {
    pub const ALL: [FamilyId; 9] = [
        FamilyId::Gabcd,
        FamilyId::Labc2,
        FamilyId::La2b2,
        FamilyId::Lab3,
        FamilyId::La4,
        FamilyId::La2031,
        FamilyId::L053,
        FamilyId::L071,
        FamilyId::L031031,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FamilyId::Gabcd => "G_abcd",
            FamilyId::Labc2 => "L_abc2",
            FamilyId::La2b2 => "L_a2b2",
            FamilyId::Lab3 => "L_ab3",
            FamilyId::La4 => "L_a4",
            FamilyId::La2031 => "L_a2_0_3p1",
            FamilyId::L053 => "L_0_5p3",
            FamilyId::L071 => "L_0_7p1",
            FamilyId::L031031 => "L_0_3p1_0_3p1",
        }
    }

    /// Number of leading parameters (a, b, c, d) the family uses.
    pub fn arity(self) -> usize {
        match self {
            FamilyId::Gabcd => 4,
            FamilyId::Labc2 => 3,
            FamilyId::La2b2 | FamilyId::Lab3 => 2,
            FamilyId::La4 | FamilyId::La2031 => 1,
            FamilyId::L053 | FamilyId::L071 | FamilyId::L031031 => 0,
        }
    }

    /// Unnormalized coefficients of the family state.
    fn coefficients(self, p: &Params) -> [Complex64; NUM_TERMS] {
        let [a, b, c, d] = p.0;
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::i();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = [Complex64::new(0.0, 0.0); NUM_TERMS];
        let mut put = |terms: &[usize], x: Complex64| {
            for &t in terms {
                v[t] += x;
            }
        };
        match self {
            FamilyId::Gabcd => {
                put(&[0b0000, 0b1111], (d + a) / 2.0);
                put(&[0b0011, 0b1100], (a - d) / 2.0);
                put(&[0b0110, 0b1001], (c - b) / 2.0);
                put(&[0b0101, 0b1010], (b + c) / 2.0);
            }
            FamilyId::Labc2 => {
                put(&[0b0000, 0b1111], (a + b) / 2.0);
                put(&[0b0011, 0b1100], (a - b) / 2.0);
                put(&[0b0101, 0b1010], c);
                put(&[0b0110], one);
            }
            FamilyId::La2b2 => {
                put(&[0b0000, 0b1111], a);
                put(&[0b0101, 0b1010], b);
                put(&[0b0110, 0b0011], one);
            }
            FamilyId::Lab3 => {
                put(&[0b0000, 0b1111], a);
                put(&[0b0101, 0b1010], (a + b) / 2.0);
                put(&[0b0110, 0b1001], (a - b) / 2.0);
                put(&[0b0001, 0b0010, 0b0111, 0b1011], i * h);
            }
            FamilyId::La4 => {
                put(&[0b0000, 0b0101, 0b1010, 0b1111], a);
                put(&[0b0001, 0b1011], i);
                put(&[0b0110], one);
            }
            FamilyId::La2031 => {
                put(&[0b0000, 0b1111], a);
                put(&[0b0011, 0b0101, 0b0110], one);
            }
            FamilyId::L053 => put(&[0b0000, 0b0101, 0b1000, 0b1110], one),
            FamilyId::L071 => put(&[0b0000, 0b1011, 0b1101, 0b1110], one),
            FamilyId::L031031 => put(&[0b0000, 0b0111], one),
        }
        v
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| Error::UnknownClass(s.to_string()))
    }
}

/// Complex family parameters `(a, b, c, d)`; unused trailing ones are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Params(pub [Complex64; 4]);

impl Params {
    pub fn real(values: [f64; 4]) -> Self {
        Params(values.map(|x| Complex64::new(x, 0.0)))
    }

    /// Parses up to four values such as `1`, `-i`, `2i`, `0.5-1.5i`.
    pub fn parse_list<S: AsRef<str>>(values: &[S]) -> Result<Self> {
        if values.len() > 4 {
            return Err(Error::InvalidArgument(format!(
                "at most four parameters, got {}",
                values.len()
            )));
        }
        let mut p = Params::default();
        for (slot, v) in p.0.iter_mut().zip(values) {
            *slot = parse_complex(v.as_ref())?;
        }
        Ok(p)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|z| format_complex(*z)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

pub fn parse_complex(s: &str) -> Result<Complex64> {
    let err = || Error::InvalidArgument(format!("cannot parse complex number `{s}`"));
    let t = s.trim();
    let Some(body) = t.strip_suffix('i') else {
        return t
            .parse::<f64>()
            .map(|x| Complex64::new(x, 0.0))
            .map_err(|_| err());
    };
    // split at the last sign that is not the leading one or part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| err())?,
    };
    let re = re.parse::<f64>().map_err(|_| err())?;
    Ok(Complex64::new(re, im))
}

pub fn format_complex(z: Complex64) -> String {
    let fmt_im = |x: f64| {
        if x == 1.0 {
            String::new()
        } else {
            format!("{x}")
        }
    };
    match (z.re, z.im) {
        (re, 0.0) => format!("{re}"),
        (0.0, im) => {
            let sign = if im < 0.0 { "-" } else { "" };
            format!("{sign}{}i", fmt_im(im.abs()))
        }
        (re, im) => {
            let sign = if im < 0.0 { '-' } else { '+' };
            format!("{re}{sign}{}i", fmt_im(im.abs()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    /// Reachable with {X, H, CNOT, CCNOT, CH} alone.
    Green,
    /// Reachable with the same gates plus angle post-processing.
    Blue,
    /// Needs phase gates as well.
    Yellow,
    Unlisted,
}

impl Feasibility {
    pub fn name(self) -> &'static str {
        match self {
            Feasibility::Green => "green",
            Feasibility::Blue => "blue",
            Feasibility::Yellow => "yellow",
            Feasibility::Unlisted => "unlisted",
        }
    }
}

/// Normalized target state together with its term-set.
#[derive(Clone, Debug, PartialEq)]
pub struct Representative {
    pub terms: TermSet,
    pub amplitudes: StateVector,
}

impl Representative {
    pub fn from_state(amplitudes: StateVector) -> Result<Self> {
        Ok(Representative {
            terms: support(&amplitudes, SUPPORT_TOL)?,
            amplitudes,
        })
    }

    /// Whether every amplitude is real up to one global phase.
    pub fn is_real(&self) -> bool {
        let fixed = self.amplitudes.phase_fixed(SUPPORT_TOL);
        fixed.amplitudes().iter().all(|a| a.im.abs() <= ZERO_TOL)
    }

    /// Whether all nonzero amplitudes share one magnitude.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / (self.terms.shell() as f64).sqrt();
        self.terms
            .terms()
            .all(|t| (self.amplitudes.amplitude(t).norm() - w).abs() <= 1e-12)
    }
}

/// Family state from its defining superposition, normalized.
pub fn family_state(family: FamilyId, params: &Params) -> Result<Representative> {
    let mut p = *params;
    for slot in p.0.iter_mut().skip(family.arity()) {
        *slot = Complex64::new(0.0, 0.0);
    }
    let raw = family.coefficients(&p);
    let norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= ZERO_TOL {
        return Err(Error::DegenerateParameters {
            family: family.label().to_string(),
        });
    }
    let v = StateVector::normalized(raw)?;
    Representative::from_state(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SloccClass {
    pub id: String,
    pub family: FamilyId,
    pub conditions: Condition,
    pub feasibility: Feasibility,
    pub default_params: Params,
    /// Support of the family state at `default_params`, as committed.
    pub terms: TermSet,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    family: FamilyId,
    conditions: String,
    feasibility: Feasibility,
    params: Vec<String>,
    terms: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    class: Vec<Record>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    classes: Vec<SloccClass>,
}

impl Catalog {
    /// The catalog compiled into the crate.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_toml(BUILTIN).expect("built-in catalog is valid"))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| Error::Catalog(e.to_string()))?;
        let mut classes: Vec<SloccClass> = Vec::with_capacity(file.class.len());
        for r in file.class {
            if classes.iter().any(|c| c.id == r.id) {
                return Err(Error::Catalog(format!("duplicate class `{}`", r.id)));
            }
            if r.params.len() != r.family.arity() {
                return Err(Error::Catalog(format!(
                    "class `{}`: {} takes {} parameter(s), got {}",
                    r.id,
                    r.family,
                    r.family.arity(),
                    r.params.len()
                )));
            }
            let terms = parse_termset(&r.terms)
                .map_err(|e| Error::Catalog(format!("class `{}`: {e}", r.id)))?;
            classes.push(SloccClass {
                conditions: Condition::parse(&r.conditions)?,
                default_params: Params::parse_list(&r.params)
                    .map_err(|e| Error::Catalog(format!("class `{}`: {e}", r.id)))?,
                id: r.id,
                family: r.family,
                feasibility: r.feasibility,
                terms,
            });
        }
        Ok(Catalog { classes })
    }

    pub fn classes(&self) -> &[SloccClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&SloccClass> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownClass(id.to_string()))
    }

    pub fn in_family(&self, family: FamilyId) -> impl Iterator<Item = &SloccClass> {
        self.classes.iter().filter(move |c| c.family == family)
    }

    /// Class state at `params`, or at its defaults when `None`. Clauses with
    /// undefined symbols are not enforced.
    pub fn representative(&self, id: &str, params: Option<&Params>) -> Result<Representative> {
        let class = self.get(id)?;
        let p = params.unwrap_or(&class.default_params);
        if let Verdict::Fails(predicate) = class.conditions.verdict(p) {
            return Err(Error::ConditionViolated {
                class: class.id.clone(),
                predicate,
            });
        }
        family_state(class.family, p)
    }

    /// First class of `family`, in table order, whose conditions hold.
    /// Classes with undefined symbols never match.
    pub fn classify(&self, params: &Params, family: FamilyId) -> Option<&str> {
        self.in_family(family)
            .find(|c| c.conditions.verdict(params) == Verdict::Holds)
            .map(|c| c.id.as_str())
    }

    /// Resolves a class id, or the label of a parameter-free family.
    pub fn target(&self, name: &str) -> Result<Representative> {
        if self.get(name).is_ok() {
            return self.representative(name, None);
        }
        match name.parse::<FamilyId>() {
            Ok(f) if f.arity() == 0 => family_state(f, &Params::default()),
            _ => Err(Error::UnknownClass(name.to_string())),
        }
    }
}
