//! Parser and evaluator for the coefficient conditions of the class table,
//! written as in the table itself: `b=c=0, ad≠0, a=±d`.

use num_complex::Complex64;

use super::Params;
use crate::error::{Error, Result};

/// Zero test used by every relation.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rel {
    Eq,
    Ne,
    EqPm,
    NePm,
}

impl Rel {
    fn holds(self, l: Complex64, r: Complex64) -> bool {
        let eq = (l - r).norm() < ZERO_TOL;
        let eq_neg = (l + r).norm() < ZERO_TOL;
        match self {
            Rel::Eq => eq,
            Rel::Ne => !eq,
            Rel::EqPm => eq || eq_neg,
            Rel::NePm => !eq && !eq_neg,
        }
    }
}

/// `coef · Π vars^pow`; `None` variable marks a symbol with no definition.
#[derive(Clone, Debug, PartialEq)]
struct Monomial {
    coef: Complex64,
    vars: Vec<(Option<usize>, u32)>,
}

#[derive(Clone, Debug, PartialEq)]
struct Expr(Vec<Monomial>);

impl Expr {
    fn eval(&self, p: &Params) -> Option<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for m in &self.0 {
            let mut v = m.coef;
            for &(var, pow) in &m.vars {
                v *= p.0[var?].powu(pow);
            }
            total += v;
        }
        Some(total)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Check {
    Rel(Expr, Rel, Expr),
    Any(Vec<Check>),
}

impl Check {
    fn eval(&self, p: &Params) -> Option<bool> {
        match self {
            Check::Rel(l, rel, r) => Some(rel.holds(l.eval(p)?, r.eval(p)?)),
            Check::Any(alts) => {
                let mut any = false;
                for c in alts {
                    any |= c.eval(p)?;
                }
                Some(any)
            }
        }
    }
}

/// One comma-separated piece of a condition, kept with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    text: String,
    checks: Vec<Check>,
}

impl Clause {
    pub fn text(&self) -> &str {
        &self.text
    }

    /// `None` when the clause mentions an undefined symbol.
    pub fn eval(&self, p: &Params) -> Option<bool> {
        let mut all = true;
        for c in &self.checks {
            all &= c.eval(p)?;
        }
        Some(all)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    source: String,
    clauses: Vec<Clause>,
}

/// Outcome of testing parameters against a condition.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Holds,
    /// Text of the first clause that fails.
    Fails(String),
    /// Text of the first clause that cannot be evaluated.
    Undefined(String),
}

impl Condition {
    pub fn parse(source: &str) -> Result<Self> {
        let clauses = source
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(parse_clause)
            .collect::<Result<Vec<_>>>()?;
        Ok(Condition {
            source: source.to_string(),
            clauses,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Whether every clause can be evaluated.
    pub fn is_defined(&self) -> bool {
        let probe = Params::default();
        self.clauses.iter().all(|c| c.eval(&probe).is_some())
    }

    /// Clauses are tested in order; an undefined clause is reported only if
    /// no earlier clause fails.
    pub fn verdict(&self, p: &Params) -> Verdict {
        for c in &self.clauses {
            match c.eval(p) {
                Some(true) => {}
                Some(false) => return Verdict::Fails(c.text.clone()),
                None => return Verdict::Undefined(c.text.clone()),
            }
        }
        Verdict::Holds
    }
}

fn bad(text: &str, why: &str) -> Error {
    Error::Catalog(format!("condition `{text}`: {why}"))
}

fn parse_clause(text: &str) -> Result<Clause> {
    let checks = if let Some(rest) = text.strip_prefix("either ") {
        let (first, second) = rest
            .split_once(" or ")
            .ok_or_else(|| bad(text, "`either` without `or`"))?;
        let chain = parse_chain(first, text)?;
        let [Check::Rel(lhs, rel, rhs)] = chain.as_slice() else {
            return Err(bad(text, "`either` needs a single relation"));
        };
        let (rel2, rhs2) = match second.trim().strip_prefix('±') {
            Some(r) if matches!(rel, Rel::EqPm) => (Rel::EqPm, parse_expr(r, text)?),
            _ => (*rel, parse_expr(second.trim(), text)?),
        };
        vec![Check::Any(vec![
            Check::Rel(lhs.clone(), *rel, rhs.clone()),
            Check::Rel(lhs.clone(), rel2, rhs2),
        ])]
    } else {
        parse_chain(text, text)?
    };
    Ok(Clause {
        text: text.to_string(),
        checks,
    })
}

/// `e0 op e1 op e2 ...` becomes the relations between neighbours.
fn parse_chain(s: &str, text: &str) -> Result<Vec<Check>> {
    let mut exprs = Vec::new();
    let mut rels = Vec::new();
    let mut rest = s;
    loop {
        let next = rest.find(['=', '≠']);
        let Some(at) = next else {
            exprs.push(parse_expr(rest, text)?);
            break;
        };
        exprs.push(parse_expr(&rest[..at], text)?);
        let op = rest[at..].chars().next().expect("found operator");
        let mut after = &rest[at + op.len_utf8()..];
        let pm = after.starts_with('±');
        if pm {
            after = &after['±'.len_utf8()..];
        }
        rels.push(match (op, pm) {
            ('=', false) => Rel::Eq,
            ('=', true) => Rel::EqPm,
            (_, false) => Rel::Ne,
            (_, true) => Rel::NePm,
        });
        rest = after;
    }
    if rels.is_empty() {
        return Err(bad(text, "no relation"));
    }
    Ok(rels
        .iter()
        .enumerate()
        .map(|(i, &r)| Check::Rel(exprs[i].clone(), r, exprs[i + 1].clone()))
        .collect())
}

fn parse_expr(s: &str, text: &str) -> Result<Expr> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(bad(text, "empty expression"));
    }
    let mut monomials = Vec::new();
    let mut chars = s.chars().peekable();
    while chars.peek().is_some() {
        let mut sign = 1.0;
        while let Some(&c) = chars.peek() {
            match c {
                '+' => {}
                '-' => sign = -sign,
                _ => break,
            }
            chars.next();
        }
        let mut coef = Complex64::new(sign, 0.0);
        let mut digits = String::new();
        while let Some(&c) = chars.peek().filter(|c| c.is_ascii_digit() || **c == '.') {
            digits.push(c);
            chars.next();
        }
        if !digits.is_empty() {
            coef *= digits.parse::<f64>().map_err(|_| bad(text, "bad number"))?;
        }
        let mut vars = Vec::new();
        let mut seen_factor = !digits.is_empty();
        while let Some(&c) = chars.peek() {
            match c {
                'i' => coef *= Complex64::i(),
                '√' => {
                    chars.next();
                    let mut radicand = String::new();
                    while let Some(&d) = chars.peek().filter(|c| c.is_ascii_digit()) {
                        radicand.push(d);
                        chars.next();
                    }
                    let r: f64 = radicand.parse().map_err(|_| bad(text, "bad radical"))?;
                    coef *= r.sqrt();
                    seen_factor = true;
                    continue;
                }
                'a'..='d' => vars.push((Some(c as usize - 'a' as usize), 1)),
                'x' | 'y' => vars.push((None, 1)),
                '²' => match vars.last_mut() {
                    Some(v) => v.1 = 2,
                    None => return Err(bad(text, "`²` without a variable")),
                },
                '+' | '-' => break,
                other => return Err(bad(text, &format!("unexpected `{other}`"))),
            }
            seen_factor = true;
            chars.next();
        }
        if !seen_factor {
            return Err(bad(text, "dangling sign"));
        }
        monomials.push(Monomial { coef, vars });
    }
    Ok(Expr(monomials))
}
