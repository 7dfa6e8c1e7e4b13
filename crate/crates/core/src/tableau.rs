//! Butcher double tableaux for additive (IMEX) Runge-Kutta schemes.
//!
//! A tableau holds the implicit pair `(c, A)` and the explicit pair `(d, B)`.
//! Standard-form schemes also carry weights `w` (implicit) and `omega`
//! (explicit) for the final assembly stage; all-stages-implicit (ASI) schemes
//! drop them because the new solution is the last stage value.
//!
//! Coefficients are kept exactly (see [`Surd`]) and mirrored into `f64`
//! arrays at construction for the numerical modules.

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{ParseExactError, Surd};

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("unknown scheme `{name}`; available: {}", available.join(", "))]
    UnknownScheme { name: String, available: Vec<String> },
    #[error("unknown family `{name}`; available: {}", available.join(", "))]
    UnknownFamily { name: String, available: Vec<String> },
    #[error("tableau `{name}`: {what}")]
    Dimension { name: String, what: String },
    #[error("family {family}: denominator `{expr}` vanishes")]
    SingularDenominator { family: String, expr: String },
    #[error("family {family}: parameter {param} = {value} outside admissible range {range}")]
    ParameterOutOfRange {
        family: String,
        param: String,
        value: String,
        range: String,
    },
    #[error("family {family}: missing parameter `{param}`")]
    MissingParameter { family: String, param: String },
    #[error("family {family}: unexpected parameter `{param}`")]
    UnexpectedParameter { family: String, param: String },
    #[error("scheme `{name}` failed validation: {failures}")]
    Invalid { name: String, failures: String },
    #[error("coefficient parse error: {0}")]
    Parse(#[from] ParseExactError),
    #[error("tableau json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One tableau entry: its exact value and, when it came from a printed
/// decimal, the literal digit string.
#[derive(Clone, PartialEq, Eq)]
pub struct Coef {
    value: Surd,
    literal: Option<String>,
}

impl Coef {
    pub fn exact(value: Surd) -> Self {
        Coef { value, literal: None }
    }

    pub fn decimal(digits: &str) -> Result<Self, ParseExactError> {
        let value = digits.parse()?;
        Ok(Coef {
            value,
            literal: Some(digits.trim().to_string()),
        })
    }

    pub fn zero() -> Self {
        Coef::exact(Surd::zero())
    }

    pub fn value(&self) -> &Surd {
        &self.value
    }

    pub fn literal(&self) -> Option<&str> {
        self.literal.as_deref()
    }

    pub fn is_decimal(&self) -> bool {
        self.literal.is_some()
    }

    /// Serialized form: the printed digits for decimals, otherwise `p/q`
    /// (with an optional `*sqrt(5)` term).
    pub fn to_text(&self) -> String {
        match &self.literal {
            Some(l) => l.clone(),
            None => self.value.to_string(),
        }
    }

    fn from_text(text: &str) -> Result<Self, ParseExactError> {
        let t = text.trim();
        if t.contains('.') && !t.contains("sqrt") {
            Coef::decimal(t)
        } else {
            Ok(Coef::exact(t.parse()?))
        }
    }
}

impl fmt::Debug for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl From<Surd> for Coef {
    fn from(value: Surd) -> Self {
        Coef::exact(value)
    }
}

/// Floating-point mirror of a tableau, row-major matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTableau {
    pub stages: usize,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    /// Effective implicit weights (last row of `A` for ASI schemes).
    pub w: Vec<f64>,
    /// Effective explicit weights (last row of `B` for ASI schemes).
    pub omega: Vec<f64>,
    pub is_asi: bool,
}

impl NumericTableau {
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.stages + j]
    }
}

/// Exact description used to build a [`ButcherDoubleTableau`].
#[derive(Debug, Clone)]
pub struct TableauParts {
    pub name: String,
    pub c: Vec<Coef>,
    pub a: Vec<Vec<Coef>>,
    pub d: Vec<Coef>,
    pub b: Vec<Vec<Coef>>,
    pub w: Option<Vec<Coef>>,
    pub omega: Option<Vec<Coef>>,
    pub design_order: u8,
}

impl TableauParts {
    /// ASI parts with abscissae taken as the exact row sums.
    pub fn asi_from_matrices(name: &str, a: Vec<Vec<Surd>>, b: Vec<Vec<Surd>>, design_order: u8) -> Self {
        let row_sum = |m: &Vec<Vec<Surd>>| -> Vec<Coef> {
            m.iter()
                .map(|row| Coef::exact(row.iter().fold(Surd::zero(), |acc, x| &acc + x)))
                .collect()
        };
        let c = row_sum(&a);
        let d = row_sum(&b);
        let wrap = |m: Vec<Vec<Surd>>| -> Vec<Vec<Coef>> {
            m.into_iter().map(|r| r.into_iter().map(Coef::exact).collect()).collect()
        };
        TableauParts {
            name: name.to_string(),
            c,
            a: wrap(a),
            d,
            b: wrap(b),
            w: None,
            omega: None,
            design_order,
        }
    }
}

#[derive(Clone)]
pub struct ButcherDoubleTableau {
    name: String,
    stages: usize,
    c: Vec<Coef>,
    a: Vec<Vec<Coef>>,
    d: Vec<Coef>,
    b: Vec<Vec<Coef>>,
    w: Option<Vec<Coef>>,
    omega: Option<Vec<Coef>>,
    design_order: u8,
    numeric: NumericTableau,
}

impl fmt::Debug for ButcherDoubleTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ButcherDoubleTableau")
            .field("name", &self.name)
            .field("stages", &self.stages)
            .field("c", &self.c)
            .field("A", &self.a)
            .field("d", &self.d)
            .field("B", &self.b)
            .field("w", &self.w)
            .field("omega", &self.omega)
            .field("design_order", &self.design_order)
            .finish()
    }
}

impl ButcherDoubleTableau {
    /// Checks shapes and builds the numeric mirror. Structural invariants
    /// (triangularity, row sums) are reported by [`validate`], not enforced
    /// here, so that defective tableaux can still be inspected.
    pub fn from_parts(parts: TableauParts) -> Result<Self, TableauError> {
        let s = parts.c.len();
        let dim = |what: String| TableauError::Dimension {
            name: parts.name.clone(),
            what,
        };
        if s == 0 {
            return Err(dim("zero stages".into()));
        }
        if parts.d.len() != s {
            return Err(dim(format!("d has length {}, expected {s}", parts.d.len())));
        }
        for (label, m) in [("A", &parts.a), ("B", &parts.b)] {
            if m.len() != s || m.iter().any(|r| r.len() != s) {
                return Err(dim(format!("{label} is not {s}x{s}")));
            }
        }
        match (&parts.w, &parts.omega) {
            (None, None) => {}
            (Some(w), Some(o)) if w.len() == s && o.len() == s => {}
            (Some(_), Some(_)) => return Err(dim(format!("weights must have length {s}"))),
            _ => return Err(dim("w and omega must be given together".into())),
        }
        if !(1..=3).contains(&parts.design_order) {
            return Err(dim(format!("design order {} not in 1..=3", parts.design_order)));
        }

        let f = |v: &[Coef]| v.iter().map(|x| x.value.to_f64()).collect::<Vec<_>>();
        let flat = |m: &[Vec<Coef>]| m.iter().flat_map(|r| r.iter().map(|x| x.value.to_f64())).collect::<Vec<_>>();
        let a = flat(&parts.a);
        let b = flat(&parts.b);
        let is_asi = parts.w.is_none();
        let (w, omega) = match (&parts.w, &parts.omega) {
            (Some(w), Some(o)) => (f(w), f(o)),
            _ => (a[(s - 1) * s..].to_vec(), b[(s - 1) * s..].to_vec()),
        };
        let numeric = NumericTableau {
            stages: s,
            c: f(&parts.c),
            a,
            d: f(&parts.d),
            b,
            w,
            omega,
            is_asi,
        };
        Ok(ButcherDoubleTableau {
            name: parts.name,
            stages: s,
            c: parts.c,
            a: parts.a,
            d: parts.d,
            b: parts.b,
            w: parts.w,
            omega: parts.omega,
            design_order: parts.design_order,
            numeric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn design_order(&self) -> u8 {
        self.design_order
    }

    pub fn is_asi(&self) -> bool {
        self.w.is_none()
    }

    pub fn numeric(&self) -> &NumericTableau {
        &self.numeric
    }

    pub fn c(&self) -> &[Coef] {
        &self.c
    }

    pub fn d(&self) -> &[Coef] {
        &self.d
    }

    pub fn a_matrix(&self) -> &[Vec<Coef>] {
        &self.a
    }

    pub fn b_matrix(&self) -> &[Vec<Coef>] {
        &self.b
    }

    /// Exact `a_ij`, zero-based.
    pub fn a(&self, i: usize, j: usize) -> &Surd {
        &self.a[i][j].value
    }

    /// Exact `b_ij`, zero-based.
    pub fn b(&self, i: usize, j: usize) -> &Surd {
        &self.b[i][j].value
    }

    pub fn weights(&self) -> Option<(&[Coef], &[Coef])> {
        match (&self.w, &self.omega) {
            (Some(w), Some(o)) => Some((w, o)),
            _ => None,
        }
    }

    /// Exact `(w, omega)`: the stored weights, or the last rows of `A` and
    /// `B` for ASI schemes.
    pub fn effective_weights(&self) -> (Vec<Surd>, Vec<Surd>) {
        let vals = |v: &[Coef]| v.iter().map(|x| x.value.clone()).collect::<Vec<_>>();
        match self.weights() {
            Some((w, o)) => (vals(w), vals(o)),
            None => (vals(&self.a[self.stages - 1]), vals(&self.b[self.stages - 1])),
        }
    }

    pub fn has_decimal_entries(&self) -> bool {
        self.a.iter().chain(self.b.iter()).flatten().any(Coef::is_decimal)
    }

    /// True when every entry of `A` in the first column is zero, which makes
    /// stage 1 explicit.
    pub fn zero_first_column(&self) -> bool {
        self.a.iter().all(|r| r[0].value.is_zero())
    }

    pub fn to_parts(&self) -> TableauParts {
        TableauParts {
            name: self.name.clone(),
            c: self.c.clone(),
            a: self.a.clone(),
            d: self.d.clone(),
            b: self.b.clone(),
            w: self.w.clone(),
            omega: self.omega.clone(),
            design_order: self.design_order,
        }
    }

    pub fn renamed(&self, name: &str) -> Self {
        let mut t = self.clone();
        t.name = name.to_string();
        t
    }

    /// Standard-form copy of an ASI scheme with `w`, `omega` set to the last
    /// rows of `A` and `B` (stiffly accurate in both parts).
    pub fn with_weights_from_last_rows(&self) -> Self {
        let mut parts = self.to_parts();
        parts.name = format!("{}/standard", self.name);
        parts.w = Some(self.a[self.stages - 1].clone());
        parts.omega = Some(self.b[self.stages - 1].clone());
        Self::from_parts(parts).expect("shapes unchanged")
    }

    /// The explicit part alone as an ASI tableau (implicit matrix zeroed).
    pub fn explicit_part(&self) -> Self {
        let mut parts = self.to_parts();
        parts.name = format!("{}/explicit", self.name);
        parts.a = vec![vec![Coef::zero(); self.stages]; self.stages];
        parts.c = vec![Coef::zero(); self.stages];
        if let Some(w) = parts.w.as_mut() {
            w.iter_mut().for_each(|x| *x = Coef::zero());
        }
        Self::from_parts(parts).expect("shapes unchanged")
    }

    /// The implicit part alone as an ASI tableau (explicit matrix zeroed).
    pub fn implicit_part(&self) -> Self {
        let mut parts = self.to_parts();
        parts.name = format!("{}/implicit", self.name);
        parts.b = vec![vec![Coef::zero(); self.stages]; self.stages];
        parts.d = vec![Coef::zero(); self.stages];
        if let Some(o) = parts.omega.as_mut() {
            o.iter_mut().for_each(|x| *x = Coef::zero());
        }
        Self::from_parts(parts).expect("shapes unchanged")
    }

    /// Copy with one implicit entry replaced (zero-based indices).
    pub fn with_a_entry(&self, i: usize, j: usize, value: Coef) -> Self {
        let mut parts = self.to_parts();
        parts.a[i][j] = value;
        Self::from_parts(parts).expect("shapes unchanged")
    }

    pub fn to_json(&self) -> Result<String, TableauError> {
        let text = |v: &[Coef]| v.iter().map(Coef::to_text).collect::<Vec<_>>();
        let mat = |m: &[Vec<Coef>]| m.iter().map(|r| text(r)).collect::<Vec<_>>();
        let doc = TableauJson {
            name: self.name.clone(),
            s: self.stages,
            c: text(&self.c),
            a: mat(&self.a),
            d: text(&self.d),
            b: mat(&self.b),
            w: self.w.as_deref().map(text),
            omega: self.omega.as_deref().map(text),
            design_order: self.design_order,
            is_asi: self.is_asi(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self, TableauError> {
        let doc: TableauJson = serde_json::from_str(json)?;
        let vec = |v: &[String]| v.iter().map(|x| Coef::from_text(x)).collect::<Result<Vec<_>, _>>();
        let mat = |m: &[Vec<String>]| m.iter().map(|r| vec(r)).collect::<Result<Vec<_>, _>>();
        let parts = TableauParts {
            name: doc.name.clone(),
            c: vec(&doc.c)?,
            a: mat(&doc.a)?,
            d: vec(&doc.d)?,
            b: mat(&doc.b)?,
            w: doc.w.as_deref().map(vec).transpose()?,
            omega: doc.omega.as_deref().map(vec).transpose()?,
            design_order: doc.design_order,
        };
        let dim = |what: String| TableauError::Dimension {
            name: doc.name.clone(),
            what,
        };
        if parts.c.len() != doc.s {
            return Err(dim(format!("declared s = {} but c has {} entries", doc.s, parts.c.len())));
        }
        if doc.is_asi != parts.w.is_none() {
            return Err(dim("is_asi flag disagrees with presence of weights".into()));
        }
        Self::from_parts(parts)
    }
}

#[derive(Serialize, Deserialize)]
struct TableauJson {
    name: String,
    s: usize,
    c: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<Vec<String>>,
    d: Vec<String>,
    #[serde(rename = "B")]
    b: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<String>>,
    design_order: u8,
    is_asi: bool,
}

/// Which coefficient array an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Part {
    #[serde(rename = "A")]
    Implicit,
    #[serde(rename = "B")]
    Explicit,
    #[serde(rename = "w")]
    ImplicitWeights,
    #[serde(rename = "omega")]
    ExplicitWeights,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

/// A negative coefficient; 1-based row/column as printed in tableaux.
#[derive(Debug, Clone, Serialize)]
pub struct NegativeEntry {
    pub part: Part,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scheme: String,
    pub checks: Vec<Check>,
    /// Negative coefficients; any entry here rules out the SSP property of
    /// the corresponding part.
    pub negative_entries: Vec<NegativeEntry>,
    pub stiffly_accurate: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const DECIMAL_ROW_SUM_TOL: f64 = 1e-9;

pub const CHECK_EXPLICIT_STRICTLY_LOWER: &str = "explicit strictly lower triangular";
pub const CHECK_IMPLICIT_LOWER: &str = "implicit lower triangular";
pub const CHECK_IMPLICIT_ROW_SUMS: &str = "implicit row sums equal c";
pub const CHECK_EXPLICIT_ROW_SUMS: &str = "explicit row sums equal d";
pub const CHECK_ASI_STIFFLY_ACCURATE: &str = "asi form is stiffly accurate";

/// Structural checks with exact residuals converted to `f64`.
pub fn validate(t: &ButcherDoubleTableau) -> ValidationReport {
    let s = t.stages;
    let max_abs = |it: &mut dyn Iterator<Item = Surd>| it.map(|x| x.abs()).max().unwrap_or_else(Surd::zero);

    let upper_b = max_abs(&mut (0..s).flat_map(|i| (i..s).map(move |j| (i, j))).map(|(i, j)| t.b(i, j).clone()));
    let upper_a = max_abs(&mut (0..s).flat_map(|i| (i + 1..s).map(move |j| (i, j))).map(|(i, j)| t.a(i, j).clone()));
    let row_res = |m: &[Vec<Coef>], target: &[Coef]| {
        let mut worst = Surd::zero();
        for (row, x) in m.iter().zip(target) {
            let sum = row.iter().fold(Surd::zero(), |acc, v| &acc + &v.value);
            let r = (&sum - &x.value).abs();
            if r > worst {
                worst = r;
            }
        }
        worst.to_f64()
    };
    let tol = if t.has_decimal_entries() {
        DECIMAL_ROW_SUM_TOL
    } else {
        ROW_SUM_TOL
    };
    let ra = row_res(&t.a, &t.c);
    let rb = row_res(&t.b, &t.d);

    let mut checks = vec![
        Check {
            name: CHECK_EXPLICIT_STRICTLY_LOWER,
            passed: upper_b.is_zero(),
            residual: upper_b.to_f64(),
        },
        Check {
            name: CHECK_IMPLICIT_LOWER,
            passed: upper_a.is_zero(),
            residual: upper_a.to_f64(),
        },
        Check {
            name: CHECK_IMPLICIT_ROW_SUMS,
            passed: ra <= tol,
            residual: ra,
        },
        Check {
            name: CHECK_EXPLICIT_ROW_SUMS,
            passed: rb <= tol,
            residual: rb,
        },
    ];

    let stiffly_accurate = match t.weights() {
        None => true,
        Some((w, _)) => w.iter().zip(&t.a[s - 1]).all(|(x, y)| x == y),
    };
    if t.is_asi() {
        checks.push(Check {
            name: CHECK_ASI_STIFFLY_ACCURATE,
            passed: stiffly_accurate,
            residual: 0.0,
        });
    }

    let mut negative_entries = Vec::new();
    let mut scan = |part: Part, row: usize, col: usize, c: &Coef| {
        if c.value.is_negative() {
            negative_entries.push(NegativeEntry {
                part,
                row,
                col,
                value: c.value.to_f64(),
            });
        }
    };
    for (i, r) in t.a.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            scan(Part::Implicit, i + 1, j + 1, x);
        }
    }
    for (i, r) in t.b.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            scan(Part::Explicit, i + 1, j + 1, x);
        }
    }
    if let Some((w, o)) = t.weights() {
        for (j, x) in w.iter().enumerate() {
            scan(Part::ImplicitWeights, 1, j + 1, x);
        }
        for (j, x) in o.iter().enumerate() {
            scan(Part::ExplicitWeights, 1, j + 1, x);
        }
    }

    ValidationReport {
        scheme: t.name.clone(),
        checks,
        negative_entries,
        stiffly_accurate,
    }
}
