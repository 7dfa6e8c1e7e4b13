//! Named schemes and their parametric families.
//!
//! The resolved tableaux are transcribed entry by entry; the families
//! rebuild them from their free parameters, so the two routes cross-check
//! each other.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::exact::Surd;
use crate::tableau::{validate, ButcherDoubleTableau, Coef, TableauError, TableauParts};

pub const ASI_SSP_432: &str = "ASI-SSP(4,3,2)";
pub const ASI_SSP_3P32: &str = "ASI-SSP(3',3,2)";
pub const ASI_SSP_3P32_SD: &str = "ASI-SSP(3',3,2)-sd";
pub const ASI_SSP_43P2: &str = "ASI-SSP(4,3',2)";
pub const ASI_SSP_3P3P2: &str = "ASI-SSP(3',3',2)";
pub const ASI_SSP_4P42: &str = "ASI-SSP(4',4,2)";
pub const ASI_SSP_4P42_ALT: &str = "ASI-SSP(4',4,2)-alt";
pub const ASI_SSP_643: &str = "ASI-SSP(6,4,3)";
pub const ASI_SSP_643_AREA: &str = "ASI-SSP(6,4,3)-area";
pub const ASI_SSP_5P43: &str = "ASI-SSP(5',4,3)";
pub const ASI_SSP_5P53: &str = "ASI-SSP(5',5,3)";

pub const EULER_IMEX: &str = "euler-imex";
pub const EXPLICIT_EULER: &str = "explicit-euler";
pub const SSP32_EXPLICIT: &str = "ssp32-explicit";
pub const BACKWARD_EULER_CHAIN: &str = "backward-euler-chain";

/// The catalog, in presentation order. Variants sharing a family are
/// separate entries.
pub const CATALOG: [&str; 11] = [
    ASI_SSP_432,
    ASI_SSP_3P32,
    ASI_SSP_3P32_SD,
    ASI_SSP_43P2,
    ASI_SSP_3P3P2,
    ASI_SSP_4P42,
    ASI_SSP_4P42_ALT,
    ASI_SSP_643,
    ASI_SSP_643_AREA,
    ASI_SSP_5P43,
    ASI_SSP_5P53,
];

/// One representative per construction, as used for convergence figures.
pub const FIGURE_SCHEMES: [&str; 8] = [
    ASI_SSP_432,
    ASI_SSP_3P32,
    ASI_SSP_43P2,
    ASI_SSP_3P3P2,
    ASI_SSP_4P42,
    ASI_SSP_643,
    ASI_SSP_5P43,
    ASI_SSP_5P53,
];

pub const BUILTINS: [&str; 4] = [EULER_IMEX, EXPLICIT_EULER, SSP32_EXPLICIT, BACKWARD_EULER_CHAIN];

fn q(n: i64, d: i64) -> Surd {
    Surd::from_ratio(n, d)
}

fn z() -> Surd {
    Surd::zero()
}

fn exact_row(row: Vec<Surd>) -> Vec<Coef> {
    row.into_iter().map(Coef::exact).collect()
}

/// ASI tableau with printed abscissae.
fn asi(name: &str, c: Vec<Surd>, a: Vec<Vec<Surd>>, d: Vec<Surd>, b: Vec<Vec<Surd>>, order: u8) -> ButcherDoubleTableau {
    let parts = TableauParts {
        name: name.to_string(),
        c: exact_row(c),
        a: a.into_iter().map(exact_row).collect(),
        d: exact_row(d),
        b: b.into_iter().map(exact_row).collect(),
        w: None,
        omega: None,
        design_order: order,
    };
    ButcherDoubleTableau::from_parts(parts).expect("catalog shapes are consistent")
}

fn ssp32_explicit_matrix() -> Vec<Vec<Surd>> {
    vec![
        vec![z(), z(), z(), z()],
        vec![q(1, 2), z(), z(), z()],
        vec![q(1, 2), q(1, 2), z(), z()],
        vec![q(1, 3), q(1, 3), q(1, 3), z()],
    ]
}

fn ssp32_abscissae() -> Vec<Surd> {
    vec![z(), q(1, 2), q(1, 1), q(1, 1)]
}

fn ssp42_explicit_matrix() -> Vec<Vec<Surd>> {
    let t = || q(1, 3);
    let f = || q(1, 4);
    vec![
        vec![z(), z(), z(), z(), z()],
        vec![t(), z(), z(), z(), z()],
        vec![t(), t(), z(), z(), z()],
        vec![t(), t(), t(), z(), z()],
        vec![f(), f(), f(), f(), z()],
    ]
}

fn ssp3p2_explicit_matrix(delta: &Surd) -> Result<Vec<Vec<Surd>>, TableauError> {
    let sixth_delta = div(&q(1, 1), &(&q(6, 1) * delta), "(4,3',2)", "6δ")?;
    Ok(vec![
        vec![z(), z(), z(), z()],
        vec![q(5, 6), z(), z(), z()],
        vec![sixth_delta.clone(), sixth_delta, z(), z()],
        vec![&q(4, 5) - delta, q(1, 5), delta.clone(), z()],
    ])
}

fn ssp43_padded_matrix() -> Vec<Vec<Surd>> {
    let h = || q(1, 2);
    let s = || q(1, 6);
    vec![
        vec![z(), z(), z(), z(), z(), z()],
        vec![z(), z(), z(), z(), z(), z()],
        vec![z(), h(), z(), z(), z(), z()],
        vec![z(), h(), h(), z(), z(), z()],
        vec![z(), s(), s(), s(), z(), z()],
        vec![z(), s(), s(), s(), h(), z()],
    ]
}

fn asi_ssp_432() -> ButcherDoubleTableau {
    asi(
        ASI_SSP_432,
        vec![q(1, 4), q(3, 4), q(1, 2), q(1, 1)],
        vec![
            vec![q(1, 4), z(), z(), z()],
            vec![q(1, 2), q(1, 4), z(), z()],
            vec![q(1, 4), z(), q(1, 4), z()],
            vec![q(1, 2), z(), q(1, 4), q(1, 4)],
        ],
        ssp32_abscissae(),
        ssp32_explicit_matrix(),
        2,
    )
}

fn asi_ssp_3p32_sd() -> ButcherDoubleTableau {
    asi(
        ASI_SSP_3P32_SD,
        ssp32_abscissae(),
        vec![
            vec![z(), z(), z(), z()],
            vec![z(), q(1, 2), z(), z()],
            vec![z(), q(1, 2), q(1, 2), z()],
            vec![z(), q(1, 1), q(-1, 2), q(1, 2)],
        ],
        ssp32_abscissae(),
        ssp32_explicit_matrix(),
        2,
    )
}

fn asi_ssp_3p32() -> ButcherDoubleTableau {
    asi(
        ASI_SSP_3P32,
        ssp32_abscissae(),
        vec![
            vec![z(), z(), z(), z()],
            vec![z(), q(1, 2), z(), z()],
            vec![z(), q(23, 25), q(2, 25), z()],
            vec![z(), q(1, 1), q(-3, 8), q(3, 8)],
        ],
        ssp32_abscissae(),
        ssp32_explicit_matrix(),
        2,
    )
}

fn asi_ssp_43p2() -> ButcherDoubleTableau {
    asi(
        ASI_SSP_43P2,
        vec![q(1, 4), q(11, 24), q(167, 168), q(1, 1)],
        vec![
            vec![q(1, 4), z(), z(), z()],
            vec![q(5, 24), q(1, 4), z(), z()],
            vec![Surd::quadratic(391, -36, 840), Surd::quadratic(39, 6, 140), q(1, 4), z()],
            vec![q(9, 20), q(3, 10), z(), q(1, 4)],
        ],
        vec![z(), q(5, 6), q(25, 21), q(1, 1)],
        vec![
            vec![z(), z(), z(), z()],
            vec![q(5, 6), z(), z(), z()],
            vec![q(25, 42), q(25, 42), z(), z()],
            vec![q(13, 25), q(1, 5), q(7, 25), z()],
        ],
        2,
    )
}

fn asi_ssp_3p3p2() -> ButcherDoubleTableau {
    // b41 = 4/5 − δ = 3/5 at δ = 1/5; the value 5/3 would break the row sum.
    let abscissae = vec![z(), q(5, 6), q(5, 3), q(1, 1)];
    asi(
        ASI_SSP_3P3P2,
        abscissae.clone(),
        vec![
            vec![z(), z(), z(), z()],
            vec![z(), q(5, 6), z(), z()],
            vec![z(), q(5, 6), q(5, 6), z()],
            vec![z(), q(11, 15), q(-17, 30), q(5, 6)],
        ],
        abscissae,
        vec![
            vec![z(), z(), z(), z()],
            vec![q(5, 6), z(), z(), z()],
            vec![q(5, 6), q(5, 6), z(), z()],
            vec![q(3, 5), q(1, 5), q(1, 5), z()],
        ],
        2,
    )
}

fn ssp42_abscissae() -> Vec<Surd> {
    vec![z(), q(1, 3), q(2, 3), q(1, 1), q(1, 1)]
}

fn asi_ssp_4p42() -> ButcherDoubleTableau {
    let t = || q(1, 3);
    asi(
        ASI_SSP_4P42,
        ssp42_abscissae(),
        vec![
            vec![z(), z(), z(), z(), z()],
            vec![z(), t(), z(), z(), z()],
            vec![z(), t(), t(), z(), z()],
            vec![z(), q(1, 5), q(7, 15), t(), z()],
            vec![z(), q(1, 2), q(1, 2), q(-1, 3), t()],
        ],
        ssp42_abscissae(),
        ssp42_explicit_matrix(),
        2,
    )
}

fn asi_ssp_4p42_alt() -> ButcherDoubleTableau {
    let t = || q(1, 3);
    asi(
        ASI_SSP_4P42_ALT,
        ssp42_abscissae(),
        vec![
            vec![z(), z(), z(), z(), z()],
            vec![z(), t(), z(), z(), z()],
            vec![z(), t(), t(), z(), z()],
            vec![z(), q(10, 9), q(-4, 9), t(), z()],
            vec![z(), q(6, 5), q(-9, 10), q(11, 30), t()],
        ],
        ssp42_abscissae(),
        ssp42_explicit_matrix(),
        2,
    )
}

/// Printed 16/17-digit entries of the five-stage third-order scheme.
mod decimals {
    pub const G: &str = "0.3772689153313681";
    pub const C3: &str = "0.7545378306627362";
    pub const C4: &str = "0.7289856616121875";
    pub const C5: &str = "0.6992261359316696";
    pub const A42: &str = "0.7528071994958022";
    pub const A43: &str = "-0.40109045321498277";
    pub const A52: &str = "0.9856691407902044";
    pub const A53: &str = "-0.4137119201899029";
    pub const A54: &str = "-0.25";
    pub const A62: &str = "0.8630443729722925";
    pub const A63: &str = "0.3335041845496738";
    pub const A64: &str = "-1.7904209909531452";
    pub const A65: &str = "1.216603518099811";
    pub const B4: &str = "0.24299522053739583";
    pub const B5: &str = "0.15358906769512654";
    pub const B54: &str = "0.23845893284629002";
    pub const B61: &str = "0.20673402086480455";
    pub const B63: &str = "0.11709725184184275";
    pub const B64: &str = "0.1818025601201412";
    pub const B65: &str = "0.28763214630840694";
}

fn asi_ssp_5p53() -> ButcherDoubleTableau {
    use decimals::*;
    let dcm = |s: &str| Coef::decimal(s).expect("catalog literal");
    let o = Coef::zero;
    let abscissae = vec![o(), dcm(G), dcm(C3), dcm(C4), dcm(C5), Coef::exact(q(1, 1))];
    let a = vec![
        vec![o(), o(), o(), o(), o(), o()],
        vec![o(), dcm(G), o(), o(), o(), o()],
        vec![o(), dcm(G), dcm(G), o(), o(), o()],
        vec![o(), dcm(A42), dcm(A43), dcm(G), o(), o()],
        vec![o(), dcm(A52), dcm(A53), dcm(A54), dcm(G), o()],
        vec![o(), dcm(A62), dcm(A63), dcm(A64), dcm(A65), dcm(G)],
    ];
    let b = vec![
        vec![o(), o(), o(), o(), o(), o()],
        vec![dcm(G), o(), o(), o(), o(), o()],
        vec![dcm(G), dcm(G), o(), o(), o(), o()],
        vec![dcm(B4), dcm(B4), dcm(B4), o(), o(), o()],
        vec![dcm(B5), dcm(B5), dcm(B5), dcm(B54), o(), o()],
        vec![dcm(B61), dcm(B61), dcm(B63), dcm(B64), dcm(B65), o()],
    ];
    let parts = TableauParts {
        name: ASI_SSP_5P53.to_string(),
        c: abscissae.clone(),
        a,
        d: abscissae,
        b,
        w: None,
        omega: None,
        design_order: 3,
    };
    ButcherDoubleTableau::from_parts(parts).expect("catalog shapes are consistent")
}

fn euler_imex() -> ButcherDoubleTableau {
    let parts = TableauParts {
        name: EULER_IMEX.to_string(),
        c: exact_row(vec![q(1, 1)]),
        a: vec![exact_row(vec![q(1, 1)])],
        d: exact_row(vec![z()]),
        b: vec![exact_row(vec![z()])],
        w: Some(exact_row(vec![q(1, 1)])),
        omega: Some(exact_row(vec![q(1, 1)])),
        design_order: 1,
    };
    ButcherDoubleTableau::from_parts(parts).expect("builtin shapes are consistent")
}

fn explicit_euler() -> ButcherDoubleTableau {
    asi(
        EXPLICIT_EULER,
        vec![z(), z()],
        vec![vec![z(), z()], vec![z(), z()]],
        vec![z(), q(1, 1)],
        vec![vec![z(), z()], vec![q(1, 1), z()]],
        1,
    )
}

fn ssp32_explicit() -> ButcherDoubleTableau {
    asi(
        SSP32_EXPLICIT,
        vec![z(); 4],
        vec![vec![z(); 4]; 4],
        ssp32_abscissae(),
        ssp32_explicit_matrix(),
        2,
    )
}

fn backward_euler_chain() -> ButcherDoubleTableau {
    asi(
        BACKWARD_EULER_CHAIN,
        vec![q(1, 2), q(1, 1)],
        vec![vec![q(1, 2), z()], vec![q(1, 2), q(1, 2)]],
        vec![z(), z()],
        vec![vec![z(), z()], vec![z(), z()]],
        1,
    )
}

fn params(pairs: &[(&str, Surd)]) -> BTreeMap<String, Surd> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn from_family(family: FamilyId, name: &str, p: &[(&str, Surd)]) -> ButcherDoubleTableau {
    ParametricFamily::new(family)
        .instantiate(&params(p))
        .expect("catalog parameters are admissible")
        .renamed(name)
}

/// Every catalog and built-in name.
pub fn available_schemes() -> Vec<String> {
    CATALOG.iter().chain(BUILTINS.iter()).map(|s| s.to_string()).collect()
}

/// Looks up a scheme by name and returns it validated.
pub fn get_scheme(name: &str) -> Result<ButcherDoubleTableau, TableauError> {
    let t = match name {
        ASI_SSP_432 => asi_ssp_432(),
        ASI_SSP_3P32 => asi_ssp_3p32(),
        ASI_SSP_3P32_SD => asi_ssp_3p32_sd(),
        ASI_SSP_43P2 => asi_ssp_43p2(),
        ASI_SSP_3P3P2 => asi_ssp_3p3p2(),
        ASI_SSP_4P42 => asi_ssp_4p42(),
        ASI_SSP_4P42_ALT => asi_ssp_4p42_alt(),
        ASI_SSP_643 => from_family(FamilyId::F643, ASI_SSP_643, &[("alpha", q(-3, 10)), ("beta", q(-7, 10))]),
        ASI_SSP_643_AREA => from_family(FamilyId::F643, ASI_SSP_643_AREA, &[("alpha", q(14, 25)), ("beta", q(-3, 25))]),
        ASI_SSP_5P43 => from_family(FamilyId::F5p43, ASI_SSP_5P43, &[("alpha", q(-3, 1))]),
        ASI_SSP_5P53 => asi_ssp_5p53(),
        EULER_IMEX => euler_imex(),
        EXPLICIT_EULER => explicit_euler(),
        SSP32_EXPLICIT => ssp32_explicit(),
        BACKWARD_EULER_CHAIN => backward_euler_chain(),
        _ => {
            return Err(TableauError::UnknownScheme {
                name: name.to_string(),
                available: available_schemes(),
            })
        }
    };
    let report = validate(&t);
    if !report.passed() {
        return Err(TableauError::Invalid {
            name: name.to_string(),
            failures: report.failures().join("; "),
        });
    }
    Ok(t)
}

/// The parametric constructions with free coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyId {
    F432,
    F3p32,
    F43p2,
    F3p3p2,
    F4p42,
    F643,
    F5p43,
}

impl FamilyId {
    pub const ALL: [FamilyId; 7] = [
        FamilyId::F432,
        FamilyId::F3p32,
        FamilyId::F43p2,
        FamilyId::F3p3p2,
        FamilyId::F4p42,
        FamilyId::F643,
        FamilyId::F5p43,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FamilyId::F432 => "(4,3,2)",
            FamilyId::F3p32 => "(3',3,2)",
            FamilyId::F43p2 => "(4,3',2)",
            FamilyId::F3p3p2 => "(3',3',2)",
            FamilyId::F4p42 => "(4',4,2)",
            FamilyId::F643 => "(6,4,3)",
            FamilyId::F5p43 => "(5',4,3)",
        }
    }

    pub fn from_label(label: &str) -> Result<Self, TableauError> {
        FamilyId::ALL.into_iter().find(|f| f.label() == label).ok_or_else(|| TableauError::UnknownFamily {
            name: label.to_string(),
            available: FamilyId::ALL.iter().map(|f| f.label().to_string()).collect(),
        })
    }
}

/// Bound on a free parameter.
#[derive(Debug, Clone)]
pub enum Bound {
    Open(Surd),
    Closed(Surd),
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lower: Option<Bound>,
    pub upper: Option<Bound>,
}

impl ParamSpec {
    fn free(name: &'static str) -> Self {
        ParamSpec {
            name,
            lower: None,
            upper: None,
        }
    }

    fn positive(name: &'static str) -> Self {
        ParamSpec {
            name,
            lower: Some(Bound::Open(Surd::zero())),
            upper: None,
        }
    }

    fn fixed(name: &'static str, value: Surd) -> Self {
        ParamSpec {
            name,
            lower: Some(Bound::Closed(value.clone())),
            upper: Some(Bound::Closed(value)),
        }
    }

    fn contains(&self, x: &Surd) -> bool {
        let lo = match &self.lower {
            None => true,
            Some(Bound::Open(b)) => x > b,
            Some(Bound::Closed(b)) => x >= b,
        };
        let hi = match &self.upper {
            None => true,
            Some(Bound::Open(b)) => x < b,
            Some(Bound::Closed(b)) => x <= b,
        };
        lo && hi
    }

    pub fn range_text(&self) -> String {
        let lo = match &self.lower {
            None => "(-inf".to_string(),
            Some(Bound::Open(b)) => format!("({b}"),
            Some(Bound::Closed(b)) => format!("[{b}"),
        };
        let hi = match &self.upper {
            None => "inf)".to_string(),
            Some(Bound::Open(b)) => format!("{b})"),
            Some(Bound::Closed(b)) => format!("{b}]"),
        };
        format!("{lo}, {hi}")
    }
}

fn div(num: &Surd, den: &Surd, family: &str, expr: &str) -> Result<Surd, TableauError> {
    num.checked_div(den).ok_or_else(|| TableauError::SingularDenominator {
        family: family.to_string(),
        expr: expr.to_string(),
    })
}

/// A family of tableaux with free parameters and closed-form coefficients.
#[derive(Debug, Clone)]
pub struct ParametricFamily {
    pub id: FamilyId,
    pub params: Vec<ParamSpec>,
}

impl ParametricFamily {
    pub fn new(id: FamilyId) -> Self {
        let params = match id {
            FamilyId::F432 => vec![ParamSpec::positive("gamma"), ParamSpec::free("alpha"), ParamSpec::free("beta")],
            FamilyId::F3p32 => vec![ParamSpec::positive("alpha"), ParamSpec::positive("beta")],
            // a21 and a32 were solved with the diagonal already fixed.
            FamilyId::F43p2 => vec![
                ParamSpec::fixed("gamma", q(1, 4)),
                ParamSpec::free("alpha"),
                ParamSpec::free("beta"),
                ParamSpec::free("delta"),
            ],
            FamilyId::F3p3p2 => vec![ParamSpec::free("delta")],
            FamilyId::F4p42 => vec![ParamSpec::free("alpha"), ParamSpec::free("beta")],
            FamilyId::F643 => vec![ParamSpec::free("alpha"), ParamSpec::free("beta")],
            FamilyId::F5p43 => vec![ParamSpec::free("alpha")],
        };
        ParametricFamily { id, params }
    }

    /// Builds the tableau for the given parameter values.
    pub fn instantiate(&self, values: &BTreeMap<String, Surd>) -> Result<ButcherDoubleTableau, TableauError> {
        let family = self.id.label();
        for key in values.keys() {
            if !self.params.iter().any(|p| p.name == key) {
                return Err(TableauError::UnexpectedParameter {
                    family: family.into(),
                    param: key.clone(),
                });
            }
        }
        let mut get = BTreeMap::new();
        for spec in &self.params {
            let v = values.get(spec.name).ok_or_else(|| TableauError::MissingParameter {
                family: family.into(),
                param: spec.name.into(),
            })?;
            if !spec.contains(v) {
                return Err(TableauError::ParameterOutOfRange {
                    family: family.into(),
                    param: spec.name.into(),
                    value: v.to_string(),
                    range: spec.range_text(),
                });
            }
            get.insert(spec.name, v.clone());
        }
        let p = |k: &str| get[k].clone();
        let name = format!("family{family}");

        let tableau = match self.id {
            FamilyId::F432 => {
                let (g, al, be) = (p("gamma"), p("alpha"), p("beta"));
                let a32 = &(&(&q(3, 2) - &al) - &be) - &(&q(3, 1) * &g);
                let num = &(&(&q(-1, 1) + &g) + &(&(&q(2, 1) * &(&q(1, 1) + &g)) * &al)) + &(&(&q(4, 1) * &g) * &g);
                let den = &q(3, 1) * &(&(&q(-1, 1) + &(&q(2, 1) * &al)) + &(&q(2, 1) * &g));
                let a41 = div(&num, &den, family, "3(-1+2α+2γ)")?;
                let a42 = &q(1, 1) - &(&q(2, 1) * &a41);
                let a43 = &a41 - &g;
                let a = vec![
                    vec![g.clone(), z(), z(), z()],
                    vec![al, g.clone(), z(), z()],
                    vec![be, a32, g.clone(), z()],
                    vec![a41, a42, a43, g],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp32_explicit_matrix(), 2)
            }
            FamilyId::F3p32 => {
                let (al, be) = (p("alpha"), p("beta"));
                let a = vec![
                    vec![z(), z(), z(), z()],
                    vec![z(), q(1, 2), z(), z()],
                    vec![z(), &q(1, 1) - &al, al, z()],
                    vec![z(), q(1, 1), -be.clone(), be],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp32_explicit_matrix(), 2)
            }
            FamilyId::F43p2 => {
                let (g, al, be, de) = (p("gamma"), p("alpha"), p("beta"), p("delta"));
                let num21 = &q(5, 1) * &(&(&be * &q(1, 2)) - &(&de * &q(1, 8)));
                let den21 = &(&q(6, 1) * &be) - &(&q(3, 1) * &de);
                let a21 = div(&num21, &den21, family, "6β-3δ")?;
                let num32 = &(&q(5, 2) - &(&q(2, 1) * &a21)) - &(&(&q(10, 1) * &al) * &de);
                let a32 = div(&num32, &(&q(10, 1) * &de), family, "10δ")?;
                let two_beta_over = div(&(&q(2, 1) * &be), &(&q(5, 1) * &de), family, "5δ")?;
                let a41 = &(&q(9, 20) - &be) + &two_beta_over;
                let a42 = &q(3, 10) - &two_beta_over;
                let a = vec![
                    vec![g.clone(), z(), z(), z()],
                    vec![a21, g.clone(), z(), z()],
                    vec![al, a32, g.clone(), z()],
                    vec![a41, a42, be, g],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp3p2_explicit_matrix(&de)?, 2)
            }
            FamilyId::F3p3p2 => {
                let de = p("delta");
                let third = div(&q(1, 1), &(&q(3, 1) * &de), family, "3δ")?;
                let den = &q(3, 1) * &(&q(2, 1) - &(&q(5, 1) * &de));
                let a42 = div(&(&q(1, 1) + &(&q(6, 1) * &de)), &den, family, "3(2-5δ)")?;
                let a43 = div(&(&q(-17, 1) * &de), &(&q(2, 1) * &den), family, "6(2-5δ)")?;
                let a = vec![
                    vec![z(), z(), z(), z()],
                    vec![z(), q(5, 6), z(), z()],
                    vec![z(), &third - &q(5, 6), q(5, 6), z()],
                    vec![z(), a42, a43, q(5, 6)],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp3p2_explicit_matrix(&de)?, 2)
            }
            FamilyId::F4p42 => {
                let (al, be) = (p("alpha"), p("beta"));
                let t = || q(1, 3);
                let a = vec![
                    vec![z(), z(), z(), z(), z()],
                    vec![z(), t(), z(), z(), z()],
                    vec![z(), t(), t(), z(), z()],
                    vec![z(), al.clone(), &q(2, 3) - &al, t(), z()],
                    vec![z(), be.clone(), &q(3, 2) - &(&q(2, 1) * &be), &be - &q(5, 6), t()],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp42_explicit_matrix(), 2)
            }
            FamilyId::F643 => {
                let (al, be) = (p("alpha"), p("beta"));
                let t = || q(1, 3);
                let two_al = &q(2, 1) * &al;
                let a = vec![
                    vec![t(), z(), z(), z(), z(), z()],
                    vec![q(-1, 3), t(), z(), z(), z(), z()],
                    vec![&q(1, 6) - &al, al.clone(), t(), z(), z(), z()],
                    vec![&q(1, 6) - &two_al, two_al, q(1, 2), t(), z(), z()],
                    vec![
                        al.clone(),
                        &(&q(1, 3) - &al) + &be,
                        &q(-1, 6) - &(&q(2, 1) * &be),
                        be,
                        t(),
                        z(),
                    ],
                    vec![z(), q(1, 6), q(1, 2), q(-1, 6), q(1, 6), t()],
                ];
                TableauParts::asi_from_matrices(&name, a, ssp43_padded_matrix(), 3)
            }
            FamilyId::F5p43 => {
                let al = p("alpha");
                let h = || q(1, 2);
                let a = vec![
                    vec![z(), z(), z(), z(), z(), z()],
                    vec![z(), h(), z(), z(), z(), z()],
                    vec![z(), h(), h(), z(), z(), z()],
                    vec![z(), h(), q(-1, 2), h(), z(), z()],
                    vec![z(), &q(-1, 1) - &al, h(), al, h(), z()],
                    vec![z(), q(2, 3), q(-1, 3), z(), q(1, 6), h()],
                ];
                let s = || q(1, 6);
                let b = vec![
                    vec![z(), z(), z(), z(), z(), z()],
                    vec![h(), z(), z(), z(), z(), z()],
                    vec![h(), h(), z(), z(), z(), z()],
                    vec![s(), s(), s(), z(), z(), z()],
                    vec![z(), z(), z(), z(), z(), z()],
                    vec![s(), s(), s(), h(), z(), z()],
                ];
                TableauParts::asi_from_matrices(&name, a, b, 3)
            }
        };
        ButcherDoubleTableau::from_parts(tableau)
    }
}

/// Parameter values of the resolved catalog entries, by scheme name.
pub fn catalog_parameters(name: &str) -> Option<(FamilyId, BTreeMap<String, Surd>)> {
    let entry = match name {
        ASI_SSP_432 => (FamilyId::F432, params(&[("gamma", q(1, 4)), ("alpha", q(1, 2)), ("beta", q(1, 4))])),
        ASI_SSP_3P32_SD => (FamilyId::F3p32, params(&[("alpha", q(1, 2)), ("beta", q(1, 2))])),
        ASI_SSP_3P32 => (FamilyId::F3p32, params(&[("alpha", q(2, 25)), ("beta", q(3, 8))])),
        ASI_SSP_43P2 => (
            FamilyId::F43p2,
            params(&[
                ("gamma", q(1, 4)),
                ("alpha", Surd::quadratic(391, -36, 840)),
                ("beta", z()),
                ("delta", q(7, 25)),
            ]),
        ),
        ASI_SSP_3P3P2 => (FamilyId::F3p3p2, params(&[("delta", q(1, 5))])),
        ASI_SSP_4P42 => (FamilyId::F4p42, params(&[("alpha", q(1, 5)), ("beta", q(1, 2))])),
        ASI_SSP_4P42_ALT => (FamilyId::F4p42, params(&[("alpha", q(10, 9)), ("beta", q(6, 5))])),
        ASI_SSP_643 => (FamilyId::F643, params(&[("alpha", q(-3, 10)), ("beta", q(-7, 10))])),
        ASI_SSP_643_AREA => (FamilyId::F643, params(&[("alpha", q(14, 25)), ("beta", q(-3, 25))])),
        ASI_SSP_5P43 => (FamilyId::F5p43, params(&[("alpha", q(-3, 1))])),
        _ => return None,
    };
    Some(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::Part;

    fn same_entries(x: &ButcherDoubleTableau, y: &ButcherDoubleTableau) -> bool {
        let vals = |m: &[Vec<Coef>]| m.iter().map(|r| r.iter().map(|c| c.value().clone()).collect::<Vec<_>>()).collect::<Vec<_>>();
        let v = |r: &[Coef]| r.iter().map(|c| c.value().clone()).collect::<Vec<_>>();
        vals(x.a_matrix()) == vals(y.a_matrix())
            && vals(x.b_matrix()) == vals(y.b_matrix())
            && v(x.c()) == v(y.c())
            && v(x.d()) == v(y.d())
    }

    #[test]
    fn every_name_resolves_and_validates() {
        for name in available_schemes() {
            let t = get_scheme(&name).unwrap();
            assert_eq!(t.name(), name);
            assert!(validate(&t).passed(), "{name}");
        }
    }

    #[test]
    fn unknown_name_lists_catalog() {
        let err = get_scheme("RK4").unwrap_err().to_string();
        assert!(err.contains("ASI-SSP(4,3,2)") && err.contains("euler-imex"), "{err}");
    }

    #[test]
    fn resolved_432_rows() {
        let t = get_scheme(ASI_SSP_432).unwrap();
        let row: Vec<_> = (0..4).map(|j| t.a(3, j).clone()).collect();
        assert_eq!(row, vec![q(1, 2), z(), q(1, 4), q(1, 4)]);
        let row: Vec<_> = (0..4).map(|j| t.b(3, j).clone()).collect();
        assert_eq!(row, vec![q(1, 3), q(1, 3), q(1, 3), z()]);
    }

    #[test]
    fn sd_variant_last_row() {
        let t = get_scheme(ASI_SSP_3P32_SD).unwrap();
        assert_eq!(t.a(3, 2), &q(-1, 2));
        assert_eq!(t.a(3, 3), &q(1, 2));
    }

    #[test]
    fn families_reproduce_resolved_entries() {
        for name in CATALOG {
            let Some((family, values)) = catalog_parameters(name) else {
                assert_eq!(name, ASI_SSP_5P53);
                continue;
            };
            let built = ParametricFamily::new(family).instantiate(&values).unwrap();
            let printed = get_scheme(name).unwrap();
            assert!(same_entries(&built, &printed), "{name}");
        }
    }

    #[test]
    fn family_3p32_third_row() {
        let t = ParametricFamily::new(FamilyId::F3p32)
            .instantiate(&params(&[("alpha", q(2, 25)), ("beta", q(3, 8))]))
            .unwrap();
        let row: Vec<_> = (0..4).map(|j| t.a(2, j).clone()).collect();
        assert_eq!(row, vec![z(), q(23, 25), q(2, 25), z()]);
    }

    #[test]
    fn singular_and_out_of_range_parameters() {
        let f = ParametricFamily::new(FamilyId::F432);
        let err = f
            .instantiate(&params(&[("gamma", q(1, 4)), ("alpha", q(1, 4)), ("beta", q(1, 2))]))
            .unwrap_err();
        assert!(matches!(err, TableauError::SingularDenominator { .. }), "{err}");
        let err = f
            .instantiate(&params(&[("gamma", z()), ("alpha", q(1, 2)), ("beta", q(1, 4))]))
            .unwrap_err();
        assert!(matches!(err, TableauError::ParameterOutOfRange { .. }), "{err}");
        let err = f.instantiate(&params(&[("gamma", q(1, 4)), ("alpha", q(1, 2))])).unwrap_err();
        assert!(matches!(err, TableauError::MissingParameter { .. }));
        let err = ParametricFamily::new(FamilyId::F3p3p2)
            .instantiate(&params(&[("delta", q(2, 5))]))
            .unwrap_err();
        assert!(matches!(err, TableauError::SingularDenominator { .. }));
        let err = ParametricFamily::new(FamilyId::F43p2)
            .instantiate(&params(&[("gamma", q(1, 3)), ("alpha", z()), ("beta", z()), ("delta", q(7, 25))]))
            .unwrap_err();
        assert!(matches!(err, TableauError::ParameterOutOfRange { .. }));
    }

    #[test]
    fn zero_first_columns() {
        for name in [ASI_SSP_3P32, ASI_SSP_3P32_SD, ASI_SSP_3P3P2, ASI_SSP_4P42, ASI_SSP_4P42_ALT, ASI_SSP_5P43, ASI_SSP_5P53] {
            assert!(get_scheme(name).unwrap().zero_first_column(), "{name}");
        }
        for name in [ASI_SSP_432, ASI_SSP_43P2, ASI_SSP_643] {
            assert!(!get_scheme(name).unwrap().zero_first_column(), "{name}");
        }
    }

    #[test]
    fn negative_entry_of_4p42() {
        let report = validate(&get_scheme(ASI_SSP_4P42).unwrap());
        assert_eq!(report.negative_entries.len(), 1);
        let e = &report.negative_entries[0];
        assert_eq!((e.part, e.row, e.col), (Part::Implicit, 5, 4));
        assert!((e.value + 1.0 / 3.0).abs() < 1e-16);
        assert!(validate(&get_scheme(ASI_SSP_432).unwrap()).negative_entries.is_empty());
    }

    #[test]
    fn misprinted_3p3p2_entry_fails_row_sum() {
        let mut parts = get_scheme(ASI_SSP_3P3P2).unwrap().to_parts();
        parts.b[3][0] = Coef::exact(q(5, 3));
        let t = ButcherDoubleTableau::from_parts(parts).unwrap();
        let report = validate(&t);
        let check = report.check(crate::tableau::CHECK_EXPLICIT_ROW_SUMS).unwrap();
        assert!(!check.passed);
        assert!((check.residual - 16.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn decimal_scheme_keeps_all_digits() {
        let t = get_scheme(ASI_SSP_5P53).unwrap();
        assert_eq!(t.a_matrix()[3][2].literal(), Some("-0.40109045321498277"));
        let back = ButcherDoubleTableau::from_json(&t.to_json().unwrap()).unwrap();
        assert!(same_entries(&t, &back));
    }

    #[test]
    fn json_round_trip_with_surds() {
        let t = get_scheme(ASI_SSP_43P2).unwrap();
        let json = t.to_json().unwrap();
        assert!(json.contains("sqrt(5)"));
        let back = ButcherDoubleTableau::from_json(&json).unwrap();
        assert!(same_entries(&t, &back));
        assert!(back.is_asi());
    }
}
