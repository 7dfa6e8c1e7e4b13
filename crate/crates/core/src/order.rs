//! Additive Runge-Kutta order conditions up to order three.
//!
//! With weights `u ∈ {w, ω}`, abscissae `v, v' ∈ {c, d}` and coefficient
//! matrices `M ∈ {A, B}` the full coupled set is
//!
//! ```text
//! order 1:  u·e       = 1
//! order 2:  u·v       = 1/2
//! order 3:  u·(v∘v')  = 1/3      u·(M v) = 1/6
//! ```
//!
//! Conditions mixing implicit and explicit data are tagged as coupling
//! conditions; the remaining ones are the classical conditions of each
//! part on its own.

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::exact::Surd;
use crate::experiments::fit_rate;
use crate::integrator::{integrate, IntegrationError, PartitionedProblem, StepperConfig};
use crate::tableau::ButcherDoubleTableau;

pub const DEFAULT_ORDER_TOL: f64 = 1e-10;
/// Minimum R² of the log-log fit in [`empirical_order`].
pub const EMPIRICAL_R2: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    /// Only `w`, `A`, `c`.
    Implicit,
    /// Only `ω`, `B`, `d`.
    Explicit,
    /// Mixes data of both parts.
    Coupling,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRecord {
    pub label: String,
    pub order: u8,
    pub kind: ConditionKind,
    pub target: f64,
    pub computed: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    pub scheme: String,
    pub tolerance: f64,
    pub conditions: Vec<ConditionRecord>,
    /// Max residual for orders 1, 2, 3.
    pub max_residual: [f64; 3],
    /// Largest p such that every condition of order ≤ p is below tolerance.
    pub attained_order: u8,
    /// Same, ignoring coupling conditions.
    pub attained_order_uncoupled: u8,
}

impl OrderReport {
    pub fn failing(&self) -> impl Iterator<Item = &ConditionRecord> {
        self.conditions.iter().filter(move |c| c.residual > self.tolerance)
    }

    pub fn condition(&self, label: &str) -> Option<&ConditionRecord> {
        self.conditions.iter().find(|c| c.label == label)
    }
}

fn dot(u: &[Surd], v: &[Surd]) -> Surd {
    u.iter().zip(v).fold(Surd::zero(), |acc, (x, y)| &acc + &(x * y))
}

fn hadamard(u: &[Surd], v: &[Surd]) -> Vec<Surd> {
    u.iter().zip(v).map(|(x, y)| x * y).collect()
}

fn mat_vec(m: &[Vec<Surd>], v: &[Surd]) -> Vec<Surd> {
    m.iter().map(|row| dot(row, v)).collect()
}

struct Data {
    name: &'static str,
    implicit: bool,
    vec: Vec<Surd>,
}

/// Evaluates every condition exactly and reports `f64` residuals.
pub fn check_order(t: &ButcherDoubleTableau, tol: f64) -> OrderReport {
    let vals = |v: &[crate::Coef]| v.iter().map(|x| x.value().clone()).collect::<Vec<_>>();
    let mat = |m: &[Vec<crate::Coef>]| m.iter().map(|r| vals(r)).collect::<Vec<_>>();
    let (w, omega) = t.effective_weights();
    let c = vals(t.c());
    let d = vals(t.d());
    let a = mat(t.a_matrix());
    let b = mat(t.b_matrix());
    let e = vec![Surd::from_int(1); t.stages()];

    let weights = [
        Data { name: "w", implicit: true, vec: w },
        Data { name: "ω", implicit: false, vec: omega },
    ];
    let abscissae = [
        Data { name: "c", implicit: true, vec: c },
        Data { name: "d", implicit: false, vec: d },
    ];
    let matrices = [("A", true, &a), ("B", false, &b)];

    let kind = |flags: &[bool]| {
        if flags.iter().all(|&f| f) {
            ConditionKind::Implicit
        } else if flags.iter().all(|&f| !f) {
            ConditionKind::Explicit
        } else {
            ConditionKind::Coupling
        }
    };

    let mut conditions = Vec::new();
    let mut push = |label: String, order: u8, kind: ConditionKind, target: Surd, value: Surd| {
        let residual = (&value - &target).abs().to_f64();
        conditions.push(ConditionRecord {
            label,
            order,
            kind,
            target: target.to_f64(),
            computed: value.to_f64(),
            residual,
        });
    };

    for u in &weights {
        push(format!("{}·e = 1", u.name), 1, kind(&[u.implicit]), Surd::from_int(1), dot(&u.vec, &e));
    }
    for u in &weights {
        for v in &abscissae {
            push(
                format!("{}·{} = 1/2", u.name, v.name),
                2,
                kind(&[u.implicit, v.implicit]),
                Surd::from_ratio(1, 2),
                dot(&u.vec, &v.vec),
            );
        }
    }
    for u in &weights {
        for (i, v) in abscissae.iter().enumerate() {
            for v2 in &abscissae[i..] {
                push(
                    format!("{}·({}∘{}) = 1/3", u.name, v.name, v2.name),
                    3,
                    kind(&[u.implicit, v.implicit, v2.implicit]),
                    Surd::from_ratio(1, 3),
                    dot(&u.vec, &hadamard(&v.vec, &v2.vec)),
                );
            }
        }
        for (m_name, m_implicit, m) in &matrices {
            for v in &abscissae {
                push(
                    format!("{}·({}{}) = 1/6", u.name, m_name, v.name),
                    3,
                    kind(&[u.implicit, *m_implicit, v.implicit]),
                    Surd::from_ratio(1, 6),
                    dot(&u.vec, &mat_vec(m, &v.vec)),
                );
            }
        }
    }

    let mut max_residual = [0.0f64; 3];
    for r in &conditions {
        let slot = &mut max_residual[(r.order - 1) as usize];
        *slot = slot.max(r.residual);
    }
    let attained = |include: &dyn Fn(&ConditionRecord) -> bool| -> u8 {
        let mut p = 0;
        for order in 1..=3u8 {
            if conditions
                .iter()
                .filter(|r| r.order == order && include(r))
                .all(|r| r.residual <= tol)
            {
                p = order;
            } else {
                break;
            }
        }
        p
    };
    let attained_order = attained(&|_| true);
    let attained_order_uncoupled = attained(&|r| r.kind != ConditionKind::Coupling);

    OrderReport {
        scheme: t.name().to_string(),
        tolerance: tol,
        conditions,
        max_residual,
        attained_order,
        attained_order_uncoupled,
    }
}

#[derive(Debug, Error)]
pub enum EmpiricalOrderError {
    #[error("fit did not converge: R² = {r_squared:.4} with slope {slope:.3}")]
    NonConvergentFit { slope: f64, r_squared: f64 },
    #[error("need at least three positive step sizes")]
    Steps,
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalOrder {
    pub slope: f64,
    pub r_squared: f64,
    pub dts: Vec<f64>,
    /// Max-norm error at `t_end` against the reference run.
    pub errors: Vec<f64>,
}

/// Slope of log error against log Δt at `t_end`. The reference is the same
/// scheme at a 64th of the smallest step.
pub fn empirical_order(
    t: &ButcherDoubleTableau,
    p: &PartitionedProblem,
    u0: &[f64],
    t_end: f64,
    dts: &[f64],
    cfg: &StepperConfig,
) -> Result<EmpiricalOrder, EmpiricalOrderError> {
    if dts.len() < 3 || dts.iter().any(|&h| !(h > 0.0)) {
        return Err(EmpiricalOrderError::Steps);
    }
    let h_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = integrate(t, p, u0, h_min / 64.0, t_end, cfg)?;
    let exact = reference.last().to_vec();
    let mut errors = Vec::with_capacity(dts.len());
    for &h in dts {
        let run = integrate(t, p, u0, h, t_end, cfg)?;
        let e = run.last().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errors.push(e);
    }
    let pts: Vec<(f64, f64)> = dts.iter().copied().zip(errors.iter().copied()).collect();
    let fit = fit_rate(&pts, EMPIRICAL_R2);
    if !fit.well_defined {
        return Err(EmpiricalOrderError::NonConvergentFit {
            slope: fit.rate,
            r_squared: fit.r_squared,
        });
    }
    Ok(EmpiricalOrder {
        slope: fit.rate,
        r_squared: fit.r_squared,
        dts: dts.to_vec(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    #[test]
    fn condition_count() {
        let r = check_order(&get_scheme(ASI_SSP_432).unwrap(), DEFAULT_ORDER_TOL);
        // 2 + 4 + 2·(3 + 4)
        assert_eq!(r.conditions.len(), 20);
        assert_eq!(r.conditions.iter().filter(|c| c.kind == ConditionKind::Coupling).count(), 2 + 2 * 2 + 2 * 3);
    }

    #[test]
    fn dot_products_of_432() {
        let r = check_order(&get_scheme(ASI_SSP_432).unwrap(), DEFAULT_ORDER_TOL);
        assert_eq!(r.condition("w·c = 1/2").unwrap().computed, 0.5);
        assert_eq!(r.condition("ω·d = 1/2").unwrap().computed, 0.5);
        assert!(r.attained_order >= 2);
    }

    #[test]
    fn order_two_of_43p2_is_exact() {
        let r = check_order(&get_scheme(ASI_SSP_43P2).unwrap(), DEFAULT_ORDER_TOL);
        for label in ["w·c = 1/2", "w·d = 1/2", "ω·c = 1/2", "ω·d = 1/2"] {
            assert_eq!(r.condition(label).unwrap().residual, 0.0, "{label}");
        }
    }

    #[test]
    fn imex_euler_is_first_order() {
        let r = check_order(&get_scheme(EULER_IMEX).unwrap(), DEFAULT_ORDER_TOL);
        assert_eq!(r.max_residual[0], 0.0);
        assert_eq!(r.condition("w·c = 1/2").unwrap().computed, 1.0);
        assert_eq!(r.attained_order, 1);
    }

    #[test]
    fn second_order_families_hold_off_the_catalog_points() {
        use std::collections::BTreeMap;
        let q = Surd::from_ratio;
        let cases: Vec<(FamilyId, Vec<(&str, Surd)>)> = vec![
            (FamilyId::F432, vec![("gamma", q(1, 3)), ("alpha", q(2, 7)), ("beta", q(1, 5))]),
            (FamilyId::F3p32, vec![("alpha", q(3, 11)), ("beta", q(5, 9))]),
            (FamilyId::F43p2, vec![("gamma", q(1, 4)), ("alpha", q(1, 7)), ("beta", q(1, 9)), ("delta", q(3, 10))]),
            (FamilyId::F3p3p2, vec![("delta", q(3, 10))]),
            (FamilyId::F4p42, vec![("alpha", q(2, 3)), ("beta", q(3, 7))]),
        ];
        for (family, p) in cases {
            let values: BTreeMap<String, Surd> = p.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            let t = ParametricFamily::new(family).instantiate(&values).unwrap();
            let r = check_order(&t, DEFAULT_ORDER_TOL);
            assert_eq!(r.attained_order, 2, "{}", family.label());
            assert_eq!(r.max_residual[1], 0.0, "{}", family.label());
        }
        for (family, p) in [
            (FamilyId::F643, vec![("alpha", q(1, 9)), ("beta", q(2, 5))]),
            (FamilyId::F5p43, vec![("alpha", q(7, 4))]),
        ] {
            let values: BTreeMap<String, Surd> = p.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            let t = ParametricFamily::new(family).instantiate(&values).unwrap();
            assert_eq!(check_order(&t, DEFAULT_ORDER_TOL).attained_order, 3, "{}", family.label());
        }
    }

    #[test]
    fn coupling_failure_is_reported_separately() {
        // Swap the explicit part of 432 for the SSP(3',2) one: each part stays
        // second order on its own while the coupling conditions break.
        let mut parts = get_scheme(ASI_SSP_432).unwrap().to_parts();
        let other = get_scheme(ASI_SSP_43P2).unwrap();
        parts.b = other.b_matrix().to_vec();
        parts.d = other.d().to_vec();
        let t = crate::ButcherDoubleTableau::from_parts(parts).unwrap();
        let r = check_order(&t, DEFAULT_ORDER_TOL);
        assert_eq!(r.attained_order_uncoupled, 2);
        assert_eq!(r.attained_order, 1);
        assert!(r.failing().all(|c| c.kind == ConditionKind::Coupling || c.order == 3));
    }

    fn pareschi_slope(name: &str) -> f64 {
        use crate::experiments::{logspace, InitialCondition, ProblemId, TestProblem};
        let tp = TestProblem::new(ProblemId::Pareschi, InitialCondition::Equilibrium);
        let p = tp.partitioned(1.0).unwrap();
        let dts = logspace(1e-2, 1e-1, 4);
        let r = empirical_order(&get_scheme(name).unwrap(), &p, &tp.initial_state(), 1.0, &dts, &StepperConfig::default()).unwrap();
        assert!(r.errors.windows(2).all(|w| w[0] < w[1]), "{:?}", r.errors);
        r.slope
    }

    #[test]
    fn empirical_order_matches_design() {
        assert!((pareschi_slope(ASI_SSP_432) - 2.0).abs() < 0.3);
        assert!((pareschi_slope(ASI_SSP_643) - 3.0).abs() < 0.3);
    }

    #[test]
    fn empirical_order_rejects_bad_input() {
        use crate::experiments::{InitialCondition, ProblemId, TestProblem};
        let tp = TestProblem::new(ProblemId::Pareschi, InitialCondition::Equilibrium);
        let p = tp.partitioned(1.0).unwrap();
        let t = get_scheme(ASI_SSP_432).unwrap();
        let cfg = StepperConfig::default();
        assert!(matches!(
            empirical_order(&t, &p, &tp.initial_state(), 1.0, &[0.1, 0.05], &cfg),
            Err(EmpiricalOrderError::Steps)
        ));
        // Steps so small that round-off dominates; the line fit falls apart.
        let tiny = [1e-7, 1.1e-7, 1.2e-7, 1.3e-7];
        assert!(matches!(
            empirical_order(&t, &p, &tp.initial_state(), 1e-4, &tiny, &cfg),
            Err(EmpiricalOrderError::NonConvergentFit { .. })
        ));
    }
}
