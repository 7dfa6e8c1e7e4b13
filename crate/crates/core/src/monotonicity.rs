//! Absolute monotonicity of additive Runge-Kutta pairs and SSP radii of
//! single tableaux.
//!
//! For the pair (A, B) at `(r₁, r₂) ≥ 0`, with `M = I + r₁A + r₂B` built
//! from the extended tableaux (the weights appended as a final row when the
//! scheme has an assembly stage), the conditions are
//!
//! ```text
//! M invertible,  M⁻¹A ≥ 0,  M⁻¹B ≥ 0,  M⁻¹1 ≥ 0
//! ```
//!
//! componentwise. For a single tableau K the radius is the largest r with
//! `K(I + rK)⁻¹ ≥ 0` and `(I + rK)⁻¹1 ≥ 0`.

use serde::Serialize;

use crate::linalg::{lower_triangular_inverse, mat_mul};
use crate::tableau::ButcherDoubleTableau;

/// An entry counts as nonnegative down to this value.
pub const NONNEG_TOL: f64 = -1e-12;
pub const DEFAULT_RADIUS_TOL: f64 = 1e-6;
pub const DEFAULT_R_MAX: f64 = 100.0;
const RAY_SCAN_POINTS: usize = 512;

#[derive(Debug, Clone, Serialize)]
pub struct ConditionDiagnostic {
    pub condition: &'static str,
    /// Smallest entry and its 1-based position.
    pub worst_value: f64,
    pub worst_row: usize,
    pub worst_col: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityResult {
    pub r1: f64,
    pub r2: f64,
    pub monotonic: bool,
    pub singular: bool,
    pub conditions: Vec<ConditionDiagnostic>,
}

impl MonotonicityResult {
    pub fn worst(&self) -> Option<&ConditionDiagnostic> {
        self.conditions
            .iter()
            .min_by(|a, b| a.worst_value.total_cmp(&b.worst_value))
    }
}

/// Row-major square matrices of the extended pair.
fn extended_pair(t: &ButcherDoubleTableau) -> (usize, Vec<f64>, Vec<f64>) {
    let tab = t.numeric();
    let s = tab.stages;
    if tab.is_asi {
        return (s, tab.a.clone(), tab.b.clone());
    }
    let n = s + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n * n];
    for i in 0..s {
        for j in 0..s {
            a[i * n + j] = tab.a(i, j);
            b[i * n + j] = tab.b(i, j);
        }
    }
    for j in 0..s {
        a[s * n + j] = tab.w[j];
        b[s * n + j] = tab.omega[j];
    }
    (n, a, b)
}

fn diagnose(name: &'static str, m: &[f64], rows: usize, cols: usize) -> ConditionDiagnostic {
    let mut worst = (f64::INFINITY, 0, 0);
    for i in 0..rows {
        for j in 0..cols {
            let v = m[i * cols + j];
            if v < worst.0 || v.is_nan() {
                worst = (v, i + 1, j + 1);
            }
        }
    }
    ConditionDiagnostic {
        condition: name,
        worst_value: worst.0,
        worst_row: worst.1,
        worst_col: worst.2,
        passed: worst.0 >= NONNEG_TOL,
    }
}

fn ones_image(inv: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| inv[i * n..(i + 1) * n].iter().sum()).collect()
}

/// Point query in the absolute-monotonicity region of the pair.
pub fn is_abs_monotonic(t: &ButcherDoubleTableau, r1: f64, r2: f64) -> MonotonicityResult {
    let (n, a, b) = extended_pair(t);
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = f64::from(u8::from(i == j)) + r1 * a[i * n + j] + r2 * b[i * n + j];
        }
    }
    let Ok(inv) = lower_triangular_inverse(&m, n) else {
        return MonotonicityResult {
            r1,
            r2,
            monotonic: false,
            singular: true,
            conditions: Vec::new(),
        };
    };
    let conditions = vec![
        diagnose("M⁻¹A ≥ 0", &mat_mul(&inv, &a, n), n, n),
        diagnose("M⁻¹B ≥ 0", &mat_mul(&inv, &b, n), n, n),
        diagnose("M⁻¹1 ≥ 0", &ones_image(&inv, n), n, 1),
    ];
    MonotonicityResult {
        r1,
        r2,
        monotonic: conditions.iter().all(|c| c.passed),
        singular: false,
        conditions,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusResult {
    pub radius: f64,
    /// False when the ray already fails at its start; the radius is then 0.
    pub monotonic_at_origin: bool,
    /// The whole scanned ray `[0, r_max]` is monotonic.
    pub reached_r_max: bool,
    /// The coarse scan found monotonic points beyond the first failure.
    pub non_monotone_ray: bool,
}

/// Coarse scan for the first failure, then bisection to `tol`.
fn ray_radius(r_max: f64, tol: f64, ok: impl Fn(f64) -> bool) -> RadiusResult {
    if !ok(0.0) {
        return RadiusResult {
            radius: 0.0,
            monotonic_at_origin: false,
            reached_r_max: false,
            non_monotone_ray: false,
        };
    }
    let h = r_max / RAY_SCAN_POINTS as f64;
    let first_fail = (1..=RAY_SCAN_POINTS).find(|&k| !ok(k as f64 * h));
    let Some(k) = first_fail else {
        return RadiusResult {
            radius: r_max,
            monotonic_at_origin: true,
            reached_r_max: true,
            non_monotone_ray: false,
        };
    };
    let non_monotone_ray = (k + 1..=RAY_SCAN_POINTS).any(|j| ok(j as f64 * h));
    let (mut lo, mut hi) = ((k - 1) as f64 * h, k as f64 * h);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RadiusResult {
        radius: lo,
        monotonic_at_origin: true,
        reached_r_max: false,
        non_monotone_ray,
    }
}

/// Supremum of monotonic `r₁` on `[0, r_max]` at fixed `r₂`.
pub fn radius_r1(t: &ButcherDoubleTableau, r2: f64, r_max: f64, tol: f64) -> RadiusResult {
    ray_radius(r_max, tol, |r1| is_abs_monotonic(t, r1, r2).monotonic)
}

/// A single Runge-Kutta tableau `K` (row-major). The weights, if present,
/// form the extra row of the extended tableau; without weights the last
/// row of `K` is the output row.
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau {
    pub stages: usize,
    pub k: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl RkTableau {
    pub fn new(stages: usize, k: Vec<f64>, weights: Option<Vec<f64>>) -> Self {
        assert_eq!(k.len(), stages * stages);
        if let Some(w) = &weights {
            assert_eq!(w.len(), stages);
        }
        RkTableau { stages, k, weights }
    }

    pub fn explicit_of(t: &ButcherDoubleTableau) -> Self {
        let tab = t.numeric();
        RkTableau::new(tab.stages, tab.b.clone(), (!tab.is_asi).then(|| tab.omega.clone()))
    }

    pub fn implicit_of(t: &ButcherDoubleTableau) -> Self {
        let tab = t.numeric();
        RkTableau::new(tab.stages, tab.a.clone(), (!tab.is_asi).then(|| tab.w.clone()))
    }

    fn extended(&self) -> (usize, Vec<f64>) {
        let s = self.stages;
        match &self.weights {
            None => (s, self.k.clone()),
            Some(w) => {
                let n = s + 1;
                let mut k = vec![0.0; n * n];
                for i in 0..s {
                    k[i * n..i * n + s].copy_from_slice(&self.k[i * s..(i + 1) * s]);
                }
                k[s * n..s * n + s].copy_from_slice(w);
                (n, k)
            }
        }
    }

    /// Kraaijevanger conditions at `r`.
    pub fn is_monotonic_at(&self, r: f64) -> bool {
        let (n, k) = self.extended();
        let m: Vec<f64> = (0..n * n)
            .map(|idx| f64::from(u8::from(idx / n == idx % n)) + r * k[idx])
            .collect();
        let Ok(inv) = lower_triangular_inverse(&m, n) else {
            return false;
        };
        mat_mul(&k, &inv, n).iter().all(|&v| v >= NONNEG_TOL) && ones_image(&inv, n).iter().all(|&v| v >= NONNEG_TOL)
    }
}

/// SSP radius of a single tableau; 0 when no positive radius exists.
pub fn ssp_radius_single(k: &RkTableau, r_max: f64, tol: f64) -> RadiusResult {
    ray_radius(r_max, tol, |r| k.is_monotonic_at(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    #[test]
    fn origin_is_monotonic_for_nonnegative_tableaux() {
        for name in CATALOG.iter().chain(BUILTINS.iter()) {
            let t = get_scheme(name).unwrap();
            let nonnegative = crate::validate(&t).negative_entries.is_empty();
            assert_eq!(is_abs_monotonic(&t, 0.0, 0.0).monotonic, nonnegative, "{name}");
        }
    }

    #[test]
    fn negative_entry_is_diagnosed() {
        let r = is_abs_monotonic(&get_scheme(ASI_SSP_3P32_SD).unwrap(), 0.0, 0.0);
        assert!(!r.monotonic);
        let w = r.worst().unwrap();
        assert_eq!((w.condition, w.worst_row, w.worst_col, w.worst_value), ("M⁻¹A ≥ 0", 4, 3, -0.5));
        let rad = radius_r1(&get_scheme(ASI_SSP_3P32_SD).unwrap(), 0.0, 10.0, 1e-6);
        assert_eq!(rad.radius, 0.0);
        assert!(!rad.monotonic_at_origin);
    }

    #[test]
    fn singular_m_is_flagged() {
        // a_11 = 1/2 and r₁ = −2 make the first pivot vanish.
        let r = is_abs_monotonic(&get_scheme(BACKWARD_EULER_CHAIN).unwrap(), -2.0, 0.0);
        assert!(r.singular && !r.monotonic);
    }

    #[test]
    fn explicit_euler_radius_is_one() {
        let e = RkTableau::explicit_of(&get_scheme(EXPLICIT_EULER).unwrap());
        let r = ssp_radius_single(&e, 10.0, 1e-9);
        assert!((r.radius - 1.0).abs() < 1e-6);
        let standard = RkTableau::new(1, vec![0.0], Some(vec![1.0]));
        assert!((ssp_radius_single(&standard, 10.0, 1e-9).radius - 1.0).abs() < 1e-6);
    }

    #[test]
    fn radius_does_not_depend_on_r_max() {
        let t = get_scheme(ASI_SSP_432).unwrap();
        let a = radius_r1(&t, 0.0, 10.0, 1e-8).radius;
        let b = radius_r1(&t, 0.0, 20.0, 1e-8).radius;
        assert!((a - b).abs() < 2e-8);
    }
}
