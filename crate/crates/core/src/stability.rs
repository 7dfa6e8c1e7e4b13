//! Linear stability of IMEX schemes on `U' = λ_I U + λ_E U`.
//!
//! With `z_I = Δt λ_I`, `z_E = Δt λ_E` one step multiplies `U` by
//!
//! ```text
//! ASI:       R = e_sᵀ (I − z_I A − z_E B)⁻¹ 1
//! standard:  R = 1 + (z_I wᵀ + z_E ωᵀ)(I − z_I A − z_E B)⁻¹ 1
//! ```
//!
//! A z_E point is IMEX-stable when `|R(z_I, z_E)| ≤ 1` for every sampled
//! z_I. The default samples cover the imaginary axis on both sides, the
//! negative real axis, and a −∞ proxy, so the criterion approximates
//! stability for the whole closed left half-plane of z_I.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::contour::marching_squares;
use crate::linalg::forward_substitute_complex;
use crate::tableau::{ButcherDoubleTableau, NumericTableau};

/// Slack on `|R| ≤ 1` for round-off in the rational evaluation.
pub const STABILITY_SLACK: f64 = 1e-13;
pub const MINUS_INFINITY_PROXY: f64 = -1e8;
pub const DEFAULT_RESOLUTION: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("I − z_I A − z_E B is singular at z_I = {zi}, z_E = {ze}")]
    Singular { zi: Complex64, ze: Complex64 },
    #[error("invalid window: {0}")]
    Window(String),
    #[error("resolution must be at least 2")]
    Resolution,
    #[error("z_I sample set must be non-empty and contain 0")]
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            re_min: -10.0,
            re_max: 4.0,
            im_min: -10.0,
            im_max: 10.0,
        }
    }
}

impl Window {
    pub fn check(&self) -> Result<(), StabilityError> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|x| x.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.im_max {
            return Err(StabilityError::Window(format!("{self:?}")));
        }
        if self.re_min > 0.0 || self.re_max < 0.0 || self.im_min > 0.0 || self.im_max < 0.0 {
            return Err(StabilityError::Window("window must contain the origin".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Explicit,
    Imex,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Explicit => "explicit",
            Mode::Imex => "imex",
        }
    }
}

fn logspace(lo_exp: f64, hi_exp: f64, per_decade: usize) -> impl Iterator<Item = f64> {
    let n = ((hi_exp - lo_exp) * per_decade as f64).round() as usize;
    (0..=n).map(move |k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / n as f64))
}

/// `0`, `−10⁻³ … −10⁶` (4 per decade) and the −∞ proxy.
pub fn real_axis_samples() -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    out.extend(logspace(-3.0, 6.0, 4).map(|x| Complex64::new(-x, 0.0)));
    out.push(Complex64::new(MINUS_INFINITY_PROXY, 0.0));
    out
}

/// The real-axis samples plus `±i·10⁻³ … ±i·10⁵` (10 per decade).
pub fn default_imex_samples() -> Vec<Complex64> {
    let mut out = real_axis_samples();
    for y in logspace(-3.0, 5.0, 10) {
        out.push(Complex64::new(0.0, y));
        out.push(Complex64::new(0.0, -y));
    }
    out
}

fn assembly_weights(tab: &NumericTableau) -> Option<(&[f64], &[f64])> {
    (!tab.is_asi).then(|| (tab.w.as_slice(), tab.omega.as_slice()))
}

/// Stability function at one point.
pub fn amplification(t: &ButcherDoubleTableau, zi: Complex64, ze: Complex64) -> Result<Complex64, StabilityError> {
    let tab = t.numeric();
    let s = tab.stages;
    let one = Complex64::new(1.0, 0.0);
    let entry = |i: usize, j: usize| {
        let id = if i == j { one } else { Complex64::new(0.0, 0.0) };
        id - zi * tab.a(i, j) - ze * tab.b(i, j)
    };
    let rhs = vec![one; s];
    let mut x = vec![Complex64::new(0.0, 0.0); s];
    forward_substitute_complex(s, entry, &rhs, &mut x).map_err(|_| StabilityError::Singular { zi, ze })?;
    let r = match assembly_weights(tab) {
        None => x[s - 1],
        Some((w, omega)) => {
            one + x
                .iter()
                .zip(w.iter().zip(omega))
                .map(|(xi, (&wi, &oi))| (zi * wi + ze * oi) * xi)
                .sum::<Complex64>()
        }
    };
    if !(r.re.is_finite() && r.im.is_finite()) {
        return Err(StabilityError::Singular { zi, ze });
    }
    Ok(r)
}

/// For fixed z_I the stability function is a polynomial in z_E, because
/// `(I − z_I A)⁻¹ B` is nilpotent. Coefficients in increasing degree.
pub fn polynomial_in_ze(t: &ButcherDoubleTableau, zi: Complex64) -> Result<Vec<Complex64>, StabilityError> {
    let tab = t.numeric();
    let s = tab.stages;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let entry = |i: usize, j: usize| {
        let id = if i == j { one } else { zero };
        id - zi * tab.a(i, j)
    };
    let singular = || StabilityError::Singular { zi, ze: zero };
    let mut vs: Vec<Vec<Complex64>> = Vec::with_capacity(s);
    let mut v = vec![zero; s];
    forward_substitute_complex(s, entry, &vec![one; s], &mut v).map_err(|_| singular())?;
    vs.push(v);
    for _ in 1..s {
        let prev = vs.last().unwrap();
        let bv: Vec<Complex64> = (0..s).map(|i| (0..i).map(|j| prev[j] * tab.b(i, j)).sum()).collect();
        let mut next = vec![zero; s];
        forward_substitute_complex(s, entry, &bv, &mut next).map_err(|_| singular())?;
        vs.push(next);
    }
    let coeffs = match assembly_weights(tab) {
        None => vs.iter().map(|v| v[s - 1]).collect(),
        Some((w, omega)) => {
            let dot = |u: &[f64], v: &[Complex64]| u.iter().zip(v).map(|(a, b)| b * *a).sum::<Complex64>();
            let mut c = Vec::with_capacity(s + 1);
            c.push(one + zi * dot(w, &vs[0]));
            for k in 1..=s {
                let implicit = if k < s { zi * dot(w, &vs[k]) } else { zero };
                c.push(implicit + dot(omega, &vs[k - 1]));
            }
            c
        }
    };
    let coeffs: Vec<Complex64> = coeffs;
    if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(singular());
    }
    Ok(coeffs)
}

fn horner(c: &[Complex64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ck| acc * z + ck)
}

/// Precomputed stability test over a fixed z_I sample set.
#[derive(Debug, Clone)]
pub struct Criterion {
    polys: Vec<Vec<Complex64>>,
    /// Some sampled z_I hit a pole; every z_E is then unstable.
    singular: bool,
}

impl Criterion {
    pub fn new(t: &ButcherDoubleTableau, zi_samples: &[Complex64]) -> Result<Self, StabilityError> {
        if zi_samples.is_empty() || !zi_samples.iter().any(|z| *z == Complex64::new(0.0, 0.0)) {
            return Err(StabilityError::Samples);
        }
        // z_I = 0 first: it rejects most unstable points.
        let mut ordered: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
        ordered.extend(zi_samples.iter().copied().filter(|z| *z != Complex64::new(0.0, 0.0)));
        let mut polys = Vec::with_capacity(ordered.len());
        let mut singular = false;
        for zi in ordered {
            match polynomial_in_ze(t, zi) {
                Ok(p) => polys.push(p),
                Err(_) => singular = true,
            }
        }
        Ok(Criterion { polys, singular })
    }

    pub fn for_mode(t: &ButcherDoubleTableau, mode: Mode) -> Self {
        let samples = match mode {
            Mode::Explicit => vec![Complex64::new(0.0, 0.0)],
            Mode::Imex => default_imex_samples(),
        };
        Criterion::new(t, &samples).expect("default samples contain 0")
    }

    pub fn is_stable(&self, ze: Complex64) -> bool {
        !self.singular && self.polys.iter().all(|p| horner(p, ze).norm() <= 1.0 + STABILITY_SLACK)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionResult {
    pub scheme: String,
    pub mode: Mode,
    pub window: Window,
    /// Cells along the real and imaginary directions.
    pub resolution: (usize, usize),
    /// Row-major by imaginary index, cell centers.
    #[serde(skip)]
    pub stable: Vec<bool>,
    pub area: f64,
    #[serde(skip)]
    pub boundary: Vec<Vec<(f64, f64)>>,
    pub imaginary_axis_half_length: Option<f64>,
    pub touches_window: bool,
    pub warnings: Vec<String>,
}

impl RegionResult {
    pub fn cell_size(&self) -> (f64, f64) {
        let (nx, ny) = self.resolution;
        (
            (self.window.re_max - self.window.re_min) / nx as f64,
            (self.window.im_max - self.window.im_min) / ny as f64,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Complex64 {
        let (dx, dy) = self.cell_size();
        Complex64::new(
            self.window.re_min + (ix as f64 + 0.5) * dx,
            self.window.im_min + (iy as f64 + 0.5) * dy,
        )
    }

    pub fn is_stable_cell(&self, ix: usize, iy: usize) -> bool {
        self.stable[iy * self.resolution.0 + ix]
    }

    /// Cells whose mirror image under conjugation disagrees. Zero for real
    /// coefficients on a window symmetric about the real axis, up to ties
    /// on the stability boundary.
    pub fn conjugation_defects(&self) -> usize {
        let (nx, ny) = self.resolution;
        (0..ny / 2)
            .map(|iy| (0..nx).filter(|&ix| self.is_stable_cell(ix, iy) != self.is_stable_cell(ix, ny - 1 - iy)).count())
            .sum()
    }

    /// CSV with columns `re, im, stable`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im,stable")?;
        let (nx, ny) = self.resolution;
        for iy in 0..ny {
            for ix in 0..nx {
                let z = self.cell_center(ix, iy);
                writeln!(w, "{:.16e},{:.16e},{}", z.re, z.im, u8::from(self.is_stable_cell(ix, iy)))?;
            }
        }
        Ok(())
    }
}

/// Scans the window at `resolution × resolution` cells with an arbitrary
/// criterion.
pub fn scan_region(
    t: &ButcherDoubleTableau,
    mode: Mode,
    criterion: &Criterion,
    window: Window,
    resolution: usize,
) -> Result<RegionResult, StabilityError> {
    window.check()?;
    if resolution < 2 {
        return Err(StabilityError::Resolution);
    }
    let (nx, ny) = (resolution, resolution);
    let dx = (window.re_max - window.re_min) / nx as f64;
    let dy = (window.im_max - window.im_min) / ny as f64;
    let stable: Vec<bool> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let im = window.im_min + (iy as f64 + 0.5) * dy;
            (0..nx).map(move |ix| criterion.is_stable(Complex64::new(window.re_min + (ix as f64 + 0.5) * dx, im)))
        })
        .collect();
    let count = stable.iter().filter(|&&b| b).count();
    let touches_window = (0..nx).any(|ix| stable[ix] || stable[(ny - 1) * nx + ix])
        || (0..ny).any(|iy| stable[iy * nx] || stable[iy * nx + nx - 1]);
    let mut warnings = Vec::new();
    if touches_window {
        warnings.push("stable cells touch the window boundary; the area is a lower bound".to_string());
    }
    let boundary = marching_squares(&stable, nx, ny)
        .into_iter()
        .map(|line| {
            line.into_iter()
                // Contour coordinates are in cell-center units.
                .map(|(x, y)| (window.re_min + (x + 0.5) * dx, window.im_min + (y + 0.5) * dy))
                .collect()
        })
        .collect();
    Ok(RegionResult {
        scheme: t.name().to_string(),
        mode,
        window,
        resolution: (nx, ny),
        stable,
        area: count as f64 * dx * dy,
        boundary,
        imaginary_axis_half_length: None,
        touches_window,
        warnings,
    })
}

/// `|R(0, z_E)| ≤ 1`.
pub fn explicit_region(t: &ButcherDoubleTableau, window: Window, resolution: usize) -> Result<RegionResult, StabilityError> {
    scan_region(t, Mode::Explicit, &Criterion::for_mode(t, Mode::Explicit), window, resolution)
}

/// `|R(z_I, z_E)| ≤ 1` for every z_I in `zi_samples`
/// (default: [`default_imex_samples`]).
pub fn imex_region(
    t: &ButcherDoubleTableau,
    window: Window,
    resolution: usize,
    zi_samples: Option<&[Complex64]>,
) -> Result<RegionResult, StabilityError> {
    let criterion = match zi_samples {
        Some(s) => Criterion::new(t, s)?,
        None => Criterion::for_mode(t, Mode::Imex),
    };
    scan_region(t, Mode::Imex, &criterion, window, resolution)
}

pub const AXIS_SCAN_POINTS: usize = 4000;

/// Largest `y` such that every `i·y'`, `0 ≤ y' ≤ y`, is stable. The axis is
/// scanned at `y_max / 4000` spacing and the first transition bisected to
/// `tol`. Returns 0 when the first scan point is already unstable.
pub fn imaginary_axis_intersection_with(criterion: &Criterion, y_max: f64, tol: f64) -> f64 {
    let stable = |y: f64| criterion.is_stable(Complex64::new(0.0, y)) && criterion.is_stable(Complex64::new(0.0, -y));
    if !(y_max > 0.0 && tol > 0.0) || !stable(0.0) {
        return 0.0;
    }
    let h = y_max / AXIS_SCAN_POINTS as f64;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=AXIS_SCAN_POINTS {
        let y = k as f64 * h;
        if stable(y) {
            lo = y;
        } else {
            hi = Some(y);
            break;
        }
    }
    let Some(mut hi) = hi else {
        return y_max;
    };
    if lo == 0.0 {
        return 0.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn imaginary_axis_intersection(t: &ButcherDoubleTableau, mode: Mode, y_max: f64, tol: f64) -> f64 {
    imaginary_axis_intersection_with(&Criterion::for_mode(t, mode), y_max, tol)
}

/// Region scan plus the imaginary-axis half-length.
pub fn analyze(t: &ButcherDoubleTableau, mode: Mode, window: Window, resolution: usize) -> Result<RegionResult, StabilityError> {
    let criterion = Criterion::for_mode(t, mode);
    let mut r = scan_region(t, mode, &criterion, window, resolution)?;
    let y_max = window.im_max.max(-window.im_min);
    r.imaginary_axis_half_length = Some(imaginary_axis_intersection_with(&criterion, y_max, 1e-6));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn consistency_at_origin() {
        for name in CATALOG.iter().chain(BUILTINS.iter()) {
            let t = get_scheme(name).unwrap();
            let r = amplification(&t, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
            assert_relative_eq!(r.re, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn imex_euler_is_backward_euler_in_zi() {
        let t = get_scheme(EULER_IMEX).unwrap();
        let zi = c(-0.7, 1.3);
        let r = amplification(&t, zi, c(0.0, 0.0)).unwrap();
        assert!((r - 1.0 / (1.0 - zi)).norm() < 1e-15);
        assert!(matches!(amplification(&t, c(1.0, 0.0), c(0.0, 0.0)), Err(StabilityError::Singular { .. })));
    }

    #[test]
    fn vanishes_at_minus_infinity() {
        for name in CATALOG {
            let t = get_scheme(name).unwrap();
            let r = amplification(&t, c(MINUS_INFINITY_PROXY, 0.0), c(0.0, 0.0)).unwrap();
            assert!(r.norm() <= 1e-6, "{name}: {r}");
        }
    }

    #[test]
    fn polynomial_matches_direct_evaluation() {
        for name in CATALOG.iter().chain([EULER_IMEX].iter()) {
            let t = get_scheme(name).unwrap();
            for zi in [c(0.0, 0.0), c(-3.0, 0.5), c(0.0, -20.0)] {
                let p = polynomial_in_ze(&t, zi).unwrap();
                for ze in [c(-1.0, 2.0), c(0.3, -0.4)] {
                    let direct = amplification(&t, zi, ze).unwrap();
                    assert!((horner(&p, ze) - direct).norm() < 1e-12 * direct.norm().max(1.0), "{name}");
                }
            }
        }
    }

    #[test]
    fn explicit_euler_disk() {
        let t = get_scheme(EXPLICIT_EULER).unwrap();
        let r = explicit_region(&t, Window::default(), 400).unwrap();
        assert_relative_eq!(r.area, std::f64::consts::PI, max_relative = 0.01);
        assert!(!r.touches_window);
        assert_eq!(r.conjugation_defects(), 0);
        assert_eq!(imaginary_axis_intersection(&t, Mode::Explicit, 10.0, 1e-6), 0.0);
    }

    #[test]
    fn imex_region_is_inside_explicit_region() {
        let t = get_scheme(ASI_SSP_432).unwrap();
        let e = explicit_region(&t, Window::default(), 200).unwrap();
        let i = imex_region(&t, Window::default(), 200, None).unwrap();
        assert!(i.area <= e.area);
        assert!(e.stable.iter().zip(&i.stable).all(|(&e, &i)| e || !i));
        let few = imex_region(&t, Window::default(), 200, Some(&real_axis_samples())).unwrap();
        assert!(i.area <= few.area);
    }

    #[test]
    fn boundary_touch_is_flagged() {
        let t = get_scheme(EXPLICIT_EULER).unwrap();
        let w = Window {
            re_min: -1.5,
            re_max: 0.5,
            im_min: -0.5,
            im_max: 0.5,
        };
        let r = explicit_region(&t, w, 50).unwrap();
        assert!(r.touches_window);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = get_scheme(EXPLICIT_EULER).unwrap();
        let w = Window {
            re_min: 1.0,
            re_max: 2.0,
            im_min: -1.0,
            im_max: 1.0,
        };
        assert!(explicit_region(&t, w, 10).is_err());
        assert!(explicit_region(&t, Window::default(), 1).is_err());
        assert_eq!(Criterion::new(&t, &[c(-1.0, 0.0)]).unwrap_err(), StabilityError::Samples);
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let t = get_scheme(EXPLICIT_EULER).unwrap();
        let r = explicit_region(&t, Window::default(), 8).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 65);
    }
}
