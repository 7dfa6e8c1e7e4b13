//! The `reproduce-all` table: every published numeric claim that the
//! library can check, followed by the convergence figures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;
use asi_imex::catalog::*;
use asi_imex::experiments::{median_ridge_distance, ridge_locus, write_figure, FigureId, SweepCache, SweepConfig};
use asi_imex::monotonicity::{radius_r1, ssp_radius_single, RkTableau};
use asi_imex::order::{check_order, DEFAULT_ORDER_TOL};
use asi_imex::stability::{explicit_region, imaginary_axis_intersection, imex_region, Mode, Window, DEFAULT_RESOLUTION};
use asi_imex::tableau::DECIMAL_ROW_SUM_TOL;
use asi_imex::validate;
use serde::Serialize;

#[derive(Debug, Serialize)]
struct Line {
    group: &'static str,
    check: String,
    value: f64,
    target: String,
    passed: bool,
}

#[derive(Default)]
struct Table {
    lines: Vec<Line>,
}

impl Table {
    fn push(&mut self, group: &'static str, check: impl Into<String>, value: f64, target: impl Into<String>, passed: bool) {
        let line = Line {
            group,
            check: check.into(),
            value,
            target: target.into(),
            passed,
        };
        println!(
            "{} {:<14} {:<44} {:>24.16e}  {}",
            if line.passed { "PASS" } else { "FAIL" },
            line.group,
            line.check,
            line.value,
            line.target
        );
        self.lines.push(line);
    }

    fn within(&mut self, group: &'static str, check: impl Into<String>, value: f64, target: f64, rel: f64) {
        let ok = ((value - target) / target).abs() <= rel;
        self.push(group, check, value, format!("{target} ± {}%", rel * 100.0), ok);
    }
}

fn tableaux(t: &mut Table) -> Result<()> {
    for name in CATALOG {
        let s = get_scheme(name)?;
        let r = validate(&s);
        let worst = r.checks.iter().map(|c| c.residual).fold(0.0, f64::max);
        let ok = r.passed() && (worst == 0.0 || (s.has_decimal_entries() && worst <= DECIMAL_ROW_SUM_TOL));
        t.push("tableau", format!("{name} structure and row sums"), worst, "0 (exact)", ok);
        if let Some((family, values)) = catalog_parameters(name) {
            let rebuilt = ParametricFamily::new(family).instantiate(&values)?;
            let same = rebuilt.a_matrix() == s.a_matrix() && rebuilt.b_matrix() == s.b_matrix();
            t.push("tableau", format!("{name} from family {}", family.label()), f64::from(u8::from(same)), "1 (identical)", same);
        }
    }
    Ok(())
}

fn orders(t: &mut Table) -> Result<()> {
    for name in CATALOG {
        let s = get_scheme(name)?;
        let tol = if s.has_decimal_entries() { 1e-9 } else { DEFAULT_ORDER_TOL };
        let r = check_order(&s, tol);
        let p = s.design_order();
        let worst = r.max_residual[..usize::from(p)].iter().copied().fold(0.0, f64::max);
        t.push("order", format!("{name} attains order {p}"), worst, format!("≤ {tol:e}"), r.attained_order >= p);
        if p == 2 {
            t.push("order", format!("{name} fails order 3"), r.max_residual[2], "≥ 1e-3", r.max_residual[2] >= 1e-3);
        }
    }
    Ok(())
}

fn monotonicity(t: &mut Table) -> Result<()> {
    let anchor = 2.0 * (5f64.sqrt() - 1.0);
    let r = radius_r1(&get_scheme(ASI_SSP_432)?, 0.0, 100.0, 1e-8).radius;
    t.push("monotonicity", "radius r1 of ASI-SSP(4,3,2)", r, "2(√5−1) ± 1e-4", (r - anchor).abs() <= 1e-4);
    let ssp32 = ssp_radius_single(&RkTableau::explicit_of(&get_scheme(SSP32_EXPLICIT)?), 10.0, 1e-9).radius;
    t.push("monotonicity", "SSP radius of explicit SSP(3,2)", ssp32, "2 ± 1e-4", (ssp32 - 2.0).abs() <= 1e-4);
    let euler = ssp_radius_single(&RkTableau::explicit_of(&get_scheme(EXPLICIT_EULER)?), 10.0, 1e-9).radius;
    t.push("monotonicity", "SSP radius of explicit Euler", euler, "1 ± 1e-6", (euler - 1.0).abs() <= 1e-6);
    Ok(())
}

fn stability(t: &mut Table) -> Result<()> {
    let w = Window::default();
    let explicit = [
        ("SSP(3,2)", ASI_SSP_432, 16.05),
        ("SSP(4,2)", ASI_SSP_4P42, 32.26),
        ("SSP(4,3)", ASI_SSP_643, 19.61),
        ("SSP(5,3)", ASI_SSP_5P53, 33.49),
        ("SSP(3',2)", ASI_SSP_43P2, 10.70),
    ];
    for (label, name, target) in explicit {
        let r = explicit_region(&get_scheme(name)?, w, DEFAULT_RESOLUTION)?;
        t.within("explicit area", label, r.area, target, 0.02);
    }
    let imex = [
        (ASI_SSP_432, 14.57),
        (ASI_SSP_3P32_SD, 11.54),
        (ASI_SSP_3P32, 12.80),
        (ASI_SSP_43P2, 10.70),
        (ASI_SSP_3P3P2, 8.77),
        (ASI_SSP_4P42, 27.84),
        (ASI_SSP_4P42_ALT, 27.86),
        (ASI_SSP_643_AREA, 18.34),
        (ASI_SSP_643, 3.98),
        (ASI_SSP_5P43, 14.22),
        (ASI_SSP_5P53, 17.96),
    ];
    for (name, target) in imex {
        let r = imex_region(&get_scheme(name)?, w, DEFAULT_RESOLUTION, None)?;
        t.within("IMEX area", name, r.area, target, 0.05);
    }
    let axis = |name: &str| -> Result<f64> { Ok(imaginary_axis_intersection(&get_scheme(name)?, Mode::Imex, 10.0, 1e-6)) };
    let y = axis(ASI_SSP_643)?;
    t.push("imaginary axis", ASI_SSP_643, y, "> 1.1", y > 1.1);
    let y = axis(ASI_SSP_43P2)?;
    t.push("imaginary axis", ASI_SSP_43P2, y, "> 0", y > 0.0);
    for name in [ASI_SSP_432, ASI_SSP_3P32, ASI_SSP_3P32_SD, ASI_SSP_3P3P2, ASI_SSP_4P42, ASI_SSP_4P42_ALT] {
        let y = axis(name)?;
        t.push("imaginary axis", name, y, "0", y <= 1e-6);
    }
    Ok(())
}

fn figures(t: &mut Table, cfg: &SweepConfig, out: &Path) -> Result<()> {
    let schemes: Vec<_> = FIGURE_SCHEMES.iter().map(|n| get_scheme(n)).collect::<Result<_, _>>()?;
    let cache = SweepCache::default();
    for fig in FigureId::ALL {
        let mut reports = Vec::new();
        for s in &schemes {
            reports.push((*cache.get_or_run(s, fig.problem(), cfg)?).clone());
        }
        write_figure(fig, &reports, out)?;
        if fig == FigureId::Fig2 {
            continue;
        }
        for r in &reports {
            let p = f64::from(r.design_order);
            let label = format!("{} {}", fig.label(), r.scheme);
            if let Some(zero) = r.eps.iter().position(|&e| e == 0.0) {
                let worst = r.rates[zero].fits.iter().map(|f| f.rate).fold(f64::INFINITY, f64::min);
                t.push("convergence", format!("{label} rate at ε = 0"), worst, format!("≥ {}", p - 0.3), worst >= p - 0.3);
            }
            let nonstiff = r
                .rates
                .iter()
                .filter(|row| row.eps >= 1e-1)
                .flat_map(|row| row.fits.iter().map(|f| f.rate))
                .fold(f64::INFINITY, f64::min);
            t.push("convergence", format!("{label} rate at ε ≥ 0.1"), nonstiff, format!("≥ {}", p - 0.3), nonstiff >= p - 0.3);
            let failures = r.failures().count();
            t.push("convergence", format!("{label} failed cells"), failures as f64, "0", failures == 0);
        }
        if fig == FigureId::Fig4 {
            let r = &reports[0];
            let m = median_ridge_distance(&ridge_locus(r, 1), 1e-5, 1e-2).unwrap_or(f64::NAN);
            t.push("ridge", format!("{} {} median distance", fig.label(), r.scheme), m, "≤ 1", m <= 1.0);
        }
        let floor = reports.iter().map(|r| r.min_error()).fold(f64::INFINITY, f64::min);
        t.push("error floor", format!("{} minimum E", fig.label()), floor, "[1e-13, 1e-9]", (1e-13..=1e-9).contains(&floor));
    }
    Ok(())
}

/// Prints and writes the table; `Ok(false)` when any check fails.
pub fn run(cfg: &SweepConfig, out: &Path, sweeps: bool) -> Result<bool> {
    let mut t = Table::default();
    tableaux(&mut t)?;
    orders(&mut t)?;
    monotonicity(&mut t)?;
    stability(&mut t)?;
    if sweeps {
        figures(&mut t, cfg, out)?;
    }
    let mut text = String::new();
    for l in &t.lines {
        writeln!(
            text,
            "{}\t{}\t{}\t{:.16e}\t{}",
            if l.passed { "PASS" } else { "FAIL" },
            l.group,
            l.check,
            l.value,
            l.target
        )?;
    }
    fs::write(out.join("reproduce.tsv"), text)?;
    fs::write(out.join("reproduce.json"), serde_json::to_string_pretty(&t.lines)? + "\n")?;
    let failed = t.lines.iter().filter(|l| !l.passed).count();
    println!("{} checks, {failed} failed", t.lines.len());
    Ok(failed == 0)
}
