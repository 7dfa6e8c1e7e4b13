//! Small dense solvers for stage systems and resolvent evaluations.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// Solves `a x = rhs` in place (Gaussian elimination, partial pivoting).
/// `a` is row-major `n×n` and is overwritten.
pub fn solve_in_place(a: &mut [f64], rhs: &mut [f64], n: usize) -> Result<(), Singular> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(rhs.len(), n);
    if n == 1 {
        if a[0] == 0.0 || !a[0].is_finite() {
            return Err(Singular);
        }
        rhs[0] /= a[0];
        return Ok(());
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Singular);
    }
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |best, x| if x.1 > best.1 { x } else { best });
        if pmax <= scale * 1e-300 {
            return Err(Singular);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            rhs.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * rhs[j];
        }
        rhs[k] = acc / a[k * n + k];
    }
    Ok(())
}

/// Forward substitution `L x = rhs` for a lower-triangular complex matrix
/// supplied through an entry callback.
pub fn forward_substitute_complex(
    n: usize,
    entry: impl Fn(usize, usize) -> Complex64,
    rhs: &[Complex64],
    out: &mut [Complex64],
) -> Result<(), Singular> {
    for i in 0..n {
        let mut acc = rhs[i];
        for j in 0..i {
            acc -= entry(i, j) * out[j];
        }
        let diag = entry(i, i);
        if diag == Complex64::new(0.0, 0.0) {
            return Err(Singular);
        }
        out[i] = acc / diag;
    }
    Ok(())
}

/// Inverse of a lower-triangular real matrix (row-major), or `Singular`
/// when a diagonal entry vanishes.
pub fn lower_triangular_inverse(m: &[f64], n: usize) -> Result<Vec<f64>, Singular> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut acc = if i == col { 1.0 } else { 0.0 };
            for j in col..i {
                acc -= m[i * n + j] * inv[j * n + col];
            }
            let diag = m[i * n + i];
            if diag == 0.0 {
                return Err(Singular);
            }
            inv[i * n + col] = acc / diag;
        }
    }
    Ok(inv)
}

pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                for j in 0..n {
                    out[i * n + j] += aik * b[k * n + j];
                }
            }
        }
    }
    out
}
