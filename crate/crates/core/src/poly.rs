//! Small complex polynomials: evaluation, exact cubic roots and companion
//! matrix roots.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};

/// Evaluates `Σ c_j z^j` (coefficients in ascending order) and its derivative.
pub fn eval_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    eval_with_derivative(coeffs, z).0
}

/// Newton polishing that only accepts steps reducing the residual.
fn polish(coeffs: &[C64], mut z: C64) -> C64 {
    let mut r = eval(coeffs, z).norm();
    for _ in 0..4 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 || r == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let rc = eval(coeffs, cand).norm();
        if rc < r {
            z = cand;
            r = rc;
        } else {
            break;
        }
    }
    z
}

/// Roots of `a z³ + b z² + c z + d` by Cardano's formula, Newton-polished.
pub fn cubic_roots(a: C64, b: C64, c: C64, d: C64) -> Result<[C64; 3]> {
    if a.norm() == 0.0 {
        return Err(QuenchError::param("a", "leading cubic coefficient vanishes"));
    }
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u1 = -q / 2.0 + disc;
    let u2 = -q / 2.0 - disc;
    let u3 = if u1.norm() >= u2.norm() { u1 } else { u2 };
    let u = u3.powf(1.0 / 3.0);
    let w = C64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [C64::new(0.0, 0.0); 3];
    let mut wk = C64::new(1.0, 0.0);
    for r in roots.iter_mut() {
        let uk = u * wk;
        let t = if uk.norm() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            uk - p / (3.0 * uk)
        };
        *r = t - shift;
        wk *= w;
    }
    let coeffs = [d, c, b, C64::new(1.0, 0.0)];
    Ok(roots.map(|z| polish(&coeffs, z)))
}

/// Roots of a monic-normalizable polynomial via eigenvalues of its companion
/// matrix. Coefficients in ascending order, leading one nonzero.
pub fn companion_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    if n == 0 || lead.norm() == 0.0 {
        return Err(QuenchError::param("coeffs", "degenerate polynomial"));
    }
    let m = Mat::<C64>::from_fn(n, n, |i, j| {
        if i == 0 {
            -coeffs[n - 1 - j] / lead
        } else if i == j + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let ev = m
        .eigenvalues()
        .map_err(|e| QuenchError::LinearAlgebra(format!("companion eigenvalues: {e:?}")))?;
    Ok(ev.into_iter().map(|z| polish(coeffs, z)).collect())
}
