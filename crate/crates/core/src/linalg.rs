//! Dense complex linear algebra on top of faer: eigenpairs, shift-invert
//! Arnoldi, inverse iteration and smallest singular values.

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};

pub type CMat = Mat<C64>;

fn evd_err(e: impl std::fmt::Debug) -> QuenchError {
    QuenchError::LinearAlgebra(format!("eigendecomposition: {e:?}"))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    a.eigenvalues().map_err(evd_err)
}

/// Eigenvalues and right eigenvectors (columns, unit 2-norm).
pub fn eigen(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let e = a.eigen().map_err(evd_err)?;
    let vals: Vec<C64> = e.S().column_vector().iter().copied().collect();
    let mut vecs = e.U().to_owned();
    for j in 0..vecs.ncols() {
        let nrm = column_norm(&vecs, j);
        if nrm > 0.0 {
            for i in 0..vecs.nrows() {
                vecs[(i, j)] /= nrm;
            }
        }
    }
    Ok((vals, vecs))
}

fn column_norm(m: &CMat, j: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(u_i) v_i`.
pub fn cdot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn matvec(a: &CMat, v: &[C64]) -> Vec<C64> {
    let x = Mat::<C64>::from_fn(v.len(), 1, |i, _| v[i]);
    let y = a * &x;
    (0..y.nrows()).map(|i| y[(i, 0)]).collect()
}

/// `A − σI` factorized once, reused for solves with `A − σI` and its adjoint.
pub struct ShiftedLu {
    pub shift: C64,
    lu: PartialPivLu<C64>,
}

impl ShiftedLu {
    pub fn new(a: &CMat, shift: C64) -> Result<Self> {
        let n = a.nrows();
        let shifted = Mat::<C64>::from_fn(n, n, |i, j| if i == j { a[(i, j)] - shift } else { a[(i, j)] });
        let lu = shifted.partial_piv_lu();
        Ok(ShiftedLu { shift, lu })
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let mut x = Mat::<C64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut x);
        finite((0..b.len()).map(|i| x[(i, 0)]).collect())
    }

    /// Solves `(A − σI)^H x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Result<Vec<C64>> {
        let mut x = Mat::<C64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_adjoint_in_place(&mut x);
        finite((0..b.len()).map(|i| x[(i, 0)]).collect())
    }
}

fn finite(v: Vec<C64>) -> Result<Vec<C64>> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(v)
    } else {
        Err(QuenchError::LinearAlgebra("singular shifted matrix".into()))
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = vec_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    n
}

/// Deterministic, non-degenerate start vector.
pub fn start_vector(n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| {
            let t = i as f64 + 1.0;
            C64::new((0.7 * t).sin() + 0.3, (1.3 * t).cos())
        })
        .collect();
    normalize(&mut v);
    v
}

/// Right eigenpair nearest to `shift` by inverse iteration with Rayleigh
/// quotient updates of the eigenvalue. The factorization is not refreshed;
/// iteration continues past `tol` until the residual stops improving.
pub fn inverse_iteration(a: &CMat, shift: C64, start: Option<&[C64]>, tol: f64) -> Result<(C64, Vec<C64>)> {
    let lu = ShiftedLu::new(a, shift)?;
    let mut v = start.map(|s| s.to_vec()).unwrap_or_else(|| start_vector(a.nrows()));
    normalize(&mut v);
    let scale = 1.0 + frob_estimate(a);
    let mut best: Option<(f64, C64, Vec<C64>)> = None;
    for _ in 0..200 {
        let mut w = lu.solve(&v)?;
        normalize(&mut w);
        let aw = matvec(a, &w);
        let lam = cdot(&w, &aw);
        let res = aw
            .iter()
            .zip(&w)
            .map(|(x, y)| (x - lam * y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        v = w;
        match &best {
            Some((r, _, _)) if res > 0.5 * r && *r < tol * scale => {
                let (_, l, v) = best.unwrap();
                return Ok((l, v));
            }
            _ => {}
        }
        if best.as_ref().is_none_or(|(r, _, _)| res < *r) {
            best = Some((res, lam, v.clone()));
        }
    }
    match best {
        Some((r, l, v)) if r < tol * scale => Ok((l, v)),
        other => Err(QuenchError::NoConvergence {
            what: "inverse iteration",
            iterations: 200,
            residual: other.map(|b| b.0).unwrap_or(f64::NAN),
        }),
    }
}

/// Left eigenvector `ψ` with `ψ^H A = λ ψ^H`, for an eigenvalue `lambda`
/// already known to good accuracy.
pub fn left_eigenvector(a: &CMat, lambda: C64, tol: f64) -> Result<Vec<C64>> {
    // a tiny offset keeps the factorization nonsingular
    let offset = C64::new(1e-10, 1e-10) * (1.0 + lambda.norm());
    let lu = ShiftedLu::new(a, lambda + offset)?;
    let mut w = start_vector(a.nrows());
    let scale = 1.0 + frob_estimate(a);
    let ah = a.adjoint().to_owned();
    let mut best: Option<(f64, Vec<C64>)> = None;
    for _ in 0..50 {
        let mut z = lu.solve_adjoint(&w)?;
        normalize(&mut z);
        // residual of A^H z − conj(λ) z
        let r = matvec(&ah, &z);
        let res = r
            .iter()
            .zip(&z)
            .map(|(x, y)| (x - lambda.conj() * y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        w = z;
        if let Some((r, v)) = &best {
            if res > 0.5 * r && *r < tol * scale {
                return Ok(v.clone());
            }
        }
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, w.clone()));
        }
    }
    match best {
        Some((r, v)) if r < tol * scale => Ok(v),
        other => Err(QuenchError::NoConvergence {
            what: "left inverse iteration",
            iterations: 50,
            residual: other.map(|b| b.0).unwrap_or(f64::NAN),
        }),
    }
}

fn frob_estimate(a: &CMat) -> f64 {
    let n = a.nrows().max(1);
    let s: f64 = (0..a.nrows())
        .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)].norm_sqr())
        .sum();
    (s / n as f64).sqrt()
}

/// Eigenvalues of `A` closest to `shift` from an Arnoldi factorization of
/// `(A − σI)^{-1}` with `krylov` vectors; returned with their residuals,
/// sorted by distance to the shift.
pub fn shift_invert_eigs(a: &CMat, shift: C64, count: usize, krylov: usize) -> Result<Vec<(C64, Vec<C64>, f64)>> {
    let n = a.nrows();
    let m = krylov.min(n).max(count + 1);
    let lu = ShiftedLu::new(a, shift)?;
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut h = Mat::<C64>::zeros(m + 1, m);
    basis.push(start_vector(n));
    let mut dim = m;
    for j in 0..m {
        let mut w = lu.solve(&basis[j])?;
        // two passes of Gram–Schmidt
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = cdot(q, &w);
                h[(i, j)] += c;
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = normalize(&mut w);
        h[(j + 1, j)] = C64::new(nrm, 0.0);
        if nrm < 1e-14 {
            dim = j + 1;
            break;
        }
        basis.push(w);
    }
    let hm = Mat::<C64>::from_fn(dim, dim, |i, j| h[(i, j)]);
    let (theta, y) = eigen(&hm)?;
    let mut out: Vec<(C64, Vec<C64>, f64)> = theta
        .iter()
        .enumerate()
        .filter(|(_, t)| t.norm() > 0.0)
        .map(|(k, t)| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for (i, q) in basis.iter().take(dim).enumerate() {
                let c = y[(i, k)];
                v.iter_mut().zip(q).for_each(|(x, z)| *x += c * z);
            }
            normalize(&mut v);
            let lam = shift + 1.0 / t;
            let av = matvec(a, &v);
            let res = av
                .iter()
                .zip(&v)
                .map(|(x, z)| (x - lam * z).norm_sqr())
                .sum::<f64>()
                .sqrt();
            (lam, v, res)
        })
        .collect();
    out.sort_by(|p, q| (p.0 - shift).norm().total_cmp(&(q.0 - shift).norm()));
    out.truncate(count);
    Ok(out)
}

/// Smallest singular value by inverse power iteration on `(A^H A)^{-1}`.
pub fn min_singular_value(a: &CMat) -> Result<f64> {
    let lu = ShiftedLu::new(a, C64::new(0.0, 0.0))?;
    let mut v = start_vector(a.nrows());
    let mut est = 0.0;
    for _ in 0..100 {
        let w = lu.solve_adjoint(&v)?;
        let mut z = lu.solve(&w)?;
        let g = normalize(&mut z);
        let new = 1.0 / g.sqrt();
        v = z;
        if (new - est).abs() < 1e-10 * new {
            return Ok(new);
        }
        est = new;
    }
    Ok(est)
}
