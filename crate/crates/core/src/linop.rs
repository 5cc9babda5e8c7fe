//! Linearization about the primary front, one transverse mode at a time.
//!
//! The weighted operator acts on `ṽ = e^{ηx} v`. On the periodic box this is
//! the substitution `∂x → ∂x − η` in every Fourier symbol, so the matrix
//! stays a circulant-plus-multiplication operator and remains real.

use std::collections::HashMap;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};
use crate::linalg::{self, CMat};
use crate::model::{FrontProfile, ModelSpec};
use crate::spectral::{dot, ChannelGrid, ModalProfile};

/// Fourier symbols of `∂x` and `∂x²` in the weighted frame.
#[derive(Debug, Clone)]
pub(crate) struct WeightedSymbols {
    pub d1: Vec<C64>,
    pub d2: Vec<C64>,
}

impl WeightedSymbols {
    pub fn new(grid: &ChannelGrid, eta: f64) -> Self {
        let xi = grid.xi();
        let xo = grid.xi_odd();
        let d1 = xo.iter().map(|&q| C64::new(-eta, q)).collect();
        let d2 = xi
            .iter()
            .zip(&xo)
            .map(|(&q, &qo)| C64::new(eta * eta - q * q, -2.0 * eta * qo))
            .collect();
        WeightedSymbols { d1, d2 }
    }

    /// Symbol of `∂x² − k²ℓ²`.
    pub fn dell(&self, grid: &ChannelGrid, ell: i64) -> Vec<C64> {
        let q = (grid.k() * ell as f64).powi(2);
        self.d2.iter().map(|s| s - q).collect()
    }
}

/// `(∂x² − k²ℓ²)` in the weighted frame.
pub(crate) fn apply_weighted_dell(grid: &ChannelGrid, ell: i64, eta: f64, v: &[C64]) -> Vec<C64> {
    let sym = WeightedSymbols::new(grid, eta).dell(grid, ell);
    grid.apply_symbol(v, |j| sym[j])
}

pub(crate) fn apply_weighted_dx(grid: &ChannelGrid, eta: f64, v: &[C64]) -> Vec<C64> {
    let sym = WeightedSymbols::new(grid, eta).d1;
    grid.apply_symbol(v, |j| sym[j])
}

/// `e^{ηx}` on the nodes.
pub(crate) fn exp_weight(grid: &ChannelGrid, eta: f64, sign: f64) -> Vec<f64> {
    grid.x().iter().map(|&x| (sign * eta * x).exp()).collect()
}

#[derive(Debug, Clone)]
pub struct ModalOperator {
    pub ell: i64,
    pub c: f64,
    pub eta: f64,
    pub grid: Arc<ChannelGrid>,
    pub matrix: CMat,
}

impl ModalOperator {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.matrix, v)
    }

    /// Relative residual `‖Lv − λv‖/‖v‖`.
    pub fn residual(&self, lambda: C64, v: &[C64]) -> f64 {
        let lv = self.apply(v);
        let r: f64 = lv.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum();
        r.sqrt() / linalg::vec_norm(v)
    }
}

fn check_k(spec: &ModelSpec, grid: &ChannelGrid) -> Result<()> {
    if (spec.k - grid.k()).abs() > 1e-14 * spec.k {
        return Err(QuenchError::GridMismatch(format!(
            "model k = {} but grid k = {}",
            spec.k,
            grid.k()
        )));
    }
    Ok(())
}

/// `L v = −D(Dv + f_u(x,u_*)v) + c∂x v` on mode `ell`, conjugated with `e^{ηx}`.
pub fn assemble_modal(ell: i64, c: f64, eta: f64, spec: &ModelSpec, front: &FrontProfile) -> Result<ModalOperator> {
    spec.validate()?;
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(QuenchError::param("eta", "must be >= 0"));
    }
    if !c.is_finite() {
        return Err(QuenchError::param("c", "must be finite"));
    }
    check_k(spec, &front.grid)?;
    let g = front.linear_coefficient(spec);
    Ok(assemble_with_coefficient(ell, c, eta, front.grid.clone(), &g))
}

/// Same operator with an arbitrary sampled coefficient in place of `f_u(x,u_*)`.
///
/// Used for constant-coefficient checks against the far-field dispersion
/// relation; `g` must have one entry per `x` node.
pub fn assemble_with_coefficient(ell: i64, c: f64, eta: f64, grid: Arc<ChannelGrid>, g: &[f64]) -> ModalOperator {
    let n = grid.nx();
    assert_eq!(g.len(), n, "one coefficient per x node");
    let sym = WeightedSymbols::new(&grid, eta);
    let dell = sym.dell(&grid, ell);
    // circulant kernels: first column of the matrix of each Fourier multiplier
    let mut stiff: Vec<C64> = dell.iter().zip(&sym.d1).map(|(d, d1)| -d * d + c * d1).collect();
    let mut outer = dell.clone();
    grid.ifft_x(&mut stiff);
    grid.ifft_x(&mut outer);
    let matrix = Mat::<C64>::from_fn(n, n, |i, j| {
        let d = (i + n - j) % n;
        stiff[d] - outer[d] * g[j]
    });
    ModalOperator {
        ell,
        c,
        eta,
        grid,
        matrix,
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    /// Eigenfunction in the weighted frame.
    pub profile: ModalProfile,
    pub ell: i64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Full dense eigendecomposition.
    #[default]
    Dense,
    /// Arnoldi on `(L − σ)^{-1}` with the given Krylov dimension.
    ShiftInvert { krylov: usize },
}

const RESIDUAL_TOL: f64 = 1e-8;

/// `count` eigenpairs nearest `target`, sorted by distance.
pub fn eigs_near(op: &ModalOperator, target: C64, count: usize, method: EigenMethod) -> Result<Vec<EigenPair>> {
    if count > op.n() {
        return Err(QuenchError::param("count", format!("at most n_x = {}", op.n())));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let raw: Vec<(C64, Vec<C64>)> = match method {
        EigenMethod::Dense => {
            let (vals, vecs) = linalg::eigen(&op.matrix)?;
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&a, &b| (vals[a] - target).norm().total_cmp(&(vals[b] - target).norm()));
            idx.into_iter()
                .take(count)
                .map(|k| (vals[k], (0..op.n()).map(|i| vecs[(i, k)]).collect()))
                .collect()
        }
        EigenMethod::ShiftInvert { krylov } => {
            let found = match linalg::shift_invert_eigs(&op.matrix, target, count, krylov) {
                Ok(f) => f,
                Err(QuenchError::LinearAlgebra(_)) => {
                    // the shift hit an eigenvalue; nudge it
                    let nudged = target + C64::new(1e-7, 1e-7) * (1.0 + target.norm());
                    linalg::shift_invert_eigs(&op.matrix, nudged, count, krylov)?
                }
                Err(e) => return Err(e),
            };
            found.into_iter().map(|(l, v, _)| (l, v)).collect()
        }
    };
    raw.into_iter()
        .map(|(lambda, v)| {
            let (lambda, v) = polish(op, lambda, v)?;
            let residual = op.residual(lambda, &v);
            Ok(EigenPair {
                lambda,
                profile: ModalProfile::new(op.grid.clone(), op.ell, v)?,
                ell: op.ell,
                residual,
            })
        })
        .collect()
}

/// A few steps of inverse iteration when the residual is above tolerance.
fn polish(op: &ModalOperator, lambda: C64, v: Vec<C64>) -> Result<(C64, Vec<C64>)> {
    if op.residual(lambda, &v) < 1e-2 * RESIDUAL_TOL {
        return Ok((lambda, v));
    }
    let shift = lambda + C64::new(1e-9, 1e-9) * (1.0 + lambda.norm());
    match linalg::inverse_iteration(&op.matrix, shift, Some(&v), 1e-14) {
        Ok(better) => Ok(better),
        Err(QuenchError::NoConvergence { .. }) => Ok((lambda, v)),
        Err(e) => Err(e),
    }
}

/// The eigenvalue with largest real part; among a conjugate pair the one
/// with nonnegative imaginary part.
pub fn leading_eigenvalue(op: &ModalOperator) -> Result<C64> {
    let vals = linalg::eigenvalues(&op.matrix)?;
    pick_leading(&vals).ok_or_else(|| QuenchError::LinearAlgebra("empty spectrum".into()))
}

fn pick_leading(vals: &[C64]) -> Option<C64> {
    let max_re = vals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let scale = 1e-9 * (1.0 + max_re.abs());
    vals.iter()
        .filter(|z| z.re >= max_re - scale)
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .copied()
}

#[derive(Debug, Clone)]
pub struct SpectrumSet {
    pub pairs: Vec<EigenPair>,
    pub c: f64,
    pub k: f64,
    pub eta: f64,
}

impl SpectrumSet {
    pub const CSV_HEADER: &'static str = "ell,Re_lambda,Im_lambda,residual";

    pub fn csv_rows(&self) -> Vec<String> {
        self.pairs
            .iter()
            .map(|p| format!("{},{:.12e},{:.12e},{:.3e}", p.ell, p.lambda.re, p.lambda.im, p.residual))
            .collect()
    }
}

/// Union over `ells` of the modal spectra nearest the origin, sorted by `|λ|`
/// and truncated to `count_total`. Blocks `ℓ` and `−ℓ` are the same matrix,
/// so each `|ℓ|` is solved once.
pub fn aggregate_spectrum(
    ells: &[i64],
    c: f64,
    eta: f64,
    count_total: usize,
    spec: &ModelSpec,
    front: &FrontProfile,
    method: EigenMethod,
) -> Result<SpectrumSet> {
    let mut cache: HashMap<i64, Vec<EigenPair>> = HashMap::new();
    let mut pairs = Vec::new();
    for &ell in ells {
        let key = ell.abs();
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(key) {
            let op = assemble_modal(key, c, eta, spec, front)?;
            let per_block = count_total.min(op.n());
            e.insert(eigs_near(&op, C64::new(0.0, 0.0), per_block, method)?);
        }
        pairs.extend(cache[&key].iter().map(|p| EigenPair {
            ell,
            profile: ModalProfile {
                ell,
                ..p.profile.clone()
            },
            ..p.clone()
        }));
    }
    pairs.sort_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()).then(a.ell.cmp(&b.ell)));
    pairs.truncate(count_total);
    Ok(SpectrumSet {
        pairs,
        c,
        k: front.grid.k(),
        eta,
    })
}

/// Eigenpair nearest `target` with its left eigenvector, the eigenvalue
/// refined by the two-sided Rayleigh quotient.
fn two_sided(op: &ModalOperator, target: C64, start: Option<&[C64]>) -> Result<(C64, Vec<C64>, Vec<C64>)> {
    let (lam, v) = linalg::inverse_iteration(&op.matrix, target, start, 1e-13)?;
    let w = linalg::left_eigenvector(&op.matrix, lam, 1e-11)?;
    let av = op.apply(&v);
    let rq = linalg::cdot(&w, &av) / linalg::cdot(&w, &v);
    Ok((rq, v, w))
}

#[derive(Debug, Clone)]
pub struct HopfData {
    pub ell: i64,
    pub eta: f64,
    pub c_star: f64,
    pub omega_star: f64,
    pub lambda: C64,
    /// Unweighted eigenfunction, `‖p‖₂ = 1`, largest entry real positive.
    pub p: ModalProfile,
    /// Unweighted adjoint eigenfunction, `⟨p, ψ₊⟩ = 1`.
    pub psi_plus: ModalProfile,
    /// `e^{ηx} p` and `e^{−ηx} ψ₊`; all quadratures are done with these.
    pub p_weighted: ModalProfile,
    pub psi_weighted: ModalProfile,
    pub lambda_prime: C64,
    pub mu_prime: f64,
    /// Relative change of the difference quotient under step halving.
    pub richardson_defect: f64,
}

impl HopfData {
    /// Checks the transversality `μ′(c_*) > 0` assumed by the reduction.
    pub fn check_positive_crossing(&self) -> Result<()> {
        if self.mu_prime > 0.0 {
            Ok(())
        } else {
            Err(QuenchError::Hypothesis(format!(
                "crossing speed mu' = {:.6e} is not positive: the mode gains stability as c increases",
                self.mu_prime
            )))
        }
    }

    /// `⟨p, ψ₊⟩` recomputed from the stored profiles.
    pub fn biorthogonality(&self) -> C64 {
        dot(&self.p_weighted.values, &self.psi_weighted.values)
    }

    /// Applies `p → e^{iφ}p`, `ψ₊ → e^{iφ}ψ₊`, which preserves `⟨p,ψ₊⟩`.
    pub fn rotated(&self, phase: f64) -> HopfData {
        let r = C64::from_polar(1.0, phase);
        HopfData {
            p: self.p.scaled(r),
            psi_plus: self.psi_plus.scaled(r),
            p_weighted: self.p_weighted.scaled(r),
            psi_weighted: self.psi_weighted.scaled(r),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HopfOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub dc: f64,
}

impl Default for HopfOptions {
    fn default() -> Self {
        HopfOptions {
            tol: 1e-9,
            max_iter: 60,
            dc: 1e-4,
        }
    }
}

/// Speed where the leading eigenvalue of mode `ell` crosses the imaginary
/// axis inside `bracket`, with normalized eigenfunctions and `λ′(c_*)`.
///
/// A crossing with `μ′ < 0` is returned as is; use
/// [`HopfData::check_positive_crossing`] to enforce the sign.
pub fn hopf_locate(
    ell: i64,
    bracket: (f64, f64),
    eta: f64,
    spec: &ModelSpec,
    front: &FrontProfile,
    opts: HopfOptions,
) -> Result<HopfData> {
    let (mut lo, mut hi) = bracket;
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(QuenchError::param("bracket", "needs lo < hi"));
    }
    let mu = |c: f64| -> Result<C64> {
        let op = assemble_modal(ell, c, eta, spec, front)?;
        let seed = leading_eigenvalue(&op)?;
        let target = seed + C64::new(1e-10, 1e-10) * (1.0 + seed.norm());
        match two_sided(&op, target, None) {
            Ok((l, _, _)) if (l - seed).norm() < 1e-6 * (1.0 + seed.norm()) => Ok(l),
            _ => Ok(seed),
        }
    };
    let mut f_lo = mu(lo)?.re;
    let mut f_hi = mu(hi)?.re;
    if f_lo.signum() == f_hi.signum() {
        return Err(QuenchError::NoSignChange {
            what: "leading real part",
            lo,
            hi,
        });
    }
    // safeguarded secant (Illinois variant of regula falsi)
    let mut side = 0i8;
    let mut c_star = 0.5 * (lo + hi);
    let mut lam_star = C64::new(0.0, 0.0);
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut c = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        let l = mu(c)?;
        c_star = c;
        lam_star = l;
        if l.re.abs() < opts.tol || hi - lo < 1e-13 {
            converged = true;
            break;
        }
        if l.re.signum() == f_lo.signum() {
            lo = c;
            f_lo = l.re;
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        } else {
            hi = c;
            f_hi = l.re;
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        }
    }
    if !converged {
        return Err(QuenchError::NoConvergence {
            what: "Hopf crossing secant",
            iterations: opts.max_iter,
            residual: lam_star.re.abs(),
        });
    }

    let op = assemble_modal(ell, c_star, eta, spec, front)?;
    let (lam, v, w) = two_sided(&op, lam_star + C64::new(1e-10, 1e-10), None)?;
    let (lambda_prime, richardson_defect) = difference_quotient(ell, c_star, eta, spec, front, lam, &v, opts.dc)?;
    gauged(&op, lam, &v, &w, lambda_prime, richardson_defect)
}

/// Fixes the gauge of a right/left eigenvector pair and packs the result.
fn gauged(
    op: &ModalOperator,
    lam: C64,
    v: &[C64],
    w: &[C64],
    lambda_prime: C64,
    richardson_defect: f64,
) -> Result<HopfData> {
    let grid = op.grid.clone();
    let (ell, eta) = (op.ell, op.eta);
    let down = exp_weight(&grid, eta, -1.0);
    let up = exp_weight(&grid, eta, 1.0);

    // unweighted ‖p‖ = 1, largest entry real positive
    let p_raw: Vec<C64> = v.iter().zip(&down).map(|(a, w)| a * w).collect();
    let nrm = (p_raw.iter().map(|z| z.norm_sqr()).sum::<f64>() / p_raw.len() as f64).sqrt();
    let jmax = p_raw
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let gauge = p_raw[jmax].conj() / p_raw[jmax].norm() / nrm;
    let p_w: Vec<C64> = v.iter().map(|z| z * gauge).collect();
    // ⟨p, αw⟩ = ᾱ⟨p, w⟩ = 1
    let alpha = dot(&p_w, w).inv().conj();
    let psi_w: Vec<C64> = w.iter().map(|z| z * alpha).collect();

    let p = ModalProfile::new(grid.clone(), ell, p_w.iter().zip(&down).map(|(a, w)| a * w).collect())?;
    let psi = ModalProfile::new(grid.clone(), ell, psi_w.iter().zip(&up).map(|(a, w)| a * w).collect())?;
    Ok(HopfData {
        ell,
        eta,
        c_star: op.c,
        omega_star: lam.im,
        lambda: lam,
        p,
        psi_plus: psi,
        p_weighted: ModalProfile::new(grid.clone(), ell, p_w)?,
        psi_weighted: ModalProfile::new(grid, ell, psi_w)?,
        lambda_prime,
        mu_prime: lambda_prime.re,
        richardson_defect,
    })
}

/// The eigenpair of the mirrored block `−ℓ` at the same speed, solved
/// independently from the eigenvalue estimate of `hopf`. Its `λ′` comes from
/// the inner-product formula and carries no step-halving defect.
pub fn hopf_mirror(hopf: &HopfData, spec: &ModelSpec, front: &FrontProfile) -> Result<HopfData> {
    let op = assemble_modal(-hopf.ell, hopf.c_star, hopf.eta, spec, front)?;
    let (lam, v, w) = two_sided(&op, hopf.lambda + C64::new(1e-10, 1e-10), None)?;
    let mut out = gauged(&op, lam, &v, &w, C64::new(0.0, 0.0), 0.0)?;
    let (_, formula) = crossing_speed_check(&out)?;
    out.lambda_prime = formula;
    out.mu_prime = formula.re;
    Ok(out)
}

/// Centered difference of the tracked eigenvalue and its relative change
/// when the step is halved.
#[allow(clippy::too_many_arguments)]
fn difference_quotient(
    ell: i64,
    c: f64,
    eta: f64,
    spec: &ModelSpec,
    front: &FrontProfile,
    lam: C64,
    v: &[C64],
    dc: f64,
) -> Result<(C64, f64)> {
    let eig_at = |cc: f64| -> Result<C64> {
        let op = assemble_modal(ell, cc, eta, spec, front)?;
        let shift = lam + C64::new(1e-10, 1e-10);
        Ok(two_sided(&op, shift, Some(v))?.0)
    };
    let full = (eig_at(c + dc)? - eig_at(c - dc)?) / (2.0 * dc);
    let half = (eig_at(c + dc / 2.0)? - eig_at(c - dc / 2.0)?) / dc;
    // the truncation error is far below eigenvalue noise at this step, so
    // the half step only serves as a consistency check
    let defect = (half - full).norm() / full.norm().max(1e-300);
    Ok((full, defect))
}

/// `λ′(c_*)` from the difference quotient and from `⟨∂x p, ψ₊⟩`.
pub fn crossing_speed_check(hopf: &HopfData) -> Result<(C64, C64)> {
    let grid = &hopf.p_weighted.grid;
    // ∂x in the original frame is ∂x − η in the weighted one
    let dp = apply_weighted_dx(grid, hopf.eta, &hopf.p_weighted.values);
    let formula = dot(&dp, &hopf.psi_weighted.values);
    Ok((hopf.lambda_prime, formula))
}

/// Real part of tracked eigenvalue branches over `c_values`.
#[derive(Debug, Clone)]
pub struct BranchSet {
    pub ell: i64,
    pub c_values: Vec<f64>,
    /// `curves[b][j]`: eigenvalue of branch `b` at `c_values[j]`.
    pub curves: Vec<Vec<C64>>,
    /// Smallest overlap used in each matching step; below 0.5 is ambiguous.
    pub min_overlap: Vec<f64>,
}

impl BranchSet {
    pub fn ambiguous_steps(&self) -> usize {
        self.min_overlap.iter().filter(|&&o| o < 0.5).count()
    }
}

/// Follows the `n_branches` rightmost eigenvalues at the first speed by
/// eigenvector overlap, nearest eigenvalue breaking ties.
pub fn branch_track(
    ell: i64,
    c_values: &[f64],
    n_branches: usize,
    eta: f64,
    spec: &ModelSpec,
    front: &FrontProfile,
) -> Result<BranchSet> {
    if c_values.is_empty() || n_branches == 0 {
        return Err(QuenchError::param("c_values/n_branches", "must be non-empty"));
    }
    let mut cs = c_values.to_vec();
    cs.sort_by(f64::total_cmp);
    let solve = |c: f64| -> Result<(Vec<C64>, CMat)> {
        let op = assemble_modal(ell, c, eta, spec, front)?;
        linalg::eigen(&op.matrix)
    };
    let (vals, vecs) = solve(cs[0])?;
    let n = vecs.nrows();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .re
            .total_cmp(&vals[a].re)
            .then(vals[b].im.total_cmp(&vals[a].im))
    });
    order.truncate(n_branches.min(vals.len()));
    let col = |m: &CMat, k: usize| -> Vec<C64> { (0..n).map(|i| m[(i, k)]).collect() };
    let mut tracked: Vec<(C64, Vec<C64>)> = order.iter().map(|&k| (vals[k], col(&vecs, k))).collect();
    let mut curves: Vec<Vec<C64>> = tracked.iter().map(|t| vec![t.0]).collect();
    let mut min_overlap = Vec::new();
    for &c in &cs[1..] {
        let (vals, vecs) = solve(c)?;
        let mut used = vec![false; vals.len()];
        let mut worst: f64 = 1.0;
        for (b, t) in tracked.iter_mut().enumerate() {
            let mut best: Option<(usize, f64, f64)> = None;
            for k in 0..vals.len() {
                if used[k] {
                    continue;
                }
                let ov = linalg::cdot(&t.1, &col(&vecs, k)).norm();
                let dist = (vals[k] - t.0).norm();
                let better = match best {
                    None => true,
                    Some((_, bo, bd)) => ov > bo + 1e-3 || ((ov - bo).abs() <= 1e-3 && dist < bd),
                };
                if better {
                    best = Some((k, ov, dist));
                }
            }
            let (k, ov, _) = best.ok_or_else(|| QuenchError::Tracking("ran out of eigenvalues".into()))?;
            used[k] = true;
            worst = worst.min(ov);
            *t = (vals[k], col(&vecs, k));
            curves[b].push(vals[k]);
        }
        min_overlap.push(worst);
    }
    Ok(BranchSet {
        ell,
        c_values: cs,
        curves,
        min_overlap,
    })
}

/// Leading `ℓ = 1` eigenvalue as a function of the transverse wavenumber.
pub fn k_scan(k_values: &[f64], c: f64, eta: f64, spec: &ModelSpec, front: &FrontProfile) -> Result<Vec<(f64, C64)>> {
    k_values
        .iter()
        .map(|&k| {
            if !(k.is_finite() && k > 0.0) {
                return Err(QuenchError::param("k", "must be positive"));
            }
            let grid = front.grid.with_k(k)?;
            let f = FrontProfile::new(grid, front.values.clone(), front.asymptotic_states)?;
            let s = ModelSpec { k, ..spec.clone() };
            let op = assemble_modal(1, c, eta, &s, &f)?;
            Ok((k, leading_eigenvalue(&op)?))
        })
        .collect()
}

/// Smallest singular value of `L_ℓ − iκ` (unweighted) over the given modes
/// and harmonics of the Hopf frequency, with its location.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceCheck {
    pub min_sigma: f64,
    pub ell: i64,
    pub harmonic: i64,
}

pub fn nonresonance_check(
    hopf: &HopfData,
    ells: &[i64],
    harmonics: &[i64],
    spec: &ModelSpec,
    front: &FrontProfile,
) -> Result<ResonanceCheck> {
    let mut best = ResonanceCheck {
        min_sigma: f64::INFINITY,
        ell: 0,
        harmonic: 0,
    };
    let mut cache: HashMap<(i64, i64), f64> = HashMap::new();
    for &ell in ells {
        let op = assemble_modal(ell.abs(), hopf.c_star, 0.0, spec, front)?;
        for &m in harmonics {
            // L_ℓ is real, so the harmonic −m has the same singular values as m
            let key = (ell.abs(), m.abs());
            let s = match cache.get(&key) {
                Some(&s) => s,
                None => {
                    let z = C64::new(0.0, m.abs() as f64 * hopf.omega_star);
                    let n = op.n();
                    let shifted = Mat::<C64>::from_fn(n, n, |i, j| {
                        if i == j {
                            op.matrix[(i, j)] - z
                        } else {
                            op.matrix[(i, j)]
                        }
                    });
                    let s = linalg::min_singular_value(&shifted)?;
                    cache.insert(key, s);
                    s
                }
            };
            if s < best.min_sigma {
                best = ResonanceCheck {
                    min_sigma: s,
                    ell,
                    harmonic: m,
                };
            }
        }
    }
    Ok(best)
}

/// Smallest singular value of the weighted `ℓ = 0` block at speed `c`.
pub fn zero_mode_check(c: f64, eta: f64, spec: &ModelSpec, front: &FrontProfile) -> Result<f64> {
    let op = assemble_modal(0, c, eta, spec, front)?;
    linalg::min_singular_value(&op.matrix)
}

/// Eigenvalue nearest `target` by inverse iteration, two-sided refined.
pub fn eigenvalue_near(op: &ModalOperator, target: C64) -> Result<C64> {
    Ok(two_sided(op, target, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{essential_curve, Background, DispersionParams};
    use crate::model::trivial_front;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn constant_coefficient_spectrum_is_the_essential_curve() {
        let g = make_grid(8.0 * PI, 64, 8, 0.5).unwrap();
        let far = vec![-1.0; 64];
        for ell in [0, 1] {
            let op = assemble_with_coefficient(ell, 1.1, 0.0, g.clone(), &far);
            let vals = linalg::eigenvalues(&op.matrix).unwrap();
            let p = DispersionParams::new(0.5, ell, 1.1, Background::Stable);
            let curve = essential_curve(&p, &g.xi_odd()).unwrap();
            for s in &curve.samples {
                let d = vals.iter().map(|v| (v - s.lambda).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-8 * (1.0 + s.lambda.norm()), "m = {}: {d}", s.param);
            }
        }
    }

    #[test]
    fn action_on_constants() {
        let g = make_grid(30.0 * PI, 256, 8, 0.5).unwrap();
        let front = trivial_front(g.clone());
        let spec = ModelSpec::default();
        let op = assemble_modal(0, 1.35, 0.0, &spec, &front).unwrap();
        let ones = vec![c(1.0, 0.0); 256];
        let got = op.apply(&ones);
        let h: Vec<C64> = spec.sample_h(&g).into_iter().map(|v| c(v, 0.0)).collect();
        let d2 = g.deriv_symbol(2);
        let expect = g.apply_symbol(&h, |j| -d2[j]);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn weighted_matrix_is_real() {
        let g = make_grid(10.0 * PI, 64, 8, 0.5).unwrap();
        let front = trivial_front(g);
        let op = assemble_modal(1, 1.3, 0.2, &ModelSpec::default(), &front).unwrap();
        let n = op.n();
        let max_im = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| op.matrix[(i, j)].im.abs())
            .fold(0.0, f64::max);
        assert!(max_im < 1e-10);
    }

    #[test]
    fn weighting_is_a_similarity() {
        // with η small the weighted operator on smooth, decaying functions
        // agrees with conjugating the unweighted one
        let g = make_grid(10.0 * PI, 256, 8, 0.5).unwrap();
        let front = trivial_front(g.clone());
        let spec = ModelSpec::default();
        let eta = 0.2;
        let a = assemble_modal(1, 1.3, 0.0, &spec, &front).unwrap();
        let b = assemble_modal(1, 1.3, eta, &spec, &front).unwrap();
        let v: Vec<C64> = g.x().iter().map(|&x| c((-x * x / 8.0).exp(), 0.0)).collect();
        let up = exp_weight(&g, eta, 1.0);
        let down = exp_weight(&g, eta, -1.0);
        let lv = a.apply(&v);
        let wv: Vec<C64> = v.iter().zip(&up).map(|(a, w)| a * w).collect();
        let lw = b.apply(&wv);
        for ((x, y), d) in lv.iter().zip(&lw).zip(&down) {
            assert!((x - y * d).norm() < 1e-9);
        }
    }

    #[test]
    fn eigs_near_fixture_and_methods_agree() {
        let g = make_grid(10.0 * PI, 128, 8, 0.5).unwrap();
        let front = trivial_front(g);
        let op = assemble_modal(1, 1.2, 0.2, &ModelSpec::default(), &front).unwrap();
        let dense = eigs_near(&op, c(0.0, 0.0), 4, EigenMethod::Dense).unwrap();
        let arnoldi = eigs_near(&op, c(0.0, 0.0), 4, EigenMethod::ShiftInvert { krylov: 60 }).unwrap();
        for (a, b) in dense.iter().zip(&arnoldi) {
            assert!((a.lambda - b.lambda).norm() < 1e-8);
            assert!(a.residual < RESIDUAL_TOL && b.residual < RESIDUAL_TOL);
        }
        assert!(eigs_near(&op, c(0.0, 0.0), 1000, EigenMethod::Dense).is_err());
    }

    #[test]
    fn aggregate_is_symmetric_in_ell() {
        let g = make_grid(10.0 * PI, 64, 8, 0.5).unwrap();
        let front = trivial_front(g);
        let spec = ModelSpec::default();
        let set = aggregate_spectrum(&[-1, 0, 1], 1.35, 0.2, 30, &spec, &front, EigenMethod::Dense).unwrap();
        assert_eq!(set.pairs.len(), 30);
        let set = aggregate_spectrum(&[-1, 0, 1], 1.35, 0.2, 192, &spec, &front, EigenMethod::Dense).unwrap();
        for w in set.pairs.windows(2) {
            assert!(w[0].lambda.norm() <= w[1].lambda.norm());
        }
        let plus: Vec<C64> = set.pairs.iter().filter(|p| p.ell == 1).map(|p| p.lambda).collect();
        let minus: Vec<C64> = set.pairs.iter().filter(|p| p.ell == -1).map(|p| p.lambda).collect();
        assert_eq!(plus, minus);
        let empty = aggregate_spectrum(&[], 1.35, 0.2, 30, &spec, &front, EigenMethod::Dense).unwrap();
        assert!(empty.pairs.is_empty());
    }

    #[test]
    fn hopf_on_a_small_grid() {
        let g = make_grid(20.0 * PI, 256, 8, 0.5).unwrap();
        let front = trivial_front(g);
        let spec = ModelSpec::default();
        let h = hopf_locate(1, (1.2, 1.5), 0.2, &spec, &front, HopfOptions::default()).unwrap();
        assert!(h.lambda.re.abs() < 1e-9);
        assert!((h.biorthogonality() - c(1.0, 0.0)).norm() < 1e-10);
        assert!((h.p.norm() - 1.0).abs() < 1e-10);
        let jmax =
            h.p.values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0;
        assert!(h.p.values[jmax].im.abs() < 1e-14 && h.p.values[jmax].re > 0.0);
        let (fd, formula) = crossing_speed_check(&h).unwrap();
        assert!((fd - formula).norm() < 1e-6 * formula.norm(), "{fd} vs {formula}");
        // rerun is stable
        let again = hopf_locate(1, (1.2, 1.5), 0.2, &spec, &front, HopfOptions::default()).unwrap();
        assert!(again.p.distance(&h.p) < 1e-8);
        let rot = h.rotated(PI / 3.0);
        assert!((rot.biorthogonality() - c(1.0, 0.0)).norm() < 1e-10);
    }
}
