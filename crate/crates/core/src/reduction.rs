//! Cubic coefficients of the reduced O(2)-Hopf bifurcation equations.
//!
//! The kernel at `c_*` is spanned by `a e^{i(τ+y)} p + b e^{i(τ−y)} p` and
//! conjugates. Quadratic corrections `φ` are solved mode by mode; the cubic
//! coefficients `θ₁, θ₂` follow by projection on the adjoint. Everything is
//! evaluated in the weighted frame of the [`HopfData`], where the discrete
//! problems are well conditioned.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};
use crate::linalg;
use crate::linop::{apply_weighted_dell, assemble_modal, exp_weight, HopfData};
use crate::model::{FrontProfile, ModelSpec};
use crate::spectral::{dot, ChannelGrid, Field, ModalProfile};

/// Kernel amplitudes; the mode each one multiplies is `(ℓτ, ℓy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Amp {
    A,
    ABar,
    B,
    BBar,
}

impl Amp {
    fn modes(self) -> (i64, i64) {
        match self {
            Amp::A => (1, 1),
            Amp::ABar => (-1, -1),
            Amp::B => (1, -1),
            Amp::BBar => (-1, 1),
        }
    }

    fn conj(self) -> Amp {
        match self {
            Amp::A => Amp::ABar,
            Amp::ABar => Amp::A,
            Amp::B => Amp::BBar,
            Amp::BBar => Amp::B,
        }
    }

    fn is_conj(self) -> bool {
        matches!(self, Amp::ABar | Amp::BBar)
    }

    fn label(self) -> &'static str {
        match self {
            Amp::A => "a",
            Amp::ABar => "abar",
            Amp::B => "b",
            Amp::BBar => "bbar",
        }
    }
}

/// Quadratic monomial whose correction `φ` is sought.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhiTag(pub Amp, pub Amp);

impl PhiTag {
    pub const AA: PhiTag = PhiTag(Amp::A, Amp::A);
    pub const A_ABAR: PhiTag = PhiTag(Amp::A, Amp::ABar);
    pub const AB: PhiTag = PhiTag(Amp::A, Amp::B);
    pub const A_BBAR: PhiTag = PhiTag(Amp::A, Amp::BBar);
    pub const BB: PhiTag = PhiTag(Amp::B, Amp::B);
    pub const B_BBAR: PhiTag = PhiTag(Amp::B, Amp::BBar);
    pub const ABAR_B: PhiTag = PhiTag(Amp::ABar, Amp::B);

    /// `(ℓτ, ℓy)` of the monomial.
    pub fn modes(self) -> (i64, i64) {
        let (a, b) = (self.0.modes(), self.1.modes());
        (a.0 + b.0, a.1 + b.1)
    }

    pub fn conj(self) -> PhiTag {
        PhiTag(self.0.conj(), self.1.conj())
    }
}

impl fmt::Display for PhiTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phi_{}_{}", self.0.label(), self.1.label())
    }
}

/// Eigenfunctions multiplying `a` and `b`. They are separate solves of the
/// `ℓ = 1` and `ℓ = −1` blocks and coincide up to solver tolerance.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<'a> {
    pub a: &'a HopfData,
    pub b: &'a HopfData,
}

impl<'a> Kernel<'a> {
    pub fn new(a: &'a HopfData, b: &'a HopfData) -> Result<Self> {
        if a.p.grid != b.p.grid || a.eta != b.eta || (a.c_star - b.c_star).abs() > 1e-12 {
            return Err(QuenchError::GridMismatch("kernel modes from different setups".into()));
        }
        Ok(Kernel { a, b })
    }

    /// Uses the `a` mode for both amplitudes.
    pub fn symmetric(a: &'a HopfData) -> Self {
        Kernel { a, b: a }
    }

    fn hopf(&self) -> &HopfData {
        self.a
    }

    /// `(weighted, unweighted)` profile multiplying an amplitude.
    fn profiles(&self, amp: Amp) -> (Vec<C64>, Vec<C64>) {
        let h = match amp {
            Amp::A | Amp::ABar => self.a,
            Amp::B | Amp::BBar => self.b,
        };
        if amp.is_conj() {
            (
                h.p_weighted.values.iter().map(|z| z.conj()).collect(),
                h.p.values.iter().map(|z| z.conj()).collect(),
            )
        } else {
            (h.p_weighted.values.clone(), h.p.values.clone())
        }
    }
}

/// Diagnostics of the bordered `(0,0)` solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Border {
    /// Multiplier of the constant mode; zero for a consistent right-hand side.
    pub multiplier: C64,
    /// `|mean(φ)|` of the unweighted solution.
    pub mean_defect: f64,
}

#[derive(Debug, Clone)]
pub struct PhiSolution {
    pub tag: PhiTag,
    /// `e^{ηx} φ`.
    pub weighted: ModalProfile,
    /// `‖Aφ − rhs‖∞ / max(1, ‖rhs‖∞)` in the weighted frame.
    pub residual: f64,
    /// Mean of the unweighted right-hand side (zero when `ℓy = 0`).
    pub rhs_mean: C64,
    pub border: Option<Border>,
}

impl PhiSolution {
    /// Unweighted profile. Rounding is amplified by `e^{ηM}` at `x = −M`.
    pub fn profile(&self, eta: f64) -> ModalProfile {
        let down = exp_weight(&self.weighted.grid, eta, -1.0);
        self.weighted.times_real(&down)
    }
}

fn f_derivative(front: &FrontProfile, spec: &ModelSpec, order: u32) -> Vec<f64> {
    front.sample_derivative(spec, order)
}

/// `e^{ηx}(½ f_uu P₁ P₂)`, with one factor weighted and one not.
fn quadratic_source(kernel: &Kernel, tag: PhiTag, fuu: &[f64]) -> Vec<C64> {
    let (w1, _) = kernel.profiles(tag.0);
    let (_, u2) = kernel.profiles(tag.1);
    w1.iter().zip(&u2).zip(fuu).map(|((a, b), f)| 0.5 * f * a * b).collect()
}

/// Solves `(iℓτω_* − L_{ℓy}(c_*)) φ = −D_{ℓy}(½ f_uu P₁P₂)`.
///
/// The `(0,0)` system is bordered by the constant mode and the zero-mean
/// constraint.
pub fn solve_phi(tag: PhiTag, kernel: &Kernel, spec: &ModelSpec, front: &FrontProfile) -> Result<PhiSolution> {
    let hopf = kernel.hopf();
    let grid: Arc<ChannelGrid> = hopf.p.grid.clone();
    grid.check_same(&front.grid)?;
    let (lt, ly) = tag.modes();
    let eta = hopf.eta;
    let n = grid.nx();
    let fuu = f_derivative(front, spec, 2);

    let source = quadratic_source(kernel, tag, &fuu);
    let rhs: Vec<C64> = apply_weighted_dell(&grid, ly, eta, &source)
        .into_iter()
        .map(|z| -z)
        .collect();

    // mean of the unweighted right-hand side, from the unweighted factors
    let (_, u1) = kernel.profiles(tag.0);
    let (_, u2) = kernel.profiles(tag.1);
    let raw: Vec<C64> = u1
        .iter()
        .zip(&u2)
        .zip(&fuu)
        .map(|((a, b), f)| 0.5 * f * a * b)
        .collect();
    let raw_rhs = apply_weighted_dell(&grid, ly, 0.0, &raw);
    let rhs_mean = -raw_rhs.iter().sum::<C64>() / n as f64;

    let op = assemble_modal(ly, hopf.c_star, eta, spec, front)?;
    let shift = C64::new(0.0, lt as f64 * hopf.omega_star);
    let a = Mat::<C64>::from_fn(n, n, |i, j| {
        let d = if i == j { shift } else { C64::new(0.0, 0.0) };
        d - op.matrix[(i, j)]
    });
    let rhs_scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);

    let (phi, border) = if (lt, ly) == (0, 0) {
        let m = grid.half_width();
        let x = grid.x();
        // weighted image of the constant 1 and the unweighted mean functional
        let col: Vec<f64> = x.iter().map(|&x| (eta * (x - m)).exp()).collect();
        let row: Vec<f64> = x.iter().map(|&x| (-eta * (x + m)).exp() / n as f64).collect();
        let big = Mat::<C64>::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => a[(i, j)],
            (true, false) => C64::new(col[i], 0.0),
            (false, true) => C64::new(row[j], 0.0),
            (false, false) => C64::new(0.0, 0.0),
        });
        let b = Mat::<C64>::from_fn(n + 1, 1, |i, _| if i < n { rhs[i] } else { C64::new(0.0, 0.0) });
        let sol = solve_dense(&big, &b)?;
        let phi: Vec<C64> = sol[..n].to_vec();
        let mean: C64 = phi
            .iter()
            .zip(&x.iter().map(|&x| (-eta * x).exp()).collect::<Vec<_>>())
            .map(|(p, w)| p * w)
            .sum::<C64>()
            / n as f64;
        (
            phi,
            Some(Border {
                multiplier: sol[n],
                mean_defect: mean.norm(),
            }),
        )
    } else {
        let b = Mat::<C64>::from_fn(n, 1, |i, _| rhs[i]);
        (solve_dense(&a, &b)?, None)
    };

    let aphi = linalg::matvec(&a, &phi);
    let border_term: Vec<C64> = match &border {
        Some(bd) => {
            let m = grid.half_width();
            grid.x()
                .iter()
                .map(|&x| bd.multiplier * (eta * (x - m)).exp())
                .collect()
        }
        None => vec![C64::new(0.0, 0.0); n],
    };
    let residual = aphi
        .iter()
        .zip(&rhs)
        .zip(&border_term)
        .map(|((l, r), b)| (l + b - r).norm())
        .fold(0.0, f64::max)
        / rhs_scale;
    if residual > 1e-9 {
        return Err(QuenchError::Hypothesis(format!(
            "{tag} system is numerically singular (relative residual {residual:.3e}); iω multiple resonates with mode {ly}"
        )));
    }
    Ok(PhiSolution {
        tag,
        weighted: ModalProfile::new(grid, ly, phi)?,
        residual,
        rhs_mean,
        border,
    })
}

fn solve_dense(a: &Mat<C64>, b: &Mat<C64>) -> Result<Vec<C64>> {
    use faer::linalg::solvers::Solve;
    let x = a.partial_piv_lu().solve(b);
    let v: Vec<C64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(v)
    } else {
        Err(QuenchError::LinearAlgebra("singular correction system".into()))
    }
}

/// The four corrections entering `θ₁` and `θ₂`, plus the `b`-route ones
/// that `θ₂` actually uses.
#[derive(Debug, Clone)]
pub struct PhiSet {
    pub aa: PhiSolution,
    pub a_abar: PhiSolution,
    pub ab: PhiSolution,
    pub a_bbar: PhiSolution,
    pub b_bbar: PhiSolution,
}

impl PhiSet {
    pub fn solve(kernel: &Kernel, spec: &ModelSpec, front: &FrontProfile) -> Result<Self> {
        Ok(PhiSet {
            aa: solve_phi(PhiTag::AA, kernel, spec, front)?,
            a_abar: solve_phi(PhiTag::A_ABAR, kernel, spec, front)?,
            ab: solve_phi(PhiTag::AB, kernel, spec, front)?,
            a_bbar: solve_phi(PhiTag::A_BBAR, kernel, spec, front)?,
            b_bbar: solve_phi(PhiTag::B_BBAR, kernel, spec, front)?,
        })
    }

    pub fn max_residual(&self) -> f64 {
        [&self.aa, &self.a_abar, &self.ab, &self.a_bbar, &self.b_bbar]
            .iter()
            .map(|s| s.residual)
            .fold(0.0, f64::max)
    }
}

/// `(θ₁, θ₂)` as unweighted `L²` products against `ψ₊`.
pub fn theta_coeffs(kernel: &Kernel, phis: &PhiSet, spec: &ModelSpec, front: &FrontProfile) -> Result<(C64, C64)> {
    let hopf = kernel.hopf();
    let grid = hopf.p.grid.clone();
    grid.check_same(&front.grid)?;
    let fuu = f_derivative(front, spec, 2);
    let fuuu = f_derivative(front, spec, 3);
    let (pw, p) = kernel.profiles(Amp::A);
    let (_, pbar) = kernel.profiles(Amp::ABar);
    let (_, pb) = kernel.profiles(Amp::B);
    let (_, pbbar) = kernel.profiles(Amp::BBar);
    let n = grid.nx();
    // e^{ηx}(P Q R) = P̃ Q R and e^{ηx}(P φ) = P φ̃
    let cubic_aa: Vec<C64> = (0..n).map(|j| pw[j] * p[j] * pbar[j]).collect();
    let cubic_ab: Vec<C64> = (0..n).map(|j| pw[j] * pb[j] * pbbar[j]).collect();
    let w = |s: &PhiSolution| s.weighted.values.clone();
    let (aa, a_abar, ab, a_bbar, b_bbar) = (
        w(&phis.aa),
        w(&phis.a_abar),
        w(&phis.ab),
        w(&phis.a_bbar),
        w(&phis.b_bbar),
    );

    let inner1: Vec<C64> = (0..n)
        .map(|j| 0.5 * fuuu[j] * cubic_aa[j] + fuu[j] * (p[j] * a_abar[j] + pbar[j] * aa[j]))
        .collect();
    let inner2: Vec<C64> = (0..n)
        .map(|j| fuuu[j] * cubic_ab[j] + fuu[j] * (p[j] * b_bbar[j] + pb[j] * a_bbar[j] + pbbar[j] * ab[j]))
        .collect();
    let project = |v: Vec<C64>| -> C64 {
        let d = apply_weighted_dell(&grid, 1, hopf.eta, &v);
        -dot(&d, &hopf.psi_weighted.values)
    };
    Ok((project(inner1), project(inner2)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BifType {
    Type1,
    Type2,
    Type3,
    Type4,
    Degenerate(String),
}

impl fmt::Display for BifType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BifType::Type1 => write!(f, "1"),
            BifType::Type2 => write!(f, "2"),
            BifType::Type3 => write!(f, "3"),
            BifType::Type4 => write!(f, "4"),
            BifType::Degenerate(_) => write!(f, "degenerate"),
        }
    }
}

/// Side of `c_*` on which a branch exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSide {
    Below,
    Above,
    Undetermined,
}

impl fmt::Display for BranchSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BranchSide::Below => "below",
            BranchSide::Above => "above",
            BranchSide::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct LSReport {
    pub theta1: C64,
    pub theta2: C64,
    pub alpha: f64,
    pub beta: f64,
    pub bif_type: BifType,
    pub c_star: f64,
    pub omega_star: f64,
    pub mu_prime: f64,
    /// `c_os − c_* = oblique_coeff · a²`.
    pub oblique_coeff: f64,
    /// `c_cb − c_* = checkerboard_coeff · a²`.
    pub checkerboard_coeff: f64,
    pub oblique_side: BranchSide,
    pub checkerboard_side: BranchSide,
}

fn side(coeff: f64) -> BranchSide {
    if coeff < 0.0 {
        BranchSide::Below
    } else if coeff > 0.0 {
        BranchSide::Above
    } else {
        BranchSide::Undetermined
    }
}

/// `(α, β, type)` from the rule table on `α = Re(θ₁+θ₂)/2`, `β = Re(θ₂−θ₁)/2`.
pub fn classify(theta1: C64, theta2: C64) -> (f64, f64, BifType) {
    let alpha = (theta1.re + theta2.re) / 2.0;
    let beta = (theta2.re - theta1.re) / 2.0;
    let scale = 1e-12 * (theta1.norm() + theta2.norm()).max(f64::MIN_POSITIVE);
    let t = if alpha.abs() <= scale || beta.abs() <= scale || (alpha - beta).abs() <= scale {
        BifType::Degenerate("higher-order terms required".into())
    } else if alpha < 0.0 && beta > 0.0 {
        BifType::Type1
    } else if alpha > 0.0 && beta < 0.0 {
        BifType::Type3
    } else if alpha > 0.0 {
        if alpha > beta {
            BifType::Type3
        } else {
            BifType::Type2
        }
    } else if alpha < beta {
        BifType::Type1
    } else {
        BifType::Type4
    };
    (alpha, beta, t)
}

impl LSReport {
    pub fn new(theta1: C64, theta2: C64, hopf: &HopfData) -> Result<Self> {
        if hopf.mu_prime == 0.0 || !hopf.mu_prime.is_finite() {
            return Err(QuenchError::Hypothesis("crossing is not transversal (mu' = 0)".into()));
        }
        let (alpha, beta, bif_type) = classify(theta1, theta2);
        let oblique_coeff = -theta1.re / hopf.mu_prime;
        let checkerboard_coeff = -(theta1.re + theta2.re) / hopf.mu_prime;
        Ok(LSReport {
            theta1,
            theta2,
            alpha,
            beta,
            bif_type,
            c_star: hopf.c_star,
            omega_star: hopf.omega_star,
            mu_prime: hopf.mu_prime,
            oblique_coeff,
            checkerboard_coeff,
            oblique_side: side(oblique_coeff),
            checkerboard_side: side(checkerboard_coeff),
        })
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_key_values(&self) -> String {
        let rows = [
            ("theta1_re", format!("{:.12e}", self.theta1.re)),
            ("theta1_im", format!("{:.12e}", self.theta1.im)),
            ("theta2_re", format!("{:.12e}", self.theta2.re)),
            ("theta2_im", format!("{:.12e}", self.theta2.im)),
            ("alpha", format!("{:.12e}", self.alpha)),
            ("beta", format!("{:.12e}", self.beta)),
            ("bif_type", self.bif_type.to_string()),
            ("c_star", format!("{:.12e}", self.c_star)),
            ("omega_star", format!("{:.12e}", self.omega_star)),
            ("mu_prime", format!("{:.12e}", self.mu_prime)),
            ("oblique_coeff", format!("{:.12e}", self.oblique_coeff)),
            ("checkerboard_coeff", format!("{:.12e}", self.checkerboard_coeff)),
            ("oblique_side", self.oblique_side.to_string()),
            ("checkerboard_side", self.checkerboard_side.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Full pipeline: corrections, coefficients, report.
pub fn reduce(kernel: &Kernel, spec: &ModelSpec, front: &FrontProfile) -> Result<(PhiSet, LSReport)> {
    let phis = PhiSet::solve(kernel, spec, front)?;
    let (t1, t2) = theta_coeffs(kernel, &phis, spec, front)?;
    let report = LSReport::new(t1, t2, kernel.hopf())?;
    Ok((phis, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub a: f64,
    pub c_oblique: f64,
    pub c_checkerboard: f64,
}

pub fn predict_branches(report: &LSReport, a_values: &[f64]) -> Vec<BranchPoint> {
    a_values
        .iter()
        .map(|&a| BranchPoint {
            a,
            c_oblique: report.c_star + report.oblique_coeff * a * a,
            c_checkerboard: report.c_star + report.checkerboard_coeff * a * a,
        })
        .collect()
}

/// Amplitude `a` on each branch at speed `c`, if the branch exists there.
pub fn amplitude_at(report: &LSReport, c: f64) -> (Option<f64>, Option<f64>) {
    let inv = |k: f64| {
        let a2 = (c - report.c_star) / k;
        (k != 0.0 && a2 >= 0.0).then(|| a2.sqrt())
    };
    (inv(report.oblique_coeff), inv(report.checkerboard_coeff))
}

/// `u_* + 2a Re(e^{i(τ+y)} p(x))`.
pub fn oblique_field(front: &FrontProfile, p: &ModalProfile, a: f64, tau: f64) -> Result<Field> {
    leading_field(front, p, |x_idx, y| {
        let z = C64::from_polar(1.0, tau + y) * p.values[x_idx];
        2.0 * a * z.re
    })
}

/// `u_* + 4a cos(y) Re(e^{iτ} p(x))`.
pub fn checkerboard_field(front: &FrontProfile, p: &ModalProfile, a: f64, tau: f64) -> Result<Field> {
    leading_field(front, p, |x_idx, y| {
        let z = C64::from_polar(1.0, tau) * p.values[x_idx];
        4.0 * a * y.cos() * z.re
    })
}

fn leading_field(front: &FrontProfile, p: &ModalProfile, f: impl Fn(usize, f64) -> f64) -> Result<Field> {
    let grid = front.grid.clone();
    grid.check_same(&p.grid)?;
    let ys = grid.y();
    let ny = grid.ny();
    let mut values = vec![0.0; grid.nx() * ny];
    for i in 0..grid.nx() {
        for (j, &y) in ys.iter().enumerate() {
            values[i * ny + j] = front.values[i] + f(i, y);
        }
    }
    Field::new(grid, values, 0.0)
}

/// Cubic terms `(θ₁a|a|² + θ₂a|b|², θ₁b|b|² + θ₂b|a|²)`.
pub fn cubic_terms(theta1: C64, theta2: C64, a: C64, b: C64) -> (C64, C64) {
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    (theta1 * a * na + theta2 * a * nb, theta1 * b * nb + theta2 * b * na)
}

/// The same terms through the invariants `N = |a|²+|b|²`, `δ = |b|²−|a|²`.
pub fn cubic_terms_invariant(theta1: C64, theta2: C64, a: C64, b: C64) -> (C64, C64) {
    let n = a.norm_sqr() + b.norm_sqr();
    let delta_amp = b.norm_sqr() - a.norm_sqr();
    let sym = (theta1 + theta2) / 2.0;
    let anti = (theta2 - theta1) / 2.0;
    (a * (sym * n + anti * delta_amp), b * (sym * n - anti * delta_amp))
}
