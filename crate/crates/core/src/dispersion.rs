//! Spectral theory of the constant states `h ≡ ±1`: dispersion polynomial,
//! essential spectrum, double roots, pinching and linear spreading speeds.
//!
//! With `s = ν² − k²ℓ²` and background value `h`,
//! `d(λ,ν) = −s(s + h) + cν − λ`. The far field (`h = −1`) gives the
//! stable curve `λ(m) = −(−m²−k²ℓ²)[(−m²−k²ℓ²)−1] + icm`.

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};
use crate::poly::{companion_roots, cubic_roots};

/// State whose linearization is analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    /// Ahead of the quench, `h ≡ −1`.
    Stable,
    /// On the plateau, `h ≡ +1` (spinodally unstable).
    Unstable,
}

impl Background {
    pub fn h(self) -> f64 {
        match self {
            Background::Stable => -1.0,
            Background::Unstable => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionParams {
    pub k: f64,
    pub ell: i64,
    pub c: f64,
    pub background: Background,
}

impl DispersionParams {
    pub fn new(k: f64, ell: i64, c: f64, background: Background) -> Self {
        DispersionParams { k, ell, c, background }
    }

    pub fn with_speed(self, c: f64) -> Self {
        DispersionParams { c, ..self }
    }

    fn q(&self) -> f64 {
        (self.k * self.ell as f64).powi(2)
    }

    /// `λ` such that `d(λ,ν) = 0`, i.e. `−s(s+h) + cν`.
    pub fn symbol(&self, nu: C64) -> C64 {
        let s = nu * nu - self.q();
        -s * (s + self.background.h()) + nu * self.c
    }

    /// `∂ν d`.
    pub fn d_nu(&self, nu: C64) -> C64 {
        let s = nu * nu - self.q();
        -2.0 * nu * (2.0 * s + self.background.h()) + self.c
    }

    /// `∂ν² d`.
    pub fn d_nunu(&self, nu: C64) -> C64 {
        -12.0 * nu * nu + 4.0 * self.q() - 2.0 * self.background.h()
    }

    /// Coefficient of `ν²` in `d`.
    fn a2(&self) -> f64 {
        2.0 * self.q() - self.background.h()
    }
}

pub fn d_eval(lambda: C64, nu: C64, params: &DispersionParams) -> C64 {
    params.symbol(nu) - lambda
}

/// The four spatial roots of `d(λ,·)`, sorted by real part, largest first.
pub fn nu_roots(lambda: C64, params: &DispersionParams) -> Result<[C64; 4]> {
    let q = params.q();
    let h = params.background.h();
    // d = −ν⁴ + (2q−h)ν² + cν − q(q−h) − λ
    let coeffs = [
        C64::new(-q * (q - h), 0.0) - lambda,
        C64::new(params.c, 0.0),
        C64::new(params.a2(), 0.0),
        C64::new(0.0, 0.0),
        C64::new(-1.0, 0.0),
    ];
    let mut r = companion_roots(&coeffs)?;
    r.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok([r[0], r[1], r[2], r[3]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Essential,
    Absolute,
    BranchPointTrack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    /// `m`, the root offset, or the speed, depending on the curve kind.
    pub param: f64,
    pub lambda: C64,
    pub nu: C64,
    pub pinched: bool,
}

#[derive(Debug, Clone)]
pub struct BranchCurve {
    pub kind: CurveKind,
    pub samples: Vec<CurveSample>,
}

impl BranchCurve {
    pub const CSV_HEADER: &'static str = "param,Re_lambda,Im_lambda,Re_nu,Im_nu,pinched";

    pub fn csv_rows(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| {
                format!(
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                    s.param, s.lambda.re, s.lambda.im, s.nu.re, s.nu.im, s.pinched as u8
                )
            })
            .collect()
    }

    pub fn max_re(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.lambda.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sorted_params(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QuenchError::param("range", "non-finite sample"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Far-field essential spectrum `λ(m)` with `ν = im`.
pub fn essential_curve(params: &DispersionParams, m_values: &[f64]) -> Result<BranchCurve> {
    if params.background != Background::Stable {
        return Err(QuenchError::param(
            "background",
            "the essential spectrum curve is defined for the far field (h = -1)",
        ));
    }
    weighted_curve(params, 0.0, m_values)
}

/// Essential spectrum of the operator conjugated with `e^{ηx}`: `ν = −η + im`.
pub fn weighted_essential_curve(params: &DispersionParams, eta: f64, m_values: &[f64]) -> Result<BranchCurve> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(QuenchError::param("eta", "must be >= 0"));
    }
    weighted_curve(params, eta, m_values)
}

fn weighted_curve(params: &DispersionParams, eta: f64, m_values: &[f64]) -> Result<BranchCurve> {
    let samples = sorted_params(m_values)?
        .into_iter()
        .map(|m| {
            let nu = C64::new(-eta, m);
            CurveSample {
                param: m,
                lambda: params.symbol(nu),
                nu,
                pinched: false,
            }
        })
        .collect();
    Ok(BranchCurve {
        kind: CurveKind::Essential,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleRoot {
    pub lambda: C64,
    pub nu: C64,
    pub pinched: bool,
    pub params: DispersionParams,
}

impl DoubleRoot {
    pub fn residuals(&self) -> (f64, f64) {
        (
            d_eval(self.lambda, self.nu, &self.params).norm(),
            self.params.d_nu(self.nu).norm(),
        )
    }

    pub fn conj(&self) -> DoubleRoot {
        DoubleRoot {
            lambda: self.lambda.conj(),
            nu: self.nu.conj(),
            ..*self
        }
    }
}

/// The three critical points of `ν ↦ d(λ,ν)`, roots of the cubic `∂ν d = 0`.
pub fn critical_points(params: &DispersionParams) -> Result<[C64; 3]> {
    cubic_roots(
        C64::new(-4.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(2.0 * params.a2(), 0.0),
        C64::new(params.c, 0.0),
    )
}

const NEWTON_TOL: f64 = 1e-13;

/// Newton iteration on `(d, ∂ν d) = 0` from a seed `(λ, ν)`.
pub fn double_root(params: &DispersionParams, seed: (C64, C64)) -> Result<DoubleRoot> {
    let (mut lambda, mut nu) = seed;
    let mut res = f64::INFINITY;
    for _ in 0..60 {
        let f1 = d_eval(lambda, nu, params);
        let f2 = params.d_nu(nu);
        res = f1.norm().max(f2.norm());
        let scale = 1.0 + lambda.norm() + nu.norm().powi(4);
        if res < NEWTON_TOL * scale {
            let mut root = DoubleRoot {
                lambda,
                nu,
                pinched: false,
                params: *params,
            };
            root.pinched = pinching_check(&root)?;
            return Ok(root);
        }
        // [ -1  d_ν ; 0  d_νν ] [δλ; δν] = −[f1; f2]
        let dnn = params.d_nunu(nu);
        if dnn.norm() == 0.0 {
            break;
        }
        let dnu = -f2 / dnn;
        let dlam = f1 + params.d_nu(nu) * dnu;
        nu += dnu;
        lambda += dlam;
        if !(nu.re.is_finite() && nu.im.is_finite()) {
            break;
        }
    }
    Err(QuenchError::NoConvergence {
        what: "double root Newton",
        iterations: 60,
        residual: res,
    })
}

/// All double roots, seeded from the exact critical points.
pub fn double_roots(params: &DispersionParams) -> Result<Vec<DoubleRoot>> {
    critical_points(params)?
        .into_iter()
        .map(|nu| double_root(params, (params.symbol(nu), nu)))
        .collect()
}

/// Follows the two roots that coalesce at `root` along `λ + ρ e^{iθ}`,
/// `ρ: 0 → ∞`, and reports their final real parts.
fn track_splitting(root: &DoubleRoot, theta: f64) -> Result<(f64, f64)> {
    let p = &root.params;
    let dir = C64::from_polar(1.0, theta);
    let curv = p.d_nunu(root.nu).norm();
    // aim for an initial splitting of about 1e-3
    let rho0 = if curv > 1e-8 { 0.5 * curv * 1e-6 } else { 1e-9 };
    let rho_end = 1e8 * (1.0 + root.lambda.norm());

    let start = nu_roots(root.lambda + dir * rho0, p)?;
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| (start[a] - root.nu).norm().total_cmp(&(start[b] - root.nu).norm()));
    let (d1, d2) = ((start[idx[1]] - root.nu).norm(), (start[idx[2]] - root.nu).norm());
    if d2 < 3.0 * d1 {
        return Err(QuenchError::Tracking(format!(
            "more than two roots coalesce near nu = {:.6}",
            root.nu
        )));
    }
    let mut cur = [start[idx[0]], start[idx[1]]];
    let mut rho = rho0;
    let mut factor: f64 = 2.0;
    while rho < rho_end {
        let next_rho = (rho * factor).min(rho_end);
        let roots = nu_roots(root.lambda + dir * next_rho, p)?;
        let mut next = [C64::new(0.0, 0.0); 2];
        let mut chosen = [usize::MAX; 2];
        let mut ok = true;
        for (t, z) in cur.iter().enumerate() {
            let mut d: Vec<(usize, f64)> = roots.iter().map(|r| (r - z).norm()).enumerate().collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1));
            if d[1].1 < 2.0 * d[0].1 || chosen.contains(&d[0].0) {
                ok = false;
                break;
            }
            chosen[t] = d[0].0;
            next[t] = roots[d[0].0];
        }
        if ok {
            cur = next;
            rho = next_rho;
            factor = (factor * 1.5).min(2.0);
        } else {
            factor = 1.0 + (factor - 1.0) / 2.0;
            if factor - 1.0 < 1e-9 {
                return Err(QuenchError::Tracking(format!(
                    "roots could not be disambiguated at rho = {rho:.6e}"
                )));
            }
        }
    }
    Ok((cur[0].re, cur[1].re))
}

/// True when the two roots colliding at `root` end up in opposite half
/// planes as `λ → λ + ρ`, `ρ → +∞`.
pub fn pinching_check(root: &DoubleRoot) -> Result<bool> {
    let verdict = |(a, b): (f64, f64)| a.signum() != b.signum();
    match track_splitting(root, 0.0) {
        Ok(r) => Ok(verdict(r)),
        Err(QuenchError::Tracking(msg)) => {
            // exact collisions on the real ray are non-generic; tilt slightly
            let up = track_splitting(root, 1e-3).map(verdict);
            let down = track_splitting(root, -1e-3).map(verdict);
            match (up, down) {
                (Ok(a), Ok(b)) if a == b => Ok(a),
                _ => Err(QuenchError::Tracking(msg)),
            }
        }
        Err(e) => Err(e),
    }
}

/// Newton on the five real equations `d = 0`, `∂ν d = 0`, `Re λ = 0`
/// for the unknowns `(c, λ, ν)`.
fn neutral_newton(base: &DispersionParams, c0: f64, lambda0: C64, nu0: C64) -> Result<(f64, C64, C64)> {
    let (mut c, mut lam, mut nu) = (c0, lambda0, nu0);
    let mut res = f64::INFINITY;
    for _ in 0..50 {
        let p = base.with_speed(c);
        let f1 = d_eval(lam, nu, &p);
        let f2 = p.d_nu(nu);
        let f = [f1.re, f1.im, f2.re, f2.im, lam.re];
        res = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res < 1e-14 * (1.0 + c.abs() + nu.norm().powi(4)) {
            return Ok((c, lam, nu));
        }
        let g1 = p.d_nu(nu); // ∂f1/∂ν
        let g2 = p.d_nunu(nu); // ∂f2/∂ν
                               // columns: c, Re λ, Im λ, Re ν, Im ν
        let j = [
            [nu.re, -1.0, 0.0, g1.re, -g1.im],
            [nu.im, 0.0, -1.0, g1.im, g1.re],
            [1.0, 0.0, 0.0, g2.re, -g2.im],
            [0.0, 0.0, 0.0, g2.im, g2.re],
            [0.0, 1.0, 0.0, 0.0, 0.0],
        ];
        let a = Mat::<f64>::from_fn(5, 5, |r, k| j[r][k]);
        let b = Mat::<f64>::from_fn(5, 1, |r, _| -f[r]);
        let dz = a.partial_piv_lu().solve(&b);
        if (0..5).any(|r| !dz[(r, 0)].is_finite()) {
            break;
        }
        c += dz[(0, 0)];
        lam += C64::new(dz[(1, 0)], dz[(2, 0)]);
        nu += C64::new(dz[(3, 0)], dz[(4, 0)]);
    }
    Err(QuenchError::NoConvergence {
        what: "neutral double root Newton",
        iterations: 50,
        residual: res,
    })
}

/// Matches a new set of three critical points to the previous ordering.
fn match_three(prev: &[C64; 3], next: [C64; 3]) -> [C64; 3] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = PERMS
        .iter()
        .min_by(|a, b| {
            let ca: f64 = (0..3).map(|i| (prev[i] - next[a[i]]).norm()).sum();
            let cb: f64 = (0..3).map(|i| (prev[i] - next[b[i]]).norm()).sum();
            ca.total_cmp(&cb)
        })
        .expect("non-empty");
    [next[best[0]], next[best[1]], next[best[2]]]
}

/// Largest speed at which a pinched double root sits on the imaginary axis.
pub fn spreading_speed(ell: i64, k: f64, background: Background) -> Result<(f64, DoubleRoot)> {
    let base = DispersionParams::new(k, ell, 0.0, background);
    let c_max = 20.0;
    let steps = 1000;
    let speeds: Vec<f64> = (1..=steps).map(|j| c_max * j as f64 / steps as f64).collect();
    let mut prev = critical_points(&base.with_speed(speeds[0]))?;
    let mut candidates: Vec<(f64, DoubleRoot)> = Vec::new();
    for w in speeds.windows(2) {
        let p1 = base.with_speed(w[1]);
        let next = match_three(&prev, critical_points(&p1)?);
        let p0 = base.with_speed(w[0]);
        for i in 0..3 {
            let (r0, r1) = (p0.symbol(prev[i]).re, p1.symbol(next[i]).re);
            if r0.signum() != r1.signum() {
                let t = r0 / (r0 - r1);
                let c_guess = w[0] + t * (w[1] - w[0]);
                let nu_guess = prev[i] + (next[i] - prev[i]) * t;
                let lam_guess = C64::new(0.0, base.with_speed(c_guess).symbol(nu_guess).im);
                if let Ok((c, lam, nu)) = neutral_newton(&base, c_guess, lam_guess, nu_guess) {
                    if c > 0.0 {
                        let mut root = DoubleRoot {
                            lambda: lam,
                            nu,
                            pinched: false,
                            params: base.with_speed(c),
                        };
                        root.pinched = pinching_check(&root)?;
                        if root.pinched {
                            candidates.push((c, root));
                        }
                    }
                }
            }
        }
        prev = next;
    }
    candidates
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(a.1.lambda.im.total_cmp(&b.1.lambda.im)))
        .ok_or_else(|| {
            QuenchError::NoSpreadingSpeed(format!(
                "no pinched neutral double root for ell = {ell}, k = {k}, {background:?} background"
            ))
        })
}

/// Continues `d(λ,ν) = d(λ,ν+iγ) = 0` from a double root, `γ` taken from
/// `offsets` in order. The second equation is used in divided-difference
/// form, a cubic in `ν` that reduces to `∂ν d = 0` at `γ = 0`.
pub fn absolute_curve(root: &DoubleRoot, offsets: &[f64]) -> Result<BranchCurve> {
    let p = root.params;
    let a = p.a2();
    let roots_at = |g: f64| -> Result<[C64; 3]> {
        let dl = C64::new(0.0, g);
        cubic_roots(
            C64::new(-4.0, 0.0),
            -6.0 * dl,
            2.0 * a - 4.0 * dl * dl,
            a * dl - dl * dl * dl + p.c,
        )
    };
    let mut samples = Vec::with_capacity(offsets.len());
    let mut nu = root.nu;
    let mut gamma = 0.0;
    for &target in offsets {
        if !target.is_finite() {
            return Err(QuenchError::param("offsets", "non-finite"));
        }
        // step toward the target with halving when matching is ambiguous
        let mut step = target - gamma;
        let mut guard = 0;
        while (target - gamma).abs() > 0.0 {
            guard += 1;
            if guard > 10_000 {
                return Err(QuenchError::Tracking("absolute curve continuation stalled".into()));
            }
            let g = if (target - gamma).abs() <= step.abs() {
                target
            } else {
                gamma + step
            };
            let roots = roots_at(g)?;
            let mut d: Vec<(usize, f64)> = roots.iter().map(|r| (r - nu).norm()).enumerate().collect();
            d.sort_by(|x, y| x.1.total_cmp(&y.1));
            if d[1].1 > 2.0 * d[0].1 || d[0].1 < 1e-12 {
                nu = roots[d[0].0];
                gamma = g;
                step = (target - gamma).max(-step.abs()).min(step.abs()) * 1.0;
                if step == 0.0 {
                    step = target - gamma;
                }
            } else {
                step /= 2.0;
                if step.abs() < 1e-12 {
                    return Err(QuenchError::Tracking(format!(
                        "absolute curve root ambiguous at offset {gamma:.6}"
                    )));
                }
            }
        }
        samples.push(CurveSample {
            param: target,
            lambda: p.symbol(nu),
            nu,
            pinched: root.pinched,
        });
    }
    Ok(BranchCurve {
        kind: CurveKind::Absolute,
        samples,
    })
}

fn leading_pinched(params: &DispersionParams) -> Result<Option<DoubleRoot>> {
    let roots = double_roots(params)?;
    Ok(roots.into_iter().filter(|r| r.pinched).max_by(|a, b| {
        a.lambda
            .re
            .total_cmp(&b.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    }))
}

/// Real part of the leading pinched branch point over `c_values`, and the
/// bisection-refined speed where it crosses zero (last crossing in range).
pub fn branch_point_track(ell: i64, k: f64, c_values: &[f64]) -> Result<(BranchCurve, f64)> {
    let base = DispersionParams::new(k, ell, 0.0, Background::Unstable);
    let cs = sorted_params(c_values)?;
    let mut samples = Vec::with_capacity(cs.len());
    for &c in &cs {
        if let Some(r) = leading_pinched(&base.with_speed(c))? {
            samples.push(CurveSample {
                param: c,
                lambda: r.lambda,
                nu: r.nu,
                pinched: true,
            });
        }
    }
    let curve = BranchCurve {
        kind: CurveKind::BranchPointTrack,
        samples,
    };
    let bracket = curve
        .samples
        .windows(2)
        .rfind(|w| w[0].lambda.re.signum() != w[1].lambda.re.signum())
        .map(|w| (w[0].param, w[1].param, w[0].lambda.re));
    let (mut lo, mut hi, f_lo) = bracket.ok_or(QuenchError::NoSignChange {
        what: "branch point real part",
        lo: cs.first().copied().unwrap_or(f64::NAN),
        hi: cs.last().copied().unwrap_or(f64::NAN),
    })?;
    let s_lo = f_lo.signum();
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        let f = leading_pinched(&base.with_speed(mid))?
            .map(|r| r.lambda.re)
            .ok_or_else(|| QuenchError::Tracking(format!("no pinched root at c = {mid}")))?;
        if f.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((curve, 0.5 * (lo + hi)))
}

/// Roots of `ν³ + f'ν − c = 0` with counts by sign of the real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyCubic {
    pub roots: [C64; 3],
    pub positive: usize,
    pub negative: usize,
    pub imaginary: usize,
}

pub fn steady_cubic_roots(c: f64, f_prime: f64) -> Result<SteadyCubic> {
    let mut roots = cubic_roots(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(f_prime, 0.0),
        C64::new(-c, 0.0),
    )?;
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let tol = 1e-12 * (1.0 + c.abs() + f_prime.abs());
    let positive = roots.iter().filter(|r| r.re > tol).count();
    let negative = roots.iter().filter(|r| r.re < -tol).count();
    Ok(SteadyCubic {
        roots,
        positive,
        negative,
        imaginary: 3 - positive - negative,
    })
}
