//! Pseudospectral IMEX time stepping in the co-moving frame.
//!
//! The constant-coefficient part `−Δ_k² u − SΔ_k u + c∂x u` is advanced by
//! Crank–Nicolson, the rest (`−Δ_k(f(x,u) + Su) + cχ`) by second-order
//! Adams–Bashforth with an explicit Euler start. `S` is a stabilizing
//! splitting constant: it cancels exactly in the continuous equation.

mod checkpoint;
mod relax;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QuenchError, Result};
use crate::linop::HopfData;
use crate::model::{quench_h, FrontProfile, ModelSpec};
use crate::spectral::{mode_pairs, ChannelGrid, Field, ModalProfile, PlaneTransform, PAD_FACTOR};

pub use checkpoint::{checkpoint_load, checkpoint_save, read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use relax::{
    adiabatic_continuation, classify_pattern, relax, BranchEnd, BranchSample, ContinuationBranch, Direction,
    PatternClass, PatternReport, ProbeSeries, RelaxOptions, RelaxOutcome, RelaxStatus,
};

/// Discrete subgroups of the transverse symmetry that a run may be
/// restricted to. Projection removes only rounding noise when the state
/// already has the symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SymmetryConstraint {
    /// `u(x, y+π) = −u(x, y)`: keeps odd transverse modes only. Needs a
    /// trivial front, no source and an odd nonlinearity.
    pub half_shift_odd: bool,
    /// `u(x, −y) = u(x, y)`.
    pub reflection: bool,
}

impl SymmetryConstraint {
    pub const NONE: Self = SymmetryConstraint {
        half_shift_odd: false,
        reflection: false,
    };
    pub const ODD: Self = SymmetryConstraint {
        half_shift_odd: true,
        reflection: false,
    };
    pub const ODD_REFLECTED: Self = SymmetryConstraint {
        half_shift_odd: true,
        reflection: true,
    };

    pub fn is_none(&self) -> bool {
        !self.half_shift_odd && !self.reflection
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    /// Splitting constant `S`.
    pub stabilization: f64,
    pub symmetry: SymmetryConstraint,
}

impl Default for StepParams {
    fn default() -> Self {
        StepParams {
            dt: 5e-3,
            stabilization: 3.0,
            symmetry: SymmetryConstraint::NONE,
        }
    }
}

/// Time-stepping state. Spectral coefficients (unnormalized forward FFT)
/// are authoritative; `field` is kept in sync after every step.
#[derive(Debug, Clone)]
pub struct SimState {
    pub field: Field,
    coeffs: Vec<C64>,
    prev_nonlinear: Option<Vec<C64>>,
    pub t: f64,
    pub step_count: u64,
}

impl SimState {
    pub fn from_field(field: Field) -> Self {
        let grid = field.grid.clone();
        let mut coeffs: Vec<C64> = field.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        PlaneTransform::new(grid.nx(), grid.ny()).forward(&mut coeffs);
        zero_nyquist(&grid, &mut coeffs);
        SimState {
            t: field.time,
            field,
            coeffs,
            prev_nonlinear: None,
            step_count: 0,
        }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.field.grid
    }

    pub fn has_history(&self) -> bool {
        self.prev_nonlinear.is_some()
    }

    /// Drops the multistep history so the next step restarts with Euler.
    pub fn clear_history(&mut self) {
        self.prev_nonlinear = None;
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / self.coeffs.len() as f64
    }

    /// `u(x, y) ↦ u(x, y + shift·2π/n_y)`.
    pub fn shifted_y(&self, shift: usize) -> SimState {
        self.map_y(|j, ny| (j + shift) % ny)
    }

    /// `u(x, y) ↦ u(x, −y)`.
    pub fn reflected_y(&self) -> SimState {
        self.map_y(|j, ny| (ny - j) % ny)
    }

    fn map_y(&self, src: impl Fn(usize, usize) -> usize) -> SimState {
        let grid = self.grid().clone();
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut values = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                values[i * ny + j] = self.field.values[i * ny + src(j, ny)];
            }
        }
        let mut out = SimState::from_field(Field {
            grid: grid.clone(),
            values,
            time: self.t,
        });
        out.step_count = self.step_count;
        if let Some(prev) = &self.prev_nonlinear {
            // the history transforms like the field; do it in physical space
            let mut t = PlaneTransform::new(nx, ny);
            let mut phys = prev.clone();
            t.inverse(&mut phys);
            let mut moved = vec![C64::new(0.0, 0.0); nx * ny];
            for i in 0..nx {
                for j in 0..ny {
                    moved[i * ny + j] = phys[i * ny + src(j, ny)];
                }
            }
            t.forward(&mut moved);
            out.prev_nonlinear = Some(moved);
        }
        out
    }
}

fn zero_nyquist(grid: &ChannelGrid, coeffs: &mut [C64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        coeffs[(nx / 2) * ny + j] = C64::new(0.0, 0.0);
    }
    for i in 0..nx {
        coeffs[i * ny + ny / 2] = C64::new(0.0, 0.0);
    }
}

/// Precomputed symbols, transforms and work buffers for one trajectory.
pub struct Stepper {
    spec: ModelSpec,
    front: FrontProfile,
    params: StepParams,
    grid: Arc<ChannelGrid>,
    sigma: Vec<f64>,
    advect: Vec<f64>,
    cn_explicit: Vec<C64>,
    cn_implicit_inv: Vec<C64>,
    h_fine: Vec<f64>,
    source_hat: Vec<C64>,
    pairs: Vec<(usize, usize)>,
    coarse: PlaneTransform,
    fine: PlaneTransform,
    fine_buf: Vec<C64>,
    by: usize,
}

impl Stepper {
    pub fn new(spec: &ModelSpec, front: &FrontProfile, params: StepParams) -> Result<Self> {
        spec.validate()?;
        if !(params.dt.is_finite() && params.dt > 0.0) {
            return Err(QuenchError::param("dt", "must be positive"));
        }
        if !(params.stabilization.is_finite() && params.stabilization >= 0.0) {
            return Err(QuenchError::param("stabilization", "must be non-negative"));
        }
        let grid = front.grid.clone();
        if (spec.k - grid.k()).abs() > 1e-14 {
            return Err(QuenchError::GridMismatch(format!(
                "model k = {} but grid k = {}",
                spec.k,
                grid.k()
            )));
        }
        if let crate::model::Source::Sampled(v) = &spec.source {
            if v.len() != grid.nx() {
                return Err(QuenchError::GridMismatch("source length differs from n_x".into()));
            }
        }
        if params.symmetry.half_shift_odd && (!front.is_trivial() || !spec.source.is_zero()) {
            return Err(QuenchError::Hypothesis(
                "half-shift parity needs a trivial front and no source".into(),
            ));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let (bx, by) = (PAD_FACTOR * nx, PAD_FACTOR * ny);
        let k2 = grid.k() * grid.k();
        let xi = grid.xi();
        let xi_odd = grid.xi_odd();
        let ell = grid.ell();
        let mut sigma = vec![0.0; nx * ny];
        let mut advect = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                sigma[i * ny + j] = xi[i] * xi[i] + k2 * (ell[j] * ell[j]) as f64;
                advect[i * ny + j] = xi_odd[i];
            }
        }
        let dxf = 2.0 * grid.half_width() / bx as f64;
        let h_fine = (0..bx)
            .map(|i| quench_h(-grid.half_width() + i as f64 * dxf, spec))
            .collect();
        let mut pairs = Vec::with_capacity(nx * ny);
        for (i, ii) in mode_pairs(nx, bx) {
            for (j, jj) in mode_pairs(ny, by) {
                pairs.push((i * ny + j, ii * by + jj));
            }
        }
        let mut coarse = PlaneTransform::new(nx, ny);
        let source_hat = match &spec.source {
            crate::model::Source::Zero => vec![C64::new(0.0, 0.0); nx * ny],
            crate::model::Source::Sampled(v) => {
                let mut buf: Vec<C64> = v
                    .iter()
                    .flat_map(|&s| std::iter::repeat_n(C64::new(s, 0.0), ny))
                    .collect();
                coarse.forward(&mut buf);
                zero_nyquist(&grid, &mut buf);
                buf
            }
        };
        let mut out = Stepper {
            spec: spec.clone(),
            front: front.clone(),
            params,
            grid,
            sigma,
            advect,
            cn_explicit: Vec::new(),
            cn_implicit_inv: Vec::new(),
            h_fine,
            source_hat,
            pairs,
            coarse,
            fine: PlaneTransform::new(bx, by),
            fine_buf: vec![C64::new(0.0, 0.0); bx * by],
            by,
        };
        out.rebuild();
        Ok(out)
    }

    fn rebuild(&mut self) {
        let (dt, s, c) = (self.params.dt, self.params.stabilization, self.spec.c);
        let lin: Vec<C64> = self
            .sigma
            .iter()
            .zip(&self.advect)
            .map(|(&sg, &xi)| C64::new(-sg * sg - s * sg, c * xi))
            .collect();
        self.cn_explicit = lin.iter().map(|a| 1.0 + 0.5 * dt * a).collect();
        self.cn_implicit_inv = lin.iter().map(|a| 1.0 / (1.0 - 0.5 * dt * a)).collect();
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn front(&self) -> &FrontProfile {
        &self.front
    }

    pub fn params(&self) -> &StepParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    /// Changes the quench speed. The multistep history stays valid because
    /// the explicit part does not depend on `c` except through `cχ`.
    pub fn set_speed(&mut self, c: f64) -> Result<()> {
        if !c.is_finite() {
            return Err(QuenchError::param("c", "must be finite"));
        }
        self.spec.c = c;
        self.rebuild();
        Ok(())
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QuenchError::param("dt", "must be positive"));
        }
        self.params.dt = dt;
        self.rebuild();
        Ok(())
    }

    /// `dt · max σ`, the explicit-part stiffness. Diagnostic only.
    pub fn stiffness(&self) -> f64 {
        self.params.dt * self.sigma.iter().cloned().fold(0.0, f64::max)
    }

    /// Spectrum of `−Δ_k(f(x,u) + Su) + cχ`, dealiased on the padded grid.
    fn nonlinear(&mut self, coeffs: &[C64]) -> Vec<C64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let by = self.by;
        let bx = self.h_fine.len();
        let scale = (bx * by) as f64 / (nx * ny) as f64;
        self.fine_buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for &(c, f) in &self.pairs {
            self.fine_buf[f] = coeffs[c] * scale;
        }
        self.fine.inverse(&mut self.fine_buf);
        let (gamma, s) = (self.spec.gamma, self.params.stabilization);
        for (i, row) in self.fine_buf.chunks_mut(by).enumerate() {
            let h = self.h_fine[i];
            for v in row.iter_mut() {
                let u = v.re;
                let u2 = u * u;
                *v = C64::new(u * (h + s + gamma * u2 - u2 * u2), 0.0);
            }
        }
        self.fine.forward(&mut self.fine_buf);
        let inv = 1.0 / scale;
        let mut out = vec![C64::new(0.0, 0.0); nx * ny];
        for &(c, f) in &self.pairs {
            out[c] = self.fine_buf[f] * inv * self.sigma[c];
        }
        if !self.spec.source.is_zero() {
            let c = self.spec.c;
            out.iter_mut().zip(&self.source_hat).for_each(|(o, s)| *o += c * s);
        }
        out
    }

    fn project(&self, coeffs: &mut [C64]) {
        let sym = self.params.symmetry;
        if sym.is_none() {
            return;
        }
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let ell = self.grid.ell();
        for i in 0..nx {
            let row = &mut coeffs[i * ny..(i + 1) * ny];
            if sym.half_shift_odd {
                for j in 0..ny {
                    if ell[j] % 2 == 0 {
                        row[j] = C64::new(0.0, 0.0);
                    }
                }
            }
            if sym.reflection {
                for j in 1..ny / 2 {
                    let avg = 0.5 * (row[j] + row[ny - j]);
                    row[j] = avg;
                    row[ny - j] = avg;
                }
            }
        }
    }

    /// Applies the run's symmetry constraint to a state.
    pub fn constrain(&mut self, state: &mut SimState) -> Result<()> {
        if self.params.symmetry.is_none() {
            return Ok(());
        }
        self.project(&mut state.coeffs);
        if let Some(prev) = state.prev_nonlinear.as_mut() {
            let mut p = std::mem::take(prev);
            self.project(&mut p);
            *prev = p;
        }
        self.sync_field(state)
    }

    fn sync_field(&mut self, state: &mut SimState) -> Result<()> {
        let mut buf = state.coeffs.clone();
        self.coarse.inverse(&mut buf);
        for (v, b) in state.field.values.iter_mut().zip(&buf) {
            *v = b.re;
        }
        state.field.time = state.t;
        if let Some(bad) = state.field.values.iter().find(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(QuenchError::BlowUp {
                step: state.step_count,
                t: state.t,
                detail: format!("field value {bad}"),
            });
        }
        Ok(())
    }

    /// One IMEX step in place.
    pub fn advance(&mut self, state: &mut SimState) -> Result<()> {
        if state.field.grid != self.grid {
            return Err(QuenchError::GridMismatch("state and stepper grids differ".into()));
        }
        let dt = self.params.dt;
        let current = self.nonlinear(&state.coeffs);
        let next: Vec<C64> = match &state.prev_nonlinear {
            None => state
                .coeffs
                .iter()
                .zip(&current)
                .enumerate()
                .map(|(m, (u, n))| (self.cn_explicit[m] * u + dt * n) * self.cn_implicit_inv[m])
                .collect(),
            Some(prev) => state
                .coeffs
                .iter()
                .zip(current.iter().zip(prev))
                .enumerate()
                .map(|(m, (u, (n, p)))| (self.cn_explicit[m] * u + dt * (1.5 * n - 0.5 * p)) * self.cn_implicit_inv[m])
                .collect(),
        };
        state.coeffs = next;
        state.prev_nonlinear = Some(current);
        self.project(&mut state.coeffs);
        state.t += dt;
        state.step_count += 1;
        self.sync_field(state)
    }

    pub fn advance_n(&mut self, state: &mut SimState, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.advance(state)?;
        }
        Ok(())
    }

    /// Functional form of [`Stepper::advance`].
    pub fn step(&mut self, state: &SimState) -> Result<SimState> {
        let mut next = state.clone();
        self.advance(&mut next)?;
        Ok(next)
    }

    /// Deviation `u − u_*` on the grid.
    pub fn deviation(&self, state: &SimState) -> Vec<f64> {
        let ny = self.grid.ny();
        state
            .field
            .values
            .iter()
            .enumerate()
            .map(|(m, v)| v - self.front.values[m / ny])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    ObliquePlus,
    ObliqueMinus,
    Checkerboard,
    Stripes,
    Random,
}

impl std::str::FromStr for SeedKind {
    type Err = QuenchError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oblique+" => SeedKind::ObliquePlus,
            "oblique-" => SeedKind::ObliqueMinus,
            "checkerboard" => SeedKind::Checkerboard,
            "stripes" => SeedKind::Stripes,
            "random" => SeedKind::Random,
            _ => return Err(QuenchError::param("seed", format!("unknown seed kind `{s}`"))),
        })
    }
}

impl std::fmt::Display for SeedKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeedKind::ObliquePlus => "oblique+",
            SeedKind::ObliqueMinus => "oblique-",
            SeedKind::Checkerboard => "checkerboard",
            SeedKind::Stripes => "stripes",
            SeedKind::Random => "random",
        })
    }
}

/// Initial state `u_* + ansatz`. The mode profile is resampled onto the
/// front's grid when the resolutions differ. `rng_seed` only matters for
/// [`SeedKind::Random`].
pub fn seed(kind: SeedKind, amplitude: f64, hopf: &HopfData, front: &FrontProfile, rng_seed: u64) -> Result<SimState> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(QuenchError::param("amplitude", "must be non-negative"));
    }
    let grid = front.grid.clone();
    let p: ModalProfile = hopf.p.resample(grid.clone())?;
    let ys = grid.y();
    let ny = grid.ny();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut values = vec![0.0; grid.nx() * ny];
    for (i, &pv) in p.values.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let e = C64::from_polar(1.0, y);
            let ansatz = match kind {
                SeedKind::ObliquePlus => 2.0 * amplitude * (e * pv).re,
                SeedKind::ObliqueMinus => 2.0 * amplitude * (e.conj() * pv).re,
                SeedKind::Checkerboard => 4.0 * amplitude * y.cos() * pv.re,
                SeedKind::Stripes => 2.0 * amplitude * pv.re,
                SeedKind::Random => amplitude * rng.random_range(-1.0..=1.0),
            };
            values[i * ny + j] = front.values[i] + ansatz;
        }
    }
    Ok(SimState::from_field(Field::new(grid, values, 0.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{f_eval, trivial_front, Source};
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn small() -> (ModelSpec, FrontProfile) {
        let grid = make_grid(15.0 * PI, 128, 8, 0.5).unwrap();
        let spec = ModelSpec {
            plateau_half_width: 5.0 * PI,
            c: 1.0,
            ..Default::default()
        };
        (spec, trivial_front(grid))
    }

    fn bump(grid: &Arc<ChannelGrid>) -> SimState {
        let f = Field::from_fn(grid.clone(), |x, y| {
            0.1 * (-(x / 6.0).powi(2)).exp() * (1.0 + (y + 0.3).cos() + 0.5 * (2.0 * y).sin())
        });
        SimState::from_field(f)
    }

    #[test]
    fn zero_is_fixed() {
        let (spec, front) = small();
        let mut st = Stepper::new(&spec, &front, StepParams::default()).unwrap();
        let mut s = SimState::from_field(Field::zeros(front.grid.clone()));
        st.advance_n(&mut s, 20).unwrap();
        assert!(s.field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlinearity_matches_model() {
        let (spec, front) = small();
        let mut st = Stepper::new(
            &spec,
            &front,
            StepParams {
                stabilization: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let grid = front.grid.clone();
        let u = |x: f64, y: f64| 0.3 * (x / 15.0).sin() + 0.2 * y.cos();
        let s = SimState::from_field(Field::from_fn(grid.clone(), u));
        let n = st.nonlinear(&s.coeffs);
        // u has only the lowest modes, so sampling it on the fine grid is exact
        let (bx, by) = (PAD_FACTOR * grid.nx(), PAD_FACTOR * grid.ny());
        let m = grid.half_width();
        let mut buf: Vec<C64> = (0..bx * by)
            .map(|q| {
                let x = -m + 2.0 * m * (q / by) as f64 / bx as f64;
                let y = 2.0 * PI * (q % by) as f64 / by as f64;
                C64::new(f_eval(x, u(x, y), &spec), 0.0)
            })
            .collect();
        PlaneTransform::new(bx, by).forward(&mut buf);
        let scale = (grid.nx() * grid.ny()) as f64 / (bx * by) as f64;
        for (c, f) in mode_pairs(grid.nx(), bx).into_iter().take(20) {
            for (j, jj) in mode_pairs(grid.ny(), by) {
                let m = c * grid.ny() + j;
                let expect = buf[f * by + jj] * scale * st.sigma[m];
                assert!((n[m] - expect).norm() < 1e-9 * (1.0 + expect.norm()), "{c} {j}");
            }
        }
    }

    #[test]
    fn crank_nicolson_single_mode() {
        let (mut spec, front) = small();
        spec.c = 0.0;
        let params = StepParams {
            dt: 0.1,
            stabilization: 0.0,
            symmetry: SymmetryConstraint::NONE,
        };
        let st = Stepper::new(&spec, &front, params).unwrap();
        for m in [1usize, 9, 40] {
            let sg = st.sigma[m];
            let amp = st.cn_explicit[m] * st.cn_implicit_inv[m];
            let expect = (1.0 - 0.1 * sg * sg / 2.0) / (1.0 + 0.1 * sg * sg / 2.0);
            assert!((amp.re - expect).abs() < 1e-15 && amp.im == 0.0);
            assert!(amp.norm() < 1.0);
        }
    }

    #[test]
    fn mean_is_conserved() {
        let (spec, front) = small();
        let mut st = Stepper::new(
            &spec,
            &front,
            StepParams {
                dt: 0.02,
                ..Default::default()
            },
        )
        .unwrap();
        let mut s = bump(&front.grid);
        let m0 = s.mean();
        for _ in 0..200 {
            st.advance(&mut s).unwrap();
            assert!((s.mean() - m0).abs() < 1e-14 * m0.abs().max(1.0));
        }
        assert!((s.field.mean() - m0).abs() < 1e-14);
    }

    #[test]
    fn source_drives_mean() {
        let (mut spec, front) = small();
        let chi: Vec<f64> = front.grid.x().iter().map(|&x| 0.3 + 0.1 * (x / 15.0).cos()).collect();
        let mean_chi = chi.iter().sum::<f64>() / chi.len() as f64;
        spec.source = Source::Sampled(chi);
        let mut st = Stepper::new(
            &spec,
            &front,
            StepParams {
                dt: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        let mut s = bump(&front.grid);
        let m0 = s.mean();
        st.advance_n(&mut s, 100).unwrap();
        let expect = m0 + spec.c * mean_chi * s.t;
        assert!((s.mean() - expect).abs() < 1e-10);
    }

    #[test]
    fn equivariance() {
        let (spec, front) = small();
        let mut st = Stepper::new(
            &spec,
            &front,
            StepParams {
                dt: 0.02,
                ..Default::default()
            },
        )
        .unwrap();
        let s0 = bump(&front.grid);
        let mut a = s0.clone();
        st.advance_n(&mut a, 100).unwrap();
        for (moved0, moved_end) in [(s0.shifted_y(3), a.shifted_y(3)), (s0.reflected_y(), a.reflected_y())] {
            let mut b = moved0;
            st.advance_n(&mut b, 100).unwrap();
            let d = b
                .field
                .values
                .iter()
                .zip(&moved_end.field.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn symmetry_projection_is_invariant() {
        let (spec, front) = small();
        let grid = front.grid.clone();
        let f = Field::from_fn(grid.clone(), |x, y| {
            0.1 * (-(x / 6.0).powi(2)).exp() * (y.cos() + 0.3 * (3.0 * y).cos())
        });
        let mut free = Stepper::new(
            &spec,
            &front,
            StepParams {
                dt: 0.02,
                ..Default::default()
            },
        )
        .unwrap();
        let params = StepParams {
            dt: 0.02,
            symmetry: SymmetryConstraint::ODD_REFLECTED,
            ..Default::default()
        };
        let mut tied = Stepper::new(&spec, &front, params).unwrap();
        let mut a = SimState::from_field(f.clone());
        let mut b = SimState::from_field(f);
        free.advance_n(&mut a, 100).unwrap();
        tied.advance_n(&mut b, 100).unwrap();
        let d = a
            .field
            .values
            .iter()
            .zip(&b.field.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
        let bad = SimState::from_field(Field::from_fn(grid, |_, y| (2.0 * y).cos()));
        let mut c = bad;
        tied.constrain(&mut c).unwrap();
        assert!(c.field.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn blow_up_is_reported() {
        let (spec, front) = small();
        let mut st = Stepper::new(
            &spec,
            &front,
            StepParams {
                dt: 5.0,
                stabilization: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let f = Field::from_fn(front.grid.clone(), |x, _| 3.0 * (-(x / 3.0).powi(2)).exp());
        let mut s = SimState::from_field(f);
        let err = (0..200).map(|_| st.advance(&mut s)).find_map(|r| r.err());
        assert!(matches!(err, Some(QuenchError::BlowUp { .. })), "{err:?}");
    }

    #[test]
    fn second_order_in_time() {
        let (spec, front) = small();
        let run = |dt: f64| {
            let mut st = Stepper::new(
                &spec,
                &front,
                StepParams {
                    dt,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut s = bump(&front.grid);
            st.advance_n(&mut s, (1.0 / dt).round() as usize).unwrap();
            s.field.values
        };
        let reference = run(1.0 / 1280.0);
        let err = |dt: f64| {
            run(dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(1.0 / 40.0), err(1.0 / 80.0), err(1.0 / 160.0));
        let slope = ((e1 / e3).ln() / 4f64.ln()).abs();
        assert!(e2 < e1 && e3 < e2);
        assert!((1.8..=2.2).contains(&slope), "{e1} {e2} {e3} slope {slope}");
    }
}
