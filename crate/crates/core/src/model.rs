//! Quenched cubic–quintic nonlinearity, the top-hat heterogeneity and the
//! primary front.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{QuenchError, Result};
use crate::spectral::ChannelGrid;

/// Optional source term `χ(x)` sampled on the grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Source {
    #[default]
    Zero,
    Sampled(Vec<f64>),
}

impl Source {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Sampled(v) => v[j],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Source::Zero => true,
            Source::Sampled(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Cubic coefficient of `f`.
    pub gamma: f64,
    /// Steepness of the tanh edges of the quench.
    pub steepness: f64,
    /// Half width of the unstable plateau.
    pub plateau_half_width: f64,
    /// Transverse wavenumber.
    pub k: f64,
    /// Quench speed.
    pub c: f64,
    /// Temporal frequency used when time is rescaled; informational.
    pub omega: f64,
    pub source: Source,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            gamma: -1.0,
            steepness: 5.0,
            plateau_half_width: 10.0 * std::f64::consts::PI,
            k: 0.5,
            c: 1.35,
            omega: 1.0,
            source: Source::Zero,
        }
    }
}

impl ModelSpec {
    pub fn with_gamma(gamma: f64) -> Self {
        ModelSpec {
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(QuenchError::param("steepness", "must be positive"));
        }
        if !(self.plateau_half_width.is_finite() && self.plateau_half_width > 0.0) {
            return Err(QuenchError::param("plateau_half_width", "must be positive"));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(QuenchError::param("k", "must be positive"));
        }
        if !self.c.is_finite() || !self.gamma.is_finite() {
            return Err(QuenchError::param("c/gamma", "must be finite"));
        }
        Ok(())
    }

    pub fn with_speed(&self, c: f64) -> Self {
        ModelSpec { c, ..self.clone() }
    }

    /// Samples `h` on the grid nodes.
    pub fn sample_h(&self, grid: &ChannelGrid) -> Vec<f64> {
        grid.x().iter().map(|&x| quench_h(x, self)).collect()
    }
}

/// `h(x) = tanh(δ(x−K))·tanh(−δ(x+K))`: about +1 on `|x| < K`, −1 outside.
pub fn quench_h(x: f64, spec: &ModelSpec) -> f64 {
    let (d, k) = (spec.steepness, spec.plateau_half_width);
    (d * (x - k)).tanh() * (-d * (x + k)).tanh()
}

/// `f(x,u) = h(x)u + γu³ − u⁵`.
pub fn f_eval(x: f64, u: f64, spec: &ModelSpec) -> f64 {
    let u2 = u * u;
    u * (quench_h(x, spec) + spec.gamma * u2 - u2 * u2)
}

/// u-derivatives of `f` of order 1, 2 or 3.
pub fn f_derivs(x: f64, u: f64, spec: &ModelSpec, order: u32) -> Result<f64> {
    let g = spec.gamma;
    let u2 = u * u;
    match order {
        1 => Ok(quench_h(x, spec) + 3.0 * g * u2 - 5.0 * u2 * u2),
        2 => Ok(6.0 * g * u - 20.0 * u2 * u),
        3 => Ok(6.0 * g - 60.0 * u2),
        _ => Err(QuenchError::param(
            "order",
            format!("supported orders are 1..=3, got {order}"),
        )),
    }
}

/// y-independent steady state `u_*` sampled on the grid.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub grid: Arc<ChannelGrid>,
    pub values: Vec<f64>,
    /// Limits `(u₋, u₊)` at the two ends.
    pub asymptotic_states: (f64, f64),
}

impl FrontProfile {
    pub fn new(grid: Arc<ChannelGrid>, values: Vec<f64>, asymptotic_states: (f64, f64)) -> Result<Self> {
        if values.len() != grid.nx() {
            return Err(QuenchError::GridMismatch(format!(
                "front has {} samples, grid has {}",
                values.len(),
                grid.nx()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QuenchError::NonFinite("front"));
        }
        Ok(FrontProfile {
            grid,
            values,
            asymptotic_states,
        })
    }

    /// Largest deviation from the asymptotic states at the two grid ends.
    pub fn endpoint_deviation(&self) -> f64 {
        let n = self.values.len();
        let (lo, hi) = self.asymptotic_states;
        (self.values[0] - lo).abs().max((self.values[n - 1] - hi).abs())
    }

    /// `f_u(x, u_*(x))` on the grid.
    pub fn linear_coefficient(&self, spec: &ModelSpec) -> Vec<f64> {
        self.sample_derivative(spec, 1)
    }

    pub(crate) fn sample_derivative(&self, spec: &ModelSpec, order: u32) -> Vec<f64> {
        self.grid
            .x()
            .iter()
            .zip(&self.values)
            .map(|(&x, &u)| f_derivs(x, u, spec, order).expect("order in 1..=3"))
            .collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

pub fn trivial_front(grid: Arc<ChannelGrid>) -> FrontProfile {
    let n = grid.nx();
    FrontProfile {
        grid,
        values: vec![0.0; n],
        asymptotic_states: (0.0, 0.0),
    }
}

/// Max-norm of the steady residual `−∂x²(∂x²u_* + f(x,u_*)) + c∂x u_* + cχ`.
pub fn front_residual(front: &FrontProfile, spec: &ModelSpec) -> Result<f64> {
    let grid = &front.grid;
    if let Source::Sampled(v) = &spec.source {
        if v.len() != grid.nx() {
            return Err(QuenchError::GridMismatch("source length".into()));
        }
    }
    let u: Vec<C64> = front.values.iter().map(|&v| C64::new(v, 0.0)).collect();
    let d2 = grid.deriv_symbol(2);
    let d1 = grid.deriv_symbol(1);
    let lap = grid.apply_symbol(&u, |j| d2[j]);
    let inner: Vec<C64> = lap
        .iter()
        .zip(grid.x())
        .zip(&front.values)
        .map(|((l, &x), &uu)| l + f_eval(x, uu, spec))
        .collect();
    let outer = grid.apply_symbol(&inner, |j| -d2[j]);
    let adv = grid.apply_symbol(&u, |j| d1[j] * spec.c);
    Ok(outer
        .iter()
        .zip(&adv)
        .enumerate()
        .map(|(j, (o, a))| (o.re + a.re + spec.c * spec.source.at(j)).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn heterogeneity_values() {
        let s = ModelSpec::default();
        assert_eq!(quench_h(s.plateau_half_width, &s), 0.0);
        assert!((quench_h(0.0, &s) - 1.0).abs() < 1e-15);
        assert!((quench_h(20.0 * PI, &s) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_values_at_zero() {
        let s = ModelSpec::with_gamma(-1.0);
        for x in [-40.0, -3.0, 0.0, 12.0, 31.4] {
            assert_eq!(f_derivs(x, 0.0, &s, 1).unwrap(), quench_h(x, &s));
            assert_eq!(f_derivs(x, 0.0, &s, 2).unwrap(), 0.0);
            assert_eq!(f_derivs(x, 0.0, &s, 3).unwrap(), -6.0);
        }
        assert!(f_derivs(0.0, 0.0, &s, 4).is_err());
    }

    #[test]
    fn trivial_front_is_steady() {
        let g = make_grid(30.0 * PI, 256, 8, 0.5).unwrap();
        let f = trivial_front(g.clone());
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(f.asymptotic_states, (0.0, 0.0));
        assert!(f.endpoint_deviation() < 1e-8);
        let s = ModelSpec::default();
        assert!(front_residual(&f, &s).unwrap() < 1e-14);

        let chi: Vec<f64> = g.x().iter().map(|&x| 0.1 * (-x * x).exp()).collect();
        let s2 = ModelSpec {
            source: Source::Sampled(chi.clone()),
            ..s.clone()
        };
        let r = front_residual(&f, &s2).unwrap();
        let expect = chi.iter().map(|v| (s.c * v).abs()).fold(0.0, f64::max);
        assert!((r - expect).abs() < 1e-15);

        let bumped: Vec<f64> = g.x().iter().map(|&x| 1e-3 * (-(x - 2.0).powi(2)).exp()).collect();
        let fb = FrontProfile::new(g, bumped, (0.0, 0.0)).unwrap();
        assert!(front_residual(&fb, &s).unwrap() > 1e-6);
    }

    #[test]
    fn far_field_limit() {
        let s = ModelSpec::default();
        let m = s.plateau_half_width + 10.0 / s.steepness;
        for x in [-m, m] {
            let fu = f_derivs(x, 0.0, &s, 1).unwrap();
            assert!((-1.0..=-1.0 + 1e-8).contains(&fu), "{fu}");
        }
    }

    #[test]
    fn h_is_even_on_grid() {
        let g = make_grid(30.0 * PI, 1024, 8, 0.5).unwrap();
        let s = ModelSpec::default();
        let h = s.sample_h(&g);
        for j in 1..1024 {
            assert!((h[j] - h[1024 - j]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(x in -60.0f64..60.0, u in -1.2f64..1.2, gamma in -2.0f64..2.0) {
            let s = ModelSpec::with_gamma(gamma);
            let e = 1e-4;
            let fd1 = (f_eval(x, u + e, &s) - f_eval(x, u - e, &s)) / (2.0 * e);
            let fd2 = (f_derivs(x, u + e, &s, 1).unwrap() - f_derivs(x, u - e, &s, 1).unwrap()) / (2.0 * e);
            let fd3 = (f_derivs(x, u + e, &s, 2).unwrap() - f_derivs(x, u - e, &s, 2).unwrap()) / (2.0 * e);
            for (fd, ord) in [(fd1, 1), (fd2, 2), (fd3, 3)] {
                let exact = f_derivs(x, u, &s, ord).unwrap();
                prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
            }
        }

        #[test]
        fn h_even(x in -100.0f64..100.0) {
            let s = ModelSpec::default();
            prop_assert!((quench_h(x, &s) - quench_h(-x, &s)).abs() < 1e-14);
        }
    }
}
