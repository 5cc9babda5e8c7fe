//! Relaxation to attractors, pattern classification and adiabatic
//! continuation in the quench speed.

use std::collections::VecDeque;
use std::fmt;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use super::{SimState, Stepper};
use crate::error::{QuenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOptions {
    /// Relative change between consecutive window averages that counts as
    /// converged.
    pub tol: f64,
    pub t_max: f64,
    /// Averaging window, in time units.
    pub window: f64,
    pub sample_interval: f64,
    /// Length of the trailing record kept for spectra and classification.
    pub record: f64,
    /// Amplitudes below this are the trivial state.
    pub trivial_threshold: f64,
    /// Stop once the window averages shrink at a steady exponential rate.
    pub stop_on_decay: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            tol: 1e-6,
            t_max: 2000.0,
            window: 20.0,
            sample_interval: 0.5,
            record: 100.0,
            trivial_threshold: 1e-5,
            stop_on_decay: false,
        }
    }
}

impl RelaxOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("t_max", self.t_max),
            ("window", self.window),
            ("sample_interval", self.sample_interval),
            ("record", self.record),
            ("trivial_threshold", self.trivial_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(QuenchError::param(name, "must be positive"));
            }
        }
        if self.window < self.sample_interval || self.record < self.sample_interval {
            return Err(QuenchError::param("window", "shorter than the sample interval"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxStatus {
    Converged,
    /// Window average fell below the trivial threshold.
    Decayed,
    /// Steady exponential decay at the given rate (per time unit).
    Decaying {
        rate: f64,
    },
    MaxTime,
}

/// One sample of the deviation `u − u_*`.
#[derive(Debug, Clone)]
struct Probe {
    t: f64,
    norm_sq: f64,
    mode1: Vec<C64>,
    mode0_sq: f64,
    y_energy: Vec<f64>,
}

/// Trailing record of deviation diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ProbeSeries {
    probes: VecDeque<Probe>,
    capacity: usize,
}

impl ProbeSeries {
    pub fn new(capacity: usize) -> Self {
        ProbeSeries {
            probes: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.probes.iter().map(|p| p.t).collect()
    }

    /// `‖u − u_*‖₂` per sample.
    pub fn norms(&self) -> Vec<f64> {
        self.probes.iter().map(|p| p.norm_sq.sqrt()).collect()
    }

    pub fn record(&mut self, stepper: &Stepper, state: &SimState) {
        let grid = stepper.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let dev = stepper.deviation(state);
        let ys = grid.y();
        let phase: Vec<C64> = ys.iter().map(|&y| C64::from_polar(1.0 / ny as f64, -y)).collect();
        let mut mode1 = Vec::with_capacity(nx);
        let mut mode0_sq = 0.0;
        let mut y_energy = vec![0.0; ny];
        let mut norm_sq = 0.0;
        for row in dev.chunks(ny) {
            mode1.push(row.iter().zip(&phase).map(|(&d, &e)| e * d).sum());
            let m0 = row.iter().sum::<f64>() / ny as f64;
            mode0_sq += m0 * m0;
            for (acc, &d) in y_energy.iter_mut().zip(row) {
                *acc += d * d;
            }
            norm_sq += row.iter().map(|d| d * d).sum::<f64>();
        }
        y_energy.iter_mut().for_each(|v| *v /= nx as f64);
        if self.probes.len() == self.capacity {
            self.probes.pop_front();
        }
        self.probes.push_back(Probe {
            t: state.t,
            norm_sq: norm_sq / (nx * ny) as f64,
            mode1,
            mode0_sq: mode0_sq / nx as f64,
            y_energy,
        });
    }

    /// Energies of the `ℓ = 1` profile at positive and negative temporal
    /// frequencies, and the dominant angular frequency. Uniform sampling
    /// is assumed.
    pub fn temporal_spectrum(&self) -> Option<(f64, f64, f64)> {
        let n = self.probes.len();
        if n < 8 {
            return None;
        }
        let dt = (self.probes[n - 1].t - self.probes[0].t) / (n - 1) as f64;
        if dt <= 0.0 {
            return None;
        }
        let nx = self.probes[0].mode1.len();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let hann: Vec<f64> = (0..n)
            .map(|j| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        let mut power = vec![0.0; n];
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for i in 0..nx {
            for (j, p) in self.probes.iter().enumerate() {
                buf[j] = p.mode1[i] * hann[j];
            }
            fft.process(&mut buf);
            for (acc, z) in power.iter_mut().zip(&buf) {
                *acc += z.norm_sqr();
            }
        }
        let half = n / 2;
        let e_plus: f64 = power[1..half].iter().sum();
        let e_minus: f64 = power[n - half + 1..].iter().sum();
        let (peak, _) = power.iter().enumerate().skip(1).max_by(|a, b| a.1.total_cmp(b.1))?;
        // parabolic refinement on the log power
        let at = |j: usize| power[j % n].max(f64::MIN_POSITIVE).ln();
        let (l, m, r) = (at(peak + n - 1), at(peak), at(peak + 1));
        let denom = l - 2.0 * m + r;
        let shift = if denom.abs() > 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let bin = if peak < half {
            peak as f64
        } else {
            peak as f64 - n as f64
        } + shift;
        let omega = 2.0 * std::f64::consts::PI * bin / (n as f64 * dt);
        Some((e_plus, e_minus, omega))
    }

    pub fn period(&self) -> Option<f64> {
        let (ep, em, omega) = self.temporal_spectrum()?;
        (ep + em > 0.0 && omega != 0.0).then(|| 2.0 * std::f64::consts::PI / omega.abs())
    }

    /// Root mean square of `‖u − u_*‖₂` over the last `span` time units,
    /// rounded down to whole periods when a period is known.
    pub fn amplitude(&self, span: f64, period: Option<f64>) -> f64 {
        let n = self.probes.len();
        if n == 0 {
            return 0.0;
        }
        if n == 1 {
            return self.probes[0].norm_sq.sqrt();
        }
        let dt = (self.probes[n - 1].t - self.probes[0].t) / (n - 1) as f64;
        let span = match period {
            Some(p) if p <= span => (span / p).floor() * p,
            _ => span,
        };
        let count = ((span / dt).round() as usize).clamp(1, n);
        let tail = self.probes.iter().skip(n - count);
        (tail.map(|p| p.norm_sq).sum::<f64>() / count as f64).sqrt()
    }

    fn mean_energy(&self) -> (f64, f64, Vec<f64>) {
        let n = self.probes.len().max(1) as f64;
        let total = self.probes.iter().map(|p| p.norm_sq).sum::<f64>() / n;
        let zero = self.probes.iter().map(|p| p.mode0_sq).sum::<f64>() / n;
        let ny = self.probes.front().map_or(0, |p| p.y_energy.len());
        let mut y = vec![0.0; ny];
        for p in &self.probes {
            y.iter_mut().zip(&p.y_energy).for_each(|(a, b)| *a += b / n);
        }
        (total, zero, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternClass {
    ObliquePlus,
    ObliqueMinus,
    Checkerboard,
    Stripes,
    Trivial,
    Mixed,
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternClass::ObliquePlus => "oblique+",
            PatternClass::ObliqueMinus => "oblique-",
            PatternClass::Checkerboard => "checkerboard",
            PatternClass::Stripes => "stripes",
            PatternClass::Trivial => "trivial",
            PatternClass::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternReport {
    pub class: PatternClass,
    pub amplitude: f64,
    /// Positive over negative temporal frequency energy of the `ℓ = 1` mode.
    pub rotation_ratio: f64,
    /// Share of the deviation energy in the `ℓ = 0` mode.
    pub stripe_fraction: f64,
    /// Relative spread in `y` of the time-averaged deviation energy; near
    /// zero for rotating waves, `1/√2` for `cos y`.
    pub standing_index: f64,
}

/// Classifies the recorded tail of a run.
pub fn classify_pattern(series: &ProbeSeries, trivial_threshold: f64) -> PatternReport {
    let (total, zero, y) = series.mean_energy();
    let amplitude = total.sqrt();
    let stripe_fraction = if total > 0.0 { zero / total } else { 0.0 };
    let ymean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let standing_index = if ymean > 0.0 {
        (y.iter().map(|v| (v - ymean).powi(2)).sum::<f64>() / y.len() as f64).sqrt() / ymean
    } else {
        0.0
    };
    let rotation_ratio = match series.temporal_spectrum() {
        Some((ep, em, _)) if em > 0.0 => ep / em,
        Some((ep, _, _)) if ep > 0.0 => f64::INFINITY,
        _ => 1.0,
    };
    let class = if series.is_empty() || amplitude < trivial_threshold {
        PatternClass::Trivial
    } else if stripe_fraction > 0.5 {
        PatternClass::Stripes
    } else if rotation_ratio > 10.0 {
        PatternClass::ObliquePlus
    } else if rotation_ratio < 0.1 {
        PatternClass::ObliqueMinus
    } else if (0.5..=2.0).contains(&rotation_ratio) && standing_index > 0.3 {
        PatternClass::Checkerboard
    } else {
        PatternClass::Mixed
    };
    PatternReport {
        class,
        amplitude,
        rotation_ratio,
        stripe_fraction,
        standing_index,
    }
}

#[derive(Debug, Clone)]
pub struct RelaxOutcome {
    pub state: SimState,
    pub amplitude: f64,
    pub period: Option<f64>,
    pub converged: bool,
    pub status: RelaxStatus,
    pub series: ProbeSeries,
}

/// `(t, ‖u − u_*‖₂)` at every step of the current and previous window.
#[derive(Debug, Default)]
struct NormTrace {
    t: VecDeque<f64>,
    norm: VecDeque<f64>,
}

impl NormTrace {
    fn push(&mut self, t: f64, norm: f64, keep: f64) {
        self.t.push_back(t);
        self.norm.push_back(norm);
        while self.t.len() > 2 && t - self.t[1] >= keep {
            self.t.pop_front();
            self.norm.pop_front();
        }
    }

    /// Trapezoidal mean over the last `span` time units, interpolating
    /// linearly at the left end.
    fn mean_over(&self, span: f64) -> f64 {
        self.mean_of(span, |v| v)
    }

    fn rms_over(&self, span: f64) -> f64 {
        self.mean_of(span, |v| v * v).sqrt()
    }

    fn mean_of(&self, span: f64, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.t.len();
        let t_end = self.t[n - 1];
        let start = (t_end - span).max(self.t[0]);
        let mut integral = 0.0;
        for j in (1..n).rev() {
            let (t0, t1) = (self.t[j - 1], self.t[j]);
            let (v0, v1) = (f(self.norm[j - 1]), f(self.norm[j]));
            if t0 >= start {
                integral += 0.5 * (v0 + v1) * (t1 - t0);
            } else {
                let v = v0 + (v1 - v0) * (start - t0) / (t1 - t0);
                integral += 0.5 * (v + v1) * (t1 - start);
                break;
            }
        }
        if t_end > start {
            integral / (t_end - start)
        } else {
            f(self.norm[n - 1])
        }
    }
}

fn deviation_norm(stepper: &Stepper, state: &SimState) -> f64 {
    let ny = stepper.grid().ny();
    let front = &stepper.front().values;
    let sum: f64 = state
        .field
        .values
        .iter()
        .enumerate()
        .map(|(m, v)| (v - front[m / ny]).powi(2))
        .sum();
    (sum / state.field.values.len() as f64).sqrt()
}

/// Whole periods inside `window`, or the window itself.
fn averaging_span(window: f64, period: Option<f64>) -> f64 {
    match period {
        Some(p) if p <= window => (window / p).floor() * p,
        _ => window,
    }
}

/// Integrates until consecutive window averages of `‖u − u_*‖₂` agree to
/// `tol`, the state decays, or `t_max` time units have passed. Windows are
/// cut to whole periods of the transverse oscillation once one is visible.
pub fn relax(stepper: &mut Stepper, state: SimState, opts: &RelaxOptions) -> Result<RelaxOutcome> {
    opts.validate()?;
    let dt = stepper.dt();
    let per_sample = ((opts.sample_interval / dt).round() as usize).max(1);
    let interval = per_sample as f64 * dt;
    let capacity = ((opts.record / interval).round() as usize).max(8);
    let per_window = ((opts.window / dt).round() as usize).max(1);
    let mut series = ProbeSeries::new(capacity);
    let mut trace = NormTrace::default();
    let mut state = state;
    let t_end = state.t + opts.t_max;
    let mut averages: Vec<f64> = Vec::new();
    series.record(stepper, &state);
    trace.push(state.t, deviation_norm(stepper, &state), 2.0 * opts.window);
    let mut steps = 0usize;
    let status = loop {
        if state.t >= t_end - 0.5 * dt {
            break RelaxStatus::MaxTime;
        }
        stepper.advance(&mut state)?;
        steps += 1;
        trace.push(state.t, deviation_norm(stepper, &state), 2.0 * opts.window);
        if steps.is_multiple_of(per_sample) {
            series.record(stepper, &state);
        }
        if !steps.is_multiple_of(per_window) {
            continue;
        }
        let avg = trace.mean_over(averaging_span(opts.window, series.period()));
        averages.push(avg);
        if avg < opts.trivial_threshold {
            break RelaxStatus::Decayed;
        }
        if let [.., prev, last] = averages[..] {
            if (last - prev).abs() <= opts.tol * last {
                break RelaxStatus::Converged;
            }
        }
        if opts.stop_on_decay {
            if let Some(rate) = decay_to_zero(&averages, opts.window) {
                break RelaxStatus::Decaying { rate };
            }
        }
    };
    let period = series.period();
    let amplitude = trace.rms_over(averaging_span(opts.window, period));
    Ok(RelaxOutcome {
        state,
        amplitude,
        period,
        converged: status != RelaxStatus::MaxTime,
        status,
        series,
    })
}

/// Aitken limit of three successive averages.
fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let (d1, d2) = (b - a, c - b);
    let denom = d2 - d1;
    (denom != 0.0).then(|| c - d2 * d2 / denom)
}

/// Decay rate per time unit if the last four window averages fall by more
/// than 1 % each and both Aitken extrapolations point at zero.
fn decay_to_zero(averages: &[f64], window: f64) -> Option<f64> {
    let n = averages.len();
    if n < 4 {
        return None;
    }
    let tail = &averages[n - 4..];
    if tail.windows(2).any(|w| w[1] > 0.99 * w[0]) {
        return None;
    }
    let small = |lim: Option<f64>, scale: f64| lim.is_some_and(|l| l.abs() <= 0.05 * scale);
    if !small(aitken(tail[0], tail[1], tail[2]), tail[2]) || !small(aitken(tail[1], tail[2], tail[3]), tail[3]) {
        return None;
    }
    Some((tail[3] / tail[2]).ln() / window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSample {
    pub c: f64,
    pub amplitude: f64,
    pub class: PatternClass,
    pub period: Option<f64>,
    pub converged: bool,
    pub status: RelaxStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchEnd {
    Completed,
    /// The nonzero state was lost at this speed.
    Death {
        c: f64,
    },
    /// The pattern class changed (fold or exchange of stability).
    ClassChange {
        c: f64,
        from: PatternClass,
        to: PatternClass,
    },
    Failed {
        c: f64,
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct ContinuationBranch {
    pub samples: Vec<BranchSample>,
    pub direction: Direction,
    pub end: BranchEnd,
}

impl ContinuationBranch {
    pub const CSV_HEADER: &'static str = "c,amplitude,class,period,converged";

    pub fn csv_rows(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| {
                format!(
                    "{:.6},{:.10e},{},{},{}",
                    s.c,
                    s.amplitude,
                    s.class,
                    s.period.map_or("nan".to_string(), |p| format!("{p:.6}")),
                    s.converged
                )
            })
            .collect()
    }
}

/// Steps `c` from `c_from` towards `c_to`, relaxing at each speed from the
/// previous end state. Returns the branch and the final state.
pub fn adiabatic_continuation(
    stepper: &mut Stepper,
    start: SimState,
    c_from: f64,
    c_to: f64,
    dc: f64,
    opts: &RelaxOptions,
) -> Result<(ContinuationBranch, SimState)> {
    if !(dc.is_finite() && dc != 0.0) || (c_to - c_from) * dc < 0.0 {
        return Err(QuenchError::param(
            "dc",
            "sign must match the direction from c_from to c_to",
        ));
    }
    let direction = if dc > 0.0 {
        Direction::Increasing
    } else {
        Direction::Decreasing
    };
    let count = ((c_to - c_from) / dc + 1e-9).floor() as usize + 1;
    let mut samples = Vec::with_capacity(count);
    let mut state = start;
    let mut end = BranchEnd::Completed;
    for j in 0..count {
        let c = c_from + j as f64 * dc;
        stepper.set_speed(c)?;
        let out = match relax(stepper, state.clone(), opts) {
            Ok(o) => o,
            Err(e) => {
                end = BranchEnd::Failed {
                    c,
                    reason: e.to_string(),
                };
                break;
            }
        };
        let report = classify_pattern(&out.series, opts.trivial_threshold);
        let dead = matches!(out.status, RelaxStatus::Decayed | RelaxStatus::Decaying { .. })
            || out.amplitude < opts.trivial_threshold;
        let class = if dead { PatternClass::Trivial } else { report.class };
        samples.push(BranchSample {
            c,
            amplitude: out.amplitude,
            class,
            period: out.period,
            converged: out.converged,
            status: out.status,
        });
        state = out.state;
        if dead {
            end = BranchEnd::Death { c };
            break;
        }
        if let Some(prev) = samples.iter().rev().nth(1) {
            if prev.class != class {
                end = BranchEnd::ClassChange {
                    c,
                    from: prev.class,
                    to: class,
                };
                break;
            }
        }
    }
    Ok((
        ContinuationBranch {
            samples,
            direction,
            end,
        },
        state,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{trivial_front, ModelSpec};
    use crate::sim::StepParams;
    use crate::spectral::{make_grid, Field};
    use std::f64::consts::PI;

    fn stepper() -> Stepper {
        let grid = make_grid(15.0 * PI, 64, 8, 0.5).unwrap();
        let spec = ModelSpec {
            plateau_half_width: 5.0 * PI,
            c: 1.0,
            ..Default::default()
        };
        Stepper::new(
            &spec,
            &trivial_front(grid),
            StepParams {
                dt: 0.05,
                ..Default::default()
            },
        )
        .unwrap()
    }

    /// Series sampled from a prescribed field `u(x, y, t)`.
    fn synthetic(st: &Stepper, f: impl Fn(f64, f64, f64) -> f64) -> ProbeSeries {
        let mut s = ProbeSeries::new(400);
        for n in 0..400 {
            let t = 0.25 * n as f64;
            let field = Field::from_fn(st.grid().clone(), |x, y| f(x, y, t));
            let mut state = SimState::from_field(field);
            state.t = t;
            s.record(st, &state);
        }
        s
    }

    #[test]
    fn classifies_synthetic_patterns() {
        let st = stepper();
        let w = 0.8;
        let env = |x: f64| (-(x / 8.0).powi(2)).exp();
        let plus = synthetic(&st, |x, y, t| 0.1 * env(x) * (w * t + y + 0.5 * x).cos());
        let r = classify_pattern(&plus, 1e-5);
        assert_eq!(r.class, PatternClass::ObliquePlus);
        assert!(r.standing_index < 0.05, "{}", r.standing_index);
        let period = plus.period().unwrap();
        assert!((period * w - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "{period}");
        let minus = synthetic(&st, |x, y, t| 0.1 * env(x) * (w * t - y + 0.5 * x).cos());
        assert_eq!(classify_pattern(&minus, 1e-5).class, PatternClass::ObliqueMinus);
        let cb = synthetic(&st, |x, y, t| 0.1 * env(x) * y.cos() * (w * t + 0.5 * x).cos());
        let r = classify_pattern(&cb, 1e-5);
        assert_eq!(r.class, PatternClass::Checkerboard);
        assert!((0.5..=2.0).contains(&r.rotation_ratio));
        let stripes = synthetic(&st, |x, _, t| 0.1 * env(x) * (w * t + 0.5 * x).cos());
        assert_eq!(classify_pattern(&stripes, 1e-5).class, PatternClass::Stripes);
        let zero = synthetic(&st, |_, _, _| 0.0);
        assert_eq!(classify_pattern(&zero, 1e-5).class, PatternClass::Trivial);
    }

    #[test]
    fn rms_amplitude_over_whole_periods() {
        let st = stepper();
        let s = synthetic(&st, |_, _, t| 1.0 + 0.5 * (0.8 * t).cos());
        let p = 2.0 * PI / 0.8;
        let a = s.amplitude(20.0, Some(p));
        // mean of (1 + ½cos)² over whole periods is 1 + 1/8
        assert!((a - 1.125f64.sqrt()).abs() < 1e-3, "{a}");
    }

    #[test]
    fn decay_detection() {
        let avgs: Vec<f64> = (0..6).map(|k| (-0.005 * 20.0 * k as f64).exp()).collect();
        let rate = decay_to_zero(&avgs, 20.0).unwrap();
        assert!((rate + 0.005).abs() < 1e-12);
        // geometric approach to a nonzero level
        let settling: Vec<f64> = (0..6).map(|k| 0.8 + 0.2 * 0.7f64.powi(k)).collect();
        assert!(decay_to_zero(&settling, 20.0).is_none());
        // decelerating nonlinear decay is not yet exponential
        let slowing = vec![1.0, 0.9, 0.82, 0.76, 0.72];
        assert!(decay_to_zero(&slowing, 20.0).is_none());
    }

    #[test]
    fn window_mean_over_whole_periods() {
        let mut tr = NormTrace::default();
        let w = 0.71;
        for n in 0..2000 {
            let t = 0.05 * n as f64;
            tr.push(t, 2.0 + (w * t + 0.3).cos(), 60.0);
        }
        let p = 2.0 * PI / w;
        let m = tr.mean_over(averaging_span(20.0, Some(p)));
        assert!((m - 2.0).abs() < 1e-4, "{m}");
    }

    #[test]
    fn trivial_state_relaxes_immediately() {
        let mut st = stepper();
        let s = SimState::from_field(Field::zeros(st.grid().clone()));
        let opts = RelaxOptions {
            t_max: 50.0,
            ..Default::default()
        };
        let out = relax(&mut st, s, &opts).unwrap();
        assert_eq!(out.status, RelaxStatus::Decayed);
        assert_eq!(out.amplitude, 0.0);
        assert_eq!(classify_pattern(&out.series, 1e-5).class, PatternClass::Trivial);
    }

    #[test]
    fn max_time_is_reported() {
        let mut st = stepper();
        let s = SimState::from_field(Field::from_fn(st.grid().clone(), |x, y| {
            0.01 * (-(x / 5.0).powi(2)).exp() * y.cos()
        }));
        let opts = RelaxOptions {
            t_max: 5.0,
            tol: 1e-14,
            ..Default::default()
        };
        let out = relax(&mut st, s, &opts).unwrap();
        assert_eq!(out.status, RelaxStatus::MaxTime);
        assert!(!out.converged);
        assert!((out.state.t - 5.0).abs() < 1e-9);
    }

    #[test]
    fn continuation_rejects_bad_direction() {
        let mut st = stepper();
        let s = SimState::from_field(Field::zeros(st.grid().clone()));
        let opts = RelaxOptions::default();
        assert!(adiabatic_continuation(&mut st, s, 1.0, 1.2, -0.1, &opts).is_err());
    }

    #[test]
    fn continuation_stops_on_death() {
        let mut st = stepper();
        let s = SimState::from_field(Field::zeros(st.grid().clone()));
        let opts = RelaxOptions {
            t_max: 10.0,
            ..Default::default()
        };
        let (branch, _) = adiabatic_continuation(&mut st, s, 1.0, 1.2, 0.1, &opts).unwrap();
        assert_eq!(branch.samples.len(), 1);
        assert_eq!(branch.end, BranchEnd::Death { c: 1.0 });
        assert_eq!(branch.csv_rows()[0].split(',').count(), 5);
    }
}
