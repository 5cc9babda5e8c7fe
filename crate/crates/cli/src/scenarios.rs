//! One driver per scenario. Each reads the configuration, runs the core
//! pipeline and writes CSV tables (plus SVG twins) into the run directory.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use clap::ValueEnum;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use quench_core::dispersion::{
    absolute_curve, double_roots, spreading_speed, weighted_essential_curve, Background, DispersionParams,
};
use quench_core::linop::{
    aggregate_spectrum, branch_track, crossing_speed_check, hopf_locate, hopf_mirror, k_scan, EigenMethod, HopfData,
    HopfOptions,
};
use quench_core::model::{trivial_front, FrontProfile, ModelSpec};
use quench_core::reduction::{predict_branches, reduce, Kernel, LSReport, PhiSet};
use quench_core::sim::{
    adiabatic_continuation, classify_pattern, relax, seed, BranchEnd, ContinuationBranch, SeedKind, Stepper,
    SymmetryConstraint,
};
use quench_core::spectral::{make_grid, ChannelGrid};

use crate::config::{ExperimentConfig, SymmetryMode};
use crate::output::{num, opt_num, RunManifest, RunOutput, CONFIG_ECHO_NAME};
use crate::plot::{Axes, Mark, Series};
use crate::{Context, LabError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Speeds,
    Hopf,
    LsReport,
    #[value(name = "fig1-patterns")]
    Fig1Patterns,
    #[value(name = "fig3-spectrum")]
    Fig3Spectrum,
    #[value(name = "fig4-branches")]
    Fig4Branches,
    #[value(name = "fig5-diagram")]
    Fig5Diagram,
    #[value(name = "fig6-kscan")]
    Fig6Kscan,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Speeds => "speeds",
            Scenario::Hopf => "hopf",
            Scenario::LsReport => "ls-report",
            Scenario::Fig1Patterns => "fig1-patterns",
            Scenario::Fig3Spectrum => "fig3-spectrum",
            Scenario::Fig4Branches => "fig4-branches",
            Scenario::Fig5Diagram => "fig5-diagram",
            Scenario::Fig6Kscan => "fig6-kscan",
        }
    }

    /// Scenarios that linearize about the front and so need a steady one.
    fn is_spectral(self) -> bool {
        !matches!(self, Scenario::Fig1Patterns | Scenario::Speeds)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs `scenario`, writing everything below `out_dir`.
pub fn run_scenario(scenario: Scenario, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, LabError> {
    if let Some(name) = &cfg.scenario.name {
        if name != scenario.name() {
            return Err(crate::ConfigError {
                message: format!("config is for scenario `{name}` but `{scenario}` was requested"),
                line: None,
                origin: Some("scenario.name".into()),
            }
            .into());
        }
    }
    if scenario.is_spectral() && !cfg.model.chi.is_zero() {
        return Err(crate::ConfigError {
            message: "spectral scenarios linearize about the trivial front, which needs chi = \"zero\"".into(),
            line: None,
            origin: Some("model.chi".into()),
        }
        .into());
    }
    let mut out = RunOutput::create(out_dir, cfg.scenario.plots)?;
    let echo = cfg.echo();
    out.write_text(CONFIG_ECHO_NAME, &echo)?;
    out.record_seed("rng_seed", cfg.scenario.rng_seed);
    let run = Run { cfg };
    match scenario {
        Scenario::Speeds => run.speeds(&mut out)?,
        Scenario::Hopf => run.hopf(&mut out)?,
        Scenario::LsReport => run.ls_report(&mut out)?,
        Scenario::Fig1Patterns => run.patterns(&mut out)?,
        Scenario::Fig3Spectrum => run.spectrum(&mut out)?,
        Scenario::Fig4Branches => run.branches(&mut out)?,
        Scenario::Fig5Diagram => run.diagram(&mut out)?,
        Scenario::Fig6Kscan => run.kscan(&mut out)?,
    }
    Ok(out.finish(scenario.name(), &echo)?)
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
}

/// Default bracket for the crossing of mode `ell`.
fn default_bracket(ell: i64) -> (f64, f64) {
    if ell == 0 {
        (1.5, 1.7)
    } else {
        (1.2, 1.5)
    }
}

fn cplx(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

impl Run<'_> {
    fn grid(&self) -> Result<Arc<ChannelGrid>, LabError> {
        let g = &self.cfg.grid;
        make_grid(g.m, g.n_x, g.n_y, self.cfg.model.k).context("building the grid")
    }

    fn setup(&self, c: f64) -> Result<(ModelSpec, FrontProfile), LabError> {
        let spec = self.cfg.model_spec(c);
        spec.validate().context("model parameters")?;
        Ok((spec, trivial_front(self.grid()?)))
    }

    fn bracket(&self, ell: i64) -> (f64, f64) {
        let (lo, hi) = default_bracket(ell);
        (
            self.cfg.scenario.c_min.unwrap_or(lo),
            self.cfg.scenario.c_max.unwrap_or(hi),
        )
    }

    fn hopf_options(&self) -> HopfOptions {
        HopfOptions {
            tol: self.cfg.numerics.hopf_tol,
            ..HopfOptions::default()
        }
    }

    fn locate(&self, ell: i64, spec: &ModelSpec, front: &FrontProfile) -> Result<HopfData, LabError> {
        let bracket = self.bracket(ell);
        hopf_locate(ell, bracket, self.cfg.numerics.eta, spec, front, self.hopf_options()).context(format!(
            "locating the crossing of mode {ell} in [{}, {}]",
            bracket.0, bracket.1
        ))
    }

    fn reduction(&self, out: &mut RunOutput) -> Result<(HopfData, PhiSet, LSReport), LabError> {
        let (spec, front) = self.setup(ModelSpec::default().c)?;
        let hopf = out.timed("hopf", || self.locate(1, &spec, &front))?;
        let mirror = hopf_mirror(&hopf, &spec, &front).context("mirrored mode")?;
        let kernel = Kernel::new(&hopf, &mirror).context("kernel")?;
        let (phis, report) = out
            .timed("reduction", || reduce(&kernel, &spec, &front))
            .context("reduced coefficients")?;
        Ok((hopf, phis, report))
    }

    fn speeds(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let k = self.cfg.model.k;
        let ells = self.cfg.scenario.ells.clone().unwrap_or_else(|| vec![0, 1]);
        let rows = out.timed("speeds", || {
            ells.iter()
                .map(|&ell| {
                    let (c, root) = spreading_speed(ell, k, Background::Unstable)
                        .context(format!("spreading speed of mode {ell}"))?;
                    let [lr, li] = cplx(root.lambda);
                    let [nr, ni] = cplx(root.nu);
                    Ok(vec![
                        ell.to_string(),
                        num(k),
                        num(c),
                        lr,
                        li,
                        nr,
                        ni,
                        root.pinched.to_string(),
                    ])
                })
                .collect::<Result<Vec<_>, LabError>>()
        })?;
        out.write_csv(
            "speeds.csv",
            &[
                "ell",
                "k",
                "speed",
                "Re_lambda",
                "Im_lambda",
                "Re_nu",
                "Im_nu",
                "pinched",
            ],
            &rows,
        )?;
        Ok(())
    }

    fn hopf(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let (spec, front) = self.setup(ModelSpec::default().c)?;
        let ells = self.cfg.scenario.ells.clone().unwrap_or_else(|| vec![1, 0]);
        let found = out.timed("hopf", || {
            ells.par_iter()
                .map(|&ell| self.locate(ell, &spec, &front))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut rows = Vec::new();
        for h in &found {
            let (fd, formula) = crossing_speed_check(h).context("crossing speed")?;
            let mut r = vec![h.ell.to_string(), num(h.c_star), num(h.omega_star)];
            r.extend(cplx(h.lambda));
            r.push(num(h.mu_prime));
            r.extend(cplx(fd));
            r.extend(cplx(formula));
            r.push(num(h.richardson_defect));
            rows.push(r);
        }
        out.write_csv(
            "hopf.csv",
            &[
                "ell",
                "c_star",
                "omega_star",
                "Re_lambda",
                "Im_lambda",
                "mu_prime",
                "Re_dlambda_fd",
                "Im_dlambda_fd",
                "Re_dlambda_inner",
                "Im_dlambda_inner",
                "richardson_defect",
            ],
            &rows,
        )?;
        for h in &found {
            let x = h.p.grid.x();
            let rows: Vec<Vec<String>> = (0..x.len())
                .map(|j| {
                    let mut r = vec![num(x[j])];
                    r.extend(cplx(h.p.values[j]));
                    r.extend(cplx(h.psi_plus.values[j]));
                    r
                })
                .collect();
            let stem = format!("hopf_mode{}", h.ell);
            out.write_csv(
                &format!("{stem}.csv"),
                &["x", "Re_p", "Im_p", "Re_psi", "Im_psi"],
                &rows,
            )?;
            let abs_p: Vec<(f64, f64)> = x.iter().zip(&h.p.values).map(|(&x, v)| (x, v.norm())).collect();
            let re_p: Vec<(f64, f64)> = x.iter().zip(&h.p.values).map(|(&x, v)| (x, v.re)).collect();
            out.curves(
                &format!("{stem}.svg"),
                &Axes {
                    title: &format!("critical eigenfunction, mode {}", h.ell),
                    x_label: "x",
                    y_label: "p",
                },
                &[Series::new("|p|", abs_p), Series::new("Re p", re_p)],
                Mark::Lines,
            )?;
        }
        Ok(())
    }

    fn ls_report(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let (hopf, phis, report) = self.reduction(out)?;
        let mut rows: Vec<Vec<String>> = report
            .to_key_values()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| vec![k.to_string(), v.to_string()])
            .collect();
        rows.push(vec!["phi_max_residual".into(), num(phis.max_residual())]);
        rows.push(vec![
            "biorthogonality_defect".into(),
            num((hopf.biorthogonality() - 1.0).norm()),
        ]);
        out.write_csv("ls_report.csv", &["key", "value"], &rows)?;

        let a_values: Vec<f64> = (0..=40).map(|j| 0.005 * j as f64).collect();
        let pts = predict_branches(&report, &a_values);
        let rows: Vec<Vec<String>> = pts
            .iter()
            .map(|p| {
                vec![
                    num(p.a),
                    num(p.c_oblique),
                    num(std::f64::consts::SQRT_2 * p.a),
                    num(p.c_checkerboard),
                    num(2.0 * p.a),
                ]
            })
            .collect();
        out.write_csv(
            "ls_branches.csv",
            &["a", "c_oblique", "rms_oblique", "c_checkerboard", "rms_checkerboard"],
            &rows,
        )?;
        out.curves(
            "ls_branches.svg",
            &Axes {
                title: "predicted branches",
                x_label: "c",
                y_label: "rms amplitude",
            },
            &[
                Series::new(
                    "oblique",
                    pts.iter()
                        .map(|p| (p.c_oblique, std::f64::consts::SQRT_2 * p.a))
                        .collect(),
                ),
                Series::new(
                    "checkerboard",
                    pts.iter().map(|p| (p.c_checkerboard, 2.0 * p.a)).collect(),
                ),
            ],
            Mark::Lines,
        )?;
        Ok(())
    }

    fn spectrum(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let c = self.cfg.scenario.c.unwrap_or(1.35);
        let (spec, front) = self.setup(c)?;
        let eta = self.cfg.numerics.eta;
        let ells = self.cfg.scenario.ells.clone().unwrap_or_else(|| (-3..=3).collect());
        let set = out
            .timed("spectrum", || {
                aggregate_spectrum(
                    &ells,
                    c,
                    eta,
                    self.cfg.numerics.eig_count,
                    &spec,
                    &front,
                    EigenMethod::Dense,
                )
            })
            .context(format!("spectrum at c = {c}"))?;
        let rows: Vec<Vec<String>> = set
            .pairs
            .iter()
            .map(|p| {
                let [r, i] = cplx(p.lambda);
                vec![p.ell.to_string(), r, i, num(p.residual)]
            })
            .collect();
        out.write_csv("spectrum.csv", &["ell", "Re_lambda", "Im_lambda", "residual"], &rows)?;

        let m_values: Vec<f64> = (0..=400).map(|j| -4.0 + 0.02 * j as f64).collect();
        let mut ess_rows = Vec::new();
        let mut curves = Vec::new();
        let mut magnitudes: Vec<i64> = ells.iter().map(|l| l.abs()).collect();
        magnitudes.sort_unstable();
        magnitudes.dedup();
        let extent = set.pairs.iter().fold(0.0f64, |m, p| m.max(p.lambda.norm())).max(1.0);
        for &ell in &magnitudes {
            let params = DispersionParams::new(self.cfg.model.k, ell, c, Background::Stable);
            let curve = weighted_essential_curve(&params, eta, &m_values).context("essential spectrum")?;
            let mut pts = Vec::new();
            for s in &curve.samples {
                let [r, i] = cplx(s.lambda);
                ess_rows.push(vec![ell.to_string(), num(s.param), r, i]);
                if s.lambda.norm() <= 2.0 * extent {
                    pts.push((s.lambda.re, s.lambda.im));
                }
            }
            curves.push(Series::new(format!("essential |l|={ell}"), pts));
        }
        out.write_csv("essential.csv", &["ell", "m", "Re_lambda", "Im_lambda"], &ess_rows)?;

        // absolute spectrum of the plateau state, continued both ways from
        // the leading pinched branch point
        let offsets: Vec<f64> = (0..=75).map(|j| 0.02 * j as f64).collect();
        let mut abs_rows = Vec::new();
        for &ell in &magnitudes {
            let params = DispersionParams::new(self.cfg.model.k, ell, c, Background::Unstable);
            let roots = double_roots(&params).context("plateau double roots")?;
            let Some(root) = roots.into_iter().filter(|r| r.pinched).max_by(|a, b| {
                a.lambda
                    .re
                    .total_cmp(&b.lambda.re)
                    .then(a.lambda.im.total_cmp(&b.lambda.im))
            }) else {
                continue;
            };
            for (side, sign) in [("+", 1.0), ("-", -1.0)] {
                let offs: Vec<f64> = offsets.iter().map(|g| sign * g).collect();
                // the curve ends where root tracking becomes ambiguous
                let Some(curve) = (1..=offs.len())
                    .rev()
                    .find_map(|n| absolute_curve(&root, &offs[..n]).ok())
                else {
                    continue;
                };
                let mut pts = Vec::new();
                for s in &curve.samples {
                    let [r, i] = cplx(s.lambda);
                    abs_rows.push(vec![ell.to_string(), num(s.param), r, i]);
                    pts.push((s.lambda.re, s.lambda.im));
                }
                curves.push(Series::new(format!("absolute |l|={ell} {side}"), pts));
            }
        }
        out.write_csv(
            "absolute.csv",
            &["ell", "gamma_offset", "Re_lambda", "Im_lambda"],
            &abs_rows,
        )?;
        let mut series = vec![Series::new(
            "eigenvalues",
            set.pairs.iter().map(|p| (p.lambda.re, p.lambda.im)).collect(),
        )];
        series.extend(curves);
        out.curves(
            "spectrum.svg",
            &Axes {
                title: &format!("spectrum at c = {c}"),
                x_label: "Re lambda",
                y_label: "Im lambda",
            },
            &series,
            Mark::Dots,
        )?;
        Ok(())
    }

    fn branches(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let s = &self.cfg.scenario;
        let (lo, hi) = (s.c_min.unwrap_or(1.2), s.c_max.unwrap_or(1.7));
        let dc = s.dc.unwrap_or(0.01);
        let count = ((hi - lo) / dc + 1e-9).floor() as usize + 1;
        let cs: Vec<f64> = (0..count).map(|j| lo + dc * j as f64).collect();
        let (spec, front) = self.setup(lo)?;
        let ells = s.ells.clone().unwrap_or_else(|| vec![0, 1]);
        let eta = self.cfg.numerics.eta;
        let sets = out.timed("branch tracking", || {
            ells.par_iter()
                .map(|&ell| branch_track(ell, &cs, 4, eta, &spec, &front).context(format!("tracking mode {ell}")))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut rows = Vec::new();
        let mut series = Vec::new();
        for set in &sets {
            for (b, curve) in set.curves.iter().enumerate() {
                for (c, z) in set.c_values.iter().zip(curve) {
                    let [r, i] = cplx(*z);
                    rows.push(vec![set.ell.to_string(), b.to_string(), num(*c), r, i]);
                }
                series.push(Series::new(
                    format!("l={} #{b}", set.ell),
                    set.c_values.iter().zip(curve).map(|(c, z)| (*c, z.re)).collect(),
                ));
            }
        }
        out.write_csv("branches.csv", &["ell", "branch", "c", "Re_lambda", "Im_lambda"], &rows)?;
        out.curves(
            "branches.svg",
            &Axes {
                title: "rightmost eigenvalues",
                x_label: "c",
                y_label: "Re lambda",
            },
            &series,
            Mark::Lines,
        )?;
        Ok(())
    }

    fn kscan(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let c = self.cfg.scenario.c.unwrap_or(1.2);
        let ks = self
            .cfg
            .scenario
            .k_values
            .clone()
            .unwrap_or_else(|| (1..=18).map(|j| 0.05 * j as f64).collect());
        let (spec, front) = self.setup(c)?;
        let eta = self.cfg.numerics.eta;
        let found = out.timed("k scan", || {
            ks.par_iter()
                .map(|&k| k_scan(&[k], c, eta, &spec, &front).context(format!("k = {k}")))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let pts: Vec<(f64, C64)> = found.into_iter().flatten().collect();
        let rows: Vec<Vec<String>> = pts
            .iter()
            .map(|(k, z)| {
                let [r, i] = cplx(*z);
                vec![num(*k), r, i]
            })
            .collect();
        out.write_csv("kscan.csv", &["k", "Re_lambda", "Im_lambda"], &rows)?;
        out.curves(
            "kscan.svg",
            &Axes {
                title: &format!("leading transverse eigenvalue at c = {c}"),
                x_label: "k",
                y_label: "Re lambda",
            },
            &[Series::new("mode 1", pts.iter().map(|(k, z)| (*k, z.re)).collect())],
            Mark::Lines,
        )?;
        Ok(())
    }

    fn seeds(&self, default: &[SeedKind]) -> Vec<SeedKind> {
        match &self.cfg.scenario.seeds {
            Some(names) => names
                .iter()
                .map(|s| s.parse().expect("validated with the config"))
                .collect(),
            None => default.to_vec(),
        }
    }

    fn symmetry(&self, kind: SeedKind, front: &FrontProfile) -> SymmetryConstraint {
        if self.cfg.numerics.symmetry == SymmetryMode::None || !front.is_trivial() || !self.cfg.model.chi.is_zero() {
            return SymmetryConstraint::NONE;
        }
        match kind {
            SeedKind::ObliquePlus | SeedKind::ObliqueMinus => SymmetryConstraint::ODD,
            SeedKind::Checkerboard => SymmetryConstraint::ODD_REFLECTED,
            SeedKind::Stripes | SeedKind::Random => SymmetryConstraint::NONE,
        }
    }

    /// Critical mode used to shape the seeds.
    fn seed_mode(&self, out: &mut RunOutput) -> Result<HopfData, LabError> {
        let (spec, front) = self.setup(ModelSpec::default().c)?;
        out.timed("hopf", || self.locate(1, &spec, &front))
    }

    fn patterns(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let c = self.cfg.scenario.c.unwrap_or(1.0);
        let amplitude = self.cfg.scenario.seed_amplitude.unwrap_or(0.05);
        let kinds = self.seeds(&[SeedKind::ObliquePlus, SeedKind::Checkerboard]);
        let hopf = self.seed_mode(out)?;
        let (spec, front) = self.setup(c)?;
        let opts = self.cfg.relax_options();
        let rng = self.cfg.scenario.rng_seed;
        let results = out.timed("relaxation", || {
            kinds
                .par_iter()
                .map(|&kind| {
                    let what = format!("relaxing the {kind} seed at c = {c}");
                    let mut stepper = Stepper::new(&spec, &front, self.cfg.step_params(self.symmetry(kind, &front)))
                        .context(what.clone())?;
                    let start = seed(kind, amplitude, &hopf, &front, rng).context(what.clone())?;
                    let outcome = relax(&mut stepper, start, &opts).context(what)?;
                    let report = classify_pattern(&outcome.series, opts.trivial_threshold);
                    Ok((kind, outcome, report))
                })
                .collect::<Result<Vec<_>, LabError>>()
        })?;
        let mut summary = Vec::new();
        for (kind, outcome, report) in &results {
            summary.push(vec![
                kind.to_string(),
                report.class.to_string(),
                num(outcome.amplitude),
                opt_num(outcome.period),
                num(report.rotation_ratio),
                num(report.stripe_fraction),
                num(report.standing_index),
                outcome.converged.to_string(),
                num(outcome.state.t),
            ]);
            let field = &outcome.state.field;
            let grid = &field.grid;
            let (x, y) = (grid.x(), grid.y());
            let ny = grid.ny();
            let rows: Vec<Vec<String>> = field
                .values
                .iter()
                .enumerate()
                .map(|(m, v)| vec![num(x[m / ny]), num(y[m % ny]), num(*v)])
                .collect();
            let stem = format!("pattern_{}", file_stem(*kind));
            out.write_csv(&format!("{stem}.csv"), &["x", "y", "u"], &rows)?;
            out.heatmap(
                &format!("{stem}.svg"),
                &Axes {
                    title: &format!("{kind} seed at c = {c}: {}", report.class),
                    x_label: "x",
                    y_label: "y",
                },
                x,
                &y,
                &field.values,
            )?;
        }
        out.write_csv(
            "patterns.csv",
            &[
                "seed",
                "class",
                "amplitude",
                "period",
                "rotation_ratio",
                "stripe_fraction",
                "standing_index",
                "converged",
                "t_end",
            ],
            &summary,
        )?;
        Ok(())
    }

    fn diagram(&self, out: &mut RunOutput) -> Result<(), LabError> {
        let s = &self.cfg.scenario;
        let (lo, hi) = (s.c_min.unwrap_or(1.2), s.c_max.unwrap_or(1.5));
        let dc = s.dc.unwrap_or(0.01);
        let amplitude = s.seed_amplitude.unwrap_or(0.05);
        let kinds = self.seeds(&[SeedKind::Checkerboard, SeedKind::ObliquePlus]);
        let (hopf, _, report) = self.reduction(out)?;
        let (spec, front) = self.setup(lo)?;
        let mut opts = self.cfg.relax_options();
        opts.stop_on_decay = true;
        let rng = s.rng_seed;
        let branches = out.timed("continuation", || {
            kinds
                .par_iter()
                .map(|&kind| {
                    let what = format!("continuing the {kind} branch");
                    let mut stepper = Stepper::new(&spec, &front, self.cfg.step_params(self.symmetry(kind, &front)))
                        .context(what.clone())?;
                    let start = seed(kind, amplitude, &hopf, &front, rng).context(what.clone())?;
                    let (branch, _) = adiabatic_continuation(&mut stepper, start, lo, hi, dc, &opts).context(what)?;
                    Ok((kind, branch))
                })
                .collect::<Result<Vec<(SeedKind, ContinuationBranch)>, LabError>>()
        })?;
        let mut rows = Vec::new();
        let mut ends = Vec::new();
        let mut series = Vec::new();
        for (kind, branch) in &branches {
            for p in &branch.samples {
                rows.push(vec![
                    kind.to_string(),
                    num(p.c),
                    num(p.amplitude),
                    p.class.to_string(),
                    opt_num(p.period),
                    p.converged.to_string(),
                ]);
            }
            let (end, at) = match &branch.end {
                BranchEnd::Completed => ("completed".to_string(), None),
                BranchEnd::Death { c } => ("death".to_string(), Some(*c)),
                BranchEnd::ClassChange { c, from, to } => (format!("class change {from} -> {to}"), Some(*c)),
                BranchEnd::Failed { c, reason } => (format!("failed: {reason}"), Some(*c)),
            };
            ends.push(vec![kind.to_string(), end, opt_num(at)]);
            series.push(Series::new(
                format!("{kind} (simulation)"),
                branch.samples.iter().map(|p| (p.c, p.amplitude)).collect(),
            ));
        }
        out.write_csv(
            "diagram.csv",
            &["seed", "c", "amplitude", "class", "period", "converged"],
            &rows,
        )?;
        out.write_csv("diagram_ends.csv", &["seed", "end", "c"], &ends)?;

        // normal-form prediction on the same speed range
        let a_max = (0..=200)
            .map(|j| 0.002 * j as f64)
            .filter(|a| {
                let p = predict_branches(&report, &[*a])[0];
                p.c_oblique >= lo && p.c_oblique <= hi && p.c_checkerboard >= lo && p.c_checkerboard <= hi
            })
            .fold(0.0f64, f64::max);
        let a_values: Vec<f64> = (0..=50).map(|j| a_max * j as f64 / 50.0).collect();
        let pts = predict_branches(&report, &a_values);
        let pred_rows: Vec<Vec<String>> = pts
            .iter()
            .map(|p| {
                vec![
                    num(p.a),
                    num(p.c_oblique),
                    num(std::f64::consts::SQRT_2 * p.a),
                    num(p.c_checkerboard),
                    num(2.0 * p.a),
                ]
            })
            .collect();
        out.write_csv(
            "diagram_prediction.csv",
            &["a", "c_oblique", "rms_oblique", "c_checkerboard", "rms_checkerboard"],
            &pred_rows,
        )?;
        series.push(Series::new(
            "oblique (normal form)",
            pts.iter()
                .map(|p| (p.c_oblique, std::f64::consts::SQRT_2 * p.a))
                .collect(),
        ));
        series.push(Series::new(
            "checkerboard (normal form)",
            pts.iter().map(|p| (p.c_checkerboard, 2.0 * p.a)).collect(),
        ));
        out.curves(
            "diagram.svg",
            &Axes {
                title: &format!("bifurcation diagram, gamma = {}", self.cfg.model.gamma),
                x_label: "c",
                y_label: "rms amplitude",
            },
            &series,
            Mark::Dots,
        )?;
        Ok(())
    }
}

fn file_stem(kind: SeedKind) -> &'static str {
    match kind {
        SeedKind::ObliquePlus => "oblique_plus",
        SeedKind::ObliqueMinus => "oblique_minus",
        SeedKind::Checkerboard => "checkerboard",
        SeedKind::Stripes => "stripes",
        SeedKind::Random => "random",
    }
}
