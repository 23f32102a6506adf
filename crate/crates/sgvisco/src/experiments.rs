//! Parameter-sweep studies: the vanishing-capillarity (delta -> 0) and
//! vanishing-viscosity (nu -> 0) limits against their limiting systems,
//! Galerkin cutoff refinement, log-log rate fitting, the closed-form
//! Osgood-type rate bound, and manufactured-solution verification.
//!
//! Reference runs use the identical discretization with the swept
//! parameter set to zero, so discretization error cancels to leading
//! order and the measured gap isolates the parameter effect. Sweep
//! members are independent and run on scoped threads; aggregation is a
//! deterministic fold over the sorted value list.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::lr_norm;
use crate::error::{Error, Result};
use crate::evolution::{self, SolverConfig, State, Stepper};
use crate::fft::{inverse, sobolev_sum};
use crate::field::{RealField, SpectralGrid, TAU};
use crate::forcing::{ManufacturedCase, ManufacturedForcing};
use crate::ops;

/// Which parameter a limit study drives to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Delta,
    Nu,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::Nu => "nu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepParam::Delta),
            "nu" => Ok(SweepParam::Nu),
            other => Err(Error::InvalidParameter(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

/// Optional delta-dependent roughening of the initial motion: a high-mode
/// tail scaled so that ||grad F_0||_2 ~ amplitude * delta^-(1/2 - epsilon),
/// the data regime of the compactness limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roughening {
    pub epsilon: f64,
    pub amplitude: f64,
    pub seed: u64,
}

/// A sweep of one parameter toward zero against the limiting system.
#[derive(Debug, Clone)]
pub struct LimitStudy {
    /// base configuration; the swept parameter field is overridden per member
    pub base: SolverConfig,
    pub sweep: SweepParam,
    /// strictly decreasing, all > 0
    pub values: Vec<f64>,
    /// Lr exponents for the F error curves
    pub r_exponents: Vec<f64>,
    /// must be integer multiples of dt
    pub sample_times: Vec<f64>,
    pub roughen: Option<Roughening>,
    /// robustness check: integrate the reference with dt / factor instead
    /// of the members' dt (same-grid comparison stays the default since it
    /// cancels discretization error to leading order)
    pub reference_dt_refine: Option<u32>,
}

impl LimitStudy {
    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep values must be nonempty".into()));
        }
        for w in self.values.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidParameter(
                    "sweep values must be strictly decreasing".into(),
                ));
            }
        }
        if self.values.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter("sweep values must be > 0".into()));
        }
        if self.r_exponents.iter().any(|&r| r < 1.0) {
            return Err(Error::InvalidParameter("error exponents must be >= 1".into()));
        }
        validate_sample_times(&self.sample_times, self.base.dt, self.base.t_end)?;
        if self.roughen.is_some() && self.sweep == SweepParam::Nu {
            return Err(Error::InvalidParameter(
                "initial-data roughening applies to delta sweeps only".into(),
            ));
        }
        if self.reference_dt_refine == Some(0) {
            return Err(Error::InvalidParameter("reference_dt_refine must be >= 1".into()));
        }
        Ok(())
    }

    fn member_config(&self, value: f64) -> SolverConfig {
        let mut cfg = self.base.clone();
        match self.sweep {
            SweepParam::Delta => cfg.delta = value,
            SweepParam::Nu => cfg.nu = value,
        }
        cfg
    }
}

/// Error of one member run at one sample time and exponent.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub param: f64,
    pub t: f64,
    pub r: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityErrorRow {
    pub param: f64,
    pub t: f64,
    pub error: f64,
}

/// Least-squares fit of log error against log parameter.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// points dropped because the error was identically zero
    pub excluded_zero_errors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub r: f64,
    pub t: f64,
    pub fit: RateFit,
}

/// Evaluation of the closed-form rate bound against the measured errors.
#[derive(Debug, Clone, Serialize)]
pub struct RateBoundEvaluation {
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    /// sample time the constant was calibrated at
    pub calibrated_at: f64,
    pub rows: Vec<RateBoundRow>,
    /// bound >= measured e_r^r wherever delta is admissible, at times
    /// after the calibration time
    pub dominates: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateBoundRow {
    pub delta: f64,
    pub t: f64,
    pub measured_pow_r: f64,
    pub bound: f64,
    pub admissible: bool,
}

/// Diagnostics of one member run at the sample times (coarse cumulative
/// integrals, trapezoidal on the sample grid).
#[derive(Debug, Clone)]
pub struct MemberRecords {
    pub param: f64,
    pub records: Vec<crate::diagnostics::DiagnosticsRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub sweep: String,
    pub rows: Vec<ErrorRow>,
    pub u_rows: Vec<VelocityErrorRow>,
    pub fits: Vec<FitRow>,
    pub rate_bound: Option<RateBoundEvaluation>,
    /// per-member diagnostics, written to per-parameter subdirectories
    #[serde(skip)]
    pub member_records: Vec<MemberRecords>,
}

impl StudyResult {
    /// Error for a given (param, t, r), if recorded.
    pub fn error_at(&self, param: f64, t: f64, r: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| row.param == param && (row.t - t).abs() < 1e-12 && row.r == r)
            .map(|row| row.error)
    }

    /// Sample-time/exponent pairs where errors fail to decrease with the
    /// parameter (ordering violations beyond the tolerance).
    pub fn monotonicity_violations(&self, params: &[f64], tol: f64) -> Vec<(f64, f64)> {
        let mut bad = Vec::new();
        for fit in &self.fits {
            let errs: Vec<f64> = params
                .iter()
                .filter_map(|&p| self.error_at(p, fit.t, fit.r))
                .collect();
            // params are decreasing, so errors should be nonincreasing
            if errs.windows(2).any(|w| w[1] > w[0] + tol) {
                bad.push((fit.r, fit.t));
            }
        }
        bad
    }
}

/// Strictly increasing, positive, integer multiples of dt, within t_end.
fn validate_sample_times(times: &[f64], dt: f64, t_end: f64) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("sample times must be nonempty".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "sample times must be strictly increasing".into(),
            ));
        }
    }
    for &t in times {
        if t <= 0.0 || t > t_end + 1e-12 {
            return Err(Error::InvalidParameter(format!("sample time {t} outside (0, t_end]")));
        }
        let steps = t / dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "sample time {t} is not a multiple of dt = {dt}"
            )));
        }
    }
    Ok(())
}

/// Snapshot of the physical fields of one run at the sample times.
struct SampledRun {
    /// (t, F real, u real) per sample time
    samples: Vec<(f64, RealField, RealField)>,
    records: Vec<crate::diagnostics::DiagnosticsRecord>,
}

fn sample_run(
    config: &SolverConfig,
    initial: &State,
    sample_times: &[f64],
    lr_exponents: &[f64],
) -> Result<SampledRun> {
    let mut stepper = Stepper::new(config.clone())?;
    let mut state = initial.clone();
    let sample_steps: Vec<usize> =
        sample_times.iter().map(|&t| (t / config.dt).round() as usize).collect();
    let last = *sample_steps.iter().max().unwrap_or(&0);
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut records = Vec::with_capacity(sample_times.len() + 1);
    let mut prev =
        crate::diagnostics::evaluate(&state, &config.model, config.nu, config.delta, lr_exponents)?;
    records.push(prev.clone());
    for step in 1..=last {
        stepper.advance(&mut state)?;
        if let Some(pos) = sample_steps.iter().position(|&s| s == step) {
            samples.push((
                sample_times[pos],
                inverse(&state.f_hat()),
                inverse(&state.u_hat),
            ));
            let mut rec = crate::diagnostics::evaluate(
                &state,
                &config.model,
                config.nu,
                config.delta,
                lr_exponents,
            )?;
            let h = 0.5 * (rec.t - prev.t);
            rec.diss_visc_cum = prev.diss_visc_cum + h * (prev.rate_visc + rec.rate_visc);
            rec.diss_struct_cum = prev.diss_struct_cum
                + h * ((prev.rate_lap + prev.rate_hessian + prev.rate_gradu)
                    + (rec.rate_lap + rec.rate_hessian + rec.rate_gradu));
            rec.src_struct_cum = prev.src_struct_cum + h * (prev.rate_src + rec.rate_src);
            records.push(rec.clone());
            prev = rec;
        }
    }
    Ok(SampledRun { samples, records })
}

/// Add a seeded high-mode tail to the motion so that ||grad F_0||_2 hits
/// the target amplitude * delta^-(1/2 - epsilon).
pub fn roughen_motion(
    y_hat: &crate::field::SpectralField,
    delta: f64,
    rough: &Roughening,
) -> crate::field::SpectralField {
    let grid = y_hat.grid;
    let d = grid.d();
    let cutoff = grid.cutoff() as i64;
    let band_lo = cutoff / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(rough.seed ^ delta.to_bits());
    let mut tail = crate::field::SpectralField::zeros(grid, crate::field::Rank::Vector);
    for idx in 0..grid.points() {
        let m = grid.linf_mode(idx);
        if m <= band_lo || m > cutoff {
            continue;
        }
        for i in 0..d {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *tail.at_mut(idx, i) = c;
        }
    }
    // symmetrize so the tail is real-valued
    let mut sym = tail.clone();
    for idx in 0..grid.points() {
        let k = grid.wavevector(idx);
        let mut neg = [0i64; 3];
        for a in 0..d {
            neg[a] = -k[a];
        }
        let jdx = grid.mode_index(&neg);
        for i in 0..d {
            *sym.at_mut(idx, i) = 0.5 * (tail.at(idx, i) + tail.at(jdx, i).conj());
        }
    }
    // ||grad F||_2^2 = sum |kappa|^6 |y_k|^2 for the tail
    let current = sobolev_sum(&ops::f_from_y(&sym).expect("vector"), 1).sqrt();
    let target = rough.amplitude * delta.powf(-(0.5 - rough.epsilon));
    if current > 0.0 {
        sym.scale(target / current);
    }
    let mut out = y_hat.clone();
    out.scaled_add(1.0, &sym);
    out
}

/// Run the sweep against the zero-parameter reference and fit rates.
///
/// Member runs execute concurrently (they are independent); results are
/// folded in sweep order.
pub fn run_limit_study(study: &LimitStudy, initial: &State) -> Result<StudyResult> {
    study.validate()?;
    let mut reference_cfg = study.member_config(0.0);
    if let Some(refine) = study.reference_dt_refine {
        reference_cfg.dt /= refine as f64;
    }
    let reference = sample_run(&reference_cfg, initial, &study.sample_times, &study.r_exponents)
        .map_err(|e| member_error("reference", 0.0, e))?;

    // member runs, concurrent, one slot each
    let mut member_results: Vec<Option<Result<SampledRun>>> =
        (0..study.values.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &value in &study.values {
            let study_ref = &study;
            let initial_ref = initial;
            handles.push(scope.spawn(move || {
                let cfg = study_ref.member_config(value);
                let member_initial = match (&study_ref.roughen, study_ref.sweep) {
                    (Some(rough), SweepParam::Delta) => {
                        let mut s = initial_ref.clone();
                        s.y_hat = ops::project_modes(
                            &roughen_motion(&initial_ref.y_hat, value, rough),
                            cfg.grid.cutoff(),
                        )?;
                        s
                    }
                    _ => initial_ref.clone(),
                };
                sample_run(&cfg, &member_initial, &study_ref.sample_times, &study_ref.r_exponents)
            }));
        }
        for (slot, handle) in handles.into_iter().enumerate() {
            member_results[slot] = Some(handle.join().expect("member thread panicked"));
        }
    });

    let mut rows = Vec::new();
    let mut u_rows = Vec::new();
    let mut member_records = Vec::new();
    for (slot, &value) in study.values.iter().enumerate() {
        let run = member_results[slot]
            .take()
            .expect("member result present")
            .map_err(|e| member_error(study.sweep.name(), value, e))?;
        for ((t, f, u), (_, f_ref, u_ref)) in run.samples.iter().zip(&reference.samples) {
            let df = f.difference(f_ref)?;
            let du = u.difference(u_ref)?;
            for &r in &study.r_exponents {
                rows.push(ErrorRow { param: value, t: *t, r, error: lr_norm(&df, r)? });
            }
            u_rows.push(VelocityErrorRow { param: value, t: *t, error: lr_norm(&du, 2.0)? });
        }
        member_records.push(MemberRecords { param: value, records: run.records });
    }

    let mut fits = Vec::new();
    for &r in &study.r_exponents {
        for &t in &study.sample_times {
            let points: Vec<(f64, f64)> = study
                .values
                .iter()
                .filter_map(|&p| {
                    rows.iter()
                        .find(|row| row.param == p && (row.t - t).abs() < 1e-12 && row.r == r)
                        .map(|row| (p, row.error))
                })
                .collect();
            match fit_rate(&points) {
                Ok(fit) => fits.push(FitRow { r, t, fit }),
                Err(Error::InsufficientData(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let rate_bound = if study.sweep == SweepParam::Delta && study.r_exponents.len() == 1 {
        let r = study.r_exponents[0];
        (1.0 < r && r < 2.0)
            .then(|| evaluate_rate_bound(&rows, &study.values, &study.sample_times, r))
            .transpose()?
    } else {
        None
    };

    Ok(StudyResult {
        sweep: study.sweep.name().into(),
        rows,
        u_rows,
        fits,
        rate_bound,
        member_records,
    })
}

fn member_error(name: &str, value: f64, e: Error) -> Error {
    match e {
        Error::BlowUp { t, .. } => {
            Error::InadmissibleData(format!("study member {name} = {value} blew up at t = {t}"))
        }
        other => other,
    }
}

/// Least squares on (log param, log error). Zero errors are excluded and
/// counted; fewer than 3 positive points is an error.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let positive: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(p, e)| (p.ln(), e.ln()))
        .collect();
    let excluded = points.len() - positive.len();
    if positive.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs >= 3 positive points, got {}",
            positive.len()
        )));
    }
    let n = positive.len() as f64;
    let mean_x = positive.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = positive.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &positive {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all parameters identical in rate fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = positive
        .iter()
        .map(|&(x, y)| {
            let p = intercept + slope * x;
            (y - p) * (y - p)
        })
        .sum();
    let r_squared = if syy < 1e-300 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r_squared, excluded_zero_errors: excluded })
}

/// Closed-form Osgood-type rate bound on ||F^delta - F_ref||_r^r:
/// (C1 delta^{r/2})^{exp(-C2 t)} exp(2 - 2 exp(-C2 t)), valid while
/// delta <= exp{(4/r)(1 - exp(C2 t))} / C1^{2/r}. Returns (bound,
/// delta_admissible).
pub fn rate_bound(c1: f64, c2: f64, delta: f64, r: f64, t: f64) -> Result<(f64, bool)> {
    if c1 <= 0.0 || c2 <= 0.0 {
        return Err(Error::InvalidParameter("rate bound needs C1, C2 > 0".into()));
    }
    if !(1.0 < r && r < 2.0) {
        return Err(Error::InvalidParameter(format!("rate bound needs 1 < r < 2, got {r}")));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter("rate bound needs t >= 0".into()));
    }
    if delta <= 0.0 {
        return Err(Error::InvalidParameter("rate bound needs delta > 0".into()));
    }
    let decay = (-c2 * t).exp();
    let bound = (c1 * delta.powf(r / 2.0)).powf(decay) * (2.0 - 2.0 * decay).exp();
    let threshold = ((4.0 / r) * (1.0 - (c2 * t).exp())).exp() / c1.powf(2.0 / r);
    Ok((bound, delta <= threshold))
}

/// Fit C1 as the smallest constant making the bound dominate the measured
/// e_r^r at the earliest sample time (C2 is fixed), then check dominance
/// at the later sample times wherever delta is admissible.
fn evaluate_rate_bound(
    rows: &[ErrorRow],
    values: &[f64],
    sample_times: &[f64],
    r: f64,
) -> Result<RateBoundEvaluation> {
    let c2 = 1.0;
    let t1 = sample_times.iter().cloned().fold(f64::INFINITY, f64::min);
    let decay1 = (-c2 * t1).exp();
    let mut c1: f64 = 1e-12;
    for &delta in values {
        let measured = rows
            .iter()
            .find(|row| row.param == delta && (row.t - t1).abs() < 1e-12 && row.r == r)
            .map(|row| row.error.powf(r))
            .unwrap_or(0.0);
        if measured > 0.0 {
            // invert bound = (C1 d^{r/2})^{decay} e^{2-2 decay} for C1
            let needed = (measured * (2.0 * decay1 - 2.0).exp()).powf(1.0 / decay1)
                / delta.powf(r / 2.0);
            c1 = c1.max(needed);
        }
    }
    let mut dominates = true;
    let mut out_rows = Vec::new();
    for &delta in values {
        for &t in sample_times {
            let measured = rows
                .iter()
                .find(|row| row.param == delta && (row.t - t).abs() < 1e-12 && row.r == r)
                .map(|row| row.error.powf(r))
                .unwrap_or(0.0);
            let (bound, admissible) = rate_bound(c1, c2, delta, r, t)?;
            if admissible && t > t1 + 1e-12 && measured > bound {
                dominates = false;
            }
            out_rows.push(RateBoundRow { delta, t, measured_pow_r: measured, bound, admissible });
        }
    }
    Ok(RateBoundEvaluation { r, c1, c2, calibrated_at: t1, rows: out_rows, dominates })
}

/// One row of a Galerkin cutoff-refinement study: spectral L2 distances to
/// the largest-cutoff run, compared on the common modes.
#[derive(Debug, Clone, Serialize)]
pub struct GalerkinRow {
    pub cutoff: usize,
    pub t: f64,
    pub error_f: f64,
    pub error_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GalerkinResult {
    pub rows: Vec<GalerkinRow>,
}

impl GalerkinResult {
    /// error(cutoff_i) / error(cutoff_{i+1}) at the given time, for F.
    pub fn successive_ratios(&self, t: f64) -> Vec<f64> {
        let mut at_t: Vec<&GalerkinRow> =
            self.rows.iter().filter(|row| (row.t - t).abs() < 1e-12).collect();
        at_t.sort_by_key(|row| row.cutoff);
        at_t.windows(2)
            .filter(|w| w[1].error_f > 0.0)
            .map(|w| w[0].error_f / w[1].error_f)
            .collect()
    }
}

/// Cauchy-in-N check: run the same data at increasing cutoffs and compare
/// each run against the largest cutoff on their common modes.
pub fn galerkin_refinement_study(
    base: &SolverConfig,
    cutoffs: &[usize],
    initial_data: &(RealField, RealField),
    sample_times: &[f64],
) -> Result<GalerkinResult> {
    if cutoffs.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 cutoffs".into()));
    }
    for w in cutoffs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter("cutoffs must be strictly increasing".into()));
        }
    }
    let n_max = *cutoffs.last().unwrap();
    if n_max > base.grid.n() / 2 - 1 {
        return Err(Error::InvalidParameter(format!(
            "largest cutoff {n_max} does not fit grid n = {}",
            base.grid.n()
        )));
    }
    validate_sample_times(sample_times, base.dt, base.t_end)?;
    let (u0, y0) = initial_data;

    // spectral states at the sample times, per cutoff
    let mut runs: Vec<Vec<State>> = Vec::new();
    for &cutoff in cutoffs {
        let grid = base.grid.with_cutoff(cutoff)?;
        let mut cfg = base.clone();
        cfg.grid = grid;
        let mut u0c = u0.clone();
        let mut y0c = y0.clone();
        u0c.grid = grid;
        y0c.grid = grid;
        let init = evolution::init_state(&u0c, &y0c, evolution::GivenAs::Motion, 1e-8)?;
        let mut stepper = Stepper::new(cfg.clone())?;
        let mut state = init.state;
        let sample_steps: Vec<usize> =
            sample_times.iter().map(|&t| (t / cfg.dt).round() as usize).collect();
        let last = *sample_steps.iter().max().unwrap_or(&0);
        let mut states = Vec::new();
        for step in 1..=last {
            stepper.advance(&mut state)?;
            if sample_steps.contains(&step) {
                states.push(state.clone());
            }
        }
        runs.push(states);
    }

    let reference = runs.last().unwrap();
    let mut rows = Vec::new();
    for (ci, &cutoff) in cutoffs.iter().enumerate().take(cutoffs.len() - 1) {
        for (si, &t) in sample_times.iter().enumerate() {
            let state = &runs[ci][si];
            let ref_state = &reference[si];
            // restrict both to the smaller cutoff, then Parseval L2; the
            // fields live on grids that differ only in the cutoff tag
            let common = base.grid.with_cutoff(cutoff)?;
            let mut f_small = ops::project_modes(&state.f_hat(), cutoff)?;
            let mut f_big = ops::project_modes(&ref_state.f_hat(), cutoff)?;
            let mut u_small = ops::project_modes(&state.u_hat, cutoff)?;
            let mut u_big = ops::project_modes(&ref_state.u_hat, cutoff)?;
            f_small.grid = common;
            f_big.grid = common;
            u_small.grid = common;
            u_big.grid = common;
            rows.push(GalerkinRow {
                cutoff,
                t,
                error_f: sobolev_sum(&f_small.difference(&f_big)?, 0).sqrt(),
                error_u: sobolev_sum(&u_small.difference(&u_big)?, 0).sqrt(),
            });
        }
    }
    Ok(GalerkinResult { rows })
}

/// Manufactured-solution verification report.
#[derive(Debug, Clone, Serialize)]
pub struct MmsReport {
    pub temporal: Vec<MmsTemporalRow>,
    pub temporal_fit: Option<RateFit>,
    pub spatial: Vec<MmsSpatialRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsTemporalRow {
    pub dt: f64,
    pub error_y: f64,
    pub error_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmsSpatialRow {
    pub n: usize,
    pub error_y: f64,
    pub error_u: f64,
    /// motion bandwidth fits within cutoff/2, so the discrete stress path
    /// is exact and the reported error is purely temporal
    pub resolved: bool,
}

/// Exact manufactured state at time t on the given grid.
pub fn manufactured_state(case: &ManufacturedCase, grid: SpectralGrid, t: f64) -> Result<State> {
    Ok(State {
        t,
        y_hat: ops::project_modes(&case.motion_hat(grid, t, 0), grid.cutoff())?,
        u_hat: ops::project_modes(&case.motion_hat(grid, t, 1), grid.cutoff())?,
    })
}

fn mms_error(case: &ManufacturedCase, state: &State) -> Result<(f64, f64)> {
    let grid = state.grid();
    // compare against the unprojected motion so projection error is visible
    let y_exact = case.motion_hat(grid, state.t, 0);
    let u_exact = case.motion_hat(grid, state.t, 1);
    Ok((
        sobolev_sum(&state.y_hat.difference(&y_exact)?, 0).sqrt(),
        sobolev_sum(&state.u_hat.difference(&u_exact)?, 0).sqrt(),
    ))
}

fn run_forced(config: &SolverConfig, case: &ManufacturedCase) -> Result<State> {
    let mut cfg = config.clone();
    cfg.forcing = Some(ManufacturedForcing { case: case.clone() });
    let mut state = manufactured_state(case, cfg.grid, 0.0)?;
    let mut stepper = Stepper::new(cfg.clone())?;
    for _ in 0..cfg.n_steps() {
        stepper.advance(&mut state)?;
    }
    Ok(state)
}

/// Forced runs from exact initial data: temporal order at the finest grid,
/// spatial errors at the finest dt.
pub fn mms_study(
    case: &ManufacturedCase,
    base: &SolverConfig,
    dts: &[f64],
    grids: &[usize],
) -> Result<MmsReport> {
    if dts.is_empty() || grids.is_empty() {
        return Err(Error::InsufficientData("mms study needs dt and grid lists".into()));
    }
    for w in dts.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidParameter("dt list must be strictly decreasing".into()));
        }
    }
    for w in grids.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter("grid list must be strictly increasing".into()));
        }
    }

    let n_fine = *grids.last().unwrap();
    let fine_grid = SpectralGrid::new(base.grid.d(), n_fine, (n_fine / 3).max(1))?;
    let mut temporal = Vec::new();
    for &dt in dts {
        let cfg = SolverConfig { grid: fine_grid, dt, ..base.clone() };
        let state = run_forced(&cfg, case)?;
        let (ey, eu) = mms_error(case, &state)?;
        temporal.push(MmsTemporalRow { dt, error_y: ey, error_u: eu });
    }
    let temporal_fit =
        match fit_rate(&temporal.iter().map(|r| (r.dt, r.error_y.max(r.error_u))).collect::<Vec<_>>()) {
            Ok(fit) => Some(fit),
            Err(Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        };

    let dt_fine = *dts.last().unwrap();
    let mut spatial = Vec::new();
    for &n in grids {
        let grid = SpectralGrid::new(base.grid.d(), n, (n / 3).max(1))?;
        let cfg = SolverConfig { grid, dt: dt_fine, ..base.clone() };
        let state = run_forced(&cfg, case)?;
        let (ey, eu) = mms_error(case, &state)?;
        spatial.push(MmsSpatialRow {
            n,
            error_y: ey,
            error_u: eu,
            resolved: case.max_mode() <= (grid.cutoff() / 2) as i64,
        });
    }

    Ok(MmsReport { temporal, temporal_fit, spatial })
}

/// Named initial-data presets shared by runs and studies.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    Zero,
    /// two standing waves in y, one in u
    TwoMode { amplitude: f64, u_amplitude: f64 },
    /// periodic Gaussian-like bump, spectrally defined
    GaussianBump { amplitude: f64, width: f64 },
}

/// Materialize a preset as physical (u0, y0) fields.
pub fn build_initial_fields(preset: &InitialPreset, grid: SpectralGrid) -> (RealField, RealField) {
    use crate::field::Rank;
    let d = grid.d();
    let mut u0 = RealField::zeros(grid, Rank::Vector);
    let mut y0 = RealField::zeros(grid, Rank::Vector);
    match preset {
        InitialPreset::Zero => {}
        InitialPreset::TwoMode { amplitude, u_amplitude } => {
            for p in 0..grid.points() {
                let x = grid.coords(p);
                match d {
                    1 => {
                        *y0.at_mut(p, 0) = amplitude / TAU
                            * ((TAU * x[0]).sin() + 0.5 * (2.0 * TAU * x[0]).cos());
                        *u0.at_mut(p, 0) = u_amplitude * (TAU * x[0]).sin();
                    }
                    _ => {
                        *y0.at_mut(p, 0) = amplitude / TAU * (TAU * (x[0] + x[1])).sin();
                        *y0.at_mut(p, 1) =
                            amplitude / (2.0 * TAU) * (TAU * (2.0 * x[0] - x[1])).cos();
                        *u0.at_mut(p, 0) = u_amplitude * (TAU * x[1]).sin();
                        *u0.at_mut(p, 1) = u_amplitude * (TAU * x[0]).cos();
                    }
                }
            }
        }
        InitialPreset::GaussianBump { amplitude, width } => {
            // spectral bump: y_i has coefficients ~ exp(-w^2 |kappa|^2 / 2)
            // centered at component-dependent offsets, zero mean; the
            // (w sqrt(2 pi))^d prefactor normalizes the physical peak to
            // roughly `amplitude`
            let mut y_hat = crate::field::SpectralField::zeros(grid, Rank::Vector);
            let centers = [[0.5, 0.5, 0.5], [0.25, 0.75, 0.5], [0.75, 0.25, 0.5]];
            let peak = amplitude * (width * (TAU).sqrt()).powi(d as i32);
            for idx in 0..grid.points() {
                if grid.linf_mode(idx) > grid.cutoff() as i64 {
                    continue;
                }
                let ksq = grid.kappa_sq(idx);
                if ksq == 0.0 {
                    continue;
                }
                let k = grid.wavevector(idx);
                let envelope = peak * (-0.5 * width * width * ksq).exp();
                for i in 0..d {
                    let mut phase = 0.0;
                    for a in 0..d {
                        phase -= TAU * k[a] as f64 * centers[i][a];
                    }
                    *y_hat.at_mut(idx, i) = envelope * Complex64::new(phase.cos(), phase.sin());
                }
            }
            y0 = inverse(&y_hat);
        }
    }
    (u0, y0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyModel;
    use crate::evolution::{linear_oracle, GivenAs, Scheme};
    use crate::forcing::ManufacturedMode;
    use crate::ops::DealiasRule;

    fn base_config(grid: SpectralGrid, model: EnergyModel, nu: f64, delta: f64) -> SolverConfig {
        SolverConfig {
            grid,
            model,
            nu,
            delta,
            dt: 1e-2,
            t_end: 1.0,
            scheme: Scheme::ImexCnAb2,
            dealias: DealiasRule::TwoThirds,
            forcing: None,
        }
    }

    #[test]
    fn fit_rate_exact_power_laws() {
        let pts: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3].iter().map(|&p| (p, p)).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let pts: Vec<(f64, f64)> =
            [1e-1f64, 3e-2, 1e-2, 3e-3].iter().map(|&p| (p, 3.0 * p.sqrt())).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| {
                let p = 10f64.powi(-i - 1);
                let noise = 1.0 + 0.01 * rng.gen_range(-1.0..1.0);
                (p, 2.0 * p.powf(0.75) * noise)
            })
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 0.75).abs() <= 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn fit_rate_rejects_insufficient_data() {
        assert!(fit_rate(&[(1e-1, 1e-2), (1e-2, 1e-3)]).is_err());
        // zero errors are excluded with a note
        let pts = [(1e-1, 1e-2), (1e-2, 0.0), (1e-3, 1e-4), (1e-4, 1e-5)];
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.excluded_zero_errors, 1);
    }

    #[test]
    fn rate_bound_limits() {
        let (c1, c2, r) = (2.0, 1.5, 1.5);
        // t = 0: bound = C1 delta^{r/2}, threshold = C1^{-2/r}
        let delta = 1e-3;
        let (bound, admissible) = rate_bound(c1, c2, delta, r, 0.0).unwrap();
        assert!((bound - c1 * delta.powf(0.75)).abs() < 1e-15);
        assert_eq!(admissible, delta <= c1.powf(-2.0 / r));
        // t -> infinity: exponent of the delta term vanishes, bound -> e^2
        let (bound, _) = rate_bound(c1, c2, delta, r, 1e6).unwrap();
        assert!((bound - std::f64::consts::E.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn rate_bound_monotone_in_time_when_admissible() {
        let (c1, c2, r) = (0.8, 1.0, 1.5);
        let delta = 1e-2; // C1 delta^{r/2} < 1
        let mut prev = 0.0;
        for i in 0..200 {
            let t = i as f64 * 0.05;
            let (bound, _) = rate_bound(c1, c2, delta, r, t).unwrap();
            assert!(bound >= prev - 1e-14, "bound not monotone at t = {t}");
            prev = bound;
        }
    }

    #[test]
    fn rate_bound_validates_parameters() {
        assert!(rate_bound(-1.0, 1.0, 1e-2, 1.5, 1.0).is_err());
        assert!(rate_bound(1.0, 1.0, 1e-2, 2.5, 1.0).is_err());
        assert!(rate_bound(1.0, 1.0, 0.0, 1.5, 1.0).is_err());
        assert!(rate_bound(1.0, 1.0, 1e-2, 1.5, -1.0).is_err());
    }

    #[test]
    fn study_rejects_bad_values() {
        let grid = SpectralGrid::new(2, 8, 2).unwrap();
        let base = base_config(grid, EnergyModel::quadratic(2), 1.0, 0.0);
        let study = LimitStudy {
            base: base.clone(),
            sweep: SweepParam::Delta,
            values: vec![1e-2, 5e-3, 0.0],
            r_exponents: vec![1.5],
            sample_times: vec![0.5],
            roughen: None,
            reference_dt_refine: None,
        };
        assert!(run_limit_study(&study, &State::zeros(grid)).is_err());
        let study = LimitStudy {
            base,
            sweep: SweepParam::Delta,
            values: vec![5e-3, 1e-2],
            r_exponents: vec![1.5],
            sample_times: vec![0.5],
            roughen: None,
            reference_dt_refine: None,
        };
        assert!(run_limit_study(&study, &State::zeros(grid)).is_err());
    }

    #[test]
    fn study_zero_data_gives_zero_errors() {
        let grid = SpectralGrid::new(2, 8, 2).unwrap();
        let base = base_config(grid, EnergyModel::quadratic(2), 1.0, 0.0);
        let study = LimitStudy {
            base,
            sweep: SweepParam::Delta,
            values: vec![1e-2, 5e-3, 2.5e-3],
            r_exponents: vec![2.0],
            sample_times: vec![0.5, 1.0],
            roughen: None,
            reference_dt_refine: None,
        };
        let result = run_limit_study(&study, &State::zeros(grid)).unwrap();
        assert!(result.rows.iter().all(|row| row.error == 0.0));
        // all-zero errors cannot be fitted
        assert!(result.fits.is_empty());
    }

    #[test]
    fn delta_study_matches_oracle_pair() {
        // quadratic model, axis-mode data: the study errors must equal the
        // errors computed from two closed-form oracle calls
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let base =
            SolverConfig { dt: 2.5e-4, ..base_config(grid, EnergyModel::quadratic(2), 1.0, 0.0) };
        let initial = crate::testutil::random_axis_state(grid, 0.2, 3);
        let values = vec![1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let study = LimitStudy {
            base: base.clone(),
            sweep: SweepParam::Delta,
            values: values.clone(),
            r_exponents: vec![2.0],
            sample_times: vec![0.5, 1.0],
            roughen: None,
            reference_dt_refine: None,
        };
        let result = run_limit_study(&study, &initial).unwrap();
        for &delta in &values {
            for &t in &[0.5, 1.0] {
                let cfg_d = SolverConfig { delta, ..base.clone() };
                let cfg_0 = SolverConfig { delta: 0.0, ..base.clone() };
                let s_d = linear_oracle(&cfg_d, &initial, t).unwrap();
                let s_0 = linear_oracle(&cfg_0, &initial, t).unwrap();
                let f_d = inverse(&s_d.f_hat());
                let f_0 = inverse(&s_0.f_hat());
                let expect = lr_norm(&f_d.difference(&f_0).unwrap(), 2.0).unwrap();
                let got = result.error_at(delta, t, 2.0).unwrap();
                assert!(
                    (got - expect).abs() <= 1e-8,
                    "delta {delta} t {t}: study {got} vs oracle {expect}"
                );
            }
        }
        // smooth linear dynamics: errors decrease monotonically in delta
        assert!(result.monotonicity_violations(&values, 1e-12).is_empty());
    }

    #[test]
    fn refined_reference_agrees_with_same_grid_reference() {
        // the leading-order cancellation argument: a 4x finer reference
        // changes the measured errors only at the stepper-error scale
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let base =
            SolverConfig { dt: 1e-3, ..base_config(grid, EnergyModel::quadratic(2), 1.0, 0.0) };
        let initial = crate::testutil::random_axis_state(grid, 0.2, 5);
        let mut study = LimitStudy {
            base,
            sweep: SweepParam::Delta,
            values: vec![1e-2, 5e-3, 2.5e-3],
            r_exponents: vec![2.0],
            sample_times: vec![0.5],
            roughen: None,
            reference_dt_refine: None,
        };
        let plain = run_limit_study(&study, &initial).unwrap();
        study.reference_dt_refine = Some(4);
        let refined = run_limit_study(&study, &initial).unwrap();
        for (a, b) in plain.rows.iter().zip(&refined.rows) {
            assert!(
                (a.error - b.error).abs() <= 1e-6,
                "param {}: {} vs {}",
                a.param,
                a.error,
                b.error
            );
        }
    }

    #[test]
    fn roughened_delta_study_runs() {
        // compactness-limit data regime: members get a delta-dependent
        // high-mode tail; the reference keeps the smooth data
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let base = SolverConfig {
            dt: 1e-3,
            t_end: 0.5,
            ..base_config(grid, EnergyModel::double_well(2), 1.0, 0.0)
        };
        let preset = InitialPreset::TwoMode { amplitude: 0.1, u_amplitude: 0.05 };
        let (u0, y0) = build_initial_fields(&preset, grid);
        let init = evolution::init_state(&u0, &y0, GivenAs::Motion, 1e-8).unwrap();
        let study = LimitStudy {
            base,
            sweep: SweepParam::Delta,
            values: vec![1e-2, 5e-3, 2.5e-3],
            r_exponents: vec![1.5],
            sample_times: vec![0.25, 0.5],
            roughen: Some(Roughening { epsilon: 0.1, amplitude: 0.02, seed: 9 }),
            reference_dt_refine: None,
        };
        let result = run_limit_study(&study, &init.state).unwrap();
        assert_eq!(result.rows.len(), 3 * 2);
        assert!(result.rows.iter().all(|row| row.error.is_finite() && row.error > 0.0));
    }

    #[test]
    fn roughening_hits_target_gradient_norm() {
        let grid = SpectralGrid::new(2, 32, 10).unwrap();
        let y = crate::field::SpectralField::zeros(grid, crate::field::Rank::Vector);
        let rough = Roughening { epsilon: 0.1, amplitude: 0.05, seed: 4 };
        for delta in [1e-2, 1e-3] {
            let roughened = roughen_motion(&y, delta, &rough);
            let norm = sobolev_sum(&ops::f_from_y(&roughened).unwrap(), 1).sqrt();
            let target = 0.05 * delta.powf(-0.4);
            assert!((norm - target).abs() <= 1e-9 * target, "norm {norm} target {target}");
            // tail is real-valued
            assert!(roughened.hermitian_residual() < 1e-13);
        }
    }

    #[test]
    fn galerkin_band_limited_linear_data_is_exact() {
        // data band-limited to the smallest cutoff + quadratic model:
        // no mode coupling, every cutoff computes the same solution
        let grid = SpectralGrid::new(2, 32, 15).unwrap();
        let base = SolverConfig {
            dt: 1e-3,
            t_end: 0.2,
            ..base_config(grid, EnergyModel::quadratic(2), 0.5, 0.01)
        };
        let preset = InitialPreset::TwoMode { amplitude: 0.2, u_amplitude: 0.1 };
        let data = build_initial_fields(&preset, grid);
        let result =
            galerkin_refinement_study(&base, &[4, 8, 12], &data, &[0.1, 0.2]).unwrap();
        for row in &result.rows {
            assert!(row.error_f <= 1e-12, "cutoff {} error {}", row.cutoff, row.error_f);
            assert!(row.error_u <= 1e-12);
        }
    }

    #[test]
    fn galerkin_requires_two_cutoffs() {
        let grid = SpectralGrid::new(2, 16, 7).unwrap();
        let base = base_config(grid, EnergyModel::quadratic(2), 0.5, 0.01);
        let data = build_initial_fields(&InitialPreset::Zero, grid);
        assert!(galerkin_refinement_study(&base, &[4], &data, &[0.1]).is_err());
        assert!(galerkin_refinement_study(&base, &[4, 20], &data, &[0.1]).is_err());
    }

    #[test]
    fn mms_static_case_stays_at_machine_floor() {
        // a time-independent manufactured motion is an equilibrium of the
        // forced semi-discrete system; Crank-Nicolson preserves equilibria
        // exactly, the exponential midpoint rule up to its quadrature error
        let case = ManufacturedCase {
            modes: vec![ManufacturedMode {
                component: 0,
                k: [1, 1, 0],
                amplitude: 0.15,
                omega: 0.0,
                phase_t: 0.0,
                phase_x: 0.4,
            }],
        };
        let grid = SpectralGrid::new(2, 24, 8).unwrap();
        let cfg = SolverConfig {
            dt: 1e-2,
            t_end: 0.5,
            ..base_config(grid, EnergyModel::double_well(2), 0.3, 0.05)
        };
        let state = run_forced(&cfg, &case).unwrap();
        let (ey, eu) = mms_error(&case, &state).unwrap();
        assert!(ey <= 1e-12 && eu <= 1e-12, "imex_cnab2: ({ey}, {eu})");

        // exponential midpoint: drift is O(dt^2) overall
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let cfg = SolverConfig { scheme: Scheme::ExponentialMidpoint, dt, ..cfg.clone() };
            let state = run_forced(&cfg, &case).unwrap();
            let (ey, eu) = mms_error(&case, &state).unwrap();
            errs.push(ey.max(eu));
        }
        assert!(errs[0] <= 1e-2);
        assert!(errs[1] <= errs[0] / 3.0, "expected ~4x shrink: {errs:?}");
    }

    #[test]
    fn mms_temporal_second_order_double_well() {
        let case = ManufacturedCase::standard(2);
        let base = base_config(
            SpectralGrid::new(2, 32, 10).unwrap(),
            EnergyModel::double_well(2),
            0.5,
            0.05,
        );
        let report = mms_study(&case, &base, &[2e-2, 1e-2, 5e-3], &[32]).unwrap();
        for w in report.temporal.windows(2) {
            let ratio = w[0].error_y.max(w[0].error_u) / w[1].error_y.max(w[1].error_u);
            assert!(ratio > 3.5 && ratio < 4.5, "temporal ratio {ratio}");
        }
        let fit = report.temporal_fit.unwrap();
        assert!((fit.slope - 2.0).abs() <= 0.2, "temporal order {}", fit.slope);
    }

    #[test]
    fn mms_flags_under_resolved_grid() {
        let case = ManufacturedCase::standard(2); // bandwidth 4
        let base = base_config(
            SpectralGrid::new(2, 32, 10).unwrap(),
            EnergyModel::double_well(2),
            0.5,
            0.05,
        );
        let report = mms_study(&case, &base, &[5e-3, 2.5e-3, 1.25e-3], &[16, 32]).unwrap();
        // n = 16: cutoff 5, the cubic stress band aliases into the retained
        // modes, so the error is spatial and flagged; n = 32 is exact in
        // space and sits at the temporal floor
        assert!(!report.spatial[0].resolved);
        assert!(report.spatial[1].resolved);
        let coarse = report.spatial[0].error_y.max(report.spatial[0].error_u);
        let fine = report.spatial[1].error_y.max(report.spatial[1].error_u);
        assert!(coarse > 10.0 * fine, "spatial errors {coarse} vs {fine}");
    }

    #[test]
    fn presets_are_finite_and_curl_free() {
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        for preset in [
            InitialPreset::Zero,
            InitialPreset::TwoMode { amplitude: 0.25, u_amplitude: 0.1 },
            InitialPreset::GaussianBump { amplitude: 0.3, width: 0.1 },
        ] {
            let (u0, y0) = build_initial_fields(&preset, grid);
            assert!(u0.is_finite() && y0.is_finite());
            let init = evolution::init_state(&u0, &y0, GivenAs::Motion, 1e-8).unwrap();
            assert!(ops::curl_residual(&init.state.f_hat()).unwrap() <= 1e-12);
        }
    }
}
