//! Energy and dissipative-structure functionals along trajectories.
//!
//! The energy is E = int 1/2 |u|^2 + W(F) + (delta/2) |grad F|^2 and decays
//! at rate nu int |grad u|^2. The structure functional
//!
//!   G = int 1/2 |u - (nu/2) Div F|^2 + (nu^2/8) |Div F|^2 + W(F)
//!       + (delta/2) |grad F|^2
//!
//! transfers dissipation from momentum to strain gradients: its balance
//! dissipates (delta nu/2) int |Lap F|^2 + (nu/2) int [D^2 W~ : (grad F,
//! grad F) + |grad u|^2] against the source (K/2) int |grad F|^2, with
//! W~ = W + (K/2)|F|^2 convex. Both inequalities are checked discretely
//! with an explicit O(dt^2) slack for the time-integration defect.
//!
//! Quadrature: pointwise nonlinear terms (W, the bracket) use the grid
//! mean, exact for resolved trigonometric polynomials; quadratic Sobolev
//! terms use Parseval sums. At nu = 0 the bracket path reproduces the
//! velocity path sample-for-sample, so E and G agree identically.

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::evolution::State;
use crate::fft::{inverse, sobolev_sum};
use crate::field::{RealField, SpectralField};
use crate::ops::{self, DiffOp};

/// One time sample of every tracked functional.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// energy functional E
    pub energy: f64,
    /// cumulative viscous dissipation nu int_0^t int |grad u|^2
    pub diss_visc_cum: f64,
    /// structure functional G
    pub structure: f64,
    /// cumulative structure dissipation (all three terms)
    pub diss_struct_cum: f64,
    /// cumulative source (K/2) int_0^t int |grad F|^2
    pub src_struct_cum: f64,
    /// involution residual of the derived F
    pub curl_res: f64,
    pub l2_u: f64,
    pub l2_grad_f: f64,
    pub l2_lap_f: f64,
    /// (r, ||F||_r) for the configured exponents, sorted by r
    pub lr_f: Vec<(f64, f64)>,
    // instantaneous rates, kept for trapezoidal accumulation and sign checks
    pub rate_visc: f64,
    pub rate_lap: f64,
    pub rate_hessian: f64,
    pub rate_gradu: f64,
    pub rate_src: f64,
}

/// Grid mean of 1/2 |v|^2 for a real field.
fn half_mean_sq(field: &RealField) -> f64 {
    let sum: f64 = field.data.iter().map(|v| v * v).sum();
    0.5 * sum / field.grid.points() as f64
}

/// Grid mean of W(F).
fn mean_energy_density(model: &EnergyModel, f: &RealField) -> f64 {
    let comps = f.components();
    let mut sum = 0.0;
    for p in 0..f.grid.points() {
        sum += model.energy_unchecked(&f.data[p * comps..(p + 1) * comps]);
    }
    sum / f.grid.points() as f64
}

/// E = int 1/2 |u|^2 + W(F) + (delta/2) |grad F|^2.
pub fn energy_functional(state: &State, model: &EnergyModel, delta: f64) -> f64 {
    let f_hat = state.f_hat();
    let f_real = inverse(&f_hat);
    let u_real = inverse(&state.u_hat);
    half_mean_sq(&u_real) + mean_energy_density(model, &f_real) + 0.5 * delta * sobolev_sum(&f_hat, 1)
}

/// G = int 1/2 |u - (nu/2) Div F|^2 + (nu^2/8) |Div F|^2 + W(F) + (delta/2)|grad F|^2.
///
/// At nu = 0 the bracket reduces to u through the identical compute path,
/// so G equals E exactly.
pub fn structure_functional(state: &State, model: &EnergyModel, nu: f64, delta: f64) -> f64 {
    let f_hat = state.f_hat();
    let div_f = ops::apply_diff_operator(&f_hat, DiffOp::Div).expect("matrix rank");
    let mut bracket_hat = state.u_hat.clone();
    bracket_hat.scaled_add(-0.5 * nu, &div_f);
    let bracket = inverse(&bracket_hat);
    let div_f_real = inverse(&div_f);
    let f_real = inverse(&f_hat);
    half_mean_sq(&bracket)
        + 0.25 * nu * nu * half_mean_sq(&div_f_real)
        + mean_energy_density(model, &f_real)
        + 0.5 * delta * sobolev_sum(&f_hat, 1)
}

/// The three instantaneous dissipation integrands of the structure balance:
/// (delta nu/2) int |Lap F|^2, (nu/2) int D^2 W~ : (grad F, grad F),
/// (nu/2) int |grad u|^2. All nonnegative for semiconvexity-verified models.
pub fn structure_dissipation_rate(
    state: &State,
    model: &EnergyModel,
    nu: f64,
    delta: f64,
) -> (f64, f64, f64) {
    let f_hat = state.f_hat();
    let term_lap = 0.5 * delta * nu * sobolev_sum(&f_hat, 2);
    let term_gradu = 0.5 * nu * sobolev_sum(&state.u_hat, 1);
    let term_hessian = 0.5 * nu * hessian_form_mean(state, model, &f_hat);
    (term_lap, term_hessian, term_gradu)
}

/// Grid mean of D^2 W~(F) : (grad F, grad F)
/// = sum_b (d_b F) : (D^2 W + K I)(d_b F) pointwise.
fn hessian_form_mean(state: &State, model: &EnergyModel, f_hat: &SpectralField) -> f64 {
    let grid = state.grid();
    let d = grid.d();
    let m = d * d;
    let f_real = inverse(f_hat);
    // d_b F for each direction b, as real matrix fields
    let lap_dirs: Vec<RealField> = (0..d)
        .map(|b| {
            let mut df = f_hat.clone();
            for idx in 0..grid.points() {
                let k = grid.wavevector(idx);
                let ik = num_complex::Complex64::new(0.0, crate::field::TAU * k[b] as f64);
                for c in 0..m {
                    *df.at_mut(idx, c) *= ik;
                }
            }
            inverse(&df)
        })
        .collect();
    let mut sum = 0.0;
    for p in 0..grid.points() {
        let f = &f_real.data[p * m..(p + 1) * m];
        let h = model.hessian_shifted(f).expect("finite state");
        for df in &lap_dirs {
            let g = &df.data[p * m..(p + 1) * m];
            for a in 0..m {
                let mut hg = 0.0;
                for b in 0..m {
                    hg += h[(a, b)] * g[b];
                }
                sum += g[a] * hg;
            }
        }
    }
    sum / grid.points() as f64
}

/// (grid mean of |field|^r)^(1/r), Frobenius pointwise; r = infinity gives
/// the max norm.
pub fn lr_norm(field: &RealField, r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::InvalidParameter(format!("Lr exponent r = {r} must be >= 1")));
    }
    let comps = field.components();
    let points = field.grid.points();
    if r.is_infinite() {
        let mut worst = 0.0f64;
        for p in 0..points {
            let norm = field.data[p * comps..(p + 1) * comps]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            worst = worst.max(norm);
        }
        return Ok(worst);
    }
    let mut sum = 0.0;
    for p in 0..points {
        let norm = field.data[p * comps..(p + 1) * comps]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        sum += norm.powf(r);
    }
    Ok((sum / points as f64).powf(1.0 / r))
}

/// Evaluate every functional at one state. Cumulative fields are zero;
/// the run loop accumulates them trapezoidally across records.
pub fn evaluate(
    state: &State,
    model: &EnergyModel,
    nu: f64,
    delta: f64,
    lr_exponents: &[f64],
) -> Result<DiagnosticsRecord> {
    let f_hat = state.f_hat();
    let f_real = inverse(&f_hat);
    let u_real = inverse(&state.u_hat);
    let (rate_lap, rate_hessian, rate_gradu) = structure_dissipation_rate(state, model, nu, delta);
    let grad_f_sq = sobolev_sum(&f_hat, 1);
    let mut lr_f = Vec::with_capacity(lr_exponents.len());
    for &r in lr_exponents {
        lr_f.push((r, lr_norm(&f_real, r)?));
    }
    lr_f.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let record = DiagnosticsRecord {
        t: state.t,
        energy: half_mean_sq(&u_real)
            + mean_energy_density(model, &f_real)
            + 0.5 * delta * grad_f_sq,
        diss_visc_cum: 0.0,
        structure: structure_functional(state, model, nu, delta),
        diss_struct_cum: 0.0,
        src_struct_cum: 0.0,
        curl_res: ops::curl_residual(&f_hat)?,
        l2_u: sobolev_sum(&state.u_hat, 0).sqrt(),
        l2_grad_f: grad_f_sq.sqrt(),
        l2_lap_f: sobolev_sum(&f_hat, 2).sqrt(),
        lr_f,
        rate_visc: nu * sobolev_sum(&state.u_hat, 1),
        rate_lap,
        rate_hessian,
        rate_gradu,
        rate_src: 0.5 * model.k * grad_f_sq,
    };
    if !record.energy.is_finite() || !record.structure.is_finite() {
        return Err(Error::Domain("non-finite diagnostics".into()));
    }
    Ok(record)
}

/// Discrete-inequality tolerance: LHS <= RHS * (1 + rel_tol) + c_slack dt^2 t.
#[derive(Debug, Clone, Copy)]
pub struct InequalitySlack {
    pub rel_tol: f64,
    pub c_slack: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub passed: bool,
    /// smallest RHS - LHS over all records (negative = violated)
    pub worst_margin: f64,
    pub worst_t: f64,
    pub checked: usize,
}

/// Energy inequality: E(t) + cumulative viscous dissipation stays below
/// E(0) up to the declared slack, at every record.
pub fn check_energy_inequality(
    records: &[DiagnosticsRecord],
    slack: &InequalitySlack,
) -> Result<InequalityReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to check".into()));
    }
    let e0 = records[0].energy;
    let mut report = InequalityReport {
        passed: true,
        worst_margin: f64::INFINITY,
        worst_t: records[0].t,
        checked: records.len(),
    };
    for rec in records {
        let lhs = rec.energy + rec.diss_visc_cum;
        let rhs = e0 * (1.0 + slack.rel_tol) + slack.c_slack * slack.dt * slack.dt * rec.t;
        let margin = rhs - lhs;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_t = rec.t;
        }
    }
    report.passed = report.worst_margin >= 0.0;
    Ok(report)
}

/// Dissipative-structure inequality: G(t) + cumulative structure dissipation
/// stays below G(0) plus the cumulative source, up to the declared slack.
pub fn check_structure_inequality(
    records: &[DiagnosticsRecord],
    slack: &InequalitySlack,
) -> Result<InequalityReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to check".into()));
    }
    let g0 = records[0].structure;
    let mut report = InequalityReport {
        passed: true,
        worst_margin: f64::INFINITY,
        worst_t: records[0].t,
        checked: records.len(),
    };
    for rec in records {
        let lhs = rec.structure + rec.diss_struct_cum;
        let rhs = g0 * (1.0 + slack.rel_tol)
            + rec.src_struct_cum
            + slack.c_slack * slack.dt * slack.dt * rec.t;
        let margin = rhs - lhs;
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_t = rec.t;
        }
    }
    report.passed = report.worst_margin >= 0.0;
    Ok(report)
}
