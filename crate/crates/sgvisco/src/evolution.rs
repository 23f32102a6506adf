//! Time integration of the Galerkin-truncated system.
//!
//! Unknowns are the spectral motion y and velocity u; the deformation
//! gradient is always derived as F = grad y, so curl F = 0 is exact by
//! representation. Per mode k (wavevector kappa = 2 pi k) the system is
//!
//! ```text
//! dy/dt = u
//! du/dt = N(F) - nu |kappa|^2 u - delta |kappa|^4 y + f
//! ```
//!
//! with N = Div P^N S(F) evaluated pseudo-spectrally. The stiff linear
//! terms are integrated implicitly (Crank-Nicolson) or exactly (matrix
//! exponential of the per-mode 2x2 block); the nonlinear stress is
//! explicit. Both schemes are second order in dt.

use num_complex::Complex64;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::energy::{EnergyKind, EnergyModel};
use crate::error::{Error, Result};
use crate::fft::{forward, inverse};
use crate::field::{Rank, RealField, SpectralField, SpectralGrid, TAU};
use crate::forcing::ManufacturedForcing;
use crate::ops::{self, DealiasRule, DiffOp};

pub const CFL_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImexCnAb2,
    ExponentialMidpoint,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImexCnAb2 => "imex_cnab2",
            Scheme::ExponentialMidpoint => "exponential_midpoint",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "imex_cnab2" => Ok(Scheme::ImexCnAb2),
            "exponential_midpoint" => Ok(Scheme::ExponentialMidpoint),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Everything the stepper needs for one run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: SpectralGrid,
    pub model: EnergyModel,
    pub nu: f64,
    pub delta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: DealiasRule,
    pub forcing: Option<ManufacturedForcing>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu < 0.0 || !self.nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu = {} must be >= 0", self.nu)));
        }
        if self.delta < 0.0 || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta = {} must be >= 0", self.delta)));
        }
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be > 0", self.dt)));
        }
        if self.t_end < 0.0 || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if self.t_end > 0.0 && self.dt > self.t_end {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.model.d != self.grid.d() {
            return Err(Error::GridMismatch(format!(
                "model dimension {} vs grid dimension {}",
                self.model.d,
                self.grid.d()
            )));
        }
        Ok(())
    }

    /// Pure elastic runs (nu = delta = 0) are allowed but flagged.
    pub fn is_degenerate(&self) -> bool {
        self.nu == 0.0 && self.delta == 0.0
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Deterministic fingerprint of the numerical setup (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.grid.d() as u64);
        eat(self.grid.n() as u64);
        eat(self.grid.cutoff() as u64);
        eat(self.nu.to_bits());
        eat(self.delta.to_bits());
        eat(self.dt.to_bits());
        eat(self.t_end.to_bits());
        eat(match self.scheme {
            Scheme::ImexCnAb2 => 1,
            Scheme::ExponentialMidpoint => 2,
        });
        eat(match self.dealias {
            DealiasRule::TwoThirds => 1,
            DealiasRule::Half => 2,
        });
        eat(match self.model.kind {
            EnergyKind::DoubleWell => 1,
            EnergyKind::Quadratic => 2,
        });
        eat(self.model.k.to_bits());
        h
    }
}

/// Solver unknowns in spectral form.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub y_hat: SpectralField,
    pub u_hat: SpectralField,
}

impl State {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            t: 0.0,
            y_hat: SpectralField::zeros(grid, Rank::Vector),
            u_hat: SpectralField::zeros(grid, Rank::Vector),
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        self.y_hat.grid
    }

    /// Derived deformation gradient F = grad y.
    pub fn f_hat(&self) -> SpectralField {
        ops::f_from_y(&self.y_hat).expect("y_hat is vector-ranked")
    }

    pub fn max_abs(&self) -> f64 {
        self.y_hat.max_abs().max(self.u_hat.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.y_hat.is_finite() && self.u_hat.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GivenAs {
    /// initial field is the motion y
    Motion,
    /// initial field is the deformation gradient F (must be curl-free)
    Gradient,
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub state: State,
    /// norm of any discarded mean of F (affine part, not representable)
    pub dropped_mean: f64,
}

/// Build the t = 0 state from physical-space data, projected to the cutoff.
pub fn init_state(
    u0: &RealField,
    init: &RealField,
    given_as: GivenAs,
    tol: f64,
) -> Result<InitOutcome> {
    if !u0.is_finite() || !init.is_finite() {
        return Err(Error::Domain("non-finite initial data".into()));
    }
    if u0.rank != Rank::Vector {
        return Err(Error::RankMismatch { expected: "vector u0".into(), got: u0.rank.name().into() });
    }
    let grid = u0.grid;
    if init.grid != grid {
        return Err(Error::GridMismatch("u0 and initial field on different grids".into()));
    }
    let cutoff = grid.cutoff();
    let (y_hat, dropped_mean) = match given_as {
        GivenAs::Motion => {
            if init.rank != Rank::Vector {
                return Err(Error::RankMismatch {
                    expected: "vector y0".into(),
                    got: init.rank.name().into(),
                });
            }
            (forward(init), 0.0)
        }
        GivenAs::Gradient => {
            if init.rank != Rank::Matrix {
                return Err(Error::RankMismatch {
                    expected: "matrix F0".into(),
                    got: init.rank.name().into(),
                });
            }
            let rec = ops::reconstruct_y_from_f(&forward(init), tol)?;
            (rec.y, rec.dropped_mean)
        }
    };
    let state = State {
        t: 0.0,
        y_hat: ops::project_modes(&y_hat, cutoff)?,
        u_hat: ops::project_modes(&forward(u0), cutoff)?,
    };
    Ok(InitOutcome { state, dropped_mean })
}

/// Pointwise elastic stress S(F) on the grid.
pub fn pointwise_stress(model: &EnergyModel, f: &RealField) -> RealField {
    let comps = f.components();
    let mut out = RealField::zeros(f.grid, f.rank);
    for p in 0..f.grid.points() {
        let src = &f.data[p * comps..(p + 1) * comps];
        let dst = &mut out.data[p * comps..(p + 1) * comps];
        model.stress_into(src, dst);
    }
    out
}

/// Div P^N S(F), evaluated pseudo-spectrally with dealiasing.
pub fn rhs_nonlinear(
    state: &State,
    model: &EnergyModel,
    rule: DealiasRule,
) -> Result<SpectralField> {
    let f_hat = state.f_hat();
    let f_real = inverse(&f_hat);
    let s_real = pointwise_stress(model, &f_real);
    let s_hat = ops::dealias(&forward(&s_real), rule);
    let s_hat = ops::project_modes(&s_hat, state.grid().cutoff())?;
    ops::apply_diff_operator(&s_hat, DiffOp::Div)
}

/// Real 2x2 block acting on the (y, u) pair of one mode/component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    #[inline]
    fn apply(&self, y: Complex64, u: Complex64) -> (Complex64, Complex64) {
        (self.a11 * y + self.a12 * u, self.a21 * y + self.a22 * u)
    }
}

/// exp(t M) for M = [[0, 1], [-b, -a]] with a, b >= 0.
///
/// Written as exp(mu t) [c I + s (M - mu I)] with mu = -a/2; the scalar
/// pair (c, s) is cosh/sinh, cos/sin or a power series depending on the
/// sign and size of the discriminant, so the critically damped case
/// a^2 = 4b is handled uniformly. Exponentials are combined so that no
/// intermediate overflows for decaying blocks.
pub(crate) fn exp_block(b: f64, a: f64, t: f64) -> Mat2 {
    let mu = -a / 2.0;
    let disc = mu * mu - b;
    let z = disc * t * t;
    let (c, s) = if z.abs() < 1e-6 {
        // series in z = disc t^2: cosh(sqrt z), t sinh(sqrt z)/sqrt z
        let e = (mu * t).exp();
        let c0 = 1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0;
        let s0 = 1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0;
        (e * c0, e * t * s0)
    } else if z > 0.0 {
        let w = z.sqrt(); // = sqrt(disc) * |t|
        let sign = if t >= 0.0 { 1.0 } else { -1.0 };
        let p = (mu * t + w).exp();
        let m = (mu * t - w).exp();
        (0.5 * (p + m), sign * 0.5 * (p - m) * t.abs() / w)
    } else {
        let w = (-z).sqrt();
        let e = (mu * t).exp();
        (e * w.cos(), e * t * w.sin() / w)
    };
    Mat2 {
        a11: c + s * (a / 2.0),
        a12: s,
        a21: -s * b,
        a22: c - s * (a / 2.0),
    }
}

/// Crank-Nicolson pair for the linear block: z_new = m1inv (m0 z + dt r e_u).
#[derive(Debug, Clone, Copy)]
struct CnPair {
    m0: Mat2,
    m1inv: Mat2,
}

fn cn_pair(b: f64, a: f64, dt: f64) -> CnPair {
    let h = 0.5 * dt;
    let det = 1.0 + a * h + b * h * h;
    CnPair {
        m0: Mat2 { a11: 1.0, a12: h, a21: -b * h, a22: 1.0 - a * h },
        m1inv: Mat2 {
            a11: (1.0 + a * h) / det,
            a12: h / det,
            a21: -b * h / det,
            a22: 1.0 / det,
        },
    }
}

enum LinearTables {
    Cn(Vec<CnPair>),
    Exp { full: Vec<Mat2>, half: Vec<Mat2> },
}

/// Advances a state by fixed steps of dt; owns the multistep history.
pub struct Stepper {
    config: SolverConfig,
    tables: LinearTables,
    /// N + f at the previous step time (Adams-Bashforth history)
    prev_rhs: Option<SpectralField>,
}

impl Stepper {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let dt = config.dt;
        let tables = match config.scheme {
            Scheme::ImexCnAb2 => {
                let pairs = (0..grid.points())
                    .map(|idx| {
                        let ksq = grid.kappa_sq(idx);
                        cn_pair(config.delta * ksq * ksq, config.nu * ksq, dt)
                    })
                    .collect();
                LinearTables::Cn(pairs)
            }
            Scheme::ExponentialMidpoint => {
                let mk = |scale: f64| {
                    (0..grid.points())
                        .map(|idx| {
                            let ksq = grid.kappa_sq(idx);
                            exp_block(config.delta * ksq * ksq, config.nu * ksq, scale * dt)
                        })
                        .collect()
                };
                LinearTables::Exp { full: mk(1.0), half: mk(0.5) }
            }
        };
        Ok(Self { config, tables, prev_rhs: None })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// N(F) plus prescribed forcing at time t, projected to the cutoff.
    fn rhs_total(&self, state: &State, t: f64) -> Result<SpectralField> {
        let mut rhs = rhs_nonlinear(state, &self.config.model, self.config.dealias)?;
        if let Some(forcing) = &self.config.forcing {
            let f_hat = forcing.eval_hat(
                self.config.grid,
                &self.config.model,
                self.config.nu,
                self.config.delta,
                t,
            )?;
            rhs.scaled_add(1.0, &ops::project_modes(&f_hat, self.config.grid.cutoff())?);
        }
        Ok(rhs)
    }

    fn cn_solve(&self, state: &State, rhs_e: &SpectralField) -> State {
        let LinearTables::Cn(pairs) = &self.tables else { unreachable!() };
        let grid = self.config.grid;
        let d = grid.d();
        let dt = self.config.dt;
        let mut out = State {
            t: state.t + dt,
            y_hat: SpectralField::zeros(grid, Rank::Vector),
            u_hat: SpectralField::zeros(grid, Rank::Vector),
        };
        for idx in 0..grid.points() {
            let pair = &pairs[idx];
            for i in 0..d {
                let y = state.y_hat.at(idx, i);
                let u = state.u_hat.at(idx, i);
                let (b0, b1) = pair.m0.apply(y, u);
                let b1 = b1 + dt * rhs_e.at(idx, i);
                let (yn, un) = pair.m1inv.apply(b0, b1);
                *out.y_hat.at_mut(idx, i) = yn;
                *out.u_hat.at_mut(idx, i) = un;
            }
        }
        out
    }

    /// Advance the state by one step of dt.
    pub fn advance(&mut self, state: &mut State) -> Result<()> {
        let t = state.t;
        let dt = self.config.dt;
        let next = match self.config.scheme {
            Scheme::ImexCnAb2 => {
                let n_curr = self.rhs_total(state, t)?;
                let next = match self.prev_rhs.take() {
                    Some(prev) => {
                        let mut rhs_e = n_curr.clone();
                        rhs_e.scale(1.5);
                        rhs_e.scaled_add(-0.5, &prev);
                        self.cn_solve(state, &rhs_e)
                    }
                    None => {
                        // startup: trapezoidal predictor-corrector on N
                        let pred = self.cn_solve(state, &n_curr);
                        let n_pred = self.rhs_total(&pred, t + dt)?;
                        let mut rhs_e = n_curr.clone();
                        rhs_e.scaled_add(1.0, &n_pred);
                        rhs_e.scale(0.5);
                        self.cn_solve(state, &rhs_e)
                    }
                };
                self.prev_rhs = Some(n_curr);
                next
            }
            Scheme::ExponentialMidpoint => {
                let LinearTables::Exp { full, half } = &self.tables else { unreachable!() };
                let grid = self.config.grid;
                let d = grid.d();
                let n_curr = self.rhs_total(state, t)?;
                // Lawson-Euler predictor to the midpoint
                let mut mid = State {
                    t: t + 0.5 * dt,
                    y_hat: SpectralField::zeros(grid, Rank::Vector),
                    u_hat: SpectralField::zeros(grid, Rank::Vector),
                };
                for idx in 0..grid.points() {
                    let e = &half[idx];
                    for i in 0..d {
                        let y = state.y_hat.at(idx, i);
                        let u = state.u_hat.at(idx, i) + 0.5 * dt * n_curr.at(idx, i);
                        let (ym, um) = e.apply(y, u);
                        *mid.y_hat.at_mut(idx, i) = ym;
                        *mid.u_hat.at_mut(idx, i) = um;
                    }
                }
                let n_mid = self.rhs_total(&mid, t + 0.5 * dt)?;
                let mut next = State {
                    t: t + dt,
                    y_hat: SpectralField::zeros(grid, Rank::Vector),
                    u_hat: SpectralField::zeros(grid, Rank::Vector),
                };
                for idx in 0..grid.points() {
                    let ef = &full[idx];
                    let eh = &half[idx];
                    for i in 0..d {
                        let (y0, u0) =
                            ef.apply(state.y_hat.at(idx, i), state.u_hat.at(idx, i));
                        let n = n_mid.at(idx, i);
                        *next.y_hat.at_mut(idx, i) = y0 + dt * eh.a12 * n;
                        *next.u_hat.at_mut(idx, i) = u0 + dt * eh.a22 * n;
                    }
                }
                next
            }
        };
        if !next.is_finite() || next.max_abs() > 1e50 {
            return Err(Error::BlowUp { t: next.t, norm: next.max_abs() });
        }
        *state = next;
        Ok(())
    }
}

/// Exact per-mode solution for the quadratic model (the full system is
/// then linear and diagonal in k): eigen-solve of
/// [[0, 1], [-(|kappa|^2 + delta |kappa|^4), -nu |kappa|^2]] per mode.
pub fn linear_oracle(config: &SolverConfig, initial: &State, t: f64) -> Result<State> {
    if config.model.kind != EnergyKind::Quadratic {
        return Err(Error::InvalidParameter(
            "linear_oracle requires the quadratic model".into(),
        ));
    }
    if config.forcing.is_some() {
        return Err(Error::InvalidParameter("linear_oracle does not support forcing".into()));
    }
    let grid = config.grid;
    let d = grid.d();
    let dt = t - initial.t;
    let mut out = State { t, ..State::zeros(grid) };
    for idx in 0..grid.points() {
        let ksq = grid.kappa_sq(idx);
        let b = ksq + config.delta * ksq * ksq;
        let a = config.nu * ksq;
        let e = exp_block(b, a, dt);
        for i in 0..d {
            let (y, u) = e.apply(initial.y_hat.at(idx, i), initial.u_hat.at(idx, i));
            *out.y_hat.at_mut(idx, i) = y;
            *out.u_hat.at_mut(idx, i) = u;
        }
    }
    Ok(out)
}

/// Largest stable explicit step for the elastic wave part:
/// safety * 2 / omega_max with omega_max = sqrt(max_x |D^2 W(F(x))|) * 2 pi (n/2).
/// The stiff viscous and capillary terms are implicit and excluded.
pub fn estimate_dt(config: &SolverConfig, state: &State) -> f64 {
    let f_real = inverse(&state.f_hat());
    let comps = f_real.components();
    let mut lambda: f64 = 0.0;
    for p in 0..config.grid.points() {
        let f = &f_real.data[p * comps..(p + 1) * comps];
        let norm = config.model.hessian_norm(f).unwrap_or(f64::INFINITY);
        lambda = lambda.max(norm);
    }
    let omega = lambda.max(1e-300).sqrt() * TAU * (config.grid.n() as f64 / 2.0);
    CFL_SAFETY * 2.0 / omega
}

/// Energy-norm distance between two states on the same grid:
/// sqrt( sum_k |du|^2 + (|kappa|^2 + delta |kappa|^4) |dy|^2 ),
/// the norm in which the linear semigroup is contractive.
pub fn state_energy_error(a: &State, b: &State, delta: f64) -> f64 {
    let grid = a.grid();
    let d = grid.d();
    let mut total = 0.0;
    for idx in 0..grid.points() {
        let ksq = grid.kappa_sq(idx);
        let w = ksq + delta * ksq * ksq;
        for i in 0..d {
            total += (a.u_hat.at(idx, i) - b.u_hat.at(idx, i)).norm_sqr();
            total += w * (a.y_hat.at(idx, i) - b.y_hat.at(idx, i)).norm_sqr();
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// integration stopped early; partial records are retained
    BlewUp { t: f64, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct RunMeta {
    pub config_fingerprint: u64,
    pub wall_secs: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(f64, State)>,
    pub outcome: RunOutcome,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, RunOutcome::Completed)
    }
}

/// Integrate to t_end, recording diagnostics every `record_every` steps
/// (always including t = 0 and the final step) and full state snapshots
/// every `snapshot_every` steps when nonzero. Cumulative time integrals
/// are accumulated trapezoidally on the recorded samples. Deterministic:
/// fixed iteration order, no parallel reductions.
pub fn run(
    config: &SolverConfig,
    initial: &State,
    record_every: usize,
    snapshot_every: usize,
    lr_exponents: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    let record_every = record_every.max(1);
    let start = std::time::Instant::now();
    let mut warnings = Vec::new();
    if config.is_degenerate() {
        warnings.push("nu = delta = 0: pure elasticity run, no dissipation".into());
    }

    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();

    let mut rec =
        diagnostics::evaluate(&state, &config.model, config.nu, config.delta, lr_exponents)?;
    let mut prev = rec.clone();
    records.push(rec.clone());
    snapshots.push((state.t, state.clone()));

    let n_steps = config.n_steps();
    let mut outcome = RunOutcome::Completed;
    let mut stepper = Stepper::new(config.clone())?;
    for step in 1..=n_steps {
        if let Err(Error::BlowUp { t, norm }) = stepper.advance(&mut state) {
            outcome = RunOutcome::BlewUp { t, norm };
            break;
        }
        let is_record = step % record_every == 0 || step == n_steps;
        let is_snapshot = snapshot_every > 0 && (step % snapshot_every == 0 || step == n_steps);
        if is_record {
            // a finite but astronomically large state can overflow W(F)
            rec = match diagnostics::evaluate(
                &state,
                &config.model,
                config.nu,
                config.delta,
                lr_exponents,
            ) {
                Ok(rec) => rec,
                Err(Error::Domain(_)) => {
                    outcome = RunOutcome::BlewUp { t: state.t, norm: state.max_abs() };
                    break;
                }
                Err(e) => return Err(e),
            };
            let h = 0.5 * (rec.t - prev.t);
            rec.diss_visc_cum = prev.diss_visc_cum + h * (prev.rate_visc + rec.rate_visc);
            rec.diss_struct_cum = prev.diss_struct_cum
                + h * ((prev.rate_lap + prev.rate_hessian + prev.rate_gradu)
                    + (rec.rate_lap + rec.rate_hessian + rec.rate_gradu));
            rec.src_struct_cum = prev.src_struct_cum + h * (prev.rate_src + rec.rate_src);
            records.push(rec.clone());
            prev = rec.clone();
        }
        if is_snapshot {
            snapshots.push((state.t, state.clone()));
        }
    }

    Ok(Trajectory {
        records,
        snapshots,
        outcome,
        meta: RunMeta {
            config_fingerprint: config.fingerprint(),
            wall_secs: start.elapsed().as_secs_f64(),
            warnings,
        },
    })
}
