//! Manufactured motions and the forcing they induce.
//!
//! A manufactured case prescribes a finite trigonometric motion
//!   y*_i(t, x) = sum_m A_m cos(omega_m t + phi_m) cos(2 pi k_m . x + psi_m)
//! on selected components. Substituting into the second-order evolution
//! gives the forcing
//!   f = y*_tt - Div S(grad y*) - nu Lap y*_t + delta Lap^2 y*
//! which makes y* an exact solution of the forced system. Linear terms
//! are assembled spectrally from the closed-form time derivatives; the
//! stress term is evaluated pseudo-spectrally on a 2x padded grid, exact
//! for the cubic double-well stress when the motion fits the band.

use num_complex::Complex64;

use crate::energy::EnergyModel;
use crate::error::Result;
use crate::evolution::pointwise_stress;
use crate::fft::{forward, inverse, pad_spectral, truncate_spectral};
use crate::field::{Rank, SpectralField, SpectralGrid};
use crate::ops::{self, DiffOp};

/// One standing-wave component of a manufactured motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedMode {
    pub component: usize,
    pub k: [i64; 3],
    pub amplitude: f64,
    pub omega: f64,
    pub phase_t: f64,
    pub phase_x: f64,
}

/// A finite trig-polynomial motion with time-dependent coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub modes: Vec<ManufacturedMode>,
}

impl ManufacturedCase {
    /// Default verification case: two modes on distinct components with
    /// incommensurate frequencies, bandwidth 4 (so a 16-point grid is
    /// genuinely under-resolved for the cubic stress while a 32-point
    /// grid is exact).
    pub fn standard(d: usize) -> Self {
        let mut modes = vec![ManufacturedMode {
            component: 0,
            k: [1, 2, 0],
            amplitude: 0.04,
            omega: 2.0,
            phase_t: 0.3,
            phase_x: 0.7,
        }];
        if d >= 2 {
            modes.push(ManufacturedMode {
                component: 1,
                k: [4, 1, 0],
                amplitude: 0.02,
                omega: 3.1,
                phase_t: 1.1,
                phase_x: 0.2,
            });
        } else {
            modes.push(ManufacturedMode {
                component: 0,
                k: [4, 0, 0],
                amplitude: 0.02,
                omega: 3.1,
                phase_t: 1.1,
                phase_x: 0.2,
            });
        }
        let mut case = Self { modes };
        for m in &mut case.modes {
            for a in d..3 {
                m.k[a] = 0;
            }
        }
        case
    }

    /// Largest |k_a| over all modes.
    pub fn max_mode(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|m| m.k.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Spectral motion (deriv = 0), velocity (1) or acceleration (2) at time t.
    pub fn motion_hat(&self, grid: SpectralGrid, t: f64, deriv: usize) -> SpectralField {
        let mut out = SpectralField::zeros(grid, Rank::Vector);
        let half = (grid.n() / 2) as i64;
        for m in &self.modes {
            let phase = m.omega * t + m.phase_t;
            let amp = match deriv {
                0 => m.amplitude * phase.cos(),
                1 => -m.amplitude * m.omega * phase.sin(),
                2 => -m.amplitude * m.omega * m.omega * phase.cos(),
                _ => panic!("time derivative order must be 0, 1 or 2"),
            };
            if (0..grid.d()).any(|a| m.k[a].abs() >= half) {
                continue; // not representable on this grid
            }
            // cos(2 pi k.x + psi) = (e^{i psi} e^{i 2 pi k.x} + c.c.)/2
            let c = 0.5 * amp * Complex64::new(m.phase_x.cos(), m.phase_x.sin());
            let mut neg = [0i64; 3];
            for a in 0..grid.d() {
                neg[a] = -m.k[a];
            }
            let idx = grid.mode_index(&m.k);
            let jdx = grid.mode_index(&neg);
            *out.at_mut(idx, m.component) += c;
            *out.at_mut(jdx, m.component) += c.conj();
        }
        out
    }
}

/// Div S(grad y) with the pointwise stress evaluated on a 2x padded grid,
/// so products up to cubic are alias-free for band-limited motions.
pub fn stress_divergence_padded(
    y_hat: &SpectralField,
    model: &EnergyModel,
) -> Result<SpectralField> {
    let grid = y_hat.grid;
    let f_hat = ops::f_from_y(y_hat)?;
    let padded = pad_spectral(&f_hat, 2 * grid.n());
    let s_pad = forward(&pointwise_stress(model, &inverse(&padded)));
    let s_hat = truncate_spectral(&s_pad, grid.n(), grid.cutoff());
    ops::apply_diff_operator(&s_hat, DiffOp::Div)
}

/// Prescribed forcing derived from a manufactured motion.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedForcing {
    pub case: ManufacturedCase,
}

impl ManufacturedForcing {
    /// f(t) in spectral form on the given grid.
    pub fn eval_hat(
        &self,
        grid: SpectralGrid,
        model: &EnergyModel,
        nu: f64,
        delta: f64,
        t: f64,
    ) -> Result<SpectralField> {
        let y = self.case.motion_hat(grid, t, 0);
        let yt = self.case.motion_hat(grid, t, 1);
        let ytt = self.case.motion_hat(grid, t, 2);
        let mut f = ytt;
        for idx in 0..grid.points() {
            let ksq = grid.kappa_sq(idx);
            for i in 0..grid.d() {
                // - nu Lap y_t  ->  + nu |kappa|^2 y_t
                // + delta Lap^2 y  ->  + delta |kappa|^4 y
                let v = nu * ksq * yt.at(idx, i) + delta * ksq * ksq * y.at(idx, i);
                *f.at_mut(idx, i) += v;
            }
        }
        let stress_div = stress_divergence_padded(&y, model)?;
        f.scaled_add(-1.0, &stress_div);
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TAU;

    #[test]
    fn zero_case_zero_forcing() {
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let case = ManufacturedCase { modes: vec![] };
        let forcing = ManufacturedForcing { case };
        let f = forcing
            .eval_hat(grid, &EnergyModel::double_well(2), 0.5, 0.1, 0.3)
            .unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn motion_matches_closed_form_samples() {
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let case = ManufacturedCase::standard(2);
        for t in [0.0, 0.4] {
            let y = inverse(&case.motion_hat(grid, t, 0));
            for p in [0, 37, 100] {
                let x = grid.coords(p);
                let mut expect = [0.0f64; 2];
                for m in &case.modes {
                    let spatial = (TAU * (m.k[0] as f64 * x[0] + m.k[1] as f64 * x[1])
                        + m.phase_x)
                        .cos();
                    expect[m.component] += m.amplitude * (m.omega * t + m.phase_t).cos() * spatial;
                }
                for i in 0..2 {
                    assert!((y.at(p, i) - expect[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn velocity_is_time_derivative() {
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let case = ManufacturedCase::standard(2);
        let h = 1e-6;
        let t = 0.7;
        let yp = case.motion_hat(grid, t + h, 0);
        let ym = case.motion_hat(grid, t - h, 0);
        let v = case.motion_hat(grid, t, 1);
        let mut fd = yp.clone();
        fd.scaled_add(-1.0, &ym);
        fd.scale(1.0 / (2.0 * h));
        assert!(fd.max_diff(&v) < 1e-8);
    }

    #[test]
    fn quadratic_single_mode_forcing_closed_form() {
        // quadratic model, one mode with coefficient a(t):
        // f_hat = (a'' + nu |kappa|^2 a' + (|kappa|^2 + delta |kappa|^4) a) . mode
        let grid = SpectralGrid::new(2, 16, 5).unwrap();
        let mode = ManufacturedMode {
            component: 0,
            k: [2, 1, 0],
            amplitude: 0.3,
            omega: 1.7,
            phase_t: 0.4,
            phase_x: 0.9,
        };
        let case = ManufacturedCase { modes: vec![mode] };
        let forcing = ManufacturedForcing { case };
        let (nu, delta, t) = (0.8, 0.05, 0.6);
        let model = EnergyModel::quadratic(2);
        let f = forcing.eval_hat(grid, &model, nu, delta, t).unwrap();

        let ksq = TAU * TAU * 5.0; // |2 pi (2,1)|^2
        let phase = mode.omega * t + mode.phase_t;
        let a0 = mode.amplitude * phase.cos();
        let a1 = -mode.amplitude * mode.omega * phase.sin();
        let a2 = -mode.amplitude * mode.omega * mode.omega * phase.cos();
        let scalar = a2 + nu * ksq * a1 + (ksq + delta * ksq * ksq) * a0;
        let expect = 0.5 * scalar * Complex64::new(mode.phase_x.cos(), mode.phase_x.sin());
        let got = f.coeff(&[2, 1], 0);
        assert!((got - expect).norm() <= 1e-12 * expect.norm().max(1.0));
        // no other component or mode is excited
        assert!(f.coeff(&[2, 1], 1).norm() < 1e-15);
    }

    #[test]
    fn static_case_matches_operator_pipeline() {
        // time-independent y*: f = -Div S(grad y*) + delta Lap^2 y*
        let grid = SpectralGrid::new(2, 24, 7).unwrap();
        let case = ManufacturedCase {
            modes: vec![ManufacturedMode {
                component: 0,
                k: [1, 1, 0],
                amplitude: 0.2,
                omega: 0.0,
                phase_t: 0.0,
                phase_x: 0.3,
            }],
        };
        let model = EnergyModel::double_well(2);
        let delta = 0.07;
        let forcing = ManufacturedForcing { case: case.clone() };
        let f = forcing.eval_hat(grid, &model, 0.9, delta, 0.0).unwrap();

        let y = case.motion_hat(grid, 0.0, 0);
        let mut expect = ops::apply_diff_operator(&y, DiffOp::Bilaplacian).unwrap();
        expect.scale(delta);
        expect.scaled_add(-1.0, &stress_divergence_padded(&y, &model).unwrap());
        assert!(f.max_diff(&expect) <= 1e-12);
    }
}
