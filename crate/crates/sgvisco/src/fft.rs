//! Real <-> spectral transforms.
//!
//! Normalization: forward(u)_k = (1/n^d) sum_j u_j exp(-2 pi i j.k / n),
//! so the coefficient at mode k is the Fourier coefficient of the
//! trigonometric interpolant on the unit torus and Parseval reads
//! mean_grid |u|^2 = sum_k |u_k|^2. The inverse is the plain synthesis
//! sum. Forward transforms always zero the Nyquist planes.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::field::{RealField, SpectralField, SpectralGrid};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| match direction {
        FftDirection::Forward => p.borrow_mut().plan_fft_forward(n),
        FftDirection::Inverse => p.borrow_mut().plan_fft_inverse(n),
    })
}

/// In-place complex FFT along every axis of a row-major n^d block.
fn fft_nd(data: &mut [Complex64], d: usize, n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let total = data.len();
    debug_assert_eq!(total, n.pow(d as u32));
    for axis in 0..d {
        // stride between consecutive entries along `axis`
        let stride = n.pow((d - 1 - axis) as u32);
        let lines = total / n;
        for l in 0..lines {
            // base index of the l-th line along this axis
            let block = l / stride;
            let offset = l % stride;
            let base = block * stride * n + offset;
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[base + i * stride] = *v;
            }
        }
    }
}

/// Physical samples -> Fourier coefficients.
pub fn forward(field: &RealField) -> SpectralField {
    let grid = field.grid;
    let points = grid.points();
    let comps = field.components();
    let mut out = SpectralField::zeros(grid, field.rank);
    let mut buf = vec![Complex64::new(0.0, 0.0); points];
    let scale = 1.0 / points as f64;
    for c in 0..comps {
        for p in 0..points {
            buf[p] = Complex64::new(field.data[p * comps + c], 0.0);
        }
        fft_nd(&mut buf, grid.d(), grid.n(), FftDirection::Forward);
        for p in 0..points {
            let v = if grid.is_nyquist(p) { Complex64::new(0.0, 0.0) } else { buf[p] * scale };
            out.data[p * comps + c] = v;
        }
    }
    out
}

/// Fourier coefficients -> physical samples (real parts of the synthesis).
pub fn inverse(field: &SpectralField) -> RealField {
    let grid = field.grid;
    let points = grid.points();
    let comps = field.components();
    let mut out = RealField::zeros(grid, field.rank);
    let mut buf = vec![Complex64::new(0.0, 0.0); points];
    for c in 0..comps {
        for p in 0..points {
            buf[p] = field.data[p * comps + c];
        }
        fft_nd(&mut buf, grid.d(), grid.n(), FftDirection::Inverse);
        for p in 0..points {
            out.data[p * comps + c] = buf[p].re;
        }
    }
    out
}

/// Embed coefficients into a finer grid (same modes, more headroom).
pub fn pad_spectral(field: &SpectralField, n_new: usize) -> SpectralField {
    let grid = field.grid;
    assert!(n_new >= grid.n() && n_new % 2 == 0);
    let new_grid = SpectralGrid::new(grid.d(), n_new, grid.cutoff().min(n_new / 2 - 1))
        .expect("padded grid");
    let comps = field.components();
    let mut out = SpectralField::zeros(new_grid, field.rank);
    for idx in 0..grid.points() {
        if grid.is_nyquist(idx) {
            continue;
        }
        let k = grid.wavevector(idx);
        let jdx = new_grid.mode_index(&k);
        for c in 0..comps {
            out.data[jdx * comps + c] = field.data[idx * comps + c];
        }
    }
    out
}

/// Restrict coefficients to a coarser grid, dropping unrepresentable modes.
pub fn truncate_spectral(field: &SpectralField, n_new: usize, cutoff_new: usize) -> SpectralField {
    let grid = field.grid;
    assert!(n_new <= grid.n() && n_new % 2 == 0);
    let new_grid = SpectralGrid::new(grid.d(), n_new, cutoff_new).expect("truncated grid");
    let comps = field.components();
    let mut out = SpectralField::zeros(new_grid, field.rank);
    let half = (n_new / 2) as i64;
    for jdx in 0..new_grid.points() {
        let k = new_grid.wavevector(jdx);
        if (0..grid.d()).any(|a| k[a] == -half) {
            continue;
        }
        let idx = grid.mode_index(&k);
        for c in 0..comps {
            out.data[jdx * comps + c] = field.data[idx * comps + c];
        }
    }
    out
}

/// Sum over modes of |2 pi k|^(2 power) |f_k|^2 (Frobenius over components).
///
/// power 0 is the L2 norm squared, 1 the gradient, 2 the Laplacian.
pub fn sobolev_sum(field: &SpectralField, power: u32) -> f64 {
    let comps = field.components();
    let mut total = 0.0;
    for idx in 0..field.grid.points() {
        let w = field.grid.kappa_sq(idx).powi(power as i32);
        let mut f2 = 0.0;
        for c in 0..comps {
            f2 += field.data[idx * comps + c].norm_sqr();
        }
        total += w * f2;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Rank, TAU};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_real(grid: SpectralGrid, rank: Rank, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = RealField::zeros(grid, rank);
        for v in &mut f.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    /// Band-limit a random field by a forward/inverse roundtrip.
    fn random_band_limited(grid: SpectralGrid, rank: Rank, seed: u64) -> RealField {
        let f = random_real(grid, rank, seed);
        let mut hat = forward(&f);
        for idx in 0..grid.points() {
            if grid.linf_mode(idx) > grid.cutoff() as i64 {
                for c in 0..hat.components() {
                    *hat.at_mut(idx, c) = Complex64::new(0.0, 0.0);
                }
            }
        }
        inverse(&hat)
    }

    #[test]
    fn constant_field_is_dc_mode() {
        let grid = SpectralGrid::new(2, 8, 3).unwrap();
        let mut f = RealField::zeros(grid, Rank::Scalar);
        f.data.fill(2.5);
        let hat = forward(&f);
        assert!((hat.coeff(&[0, 0], 0) - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        for idx in 0..grid.points() {
            if idx != grid.mode_index(&[0, 0]) {
                assert!(hat.at(idx, 0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sine_has_expected_coefficients() {
        let grid = SpectralGrid::new(2, 16, 7).unwrap();
        let mut f = RealField::zeros(grid, Rank::Scalar);
        for p in 0..grid.points() {
            let x = grid.coords(p);
            f.data[p] = (TAU * x[0]).sin();
        }
        let hat = forward(&f);
        // sin(2 pi x1) = -(i/2) e^{i 2 pi x1} + (i/2) e^{-i 2 pi x1}
        assert!((hat.coeff(&[1, 0], 0) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((hat.coeff(&[-1, 0], 0) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        let e1 = grid.mode_index(&[1, 0]);
        let m1 = grid.mode_index(&[-1, 0]);
        for idx in 0..grid.points() {
            if idx != e1 && idx != m1 {
                assert!(hat.at(idx, 0).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn roundtrip_band_limited() {
        let grid = SpectralGrid::new(2, 16, 7).unwrap();
        let f = random_band_limited(grid, Rank::Vector, 1);
        let back = inverse(&forward(&f));
        let err = f
            .data
            .iter()
            .zip(&back.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-13, "roundtrip error {err}");
    }

    #[test]
    fn forward_is_hermitian() {
        let grid = SpectralGrid::new(2, 12, 5).unwrap();
        let f = random_real(grid, Rank::Matrix, 3);
        let hat = forward(&f);
        assert!(hat.hermitian_residual() < 1e-13);
    }

    #[test]
    fn parseval_identity() {
        let grid = SpectralGrid::new(2, 16, 7).unwrap();
        let f = random_real(grid, Rank::Vector, 5);
        // strip Nyquist content so grid quadrature matches the coefficient sum
        let f = inverse(&forward(&f));
        let hat = forward(&f);
        let grid_mean: f64 =
            f.data.iter().map(|v| v * v).sum::<f64>() / grid.points() as f64;
        let coeff_sum = sobolev_sum(&hat, 0);
        assert!(
            (grid_mean - coeff_sum).abs() <= 1e-12 * grid_mean.max(1.0),
            "parseval {grid_mean} vs {coeff_sum}"
        );
    }

    #[test]
    fn pad_and_truncate_are_inverse() {
        let grid = SpectralGrid::new(2, 8, 3).unwrap();
        let f = random_band_limited(grid, Rank::Scalar, 9);
        let hat = forward(&f);
        let padded = pad_spectral(&hat, 16);
        let back = truncate_spectral(&padded, 8, 3);
        assert!(hat.max_diff(&back) < 1e-15);
    }

    #[test]
    fn three_dimensional_roundtrip() {
        let grid = SpectralGrid::new(3, 8, 3).unwrap();
        let f = random_band_limited(grid, Rank::Scalar, 11);
        let back = inverse(&forward(&f));
        let err = f
            .data
            .iter()
            .zip(&back.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-13);
    }
}
