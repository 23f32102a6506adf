//! Spectral operators: Galerkin projection, exact differential operators,
//! dealiasing, and the motion <-> deformation-gradient correspondence.
//!
//! Matrix components are flattened row-major: (i, alpha) -> i * d + alpha,
//! with F_{i alpha} = d y_i / d x_alpha, so gradients of vectors put the
//! derivative index last.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField, TAU};

/// Exact differential operators in Fourier space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOp {
    /// vector -> matrix, (grad u)_{i alpha} = d_alpha u_i
    Grad,
    /// matrix -> vector, (Div S)_i = d_alpha S_{i alpha}
    Div,
    /// any rank, componentwise
    Laplacian,
    /// matrix -> vector, (grad-lap F)_i = d_alpha (Delta F)_{i alpha}
    GradLaplacian,
    /// vector -> vector, Delta^2
    Bilaplacian,
}

/// Dealiasing rules for pseudo-spectral products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DealiasRule {
    /// zero |k_a| > n/3 (exact for quadratic products)
    TwoThirds,
    /// zero |k_a| > n/4 (exact for cubic products)
    Half,
}

/// Galerkin projection P^N: zero all modes with max_a |k_a| > cutoff.
pub fn project_modes(field: &SpectralField, cutoff: usize) -> Result<SpectralField> {
    let grid = field.grid;
    if cutoff > grid.n() / 2 - 1 {
        return Err(Error::InvalidParameter(format!(
            "projection cutoff {cutoff} exceeds n/2 - 1 = {}",
            grid.n() / 2 - 1
        )));
    }
    let mut out = field.clone();
    let comps = field.components();
    for idx in 0..grid.points() {
        if grid.linf_mode(idx) > cutoff as i64 {
            for c in 0..comps {
                out.data[idx * comps + c] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// Zero the aliased band of a pseudo-spectral product.
pub fn dealias(field: &SpectralField, rule: DealiasRule) -> SpectralField {
    let grid = field.grid;
    let limit = match rule {
        DealiasRule::TwoThirds => grid.n() as f64 / 3.0,
        DealiasRule::Half => grid.n() as f64 / 4.0,
    };
    let mut out = field.clone();
    let comps = field.components();
    for idx in 0..grid.points() {
        let k = grid.wavevector(idx);
        if (0..grid.d()).any(|a| (k[a].abs() as f64) > limit) {
            for c in 0..comps {
                out.data[idx * comps + c] = Complex64::new(0.0, 0.0);
            }
        }
    }
    out
}

/// Retained band of a dealias rule, in integer modes.
pub fn dealias_limit(n: usize, rule: DealiasRule) -> usize {
    match rule {
        DealiasRule::TwoThirds => n / 3,
        DealiasRule::Half => n / 4,
    }
}

pub fn apply_diff_operator(field: &SpectralField, op: DiffOp) -> Result<SpectralField> {
    let grid = field.grid;
    let d = grid.d();
    match op {
        DiffOp::Grad => {
            require_rank(field, Rank::Vector, "grad")?;
            let mut out = SpectralField::zeros(grid, Rank::Matrix);
            for idx in 0..grid.points() {
                let k = grid.wavevector(idx);
                for i in 0..d {
                    let v = field.at(idx, i);
                    for a in 0..d {
                        let ik = Complex64::new(0.0, TAU * k[a] as f64);
                        *out.at_mut(idx, i * d + a) = ik * v;
                    }
                }
            }
            Ok(out)
        }
        DiffOp::Div => {
            require_rank(field, Rank::Matrix, "div")?;
            let mut out = SpectralField::zeros(grid, Rank::Vector);
            for idx in 0..grid.points() {
                let k = grid.wavevector(idx);
                for i in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..d {
                        let ik = Complex64::new(0.0, TAU * k[a] as f64);
                        acc += ik * field.at(idx, i * d + a);
                    }
                    *out.at_mut(idx, i) = acc;
                }
            }
            Ok(out)
        }
        DiffOp::Laplacian => {
            let mut out = field.clone();
            let comps = field.components();
            for idx in 0..grid.points() {
                let w = -grid.kappa_sq(idx);
                for c in 0..comps {
                    out.data[idx * comps + c] *= w;
                }
            }
            Ok(out)
        }
        DiffOp::GradLaplacian => {
            require_rank(field, Rank::Matrix, "grad_laplacian")?;
            let lap = apply_diff_operator(field, DiffOp::Laplacian)?;
            apply_diff_operator(&lap, DiffOp::Div)
        }
        DiffOp::Bilaplacian => {
            require_rank(field, Rank::Vector, "bilaplacian")?;
            let mut out = field.clone();
            let comps = field.components();
            for idx in 0..grid.points() {
                let w = grid.kappa_sq(idx);
                let w2 = w * w;
                for c in 0..comps {
                    out.data[idx * comps + c] *= w2;
                }
            }
            Ok(out)
        }
    }
}

fn require_rank(field: &SpectralField, rank: Rank, op: &str) -> Result<()> {
    if field.rank != rank {
        return Err(Error::RankMismatch {
            expected: format!("{} field for {op}", rank.name()),
            got: field.rank.name().into(),
        });
    }
    Ok(())
}

/// F = grad y, computed exactly in Fourier space: F_{i a}(k) = i 2 pi k_a y_i(k).
///
/// The result is curl-free by construction, which is how the involution
/// curl F = 0 is propagated at the discrete level.
pub fn f_from_y(y: &SpectralField) -> Result<SpectralField> {
    require_rank(y, Rank::Vector, "f_from_y")?;
    apply_diff_operator(y, DiffOp::Grad)
}

/// Outcome of inverting F = grad y.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub y: SpectralField,
    /// Frobenius norm of the discarded mean of F (zero for admissible data).
    pub dropped_mean: f64,
}

/// Invert F = grad y for curl-free F: y_i(k) = -i 2 pi k_a F_{i a}(k) / |2 pi k|^2.
///
/// The mean of y is fixed to zero; a nonzero mean of F (an affine
/// deformation, not periodic-representable) is dropped and reported.
pub fn reconstruct_y_from_f(f: &SpectralField, tol: f64) -> Result<Reconstruction> {
    require_rank(f, Rank::Matrix, "reconstruct_y_from_f")?;
    let res = curl_residual(f)?;
    if res > tol {
        return Err(Error::InadmissibleData(format!(
            "curl residual {res:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    let grid = f.grid;
    let d = grid.d();
    let mut y = SpectralField::zeros(grid, Rank::Vector);
    let mut mean_sq = 0.0;
    for idx in 0..grid.points() {
        let ksq = grid.kappa_sq(idx);
        if ksq == 0.0 {
            for c in 0..d * d {
                mean_sq += f.at(idx, c).norm_sqr();
            }
            continue;
        }
        let k = grid.wavevector(idx);
        for i in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..d {
                let mik = Complex64::new(0.0, -TAU * k[a] as f64);
                acc += mik * f.at(idx, i * d + a);
            }
            *y.at_mut(idx, i) = acc / ksq;
        }
    }
    Ok(Reconstruction { y, dropped_mean: mean_sq.sqrt() })
}

/// Involution residual: max over i, a < b, k of |i k_a F_{i b} - i k_b F_{i a}|
/// with wavevectors 2 pi k. Exactly zero on gradients.
pub fn curl_residual(f: &SpectralField) -> Result<f64> {
    require_rank(f, Rank::Matrix, "curl_residual")?;
    let grid = f.grid;
    let d = grid.d();
    if d == 1 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for idx in 0..grid.points() {
        let k = grid.wavevector(idx);
        for i in 0..d {
            for a in 0..d {
                for b in (a + 1)..d {
                    let ka = Complex64::new(0.0, TAU * k[a] as f64);
                    let kb = Complex64::new(0.0, TAU * k[b] as f64);
                    let r = ka * f.at(idx, i * d + b) - kb * f.at(idx, i * d + a);
                    worst = worst.max(r.norm());
                }
            }
        }
    }
    Ok(worst)
}
