//! Torus discretization and field containers.
//!
//! The domain is the unit torus (side length 1), so the integer mode
//! k carries the wavevector 2*pi*k. Real fields hold samples on the
//! uniform n^d grid; spectral fields hold complex Fourier coefficients
//! on the same index set with Hermitian symmetry c(-k) = conj(c(k)).
//! Both store components interleaved: index = point * ncomp + comp,
//! points in row-major order over the grid dimensions.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Tensor rank of a field over the d-torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Matrix,
}

impl Rank {
    pub fn components(self, d: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => d,
            Rank::Matrix => d * d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::Matrix => "matrix",
        }
    }
}

/// Uniform grid on the unit torus with a Galerkin cutoff.
///
/// `n` points per dimension (even), representable modes per component
/// span [-n/2, n/2); the Nyquist plane is always forced to zero. The
/// cutoff N truncates to max_a |k_a| <= N (per-component ball).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralGrid {
    d: usize,
    n: usize,
    cutoff: usize,
}

impl SpectralGrid {
    pub fn new(d: usize, n: usize, cutoff: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("grid dimension d = {d}, must be 1, 2 or 3")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("grid size n = {n}, must be even and >= 4")));
        }
        if cutoff == 0 || cutoff > n / 2 - 1 {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff} out of range 1..={} for n = {n}",
                n / 2 - 1
            )));
        }
        Ok(Self { d, n, cutoff })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.d, self.n, cutoff)
    }

    /// Number of grid points (= number of retained modes), n^d.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Integer wavevector of the flattened mode index, components in [-n/2, n/2).
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        let half = (n / 2) as i64;
        let mut k = [0i64; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            let m = (rem % n) as i64;
            rem /= n;
            k[a] = if m < half { m } else { m - n as i64 };
        }
        k
    }

    /// Flattened index of an integer wavevector (components wrapped mod n).
    pub fn mode_index(&self, k: &[i64]) -> usize {
        let n = self.n as i64;
        let mut idx = 0usize;
        for a in 0..self.d {
            let m = k[a].rem_euclid(n) as usize;
            idx = idx * self.n + m;
        }
        idx
    }

    /// Physical coordinates of a grid point, in [0, 1)^d.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let mut x = [0.0f64; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            x[a] = (rem % n) as f64 / n as f64;
            rem /= n;
        }
        x
    }

    /// True if any component of the mode sits on the Nyquist plane m = n/2.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = (self.n / 2) as i64;
        let k = self.wavevector(idx);
        (0..self.d).any(|a| k[a] == -half)
    }

    /// |2 pi k|^2 for the flattened mode index.
    pub fn kappa_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        let mut s = 0.0;
        for a in 0..self.d {
            let ka = TAU * k[a] as f64;
            s += ka * ka;
        }
        s
    }

    /// max_a |k_a| for the flattened mode index.
    pub fn linf_mode(&self, idx: usize) -> i64 {
        let k = self.wavevector(idx);
        (0..self.d).map(|a| k[a].abs()).max().unwrap_or(0)
    }
}

/// Physical-space samples of a scalar/vector/matrix field.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: SpectralGrid,
    pub rank: Rank,
    pub data: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: SpectralGrid, rank: Rank) -> Self {
        let len = grid.points() * rank.components(grid.d());
        Self { grid, rank, data: vec![0.0; len] }
    }

    pub fn components(&self) -> usize {
        self.rank.components(self.grid.d())
    }

    pub fn at(&self, point: usize, comp: usize) -> f64 {
        self.data[point * self.components() + comp]
    }

    pub fn at_mut(&mut self, point: usize, comp: usize) -> &mut f64 {
        let c = self.components();
        &mut self.data[point * c + comp]
    }

    /// Components of one grid point as a contiguous slice.
    pub fn point(&self, point: usize) -> &[f64] {
        let c = self.components();
        &self.data[point * c..(point + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("real fields on different grids".into()));
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank.name().into(),
                got: other.rank.name().into(),
            });
        }
        Ok(())
    }

    /// Pointwise difference, self - other.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, rank: self.rank, data })
    }
}

/// Fourier coefficients of a field, Hermitian-symmetric, Nyquist-free.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: SpectralGrid,
    pub rank: Rank,
    pub data: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: SpectralGrid, rank: Rank) -> Self {
        let len = grid.points() * rank.components(grid.d());
        Self { grid, rank, data: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn components(&self) -> usize {
        self.rank.components(self.grid.d())
    }

    pub fn at(&self, mode: usize, comp: usize) -> Complex64 {
        self.data[mode * self.components() + comp]
    }

    pub fn at_mut(&mut self, mode: usize, comp: usize) -> &mut Complex64 {
        let c = self.components();
        &mut self.data[mode * c + comp]
    }

    /// Coefficient at an integer wavevector.
    pub fn coeff(&self, k: &[i64], comp: usize) -> Complex64 {
        self.at(self.grid.mode_index(k), comp)
    }

    pub fn set_coeff(&mut self, k: &[i64], comp: usize, value: Complex64) {
        let idx = self.grid.mode_index(k);
        *self.at_mut(idx, comp) = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest violation of c(-k) = conj(c(k)) over all modes/components.
    pub fn hermitian_residual(&self) -> f64 {
        let c = self.components();
        let mut worst = 0.0f64;
        for idx in 0..self.grid.points() {
            let k = self.grid.wavevector(idx);
            let mut neg = [0i64; 3];
            for a in 0..self.grid.d() {
                neg[a] = -k[a];
            }
            let jdx = self.grid.mode_index(&neg);
            for comp in 0..c {
                let diff = self.at(idx, comp) - self.at(jdx, comp).conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("spectral fields on different grids".into()));
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank.name().into(),
                got: other.rank.name().into(),
            });
        }
        Ok(())
    }

    /// Coefficient-wise difference, self - other.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, rank: self.rank, data })
    }

    /// self + scale * other, coefficient-wise.
    pub fn scaled_add(&mut self, scale: f64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, scale: f64) {
        for v in &mut self.data {
            *v *= scale;
        }
    }

    /// Largest coefficient difference against another field.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }
}
