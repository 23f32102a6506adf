//! Stored-energy models: W, the stress S = DW, the Hessian D^2 W,
//! and a sampling-based verifier for the structural hypotheses the
//! solver relies on (growth, semiconvexity, monotonicity).
//!
//! Two models ship:
//!   double_well: W(F) = (|F|^2 - 1)^2 / 4, p = 4, nonconvex with
//!     semiconvexity shift K = 1 (the canonical phase-transition energy);
//!   quadratic:   W(F) = |F|^2 / 2, p = 2, convex (K = 0), for which the
//!     evolution is linear and admits a closed-form oracle.
//!
//! Matrices are d x d, flattened row-major; Hessians are dense
//! d^2 x d^2 with the same (i, alpha) flattening on both axes.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    DoubleWell,
    Quadratic,
}

impl EnergyKind {
    pub fn name(self) -> &'static str {
        match self {
            EnergyKind::DoubleWell => "double_well",
            EnergyKind::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "double_well" => Ok(EnergyKind::DoubleWell),
            "quadratic" => Ok(EnergyKind::Quadratic),
            other => Err(Error::InvalidParameter(format!("unknown energy model '{other}'"))),
        }
    }
}

/// A stored energy together with its structural constants.
///
/// The growth and monotonicity constants are the sharp (or slightly
/// slack) values for the built-in models; the verifier checks them on
/// sampled matrices and also reports fitted constants, since the
/// hypotheses only assert existence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub kind: EnergyKind,
    /// spatial / matrix dimension
    pub d: usize,
    /// growth exponent p >= 2
    pub p: f64,
    /// semiconvexity shift K: W + (K/2)|F|^2 is convex
    pub k: f64,
    /// coercivity constant: W >= growth_c |F|^p - growth_c_upper
    pub growth_c: f64,
    /// upper growth constant: W <= growth_c_upper (|F|^p + 1)
    pub growth_c_upper: f64,
    /// stress growth: |S| <= stress_growth_c (1 + |F|^{p-1})
    pub stress_growth_c: f64,
    /// strengthened monotonicity constant of the pair inequality
    pub monotonicity_c: f64,
    /// Hessian lower bound: D^2 W~ >= hessian_lower_c |F|^{p-2} I
    pub hessian_lower_c: f64,
    /// Hessian growth: |D^2 W| <= hessian_growth_c (1 + |F|^{p-2})
    pub hessian_growth_c: f64,
}

impl EnergyModel {
    pub fn double_well(d: usize) -> Self {
        Self {
            kind: EnergyKind::DoubleWell,
            d,
            p: 4.0,
            k: 1.0,
            growth_c: 0.125,
            growth_c_upper: 1.0,
            stress_growth_c: 1.0,
            monotonicity_c: 0.5,
            hessian_lower_c: 1.0,
            hessian_growth_c: 3.0,
        }
    }

    pub fn quadratic(d: usize) -> Self {
        Self {
            kind: EnergyKind::Quadratic,
            d,
            p: 2.0,
            k: 0.0,
            growth_c: 0.5,
            growth_c_upper: 0.5,
            stress_growth_c: 1.0,
            monotonicity_c: 0.5,
            hessian_lower_c: 1.0,
            hessian_growth_c: 1.0,
        }
    }

    pub fn new(kind: EnergyKind, d: usize) -> Self {
        match kind {
            EnergyKind::DoubleWell => Self::double_well(d),
            EnergyKind::Quadratic => Self::quadratic(d),
        }
    }

    /// Override the semiconvexity shift (for negative-control checks).
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    fn check_input(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.d * self.d {
            return Err(Error::Domain(format!(
                "matrix argument has {} entries, expected {}",
                f.len(),
                self.d * self.d
            )));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite matrix argument".into()));
        }
        Ok(())
    }

    /// W(F).
    pub fn energy(&self, f: &[f64]) -> Result<f64> {
        self.check_input(f)?;
        Ok(self.energy_unchecked(f))
    }

    #[inline]
    pub fn energy_unchecked(&self, f: &[f64]) -> f64 {
        let s: f64 = f.iter().map(|v| v * v).sum();
        match self.kind {
            EnergyKind::DoubleWell => 0.25 * (s - 1.0) * (s - 1.0),
            EnergyKind::Quadratic => 0.5 * s,
        }
    }

    /// S(F) = DW(F).
    pub fn stress(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_input(f)?;
        let mut out = vec![0.0; f.len()];
        self.stress_into(f, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn stress_into(&self, f: &[f64], out: &mut [f64]) {
        match self.kind {
            EnergyKind::DoubleWell => {
                let s: f64 = f.iter().map(|v| v * v).sum();
                let c = s - 1.0;
                for (o, v) in out.iter_mut().zip(f) {
                    *o = c * v;
                }
            }
            EnergyKind::Quadratic => out.copy_from_slice(f),
        }
    }

    /// D^2 W(F) as a dense symmetric d^2 x d^2 matrix, row-major (i, alpha).
    pub fn hessian(&self, f: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(f)?;
        let m = self.d * self.d;
        Ok(match self.kind {
            EnergyKind::DoubleWell => {
                let s: f64 = f.iter().map(|v| v * v).sum();
                let mut h = DMatrix::from_diagonal_element(m, m, s - 1.0);
                for a in 0..m {
                    for b in 0..m {
                        h[(a, b)] += 2.0 * f[a] * f[b];
                    }
                }
                h
            }
            EnergyKind::Quadratic => DMatrix::identity(m, m),
        })
    }

    /// D^2 W~(F) = D^2 W(F) + K I (Hessian of the convexified energy).
    pub fn hessian_shifted(&self, f: &[f64]) -> Result<DMatrix<f64>> {
        let mut h = self.hessian(f)?;
        for i in 0..h.nrows() {
            h[(i, i)] += self.k;
        }
        Ok(h)
    }

    /// Spectral norm of D^2 W(F) (largest |eigenvalue|; the matrix is symmetric).
    pub fn hessian_norm(&self, f: &[f64]) -> Result<f64> {
        let h = self.hessian(f)?;
        let eig = h.symmetric_eigenvalues();
        Ok(eig.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// One hypothesis check: the worst signed margin over the sample set
/// (nonnegative means satisfied) and a fitted extremal constant.
#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub worst_margin: f64,
    /// |F| at which the worst margin was attained
    pub worst_at: f64,
    /// extremal constant that would make the worst margin zero, when meaningful
    pub fitted_constant: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub model: EnergyModel,
    pub sample_count: usize,
    pub radius: f64,
    pub seed: u64,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn worst_margin(&self) -> f64 {
        self.checks.iter().fold(f64::INFINITY, |m, c| m.min(c.worst_margin))
    }
}

const MARGIN_TOL: f64 = 1e-10;

fn frob(f: &[f64]) -> f64 {
    f.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sample matrices uniformly in the Frobenius ball of the given radius and
/// check the growth/semiconvexity/monotonicity hypotheses, reporting the
/// worst margin per hypothesis. The zero and identity matrices are always
/// included as probes so the sharp points are hit exactly.
pub fn verify_hypotheses(
    model: &EnergyModel,
    sample_count: usize,
    radius: f64,
    seed: u64,
) -> Result<HypothesisReport> {
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be >= 1".into()));
    }
    if radius <= 0.0 {
        return Err(Error::InvalidParameter("radius must be > 0".into()));
    }
    let m = model.d * model.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(sample_count + 2);
    samples.push(vec![0.0; m]);
    let mut eye = vec![0.0; m];
    for i in 0..model.d {
        eye[i * model.d + i] = 1.0;
    }
    samples.push(eye);
    for _ in 0..sample_count {
        // isotropic direction times radius * U^(1/m): uniform in the ball
        let mut v: Vec<f64> = (0..m)
            .map(|_| {
                // Box-Muller from two uniforms
                let u1: f64 = rng.gen_range(1e-12..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let norm = frob(&v).max(1e-300);
        let r = radius * rng.gen_range(0.0f64..1.0).powf(1.0 / m as f64);
        for x in &mut v {
            *x *= r / norm;
        }
        samples.push(v);
    }

    let p = model.p;
    let mut checks = Vec::new();

    // (H2) detached-constant growth: c|F|^p - C <= W <= C(|F|^p + 1)
    {
        let mut lo = HypMin::new();
        let mut hi = HypMin::new();
        let mut c_fit = f64::INFINITY;
        let mut c_up_fit = 0.0f64;
        for f in &samples {
            let nf = frob(f);
            let w = model.energy_unchecked(f);
            lo.update(w - (model.growth_c * nf.powf(p) - model.growth_c_upper), nf);
            hi.update(model.growth_c_upper * (nf.powf(p) + 1.0) - w, nf);
            if nf.powf(p) > 1e-12 {
                c_fit = c_fit.min((w + model.growth_c_upper) / nf.powf(p));
            }
            c_up_fit = c_up_fit.max(w / (nf.powf(p) + 1.0));
        }
        checks.push(lo.check("H2 lower growth", Some(c_fit)));
        checks.push(hi.check("H2 upper growth", Some(c_up_fit)));
    }

    // (H3) semiconvexity: min eig D^2 W(F) >= -K
    {
        let mut worst = HypMin::new();
        let mut k_fit = 0.0f64;
        for f in &samples {
            let eig = model.hessian(f)?.symmetric_eigenvalues();
            let min_eig = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            worst.update(min_eig + model.k, frob(f));
            k_fit = k_fit.max(-min_eig);
        }
        checks.push(worst.check("H3 semiconvexity", Some(k_fit)));
    }

    // (H4) stress growth: |S(F)| <= C (1 + |F|^{p-1})
    {
        let mut worst = HypMin::new();
        let mut c_fit = 0.0f64;
        for f in &samples {
            let nf = frob(f);
            let s = {
                let mut s = vec![0.0; m];
                model.stress_into(f, &mut s);
                s
            };
            let ns = frob(&s);
            let cap = 1.0 + nf.powf(p - 1.0);
            worst.update(model.stress_growth_c * cap - ns, nf);
            c_fit = c_fit.max(ns / cap);
        }
        checks.push(worst.check("H4 stress growth", Some(c_fit)));
    }

    // (H5) Andrews-Ball monotonicity of the shifted stress, on sampled pairs:
    // (S(F1) - S(F2), F1 - F2) >= -K |F1 - F2|^2
    // (H6) strengthened form with the |F|^{p-2} weight
    {
        let mut h5 = HypMin::new();
        let mut h6 = HypMin::new();
        let mut c6_fit = f64::INFINITY;
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![0.0; m];
        for pair in samples.chunks_exact(2) {
            let (f1, f2) = (&pair[0], &pair[1]);
            let g: Vec<f64> = f1.iter().zip(f2.iter()).map(|(a, b)| a - b).collect();
            let g2 = inner(&g, &g);
            if g2 < 1e-20 {
                continue;
            }
            model.stress_into(f1, &mut s1);
            model.stress_into(f2, &mut s2);
            let ds: Vec<f64> = s1.iter().zip(s2.iter()).map(|(a, b)| a - b).collect();
            let slope = inner(&ds, &g) / g2;
            let nf = frob(f1).max(frob(f2));
            h5.update(slope + model.k, nf);
            let weight = frob(f1).powf(p - 2.0) + frob(f2).powf(p - 2.0);
            h6.update(slope + model.k - model.monotonicity_c * weight, nf);
            if weight > 1e-12 {
                c6_fit = c6_fit.min((slope + model.k) / weight);
            }
        }
        checks.push(h5.check("H5 monotonicity", None));
        checks.push(h6.check("H6 strengthened monotonicity", Some(c6_fit)));
    }

    // (H7) D^2 W~(F) >= c |F|^{p-2} I
    {
        let mut worst = HypMin::new();
        let mut c_fit = f64::INFINITY;
        for f in &samples {
            let nf = frob(f);
            let mut h = model.hessian_shifted(f)?;
            let shift = model.hessian_lower_c * nf.powf(p - 2.0);
            for i in 0..m {
                h[(i, i)] -= shift;
            }
            let eig = h.symmetric_eigenvalues();
            let min_eig = eig.iter().fold(f64::INFINITY, |mn, v| mn.min(*v));
            worst.update(min_eig, nf);
            if nf.powf(p - 2.0) > 1e-12 {
                c_fit = c_fit.min((min_eig + shift) / nf.powf(p - 2.0));
            }
        }
        checks.push(worst.check("H7 Hessian lower bound", Some(c_fit)));
    }

    // (H8) |D^2 W(F)| <= C (1 + |F|^{p-2})
    {
        let mut worst = HypMin::new();
        let mut c_fit = 0.0f64;
        for f in &samples {
            let nf = frob(f);
            let norm = model.hessian_norm(f)?;
            let cap = 1.0 + nf.powf(p - 2.0);
            worst.update(model.hessian_growth_c * cap - norm, nf);
            c_fit = c_fit.max(norm / cap);
        }
        checks.push(worst.check("H8 Hessian growth", Some(c_fit)));
    }

    Ok(HypothesisReport {
        model: *model,
        sample_count,
        radius,
        seed,
        checks,
    })
}

struct HypMin {
    worst: f64,
    at: f64,
}

impl HypMin {
    fn new() -> Self {
        Self { worst: f64::INFINITY, at: 0.0 }
    }

    fn update(&mut self, margin: f64, at: f64) {
        if margin < self.worst {
            self.worst = margin;
            self.at = at;
        }
    }

    fn check(self, name: &'static str, fitted: Option<f64>) -> HypothesisCheck {
        HypothesisCheck {
            name,
            passed: self.worst >= -MARGIN_TOL,
            worst_margin: self.worst,
            worst_at: self.at,
            fitted_constant: fitted.filter(|v| v.is_finite()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d * d).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn energy_values() {
        let dw = EnergyModel::double_well(2);
        let q = EnergyModel::quadratic(2);
        let zero = vec![0.0; 4];
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(dw.energy(&zero).unwrap(), 0.25);
        assert_eq!(dw.energy(&eye).unwrap(), 0.25);
        assert_eq!(q.energy(&eye).unwrap(), 1.0);
    }

    #[test]
    fn stress_values() {
        let dw = EnergyModel::double_well(2);
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let s = dw.stress(&eye).unwrap();
        assert_eq!(s, eye);
        let zero = vec![0.0; 4];
        assert_eq!(dw.stress(&zero).unwrap(), zero);
    }

    #[test]
    fn hessian_values() {
        let dw = EnergyModel::double_well(2);
        let h = dw.hessian(&[0.0; 4]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b { -1.0 } else { 0.0 };
                assert_eq!(h[(a, b)], expect);
            }
        }
        let q = EnergyModel::quadratic(2);
        let h = q.hessian(&[0.3, -0.7, 2.0, 0.1]).unwrap();
        assert_eq!(h, DMatrix::identity(4, 4));
    }

    #[test]
    fn non_finite_rejected() {
        let dw = EnergyModel::double_well(2);
        assert!(dw.energy(&[f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(dw.stress(&[f64::INFINITY, 0.0, 0.0, 0.0]).is_err());
        assert!(dw.hessian(&[0.0; 3]).is_err());
    }

    #[test]
    fn stress_matches_finite_difference_of_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for model in [EnergyModel::double_well(2), EnergyModel::quadratic(2)] {
            for _ in 0..20 {
                let f = random_matrix(&mut rng, 2, 2.0);
                let s = model.stress(&f).unwrap();
                let h = 1e-5;
                for c in 0..4 {
                    let mut fp = f.clone();
                    let mut fm = f.clone();
                    fp[c] += h;
                    fm[c] -= h;
                    let fd = (model.energy(&fp).unwrap() - model.energy(&fm).unwrap()) / (2.0 * h);
                    assert!((fd - s[c]).abs() <= 1e-8, "component {c}: {} vs {}", fd, s[c]);
                }
            }
        }
    }

    #[test]
    fn hessian_matches_finite_difference_of_stress() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [EnergyModel::double_well(2), EnergyModel::quadratic(2)] {
            for _ in 0..20 {
                let f = random_matrix(&mut rng, 2, 2.0);
                let hess = model.hessian(&f).unwrap();
                let h = 1e-5;
                for c in 0..4 {
                    let mut fp = f.clone();
                    let mut fm = f.clone();
                    fp[c] += h;
                    fm[c] -= h;
                    let sp = model.stress(&fp).unwrap();
                    let sm = model.stress(&fm).unwrap();
                    for r in 0..4 {
                        let fd = (sp[r] - sm[r]) / (2.0 * h);
                        assert!((fd - hess[(r, c)]).abs() <= 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_consistency_order() {
        // |(W(F+hG) - W(F-hG)) / 2h - (S, G)| <= 10 h^2 for unit directions
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for model in [EnergyModel::double_well(2), EnergyModel::quadratic(2)] {
            for _ in 0..100 {
                let f = random_matrix(&mut rng, 2, 2.0);
                let mut g = random_matrix(&mut rng, 2, 1.0);
                let ng = frob(&g);
                for v in &mut g {
                    *v /= ng;
                }
                let s = model.stress(&f).unwrap();
                let sg = inner(&s, &g);
                for h in [1e-3, 1e-4] {
                    let fp: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + h * b).collect();
                    let fm: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - h * b).collect();
                    let fd =
                        (model.energy(&fp).unwrap() - model.energy(&fm).unwrap()) / (2.0 * h);
                    assert!((fd - sg).abs() <= 10.0 * h * h);
                }
            }
        }
    }

    #[test]
    fn hessian_consistency_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = EnergyModel::double_well(2);
        for _ in 0..100 {
            let f = random_matrix(&mut rng, 2, 2.0);
            let mut g = random_matrix(&mut rng, 2, 1.0);
            let ng = frob(&g);
            for v in &mut g {
                *v /= ng;
            }
            let hess = model.hessian(&f).unwrap();
            let hg: Vec<f64> =
                (0..4).map(|r| (0..4).map(|c| hess[(r, c)] * g[c]).sum()).collect();
            for h in [1e-3, 1e-4] {
                let fp: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + h * b).collect();
                let fm: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - h * b).collect();
                let sp = model.stress(&fp).unwrap();
                let sm = model.stress(&fm).unwrap();
                for r in 0..4 {
                    let fd = (sp[r] - sm[r]) / (2.0 * h);
                    assert!((fd - hg[r]).abs() <= 10.0 * h * h);
                }
            }
        }
    }

    #[test]
    fn shifted_hessian_semiconvex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for model in [EnergyModel::double_well(2), EnergyModel::quadratic(2)] {
            for _ in 0..200 {
                let f = random_matrix(&mut rng, 2, 3.0);
                let eig = model.hessian_shifted(&f).unwrap().symmetric_eigenvalues();
                let min_eig = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
                assert!(min_eig >= -1e-12);
            }
        }
    }

    #[test]
    fn shifted_stress_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in [EnergyModel::double_well(2), EnergyModel::quadratic(2)] {
            for _ in 0..200 {
                let f1 = random_matrix(&mut rng, 2, 3.0);
                let f2 = random_matrix(&mut rng, 2, 3.0);
                let s1 = model.stress(&f1).unwrap();
                let s2 = model.stress(&f2).unwrap();
                let g: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
                let ds: Vec<f64> = s1
                    .iter()
                    .zip(&s2)
                    .zip(&g)
                    .map(|((a, b), gg)| a - b + model.k * gg)
                    .collect();
                assert!(inner(&ds, &g) >= -1e-12);
            }
        }
    }

    #[test]
    fn double_well_hypotheses_pass() {
        let model = EnergyModel::double_well(2);
        let report = verify_hypotheses(&model, 1000, 3.0, 0).unwrap();
        for check in &report.checks {
            assert!(
                check.passed,
                "{} failed: margin {} at |F| = {}",
                check.name, check.worst_margin, check.worst_at
            );
        }
        assert!(report.worst_margin() >= -1e-10);
    }

    #[test]
    fn quadratic_hypotheses_pass() {
        let model = EnergyModel::quadratic(2);
        let report = verify_hypotheses(&model, 1000, 3.0, 0).unwrap();
        assert!(report.all_passed());
    }

    #[test]
    fn wrong_k_fails_h3_at_zero() {
        let model = EnergyModel::double_well(2).with_k(0.0);
        let report = verify_hypotheses(&model, 100, 3.0, 0).unwrap();
        let h3 = report.checks.iter().find(|c| c.name.starts_with("H3")).unwrap();
        assert!(!h3.passed);
        // the zero-matrix probe pins the worst margin at exactly -1
        assert!((h3.worst_margin + 1.0).abs() < 1e-14);
        assert_eq!(h3.worst_at, 0.0);
    }

    #[test]
    fn verifier_validates_inputs() {
        let model = EnergyModel::double_well(2);
        assert!(verify_hypotheses(&model, 0, 3.0, 0).is_err());
        assert!(verify_hypotheses(&model, 10, -1.0, 0).is_err());
    }

    #[test]
    fn three_dimensional_model() {
        let model = EnergyModel::double_well(3);
        let report = verify_hypotheses(&model, 200, 2.0, 7).unwrap();
        assert!(report.all_passed());
    }
}
