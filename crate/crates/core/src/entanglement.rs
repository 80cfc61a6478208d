//! Two-qubit polarization states, concurrence, and the polarization
//! interference pattern.
//!
//! Basis order is `HH, HV, VH, VV`, first letter the signal photon.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Ket2 = [Complex64; 2];
pub type Ket4 = [Complex64; 4];

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ket_h() -> Ket2 {
    [c(1.0, 0.0), c(0.0, 0.0)]
}

pub fn ket_v() -> Ket2 {
    [c(0.0, 0.0), c(1.0, 0.0)]
}

pub fn ket_d() -> Ket2 {
    [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]
}

/// `(|H⟩ + i|V⟩)/√2`
pub fn ket_l() -> Ket2 {
    [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]
}

/// `(|H⟩ − i|V⟩)/√2`
pub fn ket_r() -> Ket2 {
    [c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)]
}

/// Analyzer state `cos 2θ|H⟩ + i sin 2θ|V⟩` selected by a half-wave plate at
/// angle `theta` ahead of a quarter-wave plate at 0°.
pub fn ket_theta(theta: f64) -> Ket2 {
    let a = 2.0 * theta;
    [c(a.cos(), 0.0), c(0.0, a.sin())]
}

pub fn product(a: &Ket2, b: &Ket2) -> Ket4 {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// `(|HH⟩ + |VV⟩)/√2`
pub fn phi_plus() -> Ket4 {
    [c(FRAC_1_SQRT_2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(FRAC_1_SQRT_2, 0.0)]
}

/// Hermitian, unit-trace, positive semidefinite 4×4 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<Complex64>,
}

impl TwoQubitState {
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let herm_err = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm_err:.3e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        // Exact Hermitian part so the eigensolver sees a Hermitian matrix.
        let rho = (rho + rho.adjoint()) * c(0.5, 0.0);
        let state = Self { rho };
        let min = state.eigenvalues()[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(state)
    }

    pub fn from_pure(psi: &Ket4) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let rho = Matrix4::from_fn(|i, j| psi[i] * psi[j].conj() / norm);
        Self::new(rho)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.rho[(row, col)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let eig = self.rho.symmetric_eigen();
        let mut out = [0.0; 4];
        for (o, e) in out.iter_mut().zip(eig.eigenvalues.iter()) {
            *o = *e;
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out
    }

    /// `⟨ψ|ρ|ψ⟩` for a (not necessarily normalized) two-photon ket.
    pub fn expectation(&self, psi: &Ket4) -> f64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += psi[i].conj() * self.rho[(i, j)] * psi[j];
            }
        }
        acc.re
    }

    /// Joint detection probability for analyzer states `a` (signal) and `b`
    /// (idler).
    pub fn project(&self, a: &Ket2, b: &Ket2) -> f64 {
        self.expectation(&product(a, b))
    }

    /// Fidelity `⟨Φ⁺|ρ|Φ⁺⟩` with the target Bell state.
    pub fn fidelity_phi_plus(&self) -> f64 {
        self.expectation(&phi_plus())
    }

    /// Purity `tr ρ²`.
    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }
}

/// Polarization state left after tracing out the space-time degrees of
/// freedom, for overlap `v` and inter-crystal phase `phi`.
pub fn effective_rho(v: Complex64, phi: f64) -> Result<TwoQubitState> {
    if !(v.norm() <= 1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("|v| = {} exceeds 1", v.norm())));
    }
    let coherence = v * Complex64::from_polar(1.0, -phi) * 0.5;
    let mut rho = Matrix4::zeros();
    rho[(0, 0)] = c(0.5, 0.0);
    rho[(3, 3)] = c(0.5, 0.0);
    rho[(0, 3)] = coherence;
    rho[(3, 0)] = coherence.conj();
    TwoQubitState::new(rho)
}

/// `(1−v)/2·(|HH⟩⟨HH| + |VV⟩⟨VV|) + v|Φ⁺⟩⟨Φ⁺|`
pub fn mixed_model_rho(v: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidInput(format!("v = {v} outside [0, 1]")));
    }
    let bell = phi_plus();
    let rho = Matrix4::from_fn(|i, j| {
        let classical = if i == j && (i == 0 || i == 3) { 0.5 * (1.0 - v) } else { 0.0 };
        c(classical, 0.0) + bell[i] * bell[j].conj() * v
    });
    TwoQubitState::new(rho)
}

/// Wootters concurrence.
///
/// With `ρ = AA†`, the square roots of the eigenvalues of `ρ(σ_y⊗σ_y)ρ*(σ_y⊗σ_y)`
/// are the singular values of `Aᵀ(σ_y⊗σ_y)A`, which avoids taking square
/// roots of rounding noise in the spectrum.
pub fn concurrence(state: &TwoQubitState) -> Result<f64> {
    let eig = state.rho.symmetric_eigen();
    let scale = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if eig.eigenvalues.iter().any(|&e| e < -PSD_TOL) {
        return Err(Error::InvalidState("density matrix is not positive semidefinite".into()));
    }
    let keep: Vec<usize> = (0..4).filter(|&i| eig.eigenvalues[i] > 1e-13 * scale).collect();
    let rank = keep.len();
    let factor = DMatrix::from_fn(4, rank, |r, col| {
        let i = keep[col];
        eig.eigenvectors[(r, i)] * eig.eigenvalues[i].sqrt()
    });
    // σ_y ⊗ σ_y in the HH, HV, VH, VV basis
    let mut flip = DMatrix::<Complex64>::zeros(4, 4);
    flip[(0, 3)] = c(-1.0, 0.0);
    flip[(1, 2)] = c(1.0, 0.0);
    flip[(2, 1)] = c(1.0, 0.0);
    flip[(3, 0)] = c(-1.0, 0.0);
    let tau = factor.transpose() * flip * &factor;
    let mut lambdas: Vec<f64> = tau.svd(false, false).singular_values.iter().cloned().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let Some((&first, rest)) = lambdas.split_first() else {
        return Ok(0.0);
    };
    Ok((first - rest.iter().sum::<f64>()).max(0.0))
}

/// Setting of the half-wave plate on the first arm; selects `|R⟩` or `|L⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Projection onto `|R⟩⊗|θ⟩`, rate `¼(1 + v sin 4θ)`.
    Plus,
    /// Projection onto `|L⟩⊗|θ⟩`, rate `¼(1 − v sin 4θ)`.
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn analyzer(self) -> Ket2 {
        match self {
            Branch::Plus => ket_r(),
            Branch::Minus => ket_l(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

/// Coincidence probability `¼(1 ± v sin 4θ)` for the half-wave plate angle
/// `theta` (rad) on the second arm.
pub fn interference_pattern(v: f64, theta: f64, branch: Branch) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidInput(format!("v = {v} outside [0, 1]")));
    }
    Ok(0.25 * (1.0 + branch.sign() * v * (4.0 * theta).sin()))
}

/// How a flat accidental background enters the visibility estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundHandling {
    /// Use raw counts; the visibility is then a lower bound.
    Ignore,
    /// Subtract a known per-sample background level before fitting.
    Subtract(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityEstimate {
    pub visibility: f64,
    pub uncertainty: f64,
    /// Fitted mean level `A` after background handling.
    pub mean: f64,
    /// Fitted signed modulation `±A·v`.
    pub modulation: f64,
}

/// Fits `A(1 ± v sin 4θ)` to `(theta_rad, counts)` samples by linear least
/// squares and returns `v` with its standard error.
pub fn visibility_from_pattern(samples: &[(f64, f64)], background: BackgroundHandling) -> Result<VisibilityEstimate> {
    if samples.len() < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 angle samples, got {}", samples.len())));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < std::f64::consts::FRAC_PI_2 - 1e-9 {
        return Err(Error::InvalidInput("angle samples must span at least 90 degrees".into()));
    }
    let offset = match background {
        BackgroundHandling::Ignore => 0.0,
        BackgroundHandling::Subtract(b) => b,
    };

    let n = samples.len() as f64;
    let (mut ss, mut s2, mut sy, mut sys) = (0.0, 0.0, 0.0, 0.0);
    for &(theta, y) in samples {
        let s = (4.0 * theta).sin();
        let y = y - offset;
        ss += s;
        s2 += s * s;
        sy += y;
        sys += y * s;
    }
    let det = n * s2 - ss * ss;
    let fail = |reason: &str| Error::FitFailure { reason: reason.into(), iterations: 0 };
    if !(det > 1e-12 * n * n) {
        return Err(fail("angle samples do not resolve the sin 4θ term"));
    }
    let mean = (s2 * sy - ss * sys) / det;
    let modulation = (n * sys - ss * sy) / det;
    if !(mean > 0.0) {
        return Err(fail("fitted mean level is not positive"));
    }

    let rss: f64 =
        samples.iter().map(|&(theta, y)| (y - offset - mean - modulation * (4.0 * theta).sin()).powi(2)).sum();
    let var = if samples.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    // (XᵀX)⁻¹ entries for [1, sin 4θ]
    let var_a = var * s2 / det;
    let var_b = var * n / det;
    let cov_ab = -var * ss / det;
    let v = modulation.abs() / mean;
    let sign = modulation.signum();
    let d_b = sign / mean;
    let d_a = -v / mean;
    let var_v = d_b * d_b * var_b + d_a * d_a * var_a + 2.0 * d_a * d_b * cov_ab;

    Ok(VisibilityEstimate { visibility: v, uncertainty: var_v.max(0.0).sqrt(), mean, modulation })
}
