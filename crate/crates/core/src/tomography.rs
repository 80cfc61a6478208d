//! Sixteen-setting coincidence tomography: count simulation with Poisson
//! noise and maximum-likelihood reconstruction of the polarization state.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::entanglement::{interference_pattern, ket_d, ket_h, ket_l, ket_v, Branch, Ket2, TwoQubitState};
use crate::error::{Error, Result};

/// Single-photon analyzer state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analyzer {
    H,
    V,
    D,
    L,
}

impl Analyzer {
    pub const ALL: [Analyzer; 4] = [Analyzer::H, Analyzer::V, Analyzer::D, Analyzer::L];

    pub fn ket(self) -> Ket2 {
        match self {
            Analyzer::H => ket_h(),
            Analyzer::V => ket_v(),
            Analyzer::D => ket_d(),
            Analyzer::L => ket_l(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Analyzer::H => 'H',
            Analyzer::V => 'V',
            Analyzer::D => 'D',
            Analyzer::L => 'L',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'H' => Some(Analyzer::H),
            'V' => Some(Analyzer::V),
            'D' => Some(Analyzer::D),
            'L' => Some(Analyzer::L),
            _ => None,
        }
    }
}

/// Joint analyzer setting for the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjectorPair {
    pub arm1: Analyzer,
    pub arm2: Analyzer,
}

impl ProjectorPair {
    pub fn new(arm1: Analyzer, arm2: Analyzer) -> Self {
        Self { arm1, arm2 }
    }

    /// Two-letter label, e.g. `"HD"`.
    pub fn label(&self) -> String {
        format!("{}{}", self.arm1.symbol(), self.arm2.symbol())
    }

    pub fn parse(label: &str) -> Result<Self> {
        let mut chars = label.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => match (Analyzer::from_symbol(a), Analyzer::from_symbol(b)) {
                (Some(a), Some(b)) => Ok(Self::new(a, b)),
                _ => Err(Error::InvalidInput(format!("unknown analyzer pair {label:?}"))),
            },
            _ => Err(Error::InvalidInput(format!("analyzer pair {label:?} must be two letters"))),
        }
    }
}

/// `{H,V,D,L} × {H,V,D,L}`, arm 1 major: `HH, HV, HD, HL, VH, …, LL`.
pub fn projection_set() -> Vec<ProjectorPair> {
    Analyzer::ALL.iter().flat_map(|&a| Analyzer::ALL.iter().map(move |&b| ProjectorPair::new(a, b))).collect()
}

/// `tr(ρ·Π₁⊗Π₂)`.
pub fn born_probability(state: &TwoQubitState, pair: ProjectorPair) -> f64 {
    state.project(&pair.arm1.ket(), &pair.arm2.ket())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountEntry {
    pub pair: ProjectorPair,
    /// Coincidences in the setting. Integer-valued when simulated with
    /// noise; exact expectation values in noiseless mode.
    pub counts: f64,
}

/// Coincidence counts for the sixteen settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub entries: Vec<CountEntry>,
    /// Integration time per setting, s.
    pub duration: f64,
    /// Accidental coincidences, counts/s.
    pub background_rate: f64,
    pub seed: u64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != 16 {
            return Err(Error::InvalidInput(format!("a count record needs 16 settings, got {}", self.entries.len())));
        }
        for pair in projection_set() {
            if self.entries.iter().filter(|e| e.pair == pair).count() != 1 {
                return Err(Error::InvalidInput(format!("setting {} must appear exactly once", pair.label())));
            }
        }
        if let Some(bad) = self.entries.iter().find(|e| !(e.counts.is_finite() && e.counts >= 0.0)) {
            return Err(Error::InvalidInput(format!("setting {} has invalid count {}", bad.pair.label(), bad.counts)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidInput(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.background_rate.is_finite() && self.background_rate >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "background rate must be non-negative, got {}",
                self.background_rate
            )));
        }
        Ok(())
    }

    pub fn counts(&self, pair: ProjectorPair) -> Option<f64> {
        self.entries.iter().find(|e| e.pair == pair).map(|e| e.counts)
    }

    /// Expected accidentals per setting.
    pub fn background_per_setting(&self) -> f64 {
        self.background_rate * self.duration
    }
}

fn check_rates(mean_total: f64, background_rate: f64, duration: f64) -> Result<()> {
    if !(mean_total.is_finite() && mean_total > 0.0) {
        return Err(Error::InvalidInput(format!("mean_total must be positive, got {mean_total}")));
    }
    if !(background_rate.is_finite() && background_rate >= 0.0) {
        return Err(Error::InvalidInput(format!("background rate must be non-negative, got {background_rate}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidInput(format!("duration must be positive, got {duration}")));
    }
    Ok(())
}

/// Counts equal to their expectation `mean_total·p + background_rate·duration`.
pub fn expected_counts(
    state: &TwoQubitState,
    mean_total: f64,
    background_rate: f64,
    duration: f64,
) -> Result<CountRecord> {
    check_rates(mean_total, background_rate, duration)?;
    let bg = background_rate * duration;
    let entries = projection_set()
        .into_iter()
        .map(|pair| CountEntry { pair, counts: (mean_total * born_probability(state, pair)).max(0.0) + bg })
        .collect();
    Ok(CountRecord { entries, duration, background_rate, seed: 0 })
}

/// Poisson counts around [`expected_counts`], drawn in setting order from a
/// ChaCha8 stream seeded by `seed`.
pub fn simulate_counts(
    state: &TwoQubitState,
    mean_total: f64,
    background_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<CountRecord> {
    let mut record = expected_counts(state, mean_total, background_rate, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in &mut record.entries {
        e.counts = if e.counts > 0.0 {
            let dist = Poisson::new(e.counts)
                .map_err(|err| Error::InvalidInput(format!("Poisson mean {}: {err}", e.counts)))?;
            dist.sample(&mut rng)
        } else {
            0.0
        };
    }
    record.seed = seed;
    Ok(record)
}

/// One half-wave-plate angle of a simulated interference scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    /// rad
    pub theta: f64,
    /// `¼(1 ± v sin 4θ)`
    pub probability: f64,
    /// Expected coincidences including background.
    pub expected: f64,
    /// Recorded coincidences: a Poisson draw, or `expected` when noiseless.
    pub counts: f64,
}

/// Coincidence scan over `thetas` for one branch, scaled so the pattern
/// maximum `(1+v)/4` corresponds to `peak_counts`, plus a flat `background`
/// per angle. With `seed`, counts are Poisson draws from a ChaCha8 stream
/// taken in angle order.
pub fn simulate_pattern(
    v: f64,
    thetas: &[f64],
    branch: Branch,
    peak_counts: f64,
    background: f64,
    seed: Option<u64>,
) -> Result<Vec<PatternSample>> {
    if !(peak_counts.is_finite() && peak_counts > 0.0) {
        return Err(Error::InvalidInput(format!("peak counts must be positive, got {peak_counts}")));
    }
    if !(background.is_finite() && background >= 0.0) {
        return Err(Error::InvalidInput(format!("background must be non-negative, got {background}")));
    }
    let scale = 4.0 * peak_counts / (1.0 + v);
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    thetas
        .iter()
        .map(|&theta| {
            let probability = interference_pattern(v, theta, branch)?;
            let expected = scale * probability + background;
            let counts = match rng.as_mut() {
                Some(rng) if expected > 0.0 => Poisson::new(expected)
                    .map_err(|e| Error::InvalidInput(format!("Poisson mean {expected}: {e}")))?
                    .sample(rng),
                Some(_) => 0.0,
                None => expected,
            };
            Ok(PatternSample { theta, probability, expected, counts })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLESettings {
    pub max_iterations: usize,
    /// Relative parameter-step size at which the ascent stops.
    pub tolerance: f64,
    /// Additional starts from fixed perturbations of the initial estimate.
    pub restarts: usize,
}

impl Default for MLESettings {
    fn default() -> Self {
        Self { max_iterations: 2000, tolerance: 1e-10, restarts: 3 }
    }
}

impl MLESettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: TwoQubitState,
    /// `Σ n ln μ − μ` at the returned state (constant `ln n!` terms omitted).
    pub log_likelihood: f64,
    /// Ascent iterations of the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step of the winning start.
    pub trace: Vec<f64>,
}

const N_PARAMS: usize = 16;

/// Index pairs `(i, j)` with `i > j` for the complex off-diagonal entries.
const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// Lower-triangular `G` from 4 real diagonal and 6 complex off-diagonal
/// parameters.
fn unpack(theta: &[f64]) -> Matrix4<Complex64> {
    let mut g = Matrix4::zeros();
    for i in 0..4 {
        g[(i, i)] = Complex64::new(theta[i], 0.0);
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        g[(i, j)] = Complex64::new(theta[4 + 2 * k], theta[5 + 2 * k]);
    }
    g
}

fn pack(g: &Matrix4<Complex64>) -> Vec<f64> {
    let mut theta = vec![0.0; N_PARAMS];
    for i in 0..4 {
        theta[i] = g[(i, i)].re;
    }
    for (k, &(i, j)) in LOWER.iter().enumerate() {
        theta[4 + 2 * k] = g[(i, j)].re;
        theta[5 + 2 * k] = g[(i, j)].im;
    }
    theta
}

struct Likelihood {
    kets: Vec<[Complex64; 4]>,
    counts: Vec<f64>,
    background: f64,
}

impl Likelihood {
    fn new(record: &CountRecord) -> Self {
        let (kets, counts) = record
            .entries
            .iter()
            .map(|e| (crate::entanglement::product(&e.pair.arm1.ket(), &e.pair.arm2.ket()), e.counts))
            .unzip();
        Self { kets, counts, background: record.background_per_setting() }
    }

    /// Log-likelihood and its gradient in `theta`.
    fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let g = unpack(theta);
        let mut value = 0.0;
        let mut grad = vec![0.0; N_PARAMS];
        for (psi, &n) in self.kets.iter().zip(&self.counts) {
            let mut w = [Complex64::new(0.0, 0.0); 4];
            for (i, wi) in w.iter_mut().enumerate() {
                for (j, p) in psi.iter().enumerate().take(i + 1) {
                    *wi += g[(i, j)] * p;
                }
            }
            let mu = w.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.background;
            if n > 0.0 {
                if !(mu > 0.0) {
                    return (f64::NEG_INFINITY, grad);
                }
                value += n * mu.ln();
            }
            value -= mu;
            let weight = if n > 0.0 { n / mu - 1.0 } else { -1.0 };
            // ∂μ/∂Re G_ij = 2 Re(w̄_i ψ_j), ∂μ/∂Im G_ij = −2 Im(w̄_i ψ_j)
            for i in 0..4 {
                grad[i] += weight * 2.0 * (w[i].conj() * psi[i]).re;
            }
            for (k, &(i, j)) in LOWER.iter().enumerate() {
                let z = w[i].conj() * psi[j];
                grad[4 + 2 * k] += weight * 2.0 * z.re;
                grad[5 + 2 * k] -= weight * 2.0 * z.im;
            }
        }
        (value, grad)
    }
}

/// Pauli matrices `I, X, Y, Z` in the H/V basis.
fn paulis() -> [Matrix2<Complex64>; 4] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
    ]
}

fn stokes_vector(ket: &Ket2) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, s) in out.iter_mut().zip(paulis().iter()) {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += ket[i].conj() * s[(i, j)] * ket[j];
            }
        }
        *o = acc.re;
    }
    out
}

/// Linear-inversion estimate (not necessarily positive) and the estimated
/// number of pairs per complete basis.
fn linear_inversion(record: &CountRecord) -> Result<(Matrix4<Complex64>, f64)> {
    let bg = record.background_per_setting();
    let mut design = DMatrix::<f64>::zeros(16, 16);
    let mut rhs = DVector::<f64>::zeros(16);
    for (row, e) in record.entries.iter().enumerate() {
        let s1 = stokes_vector(&e.pair.arm1.ket());
        let s2 = stokes_vector(&e.pair.arm2.ket());
        for a in 0..4 {
            for b in 0..4 {
                design[(row, 4 * a + b)] = 0.25 * s1[a] * s2[b];
            }
        }
        rhs[row] = e.counts - bg;
    }
    let r = design
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("analyzer settings are not tomographically complete".into()))?;
    let total = r[0];
    if !(total > 0.0) {
        return Err(Error::Degenerate("counts carry no signal above background".into()));
    }
    let p = paulis();
    let mut rho = Matrix4::zeros();
    for a in 0..4 {
        for b in 0..4 {
            rho += p[a].kronecker(&p[b]) * Complex64::new(0.25 * r[4 * a + b] / total, 0.0);
        }
    }
    Ok((rho, total))
}

/// Positive-definite state near `rho`: eigenvalues floored at `floor`, then
/// trace-normalized.
fn make_physical(rho: &Matrix4<Complex64>, floor: f64) -> Matrix4<Complex64> {
    let herm = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(floor)).collect();
    let sum: f64 = vals.iter().sum();
    let mut out = Matrix4::zeros();
    for (k, &lam) in vals.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * Complex64::new(lam / sum, 0.0);
    }
    out
}

/// Lower-triangular `L` with `L†L = rho` (rho positive definite).
fn lower_factor(rho: &Matrix4<Complex64>) -> Result<Matrix4<Complex64>> {
    // Cholesky of the index-reversed matrix gives an upper factor U = JCJ
    // with UU† = ρ; L = U† is lower triangular and L†L = ρ.
    let mut rev = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            rev[(i, j)] = rho[(3 - i, 3 - j)];
        }
    }
    let chol = rev.cholesky().ok_or_else(|| Error::Degenerate("initial estimate is not positive definite".into()))?;
    let c = chol.l();
    let mut upper = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            upper[(i, j)] = c[(3 - i, 3 - j)];
        }
    }
    Ok(upper.adjoint())
}

struct Ascent {
    theta: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS ascent with a backtracking line search that only accepts steps
/// which increase the likelihood.
fn bfgs(objective: &Likelihood, start: Vec<f64>, settings: &MLESettings) -> Ascent {
    let n = N_PARAMS;
    let mut theta = start;
    let (mut value, mut grad) = objective.eval(&theta);
    let mut trace = vec![value];
    // Inverse Hessian approximation of −L, row-major.
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    let scale0 = 1.0 / (1.0 + grad.iter().map(|g| g.abs()).fold(0.0, f64::max));
    reset(&mut h, scale0);

    for iter in 1..=settings.max_iterations {
        // Ascent direction d = H·∇L.
        let mut dir: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &grad)).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope > 0.0) {
            reset(&mut h, scale0);
            dir = grad.iter().map(|g| g * scale0).collect();
            slope = dot(&grad, &dir);
        }
        if !(slope > 0.0) {
            return Ascent { theta, value, iterations: iter, converged: true, trace };
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (tv, tg) = objective.eval(&trial);
            if tv.is_finite() && tv >= value + 1e-4 * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tv, tg)) = accepted else {
            // No ascent along the best direction: stationary to rounding.
            return Ascent { theta, value, iterations: iter, converged: true, trace };
        };

        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        // y is the change in the gradient of −L.
        let y: Vec<f64> = grad.iter().zip(&tg).map(|(a, b)| a - b).collect();
        let size = theta.iter().map(|t| t.abs()).fold(1.0, f64::max);
        let small = s.iter().all(|d| d.abs() <= settings.tolerance * size);
        let gain = tv - value;

        theta = trial;
        value = tv;
        grad = tg;
        trace.push(value);
        if small || gain <= 1e-15 * value.abs().max(1.0) {
            return Ascent { theta, value, iterations: iter, converged: true, trace };
        }

        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
    }
    Ascent { theta, value, iterations: settings.max_iterations, converged: false, trace }
}

/// Maximum-likelihood state for a count record, with `ρ = G†G/tr(G†G)` and
/// `G` lower triangular, so every iterate is a valid density matrix.
///
/// The first start is the linear-inversion estimate with eigenvalues floored
/// at 1%; further starts add fixed pseudo-random perturbations to it. The
/// start reaching the highest likelihood wins.
pub fn mle_reconstruct(record: &CountRecord, settings: &MLESettings) -> Result<MleResult> {
    record.validate()?;
    settings.validate()?;
    let objective = Likelihood::new(record);
    let (linear, total) = linear_inversion(record)?;
    let start_rho = make_physical(&linear, 0.01);
    let g0 = lower_factor(&start_rho)? * Complex64::new(total.sqrt(), 0.0);
    let base = pack(&g0);

    let jitter = Normal::new(0.0, 0.1).expect("valid normal distribution");
    let mut best: Option<Ascent> = None;
    for r in 0..=settings.restarts {
        let start: Vec<f64> = if r == 0 {
            base.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(r as u64);
            let scale = total.sqrt();
            base.iter().map(|t| t + scale * jitter.sample(&mut rng)).collect()
        };
        let run = bfgs(&objective, start, settings);
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");

    let g = unpack(&best.theta);
    let rho = g.adjoint() * g;
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::FitFailure {
            reason: "likelihood maximum has zero intensity".into(),
            iterations: best.iterations,
        });
    }
    let state = TwoQubitState::new(rho / Complex64::new(tr, 0.0))?;
    Ok(MleResult {
        state,
        log_likelihood: best.value,
        iterations: best.iterations,
        converged: best.converged,
        trace: best.trace,
    })
}

/// `√(s₁² + s₂² + s₃²)`.
pub fn stokes_magnitude(s1: f64, s2: f64, s3: f64) -> f64 {
    (s1 * s1 + s2 * s2 + s3 * s3).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{concurrence, mixed_model_rho, phi_plus};
    use proptest::prelude::*;

    fn bell() -> TwoQubitState {
        TwoQubitState::from_pure(&phi_plus()).unwrap()
    }

    fn pair(s: &str) -> ProjectorPair {
        ProjectorPair::parse(s).unwrap()
    }

    #[test]
    fn projection_set_layout() {
        let set = projection_set();
        assert_eq!(set.len(), 16);
        assert_eq!(set[0].label(), "HH");
        assert_eq!(set[1].label(), "HV");
        assert_eq!(set[4].label(), "VH");
        assert_eq!(set[15].label(), "LL");
        let labels: std::collections::HashSet<_> = set.iter().map(|p| p.label()).collect();
        assert_eq!(labels.len(), 16);
        assert!(ProjectorPair::parse("HX").is_err());
        assert!(ProjectorPair::parse("HHH").is_err());
    }

    #[test]
    fn born_probabilities_of_bell_state() {
        let b = bell();
        assert!((born_probability(&b, pair("HH")) - 0.5).abs() < 1e-15);
        assert!(born_probability(&b, pair("HV")).abs() < 1e-15);
        assert!((born_probability(&b, pair("DD")) - 0.5).abs() < 1e-15);
        // ⟨LL|Φ⁺⟩ = (1 + i²)/(2√2) = 0
        assert!(born_probability(&b, pair("LL")).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = mixed_model_rho(0.8).unwrap();
        let a = simulate_counts(&s, 4500.0, 2.0, 10.0, 42).unwrap();
        let b = simulate_counts(&s, 4500.0, 2.0, 10.0, 42).unwrap();
        let c = simulate_counts(&s, 4500.0, 2.0, 10.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.seed, 42);
        a.validate().unwrap();
        for e in &a.entries {
            assert_eq!(e.counts.fract(), 0.0);
        }
    }

    #[test]
    fn zero_mean_settings_have_no_counts() {
        let r = simulate_counts(&bell(), 4500.0, 0.0, 10.0, 1).unwrap();
        assert_eq!(r.counts(pair("HV")), Some(0.0));
        assert_eq!(r.counts(pair("VH")), Some(0.0));
    }

    #[test]
    fn poisson_mean_matches() {
        let b = bell();
        let mean = (0..1000u64)
            .map(|seed| simulate_counts(&b, 4500.0, 0.0, 10.0, seed).unwrap().counts(pair("HH")).unwrap())
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 2250.0).abs() / 2250.0 < 0.03, "{mean}");
    }

    #[test]
    fn record_validation() {
        let mut r = expected_counts(&bell(), 4500.0, 0.0, 10.0).unwrap();
        r.validate().unwrap();
        r.entries[3].counts = -1.0;
        assert!(r.validate().is_err());
        r.entries[3].counts = 1.0;
        r.entries[3].pair = pair("HH");
        assert!(r.validate().is_err());
        r.entries.pop();
        assert!(r.validate().is_err());
        assert!(simulate_counts(&bell(), 0.0, 0.0, 10.0, 1).is_err());
    }

    #[test]
    fn lower_factor_reproduces_state() {
        let rho = make_physical(mixed_model_rho(0.7).unwrap().matrix(), 0.01);
        let l = lower_factor(&rho).unwrap();
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_eq!(l[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
        let back = l.adjoint() * l;
        assert!((back - rho).iter().all(|z| z.norm() < 1e-12));
        let theta = pack(&l);
        assert_eq!(unpack(&theta), l);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let record = simulate_counts(&mixed_model_rho(0.6).unwrap(), 4500.0, 5.0, 10.0, 3).unwrap();
        let objective = Likelihood::new(&record);
        let theta: Vec<f64> = (0..N_PARAMS).map(|k| 10.0 + (k as f64 * 1.7).sin() * 8.0).collect();
        let (_, grad) = objective.eval(&theta);
        for k in 0..N_PARAMS {
            let h = 1e-5;
            let mut up = theta.clone();
            up[k] += h;
            let mut down = theta.clone();
            down[k] -= h;
            let fd = (objective.eval(&up).0 - objective.eval(&down).0) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-5 * fd.abs().max(1.0), "{k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn linear_inversion_is_exact_on_expected_counts() {
        let s = mixed_model_rho(0.5).unwrap();
        let record = expected_counts(&s, 4500.0, 3.0, 10.0).unwrap();
        let (rho, total) = linear_inversion(&record).unwrap();
        assert!((total - 4500.0).abs() < 1e-9);
        assert!((rho - s.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn noiseless_bell_state_reconstructed() {
        let record = expected_counts(&bell(), 4500.0, 0.0, 10.0).unwrap();
        let result = mle_reconstruct(&record, &MLESettings::default()).unwrap();
        assert!(result.state.fidelity_phi_plus() >= 0.999, "{}", result.state.fidelity_phi_plus());
    }

    #[test]
    fn noiseless_mixed_state_concurrence() {
        let record = expected_counts(&mixed_model_rho(0.95).unwrap(), 4500.0, 0.0, 10.0).unwrap();
        let result = mle_reconstruct(&record, &MLESettings::default()).unwrap();
        let c = concurrence(&result.state).unwrap();
        assert!((c - 0.95).abs() <= 0.01, "{c}");
    }

    #[test]
    fn likelihood_never_decreases() {
        let record = simulate_counts(&mixed_model_rho(0.75).unwrap(), 4500.0, 20.0, 10.0, 9).unwrap();
        let result = mle_reconstruct(&record, &MLESettings::default()).unwrap();
        assert!(result.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*result.trace.last().unwrap(), result.log_likelihood);
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let record = simulate_counts(&mixed_model_rho(0.5).unwrap(), 4500.0, 1.0, 10.0, 5).unwrap();
        let a = mle_reconstruct(&record, &MLESettings::default()).unwrap();
        let b = mle_reconstruct(&record, &MLESettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stokes_examples() {
        assert_eq!(stokes_magnitude(1.0, 0.0, 0.0), 1.0);
        assert!((stokes_magnitude(0.6, 0.0, 0.8) - 1.0).abs() < 1e-15);
        assert_eq!(stokes_magnitude(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn pattern_scan_scaling_and_noise() {
        let thetas: Vec<f64> = (0..72).map(|i| (i as f64 * 2.5).to_radians()).collect();
        let exact = simulate_pattern(0.92, &thetas, Branch::Plus, 450.0, 10.0, None).unwrap();
        let peak = exact.iter().map(|s| s.expected).fold(0.0, f64::max);
        assert!((peak - 460.0).abs() < 1e-9, "{peak}");
        assert!(exact.iter().all(|s| s.counts == s.expected));
        let a = simulate_pattern(0.92, &thetas, Branch::Minus, 450.0, 0.0, Some(3)).unwrap();
        let b = simulate_pattern(0.92, &thetas, Branch::Minus, 450.0, 0.0, Some(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.counts.fract() == 0.0));
        assert!(simulate_pattern(0.5, &thetas, Branch::Plus, 0.0, 0.0, None).is_err());
        assert!(simulate_pattern(1.5, &thetas, Branch::Plus, 10.0, 0.0, None).is_err());
    }

    proptest! {
        #[test]
        fn hv_basis_probabilities_sum_to_one(v in 0.0f64..=1.0) {
            let s = mixed_model_rho(v).unwrap();
            let total: f64 = ["HH", "HV", "VH", "VV"].iter().map(|p| born_probability(&s, pair(p))).sum();
            prop_assert!((total - 1.0).abs() < 1e-15);
        }

        #[test]
        fn reconstruction_is_always_physical(seed in 0u64..1000, v in 0.0f64..=1.0, bg in 0.0f64..50.0) {
            let record = simulate_counts(&mixed_model_rho(v).unwrap(), 500.0, bg, 1.0, seed).unwrap();
            let settings = MLESettings { max_iterations: 300, restarts: 0, ..MLESettings::default() };
            if let Ok(result) = mle_reconstruct(&record, &settings) {
                let eig = result.state.eigenvalues();
                prop_assert!(eig[0] >= -1e-10);
                prop_assert!((result.state.matrix().trace().re - 1.0).abs() < 1e-12);
            }
        }
    }
}
