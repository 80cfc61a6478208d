//! The overlap `v(T) = ∬ ψ̂(t₊+T, t₋) ψ̂*(t₊, t₋) dt₊dt₋` between the HH and
//! VV amplitudes displaced by the delay `T`, and delay sweeps of `|v|`.
//!
//! Off-grid delays use band-limited (Fourier-shift) interpolation along
//! `t₊`. On the sampled grid this interpolant is periodic with the time
//! window, so delays of half the window or more would overlap the amplitude
//! with its own periodic image; those return `v = 0`, which is the correct
//! value for an amplitude contained in the window.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::amplitude::{expect_domain, transpose};
use crate::error::{Error, Result};
use crate::filter::FilterSpec;
use crate::grid::{Axis, ComplexGrid2D, Curve1D, Domain};
use crate::par;

/// Relative distance from an integer cell count below which a delay is
/// treated as grid-aligned.
const ALIGNED_TOL: f64 = 1e-9;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn alternating(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn require_normalized(grid: &ComplexGrid2D) -> Result<()> {
    let power = grid.total_power();
    if (power - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("overlap needs a normalized amplitude; total power is {power}")));
    }
    Ok(())
}

/// Precomputed state for evaluating `v(T)` at many delays on one time grid.
pub struct OverlapKernel {
    plus: Axis,
    n_minus: usize,
    /// `ψ̂` transposed: one row of `t₊` samples per `t₋` column.
    columns: Vec<Complex64>,
    /// Per column, `(−1)^a/n · Σ_j ψ̂_j e^{+iν_a t_j}`: the `ν₊` spectrum with
    /// the forward-transform checkerboard already folded in.
    spectra: Vec<Complex64>,
    /// Per column, `(−1)^j ψ̂_j*`.
    conj_columns: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    cell_area: f64,
}

impl OverlapKernel {
    pub fn new(time: &ComplexGrid2D) -> Result<Self> {
        expect_domain(time, Domain::Time)?;
        require_normalized(time)?;
        let (np, nm) = time.shape();
        let plus = time.plus_axis();
        let columns = transpose(time.values(), np, nm);

        let mut planner = FftPlanner::<f64>::new();
        let inverse = planner.plan_fft_inverse(np);
        let fft = planner.plan_fft_forward(np);

        // With t_j = (j − n/2)dt, ν_a = (a − n/2)dν and n/2 even,
        // e^{±iν_a t_j} = (−1)^{a+j} e^{±2πi aj/n}.
        let scale = 1.0 / np as f64;
        let mut spectra = columns.clone();
        par::for_each_row_mut(&mut spectra, np, |_, col| {
            for (j, z) in col.iter_mut().enumerate() {
                *z *= alternating(j);
            }
            let mut scratch = vec![zero(); inverse.get_inplace_scratch_len()];
            inverse.process_with_scratch(col, &mut scratch);
            // The (−1)^a left on the spectrum is the input checkerboard the
            // forward transform in `eval_fractional` needs.
            for z in col.iter_mut() {
                *z *= scale;
            }
        });
        let mut conj_columns = columns.clone();
        par::for_each_row_mut(&mut conj_columns, np, |_, col| {
            for (j, z) in col.iter_mut().enumerate() {
                *z = z.conj() * alternating(j);
            }
        });

        Ok(Self { plus, n_minus: nm, columns, spectra, conj_columns, fft, cell_area: time.cell_area() })
    }

    /// Time window along `t₊`, fs.
    pub fn window(&self) -> f64 {
        self.plus.span()
    }

    /// `v(T)` for one delay `t` (fs).
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("delay must be finite, got {t}")));
        }
        if t.abs() >= 0.5 * self.window() {
            return Ok(zero());
        }
        let cells = t / self.plus.step;
        let nearest = cells.round();
        let v = if (cells - nearest).abs() <= ALIGNED_TOL {
            self.eval_shift(nearest as i64)
        } else {
            self.eval_fractional(t)
        };
        Ok(v * self.cell_area)
    }

    /// Grid-aligned delay: an exact cyclic shift by `m` cells.
    fn eval_shift(&self, m: i64) -> Complex64 {
        let n = self.plus.len;
        let m = m.rem_euclid(n as i64) as usize;
        let mut total = zero();
        for c in 0..self.n_minus {
            let col = &self.columns[c * n..(c + 1) * n];
            let mut acc = zero();
            for (j, x) in col.iter().enumerate() {
                acc += col[(j + m) % n] * x.conj();
            }
            total += acc;
        }
        total
    }

    fn eval_fractional(&self, t: f64) -> Complex64 {
        let n = self.plus.len;
        let dnu = self.plus.conjugate().step;
        let phase: Vec<Complex64> =
            (0..n).map(|a| Complex64::from_polar(1.0, -((a as f64 - (n / 2) as f64) * dnu * t))).collect();
        let mut buf = vec![zero(); n];
        let mut scratch = vec![zero(); self.fft.get_inplace_scratch_len()];
        let mut total = zero();
        for c in 0..self.n_minus {
            let spec = &self.spectra[c * n..(c + 1) * n];
            for ((b, s), p) in buf.iter_mut().zip(spec).zip(&phase) {
                *b = s * p;
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let conj = &self.conj_columns[c * n..(c + 1) * n];
            let acc: Complex64 = buf.iter().zip(conj).map(|(s, w)| s * w).sum();
            total += acc;
        }
        total
    }

    /// `v(T)` at every delay, evaluated in parallel over delays. Each value is
    /// computed by the same sequential arithmetic whatever the partitioning.
    pub fn sweep(&self, delays: &[f64]) -> Result<Vec<Complex64>> {
        par::map(delays, |&t| self.eval(t)).into_iter().collect()
    }
}

/// `v(T)` on a normalized time-domain grid.
pub fn overlap_v(time: &ComplexGrid2D, t: f64) -> Result<Complex64> {
    OverlapKernel::new(time)?.eval(t)
}

/// Frequency-domain route `v(T) = ∬ |ψ(ν₊,ν₋)|² e^{−iν₊T} dν₊dν₋`, the shift
/// theorem applied to the overlap integral. Uses the same half-window
/// cutoff as the time-domain route.
pub fn overlap_v_frequency(freq: &ComplexGrid2D, delays: &[f64]) -> Result<Vec<Complex64>> {
    expect_domain(freq, Domain::Frequency)?;
    require_normalized(freq)?;
    let plus = freq.plus_axis();
    let minus = freq.minus_axis();
    let marginal: Vec<f64> =
        par::map_rows(freq.values(), minus.len, |_, row| row.iter().map(|z| z.norm_sqr()).sum::<f64>());
    let window = plus.conjugate().span();
    let area = freq.cell_area();
    par::map(delays, |&t| {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("delay must be finite, got {t}")));
        }
        if t.abs() >= 0.5 * window {
            return Ok(zero());
        }
        let v: Complex64 =
            marginal.iter().enumerate().map(|(a, &p)| Complex64::from_polar(p, -plus.coord(a) * t)).sum();
        Ok(v * area)
    })
    .into_iter()
    .collect()
}

/// What produced a v-curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Unfiltered,
    Filtered { signal: FilterSpec, idler: FilterSpec },
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Unfiltered => "unfiltered".into(),
            Provenance::Filtered { signal, idler } => {
                format!("filtered:{}nm/{}nm|{}nm/{}nm", signal.center, signal.bandwidth, idler.center, idler.bandwidth)
            }
        }
    }
}

/// `|v(T)|` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct VCurve {
    /// `(T in fs, |v|)` pairs in sweep order.
    pub samples: Vec<(f64, f64)>,
    pub provenance: Provenance,
}

impl VCurve {
    pub fn delays(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    /// The curve as a [`Curve1D`] over delay in fs, for width measurement.
    pub fn to_curve(&self) -> Result<Curve1D> {
        Curve1D::new("T_fs", self.delays(), self.magnitudes())
    }

    /// CSV with columns `T_fs,v_mag,provenance`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T_fs,v_mag,provenance")?;
        let label = self.provenance.label();
        for (t, v) in &self.samples {
            writeln!(w, "{t},{v},{label}")?;
        }
        Ok(())
    }
}

/// Sweeps `|v(T)|` over `delays` on a normalized time-domain grid.
pub fn vcurve(time: &ComplexGrid2D, delays: &[f64], provenance: Provenance) -> Result<VCurve> {
    if delays.is_empty() {
        return Err(Error::InvalidInput("delay list is empty".into()));
    }
    let kernel = OverlapKernel::new(time)?;
    let values = kernel.sweep(delays)?;
    let mut samples = Vec::with_capacity(delays.len());
    for (&t, v) in delays.iter().zip(values) {
        let mag = v.norm();
        if mag > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!("|v({t})| = {mag} exceeds 1")));
        }
        samples.push((t, mag.min(1.0)));
    }
    Ok(VCurve { samples, provenance })
}

/// `n` evenly spaced delays from `lo` to `hi` inclusive; a single `lo` when
/// `n == 1` or `lo == hi`.
pub fn delay_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidInput(format!("invalid sweep: {n} steps from {lo} to {hi}")));
    }
    if n == 1 || lo == hi {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}
