//! Joint two-photon amplitude on the `(ν₊, ν₋)` grid, its time-domain
//! transform, normalization, and marginal spectra.
//!
//! The forward transform uses the kernel `e^{−i(ν₊t₊ + ν₋t₋)}/2π` and the
//! inverse `e^{+i(ν₊t₊ + ν₋t₋)}/2π`; with cell areas included both are
//! unitary, so discrete Parseval holds to rounding. The global carrier
//! phase `e^{−iΩ_p t_s}` is not applied since nothing downstream depends on
//! absolute phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid2D, Curve1D, Domain, GridSpec, ResolutionWarning};
use crate::par;
use crate::physics::{angular_frequency, phase_matching, pump_envelope, wavelength, CrystalSpec, PumpSpec};

/// Whether resolution warnings are fatal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone)]
pub struct JointAmplitude {
    pub grid: ComplexGrid2D,
    pub warnings: Vec<ResolutionWarning>,
}

/// Samples `α(ν₊)·Θ(ν_s, ν_i)` with `ν_s = (ν₊+ν₋)/2`, `ν_i = (ν₊−ν₋)/2`.
/// The overall constant is left at 1; every observable renormalizes.
pub fn build_joint_amplitude(
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    spec: &GridSpec,
    strictness: Strictness,
) -> Result<JointAmplitude> {
    spec.validate()?;
    let warnings = spec.resolution_warnings(pump, crystal);
    if strictness == Strictness::Strict && !warnings.is_empty() {
        let joined: Vec<_> = warnings.iter().map(|w| w.0.as_str()).collect();
        return Err(Error::Resolution(joined.join("; ")));
    }
    let (plus, minus) = spec.axes();
    let grid = ComplexGrid2D::from_fn(Domain::Frequency, plus, minus, |p, m| {
        let nu_s = 0.5 * (p + m);
        let nu_i = 0.5 * (p - m);
        Complex64::new(pump_envelope(p, pump) * phase_matching(nu_s, nu_i, crystal), 0.0)
    });
    Ok(JointAmplitude { grid, warnings })
}

/// `ψ̂(t₊, t₋)` from `ψ(ν₊, ν₋)`.
pub fn to_time_domain(freq: &ComplexGrid2D) -> Result<ComplexGrid2D> {
    expect_domain(freq, Domain::Frequency)?;
    Ok(transform(freq, FftDirection::Forward, Domain::Time))
}

/// Inverse of [`to_time_domain`].
pub fn to_frequency_domain(time: &ComplexGrid2D) -> Result<ComplexGrid2D> {
    expect_domain(time, Domain::Time)?;
    Ok(transform(time, FftDirection::Inverse, Domain::Frequency))
}

pub(crate) fn expect_domain(grid: &ComplexGrid2D, expected: Domain) -> Result<()> {
    if grid.domain() == expected {
        Ok(())
    } else {
        Err(Error::Domain { expected, found: grid.domain() })
    }
}

/// `(−1)^k` for the centered-axis phase factor.
fn alternating(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn transform(grid: &ComplexGrid2D, direction: FftDirection, target: Domain) -> ComplexGrid2D {
    let (np, nm) = grid.shape();
    let plus_out = grid.plus.conjugate();
    let minus_out = grid.minus.conjugate();

    // With x_j = (j − n/2)dx and n/2 even, e^{∓i x_j y_a} = (−1)^{j+a} e^{∓2πi ja/n}.
    let mut data = grid.values.clone();
    par::for_each_row_mut(&mut data, nm, |j, row| {
        for (k, z) in row.iter_mut().enumerate() {
            *z *= alternating(j + k);
        }
    });

    let mut planner = FftPlanner::<f64>::new();
    let fft_minus = planner.plan_fft(nm, direction);
    let fft_plus = planner.plan_fft(np, direction);

    fft_rows(&mut data, nm, &*fft_minus);
    let mut t = transpose(&data, np, nm);
    fft_rows(&mut t, np, &*fft_plus);
    let mut data = transpose(&t, nm, np);

    let scale = grid.cell_area() / (2.0 * PI);
    par::for_each_row_mut(&mut data, nm, |a, row| {
        for (b, z) in row.iter_mut().enumerate() {
            *z *= scale * alternating(a + b);
        }
    });

    ComplexGrid2D { domain: target, plus: plus_out, minus: minus_out, values: data }
}

pub(crate) fn fft_rows(data: &mut [Complex64], row_len: usize, fft: &dyn rustfft::Fft<f64>) {
    par::for_each_row_mut(data, row_len, |_, row| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(row, &mut scratch);
    });
}

/// Transposes a `rows × cols` row-major buffer.
pub(crate) fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    par::for_each_row_mut(&mut out, rows, |c, out_row| {
        for (r, z) in out_row.iter_mut().enumerate() {
            *z = data[r * cols + c];
        }
    });
    out
}

/// Rescales the grid so the discrete `∬|ψ|²` equals 1.
pub fn normalize(grid: &ComplexGrid2D) -> Result<ComplexGrid2D> {
    let power = grid.total_power();
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::Degenerate(format!("cannot normalize a grid with total power {power}")));
    }
    Ok(grid.scaled(1.0 / power.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        }
    }
}

/// Linear interpolation of `|row|²` at fractional index `x`; zero outside.
///
/// Sample 0 of a centered even-length axis has no mirror partner, so the
/// support is taken as indices `[1, n−1]`, symmetric in `ν₋`. That keeps the
/// signal and idler marginals identical for amplitudes even in `ν₋`.
fn interp_intensity(row: &[Complex64], x: f64) -> f64 {
    if !(x >= 1.0) || x > (row.len() - 1) as f64 {
        return 0.0;
    }
    let k = x.floor() as usize;
    if k + 1 >= row.len() {
        return row[k].norm_sqr();
    }
    let f = x - k as f64;
    (1.0 - f) * row[k].norm_sqr() + f * row[k + 1].norm_sqr()
}

/// Single-arm spectrum, intensity (peak 1) against wavelength in nm.
///
/// The joint intensity is integrated over the unobserved arm along lines of
/// constant observed detuning, which cross every `ν₊` row once; within a
/// row `|ψ|²` is interpolated linearly in `ν₋`. The abscissa is a uniform
/// wavelength grid mapped exactly through `λ = 2πc/(Ω_p/2 + ν)`.
pub fn marginal_spectrum(freq: &ComplexGrid2D, arm: Arm, pump: &PumpSpec) -> Result<Curve1D> {
    expect_domain(freq, Domain::Frequency)?;
    let plus = freq.plus_axis();
    let minus = freq.minus_axis();
    let center = pump.degenerate_angular_frequency();

    // Observed detuning reaches ±span_minus/4 on the ν₊ = 0 line.
    let nu_max = 0.25 * minus.span();
    let nu_max = nu_max.min(0.9 * center);
    let lambda_lo = wavelength(center + nu_max);
    let lambda_hi = wavelength(center - nu_max);
    let n_out = minus.len / 2 + 1;
    let step = (lambda_hi - lambda_lo) / (n_out - 1) as f64;
    let lambdas: Vec<f64> = (0..n_out).map(|i| lambda_lo + step * i as f64).collect();

    let plus_coords = plus.coords();
    let mut intensity = par::map(&lambdas, |&lambda| {
        let nu = angular_frequency(lambda) - center;
        let mut acc = 0.0;
        for (j, &p) in plus_coords.iter().enumerate() {
            let m = match arm {
                Arm::Signal => 2.0 * nu - p,
                Arm::Idler => p - 2.0 * nu,
            };
            acc += interp_intensity(freq.row(j), minus.fractional_index(m));
        }
        acc * plus.step
    });

    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Degenerate("spectrum has no power".into()));
    }
    intensity.iter_mut().for_each(|y| *y /= peak);
    Curve1D::new("wavelength_nm", lambdas, intensity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fwhm;
    use crate::grid::Axis;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn pump() -> PumpSpec {
        PumpSpec::new(266.0, 153.0).unwrap()
    }

    fn crystal() -> CrystalSpec {
        CrystalSpec::new(0.13, -570.0, 855.0).unwrap()
    }

    fn small() -> GridSpec {
        GridSpec::new(128, 128, 0.35, 3.0).unwrap()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn origin_value_and_sinc_zero() {
        let spec = GridSpec::new(64, 256, 0.35, 3.0).unwrap();
        let g = build_joint_amplitude(&pump(), &crystal(), &spec, Strictness::Lenient).unwrap().grid;
        assert_eq!(g.get(32, 128), Complex64::new(1.0, 0.0));
        assert!(g.values().iter().all(|z| z.im == 0.0));

        let zero = crystal().first_phase_matching_zero().unwrap();
        assert!((zero - 0.475).abs() < 1e-3, "{zero}");
        let nu_s = 0.5 * zero;
        let v = pump_envelope(0.0, &pump()) * phase_matching(nu_s, -nu_s, &crystal());
        assert!(v.abs() < 1e-14);
    }

    #[test]
    fn strict_mode_escalates_warnings() {
        let spec = GridSpec::new(64, 64, 0.05, 3.0).unwrap();
        let lenient = build_joint_amplitude(&pump(), &crystal(), &spec, Strictness::Lenient).unwrap();
        assert_eq!(lenient.warnings.len(), 1);
        assert!(matches!(
            build_joint_amplitude(&pump(), &crystal(), &spec, Strictness::Strict),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn amplitude_even_in_nu_minus() {
        let g = build_joint_amplitude(&pump(), &crystal(), &small(), Strictness::Lenient).unwrap().grid;
        let (np, nm) = g.shape();
        for j in 0..np {
            for k in 1..nm {
                assert_eq!(g.get(j, k), g.get(j, nm - k));
            }
        }
        let t = to_time_domain(&g).unwrap();
        for j in 0..np {
            for k in 1..nm {
                assert!((t.get(j, k).norm() - t.get(j, nm - k).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let g = build_joint_amplitude(&pump(), &crystal(), &small(), Strictness::Lenient).unwrap().grid;
        let t = to_time_domain(&g).unwrap();
        assert_relative_eq!(t.total_power(), g.total_power(), max_relative = 1e-9);
        let back = to_frequency_domain(&t).unwrap();
        let scale = g.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(back.values(), g.values()) / scale < 1e-9);
        assert_eq!(back.plus_axis().step, g.plus_axis().step);
    }

    #[test]
    fn wrong_domain_rejected() {
        let g = build_joint_amplitude(&pump(), &crystal(), &small(), Strictness::Lenient).unwrap().grid;
        let t = to_time_domain(&g).unwrap();
        assert!(matches!(to_time_domain(&t), Err(Error::Domain { .. })));
        assert!(matches!(to_frequency_domain(&g), Err(Error::Domain { .. })));
        assert!(matches!(marginal_spectrum(&t, Arm::Signal, &pump()), Err(Error::Domain { .. })));
    }

    #[test]
    fn gaussian_transform_pair_widths() {
        let (sp, sm) = (0.02, 0.3);
        let spec = GridSpec::new(256, 256, 0.4, 6.0).unwrap();
        let (pa, ma) = spec.axes();
        let g = ComplexGrid2D::from_fn(Domain::Frequency, pa, ma, |p, m| {
            Complex64::new((-(p / sp).powi(2) - (m / sm).powi(2)).exp(), 0.0)
        });
        let t = to_time_domain(&g).unwrap();
        let (np, nm) = t.shape();
        let cut = |along_plus: bool| {
            let (axis, ys): (Axis, Vec<f64>) = if along_plus {
                (t.plus_axis(), (0..np).map(|j| t.get(j, nm / 2).norm()).collect())
            } else {
                (t.minus_axis(), (0..nm).map(|k| t.get(np / 2, k).norm()).collect())
            };
            fwhm(&Curve1D::new("fs", axis.coords(), ys).unwrap()).unwrap()
        };
        let f_plus = 2.0 * LN_2.sqrt() * sp;
        let f_minus = 2.0 * LN_2.sqrt() * sm;
        assert_relative_eq!(cut(true) * f_plus, 8.0 * LN_2, max_relative = 1e-2);
        assert_relative_eq!(cut(false) * f_minus, 8.0 * LN_2, max_relative = 1e-2);
        // the time profile is real and positive for a real even input
        assert!(t.values().iter().all(|z| z.im.abs() < 1e-12 * t.get(np / 2, nm / 2).re));
    }

    #[test]
    fn impulse_transforms_to_flat_modulus() {
        let a = Axis::centered(64, 1.0);
        let mut values = vec![Complex64::new(0.0, 0.0); 64 * 64];
        values[7 * 64 + 40] = Complex64::new(1.0, 0.0);
        let g = ComplexGrid2D::new(Domain::Frequency, a, a, values).unwrap();
        let t = to_time_domain(&g).unwrap();
        let m0 = t.values()[0].norm();
        assert!(m0 > 0.0);
        assert!(t.values().iter().all(|z| (z.norm() - m0).abs() < 1e-15));
    }

    #[test]
    fn time_width_along_plus_tracks_pump() {
        let g = build_joint_amplitude(
            &pump(),
            &crystal(),
            &GridSpec::new(256, 256, 0.35, 3.0).unwrap(),
            Strictness::Lenient,
        )
        .unwrap()
        .grid;
        let t = to_time_domain(&g).unwrap();
        let (np, nm) = t.shape();
        let profile: Vec<f64> = (0..np).map(|j| t.get(j, nm / 2).norm()).collect();
        let w = fwhm(&Curve1D::new("fs", t.plus_axis().coords(), profile).unwrap()).unwrap();
        assert!((w - 153.0).abs() / 153.0 < 0.1, "t+ width {w}");
    }

    #[test]
    fn normalize_properties() {
        let g = build_joint_amplitude(&pump(), &crystal(), &small(), Strictness::Lenient).unwrap().grid;
        let n = normalize(&g).unwrap();
        assert!(n.is_normalized());
        let nn = normalize(&n).unwrap();
        assert!(max_abs_diff(n.values(), nn.values()) < 1e-12);
        let n7 = normalize(&g.scaled(7.0)).unwrap();
        assert!(max_abs_diff(n.values(), n7.values()) < 1e-12);

        let a = Axis::centered(64, 64.0);
        let ones = ComplexGrid2D::from_fn(Domain::Time, a, a, |_, _| Complex64::new(1.0, 0.0));
        let on = normalize(&ones).unwrap();
        assert!(on.values().iter().all(|z| (z.re - 1.0 / 64.0).abs() < 1e-15));

        let zeros = ones.scaled(0.0);
        assert!(matches!(normalize(&zeros), Err(Error::Degenerate(_))));
    }

    #[test]
    fn marginals_agree_between_arms() {
        let g = build_joint_amplitude(
            &pump(),
            &crystal(),
            &GridSpec::new(256, 512, 0.35, 3.0).unwrap(),
            Strictness::Lenient,
        )
        .unwrap()
        .grid;
        let s = marginal_spectrum(&g, Arm::Signal, &pump()).unwrap();
        let i = marginal_spectrum(&g, Arm::Idler, &pump()).unwrap();
        assert_eq!(s.x, i.x);
        for (a, b) in s.y.iter().zip(&i.y) {
            assert!((a - b).abs() < 1e-12, "{} {a} {b}", (a - b).abs());
        }
        let peak = s.y.iter().cloned().fold(0.0, f64::max);
        assert_eq!(peak, 1.0);
    }
}
