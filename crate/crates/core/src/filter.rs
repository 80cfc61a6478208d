//! Gaussian interference filters in front of the detectors.
//!
//! A filter's nominal bandwidth is the FWHM of its intensity transmission
//! `|F|²`, converted to angular frequency to first order about its center.
//! The amplitude response is real and normalized to `∫|F(ν)|²dν = 1`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::amplitude::expect_domain;
use crate::error::{Error, Result};
use crate::grid::{ComplexGrid2D, Domain};
use crate::physics::{angular_frequency, bandwidth_to_angular, PumpSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    /// nm
    pub center: f64,
    /// Intensity FWHM, nm.
    pub bandwidth: f64,
}

impl FilterSpec {
    pub fn new(center: f64, bandwidth: f64) -> Result<Self> {
        if !(center.is_finite() && center > 0.0) {
            return Err(Error::InvalidInput(format!("filter center must be positive, got {center}")));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInput(format!("filter bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { center, bandwidth })
    }

    /// Intensity FWHM in rad/fs.
    pub fn angular_bandwidth(&self) -> f64 {
        bandwidth_to_angular(self.bandwidth, self.center)
    }

    /// `w` in `exp(−(ν−ν_c)²/w²)`; `|F|²` then has FWHM `w·√(2 ln 2)`.
    pub fn amplitude_width(&self) -> f64 {
        self.angular_bandwidth() / (2.0 * LN_2).sqrt()
    }

    /// Center detuning from the degenerate frequency of `pump`.
    pub fn center_detuning(&self, pump: &PumpSpec) -> f64 {
        angular_frequency(self.center) - pump.degenerate_angular_frequency()
    }

    fn response_at(&self, nu: f64, center: f64, width: f64) -> f64 {
        let norm = (2.0 / (PI * width * width)).powf(0.25);
        let u = (nu - center) / width;
        norm * (-u * u).exp()
    }
}

/// Amplitude response at detuning `nu` (rad/fs from the degenerate frequency).
pub fn filter_response(nu: f64, filter: &FilterSpec, pump: &PumpSpec) -> Complex64 {
    let v = filter.response_at(nu, filter.center_detuning(pump), filter.amplitude_width());
    Complex64::new(v, 0.0)
}

/// Multiplies a frequency-domain amplitude by `F_s(ν_s)·F_i(ν_i)`.
pub fn apply_filters(
    freq: &ComplexGrid2D,
    signal: &FilterSpec,
    idler: &FilterSpec,
    pump: &PumpSpec,
) -> Result<ComplexGrid2D> {
    apply_arm_filters(freq, Some(signal), Some(idler), pump)
}

/// As [`apply_filters`], with `None` leaving that arm unfiltered.
pub fn apply_arm_filters(
    freq: &ComplexGrid2D,
    signal: Option<&FilterSpec>,
    idler: Option<&FilterSpec>,
    pump: &PumpSpec,
) -> Result<ComplexGrid2D> {
    expect_domain(freq, Domain::Frequency)?;
    let cell = freq.plus_axis().step.max(freq.minus_axis().step);
    for f in signal.iter().chain(idler.iter()) {
        if f.angular_bandwidth() < 3.0 * cell {
            return Err(Error::Resolution(format!(
                "{} nm filter spans fewer than 3 grid cells ({:.3e} rad/fs per cell)",
                f.bandwidth, cell
            )));
        }
    }
    let gain = |f: Option<&FilterSpec>| {
        let params = f.map(|f| (*f, f.center_detuning(pump), f.amplitude_width()));
        move |nu: f64| params.map_or(1.0, |(f, c, w)| f.response_at(nu, c, w))
    };
    let (signal_gain, idler_gain) = (gain(signal), gain(idler));
    let plus = freq.plus_axis();
    let minus = freq.minus_axis();

    let mut out = freq.clone();
    crate::par::for_each_row_mut(&mut out.values, minus.len, |j, row| {
        let p = plus.coord(j);
        for (k, z) in row.iter_mut().enumerate() {
            let m = minus.coord(k);
            *z *= signal_gain(0.5 * (p + m)) * idler_gain(0.5 * (p - m));
        }
    });
    if !(out.total_power() > 0.0) {
        return Err(Error::Degenerate("filtered amplitude has no power".into()));
    }
    Ok(out)
}
