//! Scalar models of the pump pulse, the crystal phase matching, and the
//! timing chain through the two-crystal cascade.
//!
//! Units are fixed throughout the crate: time in fs, angular frequency in
//! rad/fs, crystal length in mm, wavelength in nm.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Largest relative delay the pump pre-compensator can impose, in fs.
pub const MAX_PRECOMPENSATOR_DELAY: f64 = 350.0;

/// Angular frequency (rad/fs) of light at `wavelength_nm`.
pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength_nm
}

/// Wavelength (nm) of light at angular frequency `omega` (rad/fs).
pub fn wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

/// Converts a wavelength interval around `center_nm` to an angular frequency
/// interval, to first order.
pub fn bandwidth_to_angular(bandwidth_nm: f64, center_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * bandwidth_nm / (center_nm * center_nm)
}

/// `sin(x)/x`, with a Taylor branch near the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    central_wavelength: f64,
    field_fwhm: f64,
}

impl PumpSpec {
    /// `central_wavelength` in nm, `field_fwhm` the FWHM duration of the
    /// field envelope in fs.
    pub fn new(central_wavelength: f64, field_fwhm: f64) -> Result<Self> {
        if !(central_wavelength.is_finite() && central_wavelength > 0.0) {
            return Err(Error::InvalidInput(format!("pump wavelength must be positive, got {central_wavelength}")));
        }
        if !(field_fwhm.is_finite() && field_fwhm > 0.0) {
            return Err(Error::InvalidInput(format!("pump field FWHM must be positive, got {field_fwhm}")));
        }
        Ok(Self { central_wavelength, field_fwhm })
    }

    pub fn central_wavelength(&self) -> f64 {
        self.central_wavelength
    }

    pub fn field_fwhm(&self) -> f64 {
        self.field_fwhm
    }

    /// Envelope width `σ_p = 4√ln2 / τ_FWHM` in rad/fs.
    pub fn sigma(&self) -> f64 {
        sigma_from_fwhm(self.field_fwhm)
    }

    /// Pump carrier angular frequency in rad/fs.
    pub fn central_angular_frequency(&self) -> f64 {
        angular_frequency(self.central_wavelength)
    }

    /// Angular frequency of the degenerate signal/idler pair.
    pub fn degenerate_angular_frequency(&self) -> f64 {
        0.5 * self.central_angular_frequency()
    }

    /// Wavelength of the degenerate signal/idler pair in nm.
    pub fn degenerate_wavelength(&self) -> f64 {
        2.0 * self.central_wavelength
    }
}

pub fn sigma_from_fwhm(field_fwhm: f64) -> f64 {
    4.0 * LN_2.sqrt() / field_fwhm
}

pub fn fwhm_from_sigma(sigma: f64) -> f64 {
    4.0 * LN_2.sqrt() / sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalSpec {
    /// mm
    pub length: f64,
    /// Group-velocity mismatch between the down-converted photons and the
    /// pump, fs/mm.
    pub gvm: f64,
    /// Group-velocity dispersion of the down-converted photons, fs²/mm.
    pub gvd: f64,
}

impl CrystalSpec {
    pub fn new(length: f64, gvm: f64, gvd: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!("crystal length must be positive, got {length}")));
        }
        if !gvm.is_finite() || !gvd.is_finite() {
            return Err(Error::InvalidInput("crystal dispersion parameters must be finite".into()));
        }
        Ok(Self { length, gvm, gvd })
    }

    /// Detuning `ν₋` of the first zero of the phase-matching function on the
    /// `ν₊ = 0` line, or `None` when the crystal has no dispersion.
    pub fn first_phase_matching_zero(&self) -> Option<f64> {
        let k = self.gvd * self.length;
        (k.abs() > 0.0).then(|| (8.0 * PI / k.abs()).sqrt())
    }
}

/// Gaussian spectral envelope of the pump field, `exp(-(ν₊/σ_p)²)`.
pub fn pump_envelope(nu_plus: f64, pump: &PumpSpec) -> f64 {
    let x = nu_plus / pump.sigma();
    (-x * x).exp()
}

/// Phase mismatch (rad/mm) for signal and idler detunings from degeneracy.
pub fn phase_mismatch(nu_s: f64, nu_i: f64, crystal: &CrystalSpec) -> f64 {
    let diff = nu_s - nu_i;
    crystal.gvm * (nu_s + nu_i) + 0.25 * crystal.gvd * diff * diff
}

/// Longitudinal phase-matching amplitude `sinc(ΔL/2)`.
pub fn phase_matching(nu_s: f64, nu_i: f64, crystal: &CrystalSpec) -> f64 {
    sinc(0.5 * phase_mismatch(nu_s, nu_i, crystal) * crystal.length)
}

/// Normalized field autocorrelation of the Gaussian pump envelope at delay
/// `delay` fs. Its FWHM is `√2` times the field FWHM.
pub fn pump_autocorrelation(delay: f64, pump: &PumpSpec) -> f64 {
    let s = pump.sigma();
    (-s * s * delay * delay / 8.0).exp()
}

/// FWHM of the pump field autocorrelation in fs.
pub fn autocorrelation_fwhm(pump: &PumpSpec) -> f64 {
    2.0_f64.sqrt() * pump.field_fwhm()
}

/// FWHM duration (fs) of a spectral filter's temporal response.
///
/// Uses `Δt·Δω = 8 ln 2` with `Δω` the first-order angular bandwidth.
pub fn filter_time_constant(bandwidth_nm: f64, center_nm: f64) -> Result<f64> {
    if !(bandwidth_nm.is_finite() && bandwidth_nm > 0.0) {
        return Err(Error::InvalidInput(format!("filter bandwidth must be positive, got {bandwidth_nm}")));
    }
    if !(center_nm.is_finite() && center_nm > 0.0) {
        return Err(Error::InvalidInput(format!("filter center must be positive, got {center_nm}")));
    }
    Ok(8.0 * LN_2 / bandwidth_to_angular(bandwidth_nm, center_nm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkoffSegment {
    pub label: String,
    /// Contribution (fs) to the lead of the HH component over the VV
    /// component; anything advancing the VV component enters negative.
    pub delay: f64,
}

impl WalkoffSegment {
    pub fn new(label: impl Into<String>, delay: f64) -> Self {
        Self { label: label.into(), delay }
    }
}

/// Ordered record of the delays accumulated between the HH and VV
/// space-time components on their way through the crystals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WalkoffLedger {
    pub segments: Vec<WalkoffSegment>,
}

impl WalkoffLedger {
    pub fn new(segments: Vec<WalkoffSegment>) -> Self {
        Self { segments }
    }

    /// Timing chain for 266 nm pumping of two 0.13 mm BBO crystals.
    pub fn two_crystal_bbo() -> Self {
        Self::new(vec![
            WalkoffSegment::new("crystal 1: H pump delayed behind V pump (birefringence)", 61.0),
            WalkoffSegment::new("crystal 1: H photons advance on V pump (group velocity)", 74.0),
            WalkoffSegment::new("crystal 2: H photons advance on H pump (dispersion)", 107.0),
            WalkoffSegment::new("crystal 2: V photons advance on H pump (group velocity)", -74.0),
        ])
    }

    pub fn push(&mut self, segment: WalkoffSegment) {
        self.segments.push(segment);
    }

    pub fn concat(mut self, other: WalkoffLedger) -> Self {
        self.segments.extend(other.segments);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Net delay `τ` (fs) between the HH and VV components.
pub fn walkoff_delay(ledger: &WalkoffLedger) -> Result<f64> {
    if ledger.is_empty() {
        return Err(Error::InvalidInput("walk-off ledger is empty".into()));
    }
    Ok(ledger.segments.iter().map(|s| s.delay).sum())
}

/// Birefringent pump delay line ahead of the crystals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecompensatorSpec {
    pub delay: f64,
}

impl PrecompensatorSpec {
    pub fn new(delay: f64) -> Result<Self> {
        if !delay.is_finite() {
            return Err(Error::InvalidInput("pre-compensator delay must be finite".into()));
        }
        Ok(Self { delay })
    }

    pub fn in_range(&self) -> bool {
        self.delay.abs() <= MAX_PRECOMPENSATOR_DELAY
    }

    fn check_range(&self) -> Result<()> {
        if self.in_range() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                quantity: "pre-compensator delay",
                value: self.delay,
                min: -MAX_PRECOMPENSATOR_DELAY,
                max: MAX_PRECOMPENSATOR_DELAY,
            })
        }
    }
}

/// Residual delay `T = τ − T_p` between the HH and VV amplitudes.
pub fn effective_delay(tau: f64, precomp: &PrecompensatorSpec) -> Result<f64> {
    precomp.check_range()?;
    Ok(tau - precomp.delay)
}
