//! Uniform sample grids for the two-photon amplitude and 1D curves.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::physics::{CrystalSpec, PumpSpec};

/// Which pair of ± variables a grid is sampled over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(ν₊, ν₋)` in rad/fs.
    Frequency,
    /// `(t₊, t₋)` in fs.
    Time,
}

impl Domain {
    pub fn axis_names(self) -> (&'static str, &'static str) {
        match self {
            Domain::Frequency => ("nu_plus_rad_per_fs", "nu_minus_rad_per_fs"),
            Domain::Time => ("t_plus_fs", "t_minus_fs"),
        }
    }
}

/// Uniform axis centered on zero: `x_k = (k − n/2)·step`.
///
/// Sample counts are powers of two, so the `k = n/2` sample sits exactly at
/// the origin and the FFT checkerboard trick in [`crate::amplitude`] is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub len: usize,
    pub step: f64,
}

impl Axis {
    pub fn centered(len: usize, span: f64) -> Self {
        Self { len, step: span / len as f64 }
    }

    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.len / 2) as f64) * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.coord(k)).collect()
    }

    pub fn span(&self) -> f64 {
        self.step * self.len as f64
    }

    pub fn first(&self) -> f64 {
        self.coord(0)
    }

    pub fn last(&self) -> f64 {
        self.coord(self.len - 1)
    }

    /// The Fourier-conjugate axis with the same sample count.
    pub fn conjugate(&self) -> Self {
        Self { len: self.len, step: 2.0 * PI / self.span() }
    }

    /// Fractional index of `x`; may fall outside `[0, len-1]`.
    pub fn fractional_index(&self, x: f64) -> f64 {
        x / self.step + (self.len / 2) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_plus: usize,
    pub n_minus: usize,
    /// Full width of the ν₊ axis, rad/fs.
    pub span_plus: f64,
    /// Full width of the ν₋ axis, rad/fs.
    pub span_minus: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_plus: 1024, n_minus: 1024, span_plus: 0.35, span_minus: 3.0 }
    }
}

/// Non-fatal notice that a grid under-resolves the amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionWarning(pub String);

impl std::fmt::Display for ResolutionWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl GridSpec {
    pub fn new(n_plus: usize, n_minus: usize, span_plus: f64, span_minus: f64) -> Result<Self> {
        let spec = Self { n_plus, n_minus, span_plus, span_minus };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_plus", self.n_plus), ("n_minus", self.n_minus)] {
            if n < 64 || !n.is_power_of_two() {
                return Err(Error::InvalidInput(format!("{name} must be a power of two >= 64, got {n}")));
            }
        }
        for (name, s) in [("span_plus", self.span_plus), ("span_minus", self.span_minus)] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Checks the spans against the pump bandwidth and the phase-matching
    /// lobe width.
    pub fn resolution_warnings(&self, pump: &PumpSpec, crystal: &CrystalSpec) -> Vec<ResolutionWarning> {
        let mut out = Vec::new();
        let need_plus = 8.0 * pump.sigma();
        if self.span_plus < need_plus {
            out.push(ResolutionWarning(format!(
                "span_plus {} rad/fs is below 8 sigma_p = {need_plus:.4} rad/fs",
                self.span_plus
            )));
        }
        if let Some(zero) = crystal.first_phase_matching_zero() {
            if self.span_minus < 2.0 * zero {
                out.push(ResolutionWarning(format!(
                    "span_minus {} rad/fs is below twice the first phase-matching zero ({:.4} rad/fs)",
                    self.span_minus,
                    2.0 * zero
                )));
            }
        }
        out
    }

    pub fn axes(&self) -> (Axis, Axis) {
        (Axis::centered(self.n_plus, self.span_plus), Axis::centered(self.n_minus, self.span_minus))
    }
}

/// Complex samples over `(plus, minus)`, row-major with one row per `plus`
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid2D {
    pub(crate) domain: Domain,
    pub(crate) plus: Axis,
    pub(crate) minus: Axis,
    pub(crate) values: Vec<Complex64>,
}

impl ComplexGrid2D {
    pub fn new(domain: Domain, plus: Axis, minus: Axis, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != plus.len * minus.len {
            return Err(Error::InvalidInput(format!(
                "{} values do not fill a {}x{} grid",
                values.len(),
                plus.len,
                minus.len
            )));
        }
        if !(plus.step > 0.0 && minus.step > 0.0) {
            return Err(Error::InvalidInput("axis steps must be positive".into()));
        }
        Ok(Self { domain, plus, minus, values })
    }

    /// Samples `f(plus, minus)` over the given axes.
    pub fn from_fn<F>(domain: Domain, plus: Axis, minus: Axis, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Sync + Send,
    {
        let mut values = vec![Complex64::new(0.0, 0.0); plus.len * minus.len];
        crate::par::for_each_row_mut(&mut values, minus.len, |j, row| {
            let p = plus.coord(j);
            for (k, v) in row.iter_mut().enumerate() {
                *v = f(p, minus.coord(k));
            }
        });
        Self { domain, plus, minus, values }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn plus_axis(&self) -> Axis {
        self.plus
    }

    pub fn minus_axis(&self) -> Axis {
        self.minus
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.plus.len, self.minus.len)
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.values[j * self.minus.len + k]
    }

    pub fn row(&self, j: usize) -> &[Complex64] {
        let n = self.minus.len;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn cell_area(&self) -> f64 {
        self.plus.step * self.minus.step
    }

    /// Discrete `∬|ψ|²`, summed row by row in fixed order.
    pub fn total_power(&self) -> f64 {
        let rows =
            crate::par::map_rows(&self.values, self.minus.len, |_, row| row.iter().map(|z| z.norm_sqr()).sum::<f64>());
        rows.iter().sum::<f64>() * self.cell_area()
    }

    /// Whether the discrete normalization integral equals 1 to 1e-9.
    pub fn is_normalized(&self) -> bool {
        (self.total_power() - 1.0).abs() <= 1e-9
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// Writes the grid as CSV: a header with axis names, then one line per
    /// sample `plus, minus, re, im` in shortest round-trip decimal form.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let (p, m) = self.domain.axis_names();
        writeln!(w, "{p},{m},re,im")?;
        for j in 0..self.plus.len {
            let x = self.plus.coord(j);
            for (k, z) in self.row(j).iter().enumerate() {
                writeln!(w, "{},{},{},{}", x, self.minus.coord(k), z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Sampled real curve on a uniform abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve1D {
    pub x_unit: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve1D {
    pub fn new(x_unit: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("curve has {} abscissae but {} ordinates", x.len(), y.len())));
        }
        if x.len() >= 2 {
            let step = x[1] - x[0];
            if !(step > 0.0) {
                return Err(Error::InvalidInput("curve abscissa must increase".into()));
            }
            if x.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step) {
                return Err(Error::InvalidInput("curve abscissa must be uniform".into()));
            }
        }
        Ok(Self { x_unit: x_unit.into(), x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, y_name: &str) -> std::io::Result<()> {
        writeln!(w, "{},{}", self.x_unit, y_name)?;
        for (x, y) in self.x.iter().zip(&self.y) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_centered_and_conjugate() {
        let a = Axis::centered(8, 4.0);
        assert_eq!(a.coord(4), 0.0);
        assert_eq!(a.first(), -2.0);
        assert_eq!(a.last(), 1.5);
        let t = a.conjugate();
        assert!((a.step * t.step * 8.0 - 2.0 * PI).abs() < 1e-12);
        assert_eq!(a.fractional_index(0.25), 4.5);
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::default().validate().is_ok());
        assert!(GridSpec::new(32, 64, 1.0, 1.0).is_err());
        assert!(GridSpec::new(96, 64, 1.0, 1.0).is_err());
        assert!(GridSpec::new(64, 64, 0.0, 1.0).is_err());
    }

    #[test]
    fn resolution_warnings_for_narrow_spans() {
        let pump = PumpSpec::new(266.0, 153.0).unwrap();
        let crystal = CrystalSpec::new(0.13, -570.0, 855.0).unwrap();
        assert!(GridSpec::default().resolution_warnings(&pump, &crystal).is_empty());
        let narrow = GridSpec::new(64, 64, 0.1, 0.5).unwrap();
        assert_eq!(narrow.resolution_warnings(&pump, &crystal).len(), 2);
    }

    #[test]
    fn grid_shape_checked() {
        let a = Axis::centered(4, 1.0);
        assert!(ComplexGrid2D::new(Domain::Time, a, a, vec![Complex64::new(0.0, 0.0); 15]).is_err());
    }

    #[test]
    fn csv_layout() {
        let a = Axis::centered(2, 2.0);
        let g = ComplexGrid2D::from_fn(Domain::Frequency, a, a, Complex64::new);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "nu_plus_rad_per_fs,nu_minus_rad_per_fs,re,im");
        assert_eq!(lines[1], "-1,-1,-1,-1");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn curve_rejects_nonuniform() {
        assert!(Curve1D::new("fs", vec![0.0, 1.0, 3.0], vec![0.0; 3]).is_err());
        assert!(Curve1D::new("fs", vec![0.0, 1.0], vec![0.0; 3]).is_err());
        assert!(Curve1D::new("fs", vec![0.0, 0.1, 0.2, 0.30000000000000004], vec![0.0; 4]).is_ok());
    }
}
