//! The five workflows: v-curve sweep, marginal spectra, tomography,
//! interference pattern, and the walk-off timing chain.

use std::fmt::Write as _;

use biphoton_core::{
    apply_arm_filters, build_joint_amplitude, concurrence, delay_grid, effective_delay, effective_rho, fit,
    gaussian_fit, marginal_spectrum, mle_reconstruct, normalize, physics, simulate_counts, simulate_pattern,
    to_time_domain, vcurve, visibility_from_pattern, walkoff_delay, Arm, BackgroundHandling, Branch, ComplexGrid2D,
    CountEntry, CountRecord, Curve1D, Error, MleResult, OverlapKernel, ProjectorPair, Provenance, Strictness,
    TwoQubitState, VCurve,
};
use num_complex::Complex64;
use serde::Deserialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::{Emitter, Json};

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub strict: bool,
}

impl RunContext {
    fn strictness(&self) -> Strictness {
        if self.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        }
    }

    fn emitter(&self) -> Result<Emitter, CliError> {
        Emitter::new(std::path::Path::new(&self.config.output.directory))
    }

    fn finish(&self, emitter: Emitter, command: &str) -> Result<Vec<(String, String)>, CliError> {
        emitter.finish(command, &self.config.to_toml())
    }
}

/// Normalized frequency-domain amplitudes, without and (if configured) with
/// the detection filters.
pub struct Amplitudes {
    pub unfiltered: ComplexGrid2D,
    pub filtered: Option<(ComplexGrid2D, Provenance)>,
}

impl Amplitudes {
    /// The amplitude the experiment actually detects.
    pub fn detected(&self) -> &ComplexGrid2D {
        self.filtered.as_ref().map_or(&self.unfiltered, |(g, _)| g)
    }
}

pub fn build_amplitudes(ctx: &RunContext) -> Result<Amplitudes, CliError> {
    let cfg = &ctx.config;
    let pump = cfg.pump_spec()?;
    let joint = build_joint_amplitude(&pump, &cfg.crystal_spec()?, &cfg.grid_spec()?, ctx.strictness())?;
    for w in &joint.warnings {
        eprintln!("warning: {w}");
    }
    let unfiltered = normalize(&joint.grid)?;
    let (arm1, arm2) = cfg.filter_specs()?;
    let filtered = if arm1.is_some() || arm2.is_some() {
        let g = normalize(&apply_arm_filters(&unfiltered, arm1.as_ref(), arm2.as_ref(), &pump)?)?;
        // Provenance records an absent arm as an open filter label.
        let open = |f: Option<biphoton_core::FilterSpec>| {
            f.unwrap_or(biphoton_core::FilterSpec { center: pump.degenerate_wavelength(), bandwidth: f64::INFINITY })
        };
        Some((g, Provenance::Filtered { signal: open(arm1), idler: open(arm2) }))
    } else {
        None
    };
    Ok(Amplitudes { unfiltered, filtered })
}

/// Residual delay `T = τ − T_p` from the configured ledger and compensator.
pub fn configured_delay(cfg: &RunConfig) -> Result<(f64, f64), CliError> {
    let tau = walkoff_delay(&cfg.walkoff_ledger()).map_err(|e| CliError::Config(format!("walkoff.segments: {e}")))?;
    let t = effective_delay(tau, &cfg.precompensator_spec()?)?;
    Ok((tau, t))
}

/// Where the prepared overlap came from.
#[derive(Debug, Clone, PartialEq)]
pub enum OverlapSource {
    Explicit,
    Computed { delay: f64 },
}

/// `|v|` to prepare: the explicit value if given, else `|v(T)|` of the
/// detected amplitude at the configured residual delay.
pub fn prepared_overlap(ctx: &RunContext, explicit: Option<f64>) -> Result<(f64, OverlapSource), CliError> {
    if let Some(v) = explicit {
        return Ok((v, OverlapSource::Explicit));
    }
    let (_, delay) = configured_delay(&ctx.config)?;
    let amps = build_amplitudes(ctx)?;
    let time = to_time_domain(amps.detected())?;
    let v = OverlapKernel::new(&time)?.eval(delay)?.norm().min(1.0);
    Ok((v, OverlapSource::Computed { delay }))
}

fn source_json(source: &OverlapSource) -> Vec<(&'static str, Json)> {
    match source {
        OverlapSource::Explicit => vec![("v_source", Json::str("config"))],
        OverlapSource::Computed { delay } => {
            vec![("v_source", Json::str("overlap at residual delay")), ("delay_T_fs", Json::Num(*delay))]
        }
    }
}

fn fit_json(curve: &VCurve) -> Json {
    let samples = curve.samples.len();
    let mut entries = vec![("provenance", Json::str(curve.provenance.label())), ("samples", Json::Int(samples as i64))];
    if samples < 5 {
        entries.push(("fit", Json::Null));
        entries.push(("fit_error", Json::str("fewer than 5 delays; no fit attempted")));
        return Json::obj(entries);
    }
    let data = match curve.to_curve() {
        Ok(c) => c,
        Err(e) => {
            entries.push(("fit", Json::Null));
            entries.push(("fit_error", Json::str(e.to_string())));
            return Json::obj(entries);
        }
    };
    match gaussian_fit(&data) {
        Ok(f) => entries.push((
            "fit",
            Json::obj([
                ("fwhm_fs", Json::Num(f.fwhm)),
                ("center_fs", Json::Num(f.center)),
                ("amplitude", Json::Num(f.amplitude)),
                ("rms_residual", Json::Num(f.residual)),
                ("iterations", Json::Int(f.iterations as i64)),
            ]),
        )),
        Err(e) => {
            entries.push(("fit", Json::Null));
            entries.push(("fit_error", Json::str(e.to_string())));
        }
    }
    entries.push(("half_max_width_fs", fit::fwhm(&data).map_or(Json::Null, Json::Num)));
    Json::obj(entries)
}

/// Computes the v-curves without writing anything.
pub fn compute_vcurves(ctx: &RunContext) -> Result<Vec<VCurve>, CliError> {
    let s = &ctx.config.sweep;
    let delays = delay_grid(s.t_min, s.t_max, s.steps)?;
    let amps = build_amplitudes(ctx)?;
    let mut curves = vec![vcurve(&to_time_domain(&amps.unfiltered)?, &delays, Provenance::Unfiltered)?];
    if let Some((g, provenance)) = &amps.filtered {
        curves.push(vcurve(&to_time_domain(g)?, &delays, *provenance)?);
    }
    Ok(curves)
}

pub fn cmd_vcurve(ctx: &RunContext) -> Result<Vec<(String, String)>, CliError> {
    let curves = compute_vcurves(ctx)?;
    let mut out = ctx.emitter()?;
    if ctx.config.output.wants(Format::Csv) {
        let mut csv = Vec::new();
        for (i, c) in curves.iter().enumerate() {
            let mut part = Vec::new();
            c.write_csv(&mut part)?;
            // One header for the concatenated curves.
            let body =
                if i == 0 { &part[..] } else { &part[part.iter().position(|&b| b == b'\n').map_or(0, |p| p + 1)..] };
            csv.extend_from_slice(body);
        }
        out.write("vcurve.csv", &csv)?;
    }
    if ctx.config.output.wants(Format::Json) {
        let pump = ctx.config.pump_spec()?;
        let summary = Json::obj([
            ("pump_autocorrelation_fwhm_fs", Json::Num(physics::autocorrelation_fwhm(&pump))),
            ("curves", Json::Arr(curves.iter().map(fit_json).collect())),
        ]);
        out.write_json("vcurve_fit.json", &summary)?;
    }
    ctx.finish(out, "vcurve")
}

/// Linear interpolation of a curve at `x`; `None` outside its range.
fn interpolate(curve: &Curve1D, x: f64) -> Option<f64> {
    let i = curve.x.partition_point(|&v| v <= x);
    if i == 0 || i >= curve.x.len() {
        return (curve.x.first() == Some(&x)).then(|| curve.y[0]);
    }
    let (x0, x1) = (curve.x[i - 1], curve.x[i]);
    let f = (x - x0) / (x1 - x0);
    Some(curve.y[i - 1] * (1.0 - f) + curve.y[i] * f)
}

/// Width, peak, and asymmetry measures of a marginal spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub fwhm_nm: Option<f64>,
    pub half_max_nm: Option<(f64, f64)>,
    pub argmax_nm: f64,
    /// Intensity at `center ± 25 nm`.
    pub wing_intensity: (Option<f64>, Option<f64>),
}

impl SpectrumSummary {
    pub fn of(curve: &Curve1D, center: f64) -> Self {
        let crossings = fit::half_max_crossings(curve).ok();
        let argmax =
            curve.y.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &y)| if y > a.1 { (i, y) } else { a }).0;
        Self {
            fwhm_nm: crossings.map(|(l, r)| r - l),
            half_max_nm: crossings,
            argmax_nm: curve.x[argmax],
            wing_intensity: (interpolate(curve, center - 25.0), interpolate(curve, center + 25.0)),
        }
    }

    fn json(&self, name: &str) -> Json {
        let opt = |x: Option<f64>| x.map_or(Json::Null, Json::Num);
        Json::obj([
            ("column", Json::str(name)),
            ("fwhm_nm", opt(self.fwhm_nm)),
            ("half_max_low_nm", opt(self.half_max_nm.map(|c| c.0))),
            ("half_max_high_nm", opt(self.half_max_nm.map(|c| c.1))),
            ("half_max_midpoint_nm", opt(self.half_max_nm.map(|c| 0.5 * (c.0 + c.1)))),
            ("argmax_nm", Json::Num(self.argmax_nm)),
            ("intensity_center_minus_25nm", opt(self.wing_intensity.0)),
            ("intensity_center_plus_25nm", opt(self.wing_intensity.1)),
        ])
    }
}

/// Named spectra on a shared wavelength grid.
pub fn compute_spectra(ctx: &RunContext) -> Result<Vec<(String, Curve1D)>, CliError> {
    let pump = ctx.config.pump_spec()?;
    let amps = build_amplitudes(ctx)?;
    let mut out = Vec::new();
    for (suffix, grid) in [("", Some(&amps.unfiltered)), ("_filtered", amps.filtered.as_ref().map(|f| &f.0))] {
        let Some(grid) = grid else { continue };
        for arm in [Arm::Signal, Arm::Idler] {
            out.push((format!("{}{suffix}", arm.label()), marginal_spectrum(grid, arm, &pump)?));
        }
    }
    Ok(out)
}

pub fn cmd_spectrum(ctx: &RunContext) -> Result<Vec<(String, String)>, CliError> {
    let spectra = compute_spectra(ctx)?;
    let center = ctx.config.pump_spec()?.degenerate_wavelength();
    let mut out = ctx.emitter()?;
    if ctx.config.output.wants(Format::Csv) {
        let mut csv = String::from("wavelength_nm");
        for (name, _) in &spectra {
            let _ = write!(csv, ",{name}");
        }
        csv.push('\n');
        let x = &spectra[0].1.x;
        for (i, lambda) in x.iter().enumerate() {
            let _ = write!(csv, "{lambda}");
            for (_, c) in &spectra {
                let _ = write!(csv, ",{}", c.y[i]);
            }
            csv.push('\n');
        }
        out.write("spectrum.csv", csv.as_bytes())?;
    }
    if ctx.config.output.wants(Format::Json) {
        let summary = Json::obj([
            ("degenerate_wavelength_nm", Json::Num(center)),
            ("spectra", Json::Arr(spectra.iter().map(|(n, c)| SpectrumSummary::of(c, center).json(n)).collect())),
        ]);
        out.write_json("spectrum_summary.json", &summary)?;
    }
    ctx.finish(out, "spectrum")
}

fn counts_value(x: f64) -> Json {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        Json::Int(x as i64)
    } else {
        Json::Num(x)
    }
}

pub fn record_json(record: &CountRecord) -> Json {
    Json::obj([
        ("duration_s", Json::Num(record.duration)),
        ("background_rate_cps", Json::Num(record.background_rate)),
        ("seed", Json::Int(record.seed as i64)),
        (
            "counts",
            Json::Arr(
                record
                    .entries
                    .iter()
                    .map(|e| Json::obj([("pair", Json::str(e.pair.label())), ("counts", counts_value(e.counts))]))
                    .collect(),
            ),
        ),
    ])
}

#[derive(Deserialize)]
struct CountsFile {
    duration_s: f64,
    background_rate_cps: f64,
    #[serde(default)]
    seed: u64,
    counts: Vec<CountsFileEntry>,
}

#[derive(Deserialize)]
struct CountsFileEntry {
    pair: String,
    counts: f64,
}

pub fn read_counts(path: &str) -> Result<CountRecord, CliError> {
    let text = std::fs::read_to_string(path)?;
    let file: CountsFile =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("tomography.counts_file: {path}: {e}")))?;
    let entries = file
        .counts
        .iter()
        .map(|e| Ok(CountEntry { pair: ProjectorPair::parse(&e.pair)?, counts: e.counts }))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(|e| CliError::Config(format!("tomography.counts_file: {e}")))?;
    let record =
        CountRecord { entries, duration: file.duration_s, background_rate: file.background_rate_cps, seed: file.seed };
    record.validate().map_err(|e| CliError::Config(format!("tomography.counts_file: {e}")))?;
    Ok(record)
}

fn rho_json(state: &TwoQubitState) -> Json {
    let m = state.matrix();
    Json::Arr((0..4).map(|i| Json::Arr((0..4).map(|j| Json::nums([m[(i, j)].re, m[(i, j)].im])).collect())).collect())
}

/// Visibility of `P(θ)` predicted by a state: contrast of the Born
/// probabilities for `|R⟩⊗|θ⟩` over a fine half-wave-plate scan.
pub fn predicted_visibility(state: &TwoQubitState) -> f64 {
    let r = Branch::Plus.analyzer();
    let ps: Vec<f64> = (0..720)
        .map(|k| state.project(&r, &biphoton_core::entanglement::ket_theta((k as f64 * 0.25).to_radians())))
        .collect();
    let max = ps.iter().cloned().fold(f64::MIN, f64::max);
    let min = ps.iter().cloned().fold(f64::MAX, f64::min);
    (max - min) / (max + min)
}

/// One tomography run: the record used and its reconstruction.
pub struct TomographyRun {
    pub record: CountRecord,
    pub result: MleResult,
    pub concurrence: f64,
}

pub struct TomographyOutcome {
    pub v: f64,
    pub source: OverlapSource,
    pub prepared: TwoQubitState,
    pub runs: Vec<TomographyRun>,
}

pub fn compute_tomography(ctx: &RunContext) -> Result<TomographyOutcome, CliError> {
    let t = &ctx.config.tomography;
    let (v, source) = prepared_overlap(ctx, t.v)?;
    let prepared = effective_rho(Complex64::new(v, 0.0), t.phi)?;
    let settings = ctx.config.mle_settings();

    let records: Vec<CountRecord> = match &t.counts_file {
        Some(path) => vec![read_counts(path)?],
        None if t.noiseless => {
            vec![biphoton_core::expected_counts(&prepared, t.mean_total, t.background_rate, t.duration)?]
        }
        None => (0..t.runs as u64)
            .map(|k| simulate_counts(&prepared, t.mean_total, t.background_rate, t.duration, t.seed.wrapping_add(k)))
            .collect::<Result<_, _>>()?,
    };
    let runs = biphoton_core::par::map(&records, |record| {
        let result = mle_reconstruct(record, &settings)?;
        let c = concurrence(&result.state)?;
        Ok(TomographyRun { record: record.clone(), result, concurrence: c })
    })
    .into_iter()
    .collect::<Result<Vec<_>, Error>>()?;
    Ok(TomographyOutcome { v, source, prepared, runs })
}

pub fn cmd_tomo(ctx: &RunContext) -> Result<Vec<(String, String)>, CliError> {
    let o = compute_tomography(ctx)?;
    let first = &o.runs[0];
    let mut out = ctx.emitter()?;
    if ctx.config.output.wants(Format::Json) {
        out.write_json("counts.json", &record_json(&first.record))?;
        let rho = Json::obj([
            ("basis", Json::Arr(["HH", "HV", "VH", "VV"].iter().map(|b| Json::str(*b)).collect())),
            ("layout", Json::str("rows and columns in basis order; entries are [re, im]; first letter is arm 1")),
            ("matrix", rho_json(&first.result.state)),
            ("concurrence", Json::Num(first.concurrence)),
            ("log_likelihood", Json::Num(first.result.log_likelihood)),
            ("converged", Json::Bool(first.result.converged)),
            ("iterations", Json::Int(first.result.iterations as i64)),
        ]);
        out.write_json("rho.json", &rho)?;

        let cs: Vec<f64> = o.runs.iter().map(|r| r.concurrence).collect();
        let n = cs.len() as f64;
        let mean = cs.iter().sum::<f64>() / n;
        let std =
            if cs.len() > 1 { (cs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let mut entries = vec![("v_prepared", Json::Num(o.v))];
        entries.extend(source_json(&o.source));
        entries.extend([
            ("concurrence_prepared", Json::Num(concurrence(&o.prepared)?)),
            ("concurrence", Json::Num(first.concurrence)),
            ("fidelity_phi_plus", Json::Num(first.result.state.fidelity_phi_plus())),
            ("predicted_visibility", Json::Num(predicted_visibility(&first.result.state))),
            ("runs", Json::Int(o.runs.len() as i64)),
            ("concurrence_mean", Json::Num(mean)),
            ("concurrence_std", Json::Num(std)),
            ("all_converged", Json::Bool(o.runs.iter().all(|r| r.result.converged))),
            ("per_run_concurrence", Json::nums(cs)),
        ]);
        out.write_json("metrics.json", &Json::obj(entries))?;
    }
    ctx.finish(out, "tomo")
}

/// Angles of the pattern scan: `steps` values over [0°, 180°), in rad.
pub fn pattern_angles(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| (180.0 * k as f64 / steps as f64).to_radians()).collect()
}

pub struct PatternOutcome {
    pub v: f64,
    pub source: OverlapSource,
    pub branches: Vec<(Branch, Vec<biphoton_core::PatternSample>, biphoton_core::VisibilityEstimate)>,
}

pub fn compute_pattern(ctx: &RunContext) -> Result<PatternOutcome, CliError> {
    let p = &ctx.config.pattern;
    let (v, source) = prepared_overlap(ctx, p.v)?;
    let thetas = pattern_angles(p.steps);
    let background = ctx.config.background_handling();
    let mut branches = Vec::new();
    for (k, branch) in [Branch::Plus, Branch::Minus].into_iter().enumerate() {
        let seed = p.poisson.then(|| p.seed.wrapping_add(k as u64));
        let samples = simulate_pattern(v, &thetas, branch, p.peak_counts, p.background, seed)?;
        let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.theta, s.counts)).collect();
        let est = visibility_from_pattern(&points, background)?;
        branches.push((branch, samples, est));
    }
    Ok(PatternOutcome { v, source, branches })
}

pub fn cmd_pattern(ctx: &RunContext) -> Result<Vec<(String, String)>, CliError> {
    let o = compute_pattern(ctx)?;
    let mut out = ctx.emitter()?;
    if ctx.config.output.wants(Format::Csv) {
        let mut csv = String::from("theta_deg,branch,probability,expected_counts,counts\n");
        for (branch, samples, _) in &o.branches {
            for s in samples {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    s.theta.to_degrees(),
                    branch.label(),
                    s.probability,
                    s.expected,
                    s.counts
                );
            }
        }
        out.write("pattern.csv", csv.as_bytes())?;
    }
    if ctx.config.output.wants(Format::Json) {
        let mode = match ctx.config.background_handling() {
            BackgroundHandling::Ignore => "ignore",
            BackgroundHandling::Subtract(_) => "subtract",
        };
        let mut entries = vec![("v_prepared", Json::Num(o.v))];
        entries.extend(source_json(&o.source));
        entries.extend([
            ("poisson", Json::Bool(ctx.config.pattern.poisson)),
            ("background_mode", Json::str(mode)),
            (
                "branches",
                Json::Arr(
                    o.branches
                        .iter()
                        .map(|(b, _, e)| {
                            Json::obj([
                                ("branch", Json::str(b.label())),
                                ("visibility", Json::Num(e.visibility)),
                                ("uncertainty", Json::Num(e.uncertainty)),
                                ("mean_counts", Json::Num(e.mean)),
                            ])
                        })
                        .collect(),
                ),
            ),
        ]);
        out.write_json("visibility.json", &Json::obj(entries))?;
    }
    ctx.finish(out, "pattern")
}

pub fn cmd_timing(ctx: &RunContext) -> Result<Vec<(String, String)>, CliError> {
    let cfg = &ctx.config;
    let (tau, t) = configured_delay(cfg)?;
    let mut out = ctx.emitter()?;
    if cfg.output.wants(Format::Json) {
        let segments = cfg
            .walkoff_ledger()
            .segments
            .iter()
            .map(|s| Json::obj([("label", Json::str(&s.label)), ("delay_fs", Json::Num(s.delay))]))
            .collect();
        let timing = Json::obj([
            ("sign_convention", Json::str("positive delays advance HH relative to VV")),
            ("segments", Json::Arr(segments)),
            ("tau_fs", Json::Num(tau)),
            ("precompensator_tp_fs", Json::Num(cfg.precompensator.tp)),
            ("compensator_range_fs", Json::Num(physics::MAX_PRECOMPENSATOR_DELAY)),
            ("residual_delay_T_fs", Json::Num(t)),
        ]);
        out.write_json("timing.json", &timing)?;
    }
    ctx.finish(out, "timing")
}

#[cfg(test)]
mod tests {
    use super::*;
    use biphoton_core::{expected_counts, mixed_model_rho};

    fn small_context(dir: &std::path::Path) -> RunContext {
        let mut config = RunConfig::default();
        config.grid.n_plus = 128;
        config.grid.n_minus = 256;
        config.sweep.steps = 41;
        config.tomography.runs = 2;
        config.output.directory = dir.to_string_lossy().into_owned();
        RunContext { config, strict: false }
    }

    #[test]
    fn counts_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let record = simulate_counts(&mixed_model_rho(0.9).unwrap(), 4500.0, 9.0, 10.0, 7).unwrap();
        let path = dir.path().join("counts.json");
        std::fs::write(&path, record_json(&record).render()).unwrap();
        assert_eq!(read_counts(path.to_str().unwrap()).unwrap(), record);

        let exact = expected_counts(&mixed_model_rho(0.9).unwrap(), 4500.0, 0.0, 10.0).unwrap();
        std::fs::write(&path, record_json(&exact).render()).unwrap();
        assert_eq!(read_counts(path.to_str().unwrap()).unwrap(), exact);
    }

    #[test]
    fn bad_counts_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.json");
        std::fs::write(
            &path,
            r#"{"duration_s": 1.0, "background_rate_cps": 0.0, "counts": [{"pair": "HX", "counts": 1}]}"#,
        )
        .unwrap();
        assert!(matches!(read_counts(path.to_str().unwrap()), Err(CliError::Config(_))));
    }

    #[test]
    fn predicted_visibility_of_model_states() {
        for v in [0.0, 0.5, 0.92, 1.0] {
            let s = mixed_model_rho(v).unwrap();
            assert!((predicted_visibility(&s) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn every_command_writes_its_files() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_context(dir.path());
        let expect = [
            (
                cmd_vcurve as fn(&RunContext) -> Result<Vec<(String, String)>, CliError>,
                vec!["vcurve.csv", "vcurve_fit.json"],
            ),
            (cmd_spectrum, vec!["spectrum.csv", "spectrum_summary.json"]),
            (cmd_tomo, vec!["counts.json", "rho.json", "metrics.json"]),
            (cmd_pattern, vec!["pattern.csv", "visibility.json"]),
            (cmd_timing, vec!["timing.json"]),
        ];
        for (cmd, names) in expect {
            let files = cmd(&ctx).unwrap();
            let got: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
            assert_eq!(got, names);
            for n in names {
                assert!(dir.path().join(n).exists());
            }
            assert!(dir.path().join("manifest.json").exists());
        }
    }

    #[test]
    fn single_delay_sweep_has_no_fit() {
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = small_context(dir.path());
        ctx.config.sweep.t_min = 50.0;
        ctx.config.sweep.t_max = 50.0;
        cmd_vcurve(&ctx).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("vcurve.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        let fit: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("vcurve_fit.json")).unwrap()).unwrap();
        assert!(fit["curves"][0]["fit"].is_null());
    }

    #[test]
    fn timing_defaults_and_empty_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let mut ctx = small_context(dir.path());
        assert_eq!(configured_delay(&ctx.config).unwrap(), (168.0, 0.0));
        ctx.config.walkoff.segments.clear();
        assert!(matches!(cmd_timing(&ctx), Err(CliError::Config(_))));
    }

    #[test]
    fn full_compensation_prepares_a_bell_state() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = small_context(dir.path());
        let (v, source) = prepared_overlap(&ctx, None).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(source, OverlapSource::Computed { delay: 0.0 });
    }
}
