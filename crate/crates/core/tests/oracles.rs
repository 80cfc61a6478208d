//! Independent oracles for the transform, overlap, and filter paths.

use biphoton_core::{
    apply_filters, build_joint_amplitude, normalize, overlap_v_frequency, to_time_domain, ComplexGrid2D, CrystalSpec,
    Domain, FilterSpec, GridSpec, OverlapKernel, PumpSpec, Strictness,
};
use num_complex::Complex64;

fn pump() -> PumpSpec {
    PumpSpec::new(266.0, 153.0).unwrap()
}

fn crystal() -> CrystalSpec {
    CrystalSpec::new(0.13, -570.0, 855.0).unwrap()
}

fn amplitude(n_plus: usize, n_minus: usize) -> ComplexGrid2D {
    let spec = GridSpec::new(n_plus, n_minus, 0.35, 3.0).unwrap();
    let g = build_joint_amplitude(&pump(), &crystal(), &spec, Strictness::Lenient).unwrap().grid;
    normalize(&g).unwrap()
}

/// Filtering in frequency equals the cyclic convolution, in time, of the
/// unfiltered amplitude with the filters' joint time response:
/// `ψ̂_F(t) = (dt₊dt₋/2π) Σ_s ψ̂(s) Φ̂(t − s)`.
#[test]
fn frequency_product_equals_time_convolution() {
    let freq = amplitude(128, 128);
    let p = pump();
    let fs = FilterSpec::new(532.0, 40.0).unwrap();
    let fi = FilterSpec::new(528.0, 30.0).unwrap();

    let filtered_time = to_time_domain(&apply_filters(&freq, &fs, &fi, &p).unwrap()).unwrap();

    let ones =
        ComplexGrid2D::from_fn(Domain::Frequency, freq.plus_axis(), freq.minus_axis(), |_, _| Complex64::new(1.0, 0.0));
    let response = to_time_domain(&apply_filters(&ones, &fs, &fi, &p).unwrap()).unwrap();
    let psi = to_time_domain(&freq).unwrap();

    let (np, nm) = psi.shape();
    let scale = psi.cell_area() / (2.0 * std::f64::consts::PI);
    let mut max_err: f64 = 0.0;
    let mut max_val: f64 = 0.0;
    for a in 0..np {
        for b in 0..nm {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..np {
                let dj = (a + np + np / 2 - j) % np;
                let psi_row = psi.row(j);
                let resp_row = response.row(dj);
                for (k, &psi_k) in psi_row.iter().enumerate() {
                    acc += psi_k * resp_row[(b + nm + nm / 2 - k) % nm];
                }
            }
            let direct = filtered_time.get(a, b);
            max_err = max_err.max((acc * scale - direct).norm());
            max_val = max_val.max(direct.norm());
        }
    }
    assert!(max_err / max_val < 1e-7, "relative error {}", max_err / max_val);
}

#[test]
fn parseval_on_default_grid() {
    let freq = amplitude(1024, 1024);
    let time = to_time_domain(&freq).unwrap();
    let (pf, pt) = (freq.total_power(), time.total_power());
    assert!((pf - pt).abs() / pf < 1e-9, "{pf} vs {pt}");
}

#[test]
fn overlap_routes_agree_with_filters() {
    let freq = amplitude(256, 256);
    let f = FilterSpec::new(532.0, 40.0).unwrap();
    let filtered = normalize(&apply_filters(&freq, &f, &f, &pump()).unwrap()).unwrap();
    let delays: Vec<f64> = (0..41).map(|i| -400.0 + 20.0 * i as f64 + 0.37).collect();
    for grid in [&freq, &filtered] {
        let time = to_time_domain(grid).unwrap();
        let a = OverlapKernel::new(&time).unwrap().sweep(&delays).unwrap();
        let b = overlap_v_frequency(grid, &delays).unwrap();
        let worst = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }
}
