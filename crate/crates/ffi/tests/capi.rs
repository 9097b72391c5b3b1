use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use voldecon::kerneldeconv::{estimate_with_kernel, DeconvKernel, DEFAULT_TABLE_DX};
use voldecon::noisemodel::{noise_charfn, noise_density};
use voldecon::svsim::simulate_pure_convolution;
use voldecon::volreg::{regression_estimate, RegressionOptions};
use voldecon::NoiseModel;
use voldecon_ffi::*;

fn last_error() -> String {
    let p = vd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

#[test]
fn noise_functions_match_core() {
    let (mut re, mut im) = (0.0, 0.0);
    for t in [-2.0, 0.0, 0.7, 5.0] {
        assert_eq!(unsafe { vd_noise_charfn(t, &mut re, &mut im) }, VdStatus::Ok);
        let v = noise_charfn(t);
        assert_eq!((re, im), (v.re, v.im));
    }
    assert_eq!(vd_noise_density(-1.0), noise_density(-1.0));
    assert!(vd_last_error().is_null());
}

#[test]
fn null_outputs_are_reported() {
    let mut im = 0.0;
    assert_eq!(unsafe { vd_noise_charfn(1.0, ptr::null_mut(), &mut im) }, VdStatus::NullPointer);
    assert!(last_error().contains("re"));
    assert_eq!(unsafe { vd_kernel_eval(ptr::null(), 0.0, &mut im) }, VdStatus::NullPointer);
}

#[test]
fn kernel_handle_lifecycle_and_density() {
    let mut k: *mut VdKernel = ptr::null_mut();
    assert_eq!(unsafe { vd_kernel_new(0.5, 40.0, 1, &mut k) }, VdStatus::Ok);
    assert!(!k.is_null());
    let core = DeconvKernel::with_spacing(0.5, NoiseModel::LogChiSquare, 40.0, DEFAULT_TABLE_DX).unwrap();
    let mut v = 0.0;
    for x in [-3.0, 0.0, 1.25] {
        assert_eq!(unsafe { vd_kernel_eval(k, x, &mut v) }, VdStatus::Ok);
        assert_eq!(v, core.eval(x));
    }

    let (y, _) = simulate_pure_convolution(500, 0.0, 1.0, (3, 4));
    let g = grid(-4.0, 4.0, 33);
    let mut out = vec![0.0; g.len()];
    let status = unsafe { vd_kernel_density(k, y.as_ptr(), y.len(), g.as_ptr(), g.len(), out.as_mut_ptr()) };
    assert_eq!(status, VdStatus::Ok);
    let expected = estimate_with_kernel(&y, &core, g.clone(), false).unwrap();
    assert_eq!(out, expected.density.values());
    unsafe {
        vd_kernel_free(k);
        vd_kernel_free(ptr::null_mut());
    }
}

#[test]
fn invalid_bandwidth_is_a_parameter_error() {
    let mut k: *mut VdKernel = ptr::null_mut();
    assert_eq!(unsafe { vd_kernel_new(-1.0, 10.0, 1, &mut k) }, VdStatus::InvalidParameter);
    assert!(k.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn wavelet_and_ppe_estimates() {
    let (y, _) = simulate_pure_convolution(400, 0.0, 1.0, (5, 6));
    let g = grid(-5.0, 5.0, 41);
    let mut out = vec![0.0; g.len()];
    let mut level = -1;
    let status =
        unsafe { vd_wavelet_density(y.as_ptr(), y.len(), -1, 0, g.as_ptr(), g.len(), out.as_mut_ptr(), &mut level) };
    assert_eq!(status, VdStatus::Ok);
    assert_eq!(level, 0);
    assert!(out.iter().all(|v| v.is_finite()));

    let mut selected = 0usize;
    let status =
        unsafe { vd_ppe_density(y.as_ptr(), y.len(), 1.0, 50, g.as_ptr(), g.len(), out.as_mut_ptr(), &mut selected) };
    assert_eq!(status, VdStatus::Ok);
    assert!((1..=5).contains(&selected));

    let status =
        unsafe { vd_ppe_density(y.as_ptr(), 2, 1.0, 0, g.as_ptr(), g.len(), out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(status, VdStatus::TooSmall);
}

#[test]
fn regression_matches_core_and_masks() {
    let (y, _) = simulate_pure_convolution(800, 0.0, 1.0, (7, 8));
    let g = grid(-2.0, 2.0, 17);
    let m = g.len();
    let (mut mhat, mut fhat, mut masked) = (vec![0.0; m], vec![0.0; m], vec![9u8; m]);
    let status = unsafe {
        vd_regression(
            y.as_ptr(),
            y.len(),
            0.5,
            1e-4,
            1,
            g.as_ptr(),
            m,
            mhat.as_mut_ptr(),
            fhat.as_mut_ptr(),
            masked.as_mut_ptr(),
        )
    };
    assert_eq!(status, VdStatus::Ok);
    let opts = RegressionOptions { center_response: true, ..RegressionOptions::default() };
    let core = regression_estimate(&y, 0.5, &g, &opts).unwrap();
    assert_eq!(fhat, core.denominator);
    for i in 0..m {
        assert_eq!(masked[i] == 1, core.masked[i]);
        assert!(masked[i] == 1 || mhat[i] == core.mhat[i]);
    }

    // a floor above every |f_nh| masks everything
    let status = unsafe {
        vd_regression(
            y.as_ptr(),
            y.len(),
            0.5,
            1e3,
            1,
            g.as_ptr(),
            m,
            mhat.as_mut_ptr(),
            fhat.as_mut_ptr(),
            masked.as_mut_ptr(),
        )
    };
    assert_eq!(status, VdStatus::AllMasked);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(vd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/voldecon.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "vd_last_error",
        "vd_version",
        "vd_noise_density",
        "vd_noise_charfn",
        "vd_kernel_new",
        "vd_kernel_free",
        "vd_kernel_eval",
        "vd_kernel_density",
        "vd_wavelet_density",
        "vd_ppe_density",
        "vd_regression",
        "VD_STATUS_OK",
        "typedef struct VdKernel VdKernel",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // syntax-check with the system C compiler when one is present
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let lib = exe.parent().unwrap().join("libvoldecon_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let bin = Path::new(env!("CARGO_TARGET_TMPDIR")).join("vd_demo");
    let status = Command::new("cc")
        .arg(dir.join("examples/demo.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);

    // same numbers as the Rust API
    let y = [-2.1, -0.4, -1.3, 0.2, -3.5, -0.9, -1.7, 0.6];
    let g = grid(-2.0, 2.0, 5);
    let core = DeconvKernel::with_spacing(0.6, NoiseModel::LogChiSquare, 30.0, DEFAULT_TABLE_DX).unwrap();
    let expected = estimate_with_kernel(&y, &core, g, false).unwrap();
    for (line, want) in text.lines().zip(expected.density.values()) {
        let got: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert!((got - want).abs() <= 1e-11 * want.abs().max(1e-3), "{got} vs {want}");
    }
}
