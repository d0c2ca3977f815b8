use std::ffi::{c_char, CStr, CString};
use std::ptr;

use nfdm_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let needed = unsafe { nfdm_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(needed <= buf.len());
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn set(cfg: *mut NfdmConfig, key: &str, value: &str) -> NfdmStatus {
    let k = CString::new(key).unwrap();
    let v = CString::new(value).unwrap();
    unsafe { nfdm_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

fn fast_config() -> *mut NfdmConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { nfdm_config_new(NfdmPreset::Fast, &mut cfg) },
        NfdmStatus::Ok
    );
    assert!(!cfg.is_null());
    cfg
}

#[test]
fn configuration_round_trip() {
    let cfg = fast_config();
    assert_eq!(set(cfg, "launch_power_dbm", "-7.5"), NfdmStatus::Ok);
    assert_eq!(set(cfg, "system", "dbp"), NfdmStatus::Ok);

    let mut needed = 0usize;
    let status = unsafe { nfdm_config_to_json(cfg, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(status, NfdmStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { nfdm_config_to_json(cfg, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) },
        NfdmStatus::Ok
    );
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_string();
    assert_eq!(json.len() + 1, needed);
    assert!(
        json.contains("\"launch_power_dbm\":-7.5") && json.contains("\"dbp\""),
        "{json}"
    );

    let text = CString::new(json).unwrap();
    let mut copy = ptr::null_mut();
    assert_eq!(
        unsafe { nfdm_config_parse(text.as_ptr(), &mut copy) },
        NfdmStatus::Ok
    );
    unsafe {
        nfdm_config_free(copy);
        nfdm_config_free(cfg);
        nfdm_config_free(ptr::null_mut());
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let cfg = fast_config();
    assert_eq!(set(cfg, "n_b", "0"), NfdmStatus::InvalidArgument);
    assert!(last_error().contains("n_b"), "{}", last_error());
    assert_ne!(set(cfg, "no_such_field", "1"), NfdmStatus::Ok);

    let bad = CString::new("{ not json").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { nfdm_config_parse(bad.as_ptr(), &mut out) },
        NfdmStatus::Parse
    );
    assert!(out.is_null());

    assert_eq!(
        unsafe { nfdm_config_new(NfdmPreset::Paper, ptr::null_mut()) },
        NfdmStatus::NullPointer
    );
    assert!(last_error().contains("null"));
    let mut report = NfdmReport::default();
    assert_eq!(
        unsafe { nfdm_run_point(ptr::null(), 1, &mut report) },
        NfdmStatus::NullPointer
    );

    // A too-short buffer reports its size and leaves the buffer alone.
    let mut tiny = [7 as c_char; 2];
    let needed = unsafe { nfdm_last_error(tiny.as_mut_ptr(), tiny.len()) };
    assert!(needed > 2 && tiny == [7, 7]);
    unsafe { nfdm_config_free(cfg) };
}

#[test]
fn forward_and_backward_transforms_invert() {
    let (n, dt) = (256usize, 0.125);
    let t0 = -(n as f64) * dt / 2.0;
    let q: Vec<NfdmComplex> = (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            NfdmComplex {
                re: 0.4 / t.cosh(),
                im: 0.1 * (-t * t).exp(),
            }
        })
        .collect();
    let mut spec = ptr::null_mut();
    assert_eq!(
        unsafe { nfdm_fnft(q.as_ptr(), n, dt, t0, &mut spec) },
        NfdmStatus::Ok
    );
    assert_eq!(unsafe { nfdm_spectrum_len(spec) }, n);

    let mut lambda = vec![0.0; n];
    let mut rho = vec![NfdmComplex::default(); n];
    assert_eq!(
        unsafe { nfdm_spectrum_read(spec, lambda.as_mut_ptr(), rho.as_mut_ptr(), n) },
        NfdmStatus::Ok
    );
    assert!(lambda.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(
        unsafe { nfdm_spectrum_read(spec, ptr::null_mut(), rho.as_mut_ptr(), n - 1) },
        NfdmStatus::BufferTooSmall
    );

    let mut rebuilt = ptr::null_mut();
    assert_eq!(
        unsafe { nfdm_spectrum_new(rho.as_ptr(), n, dt, &mut rebuilt) },
        NfdmStatus::Ok
    );
    let mut back = vec![NfdmComplex::default(); n];
    assert_eq!(
        unsafe { nfdm_bnft(rebuilt, dt, t0, back.as_mut_ptr(), n) },
        NfdmStatus::Ok
    );
    let err: f64 = q
        .iter()
        .zip(&back)
        .map(|(a, b)| (a.re - b.re).powi(2) + (a.im - b.im).powi(2))
        .sum();
    let norm: f64 = q.iter().map(|a| a.re * a.re + a.im * a.im).sum();
    assert!((err / norm).sqrt() < 1e-3, "{}", (err / norm).sqrt());

    assert_eq!(
        unsafe { nfdm_bnft(rebuilt, dt, t0, back.as_mut_ptr(), n - 1) },
        NfdmStatus::GridMismatch
    );
    unsafe {
        nfdm_spectrum_free(spec);
        nfdm_spectrum_free(rebuilt);
    }
}

#[test]
fn runs_an_operating_point() {
    let cfg = fast_config();
    for (k, v) in [
        ("n_b", "8"),
        ("bursts", "2"),
        ("noise", "false"),
        ("launch_power_dbm", "-20"),
        ("system", "edc"),
    ] {
        assert_eq!(set(cfg, k, v), NfdmStatus::Ok, "{k}");
    }
    let mut report = NfdmReport::default();
    assert_eq!(
        unsafe { nfdm_run_point(cfg, 1, &mut report) },
        NfdmStatus::Ok
    );
    assert_eq!(report.symbols, 16);
    assert_eq!(report.bursts, 2);
    assert_eq!(report.bit_errors, 0);
    assert!(report.q_db_ber.is_nan());
    assert!(report.evm_snr_db > 30.0, "{report:?}");
    unsafe { nfdm_config_free(cfg) };
}

#[test]
fn closed_forms() {
    let m = nfdm_channel_memory(-20.39e-27, 2000e3, 50e9, 0.2, false);
    assert!((m - 768.7).abs() < 0.5, "{m}");
    assert!((nfdm_channel_memory(-20.39e-27, 2000e3, 50e9, 0.2, true) - m / 2.0).abs() < 1e-9);
    let mut eta = 0.0;
    assert_eq!(
        unsafe { nfdm_rate_efficiency(800, 800, &mut eta) },
        NfdmStatus::Ok
    );
    assert_eq!(eta, 0.5);
    assert_eq!(
        unsafe { nfdm_rate_efficiency(0, 800, &mut eta) },
        NfdmStatus::InvalidArgument
    );
}
