use std::ffi::{c_char, CStr, CString};
use std::ptr;

use mech_lsh_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        mlsh_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn uniform_load(n: usize) -> *mut MlshLoad {
    let samples = vec![-0.1; n];
    let mut load = ptr::null_mut();
    assert_eq!(
        unsafe { mlsh_load_new(samples.as_ptr(), n, 10.0, &mut load) },
        MlshStatus::Ok
    );
    load
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(mlsh_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn beam_reactions_of_uniform_load() {
    let load = uniform_load(101);
    let mut beam = ptr::null_mut();
    let positions = [0.0, 10.0];
    unsafe {
        assert_eq!(
            mlsh_beam_new(positions.as_ptr(), 2, 0.5, 10.0, &mut beam),
            MlshStatus::Ok
        );
        let mut out = [0.0; 2];
        let mut len = 0;
        assert_eq!(
            mlsh_beam_hash(beam, load, out.as_mut_ptr(), 2, &mut len),
            MlshStatus::Ok
        );
        assert_eq!(len, 2);
        assert!(
            (out[0] - 0.5).abs() < 1e-12 && (out[1] - 0.5).abs() < 1e-12,
            "{out:?}"
        );

        let mut small = [0.0; 1];
        assert_eq!(
            mlsh_beam_hash(beam, load, small.as_mut_ptr(), 1, &mut len),
            MlshStatus::BufferTooSmall
        );
        assert_eq!(len, 2);
        mlsh_beam_free(beam);
        mlsh_load_free(load);
    }
}

#[test]
fn sampled_beam_supports_are_reported() {
    let mut beam = ptr::null_mut();
    unsafe {
        assert_eq!(mlsh_beam_sample(4, 0.1, 10.0, 9, &mut beam), MlshStatus::Ok);
        let mut pos = [0.0; 8];
        let mut len = 0;
        assert_eq!(
            mlsh_beam_supports(beam, pos.as_mut_ptr(), 8, &mut len),
            MlshStatus::Ok
        );
        assert_eq!(len, 4);
        assert!(pos[..4].windows(2).all(|w| w[1] - w[0] >= 1.0 - 1e-9));
        mlsh_beam_free(beam);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut load = ptr::null_mut();
    let samples = [-1.0, -1.0];
    unsafe {
        assert_eq!(
            mlsh_load_new(ptr::null(), 5, 10.0, &mut load),
            MlshStatus::NullPointer
        );
        assert!(last_error().contains("samples"));
        assert_eq!(
            mlsh_load_new(samples.as_ptr(), 2, -1.0, &mut load),
            MlshStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        assert_eq!(
            mlsh_load_new(samples.as_ptr(), 2, 10.0, ptr::null_mut()),
            MlshStatus::NullPointer
        );

        let positive = [1.0, 2.0, 3.0];
        assert_eq!(
            mlsh_load_new(positive.as_ptr(), 3, 10.0, &mut load),
            MlshStatus::Ok
        );
        let mut normalized = ptr::null_mut();
        assert_eq!(
            mlsh_load_normalize(load, &mut normalized),
            MlshStatus::Degenerate
        );
        assert!(normalized.is_null());
        mlsh_load_free(load);

        let mut domain = ptr::null_mut();
        let id = CString::new("ss:2").unwrap();
        assert_eq!(
            mlsh_elastic_new(id.as_ptr(), 0.5, &mut domain),
            MlshStatus::InvalidArgument
        );
        let id = CString::new("rect:3:2:full").unwrap();
        assert_eq!(
            mlsh_elastic_new(id.as_ptr(), 0.5, &mut domain),
            MlshStatus::Config
        );
        assert!(domain.is_null());

        let mut rho = 0.0;
        let flat = [1.0, 1.0, 1.0];
        let up = [1.0, 2.0, 3.0];
        assert_eq!(
            mlsh_spearman_rho(flat.as_ptr(), up.as_ptr(), 3, &mut rho),
            MlshStatus::Degenerate
        );

        // Success clears the message.
        assert_eq!(
            mlsh_spearman_rho(up.as_ptr(), up.as_ptr(), 3, &mut rho),
            MlshStatus::Ok
        );
        assert_eq!(rho, 1.0);
        assert_eq!(last_error(), "");
    }
}

#[test]
fn error_message_truncates() {
    let mut load = ptr::null_mut();
    unsafe {
        mlsh_load_new(ptr::null(), 5, 10.0, &mut load);
        let full = mlsh_last_error_message(ptr::null_mut(), 0);
        let mut buf = [1 as c_char; 4];
        assert_eq!(mlsh_last_error_message(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        mlsh_load_free(ptr::null_mut());
        mlsh_corpus_free(ptr::null_mut());
        mlsh_beam_free(ptr::null_mut());
        mlsh_elastic_free(ptr::null_mut());
        assert_eq!(mlsh_load_len(ptr::null()), 0);
        assert_eq!(mlsh_corpus_len(ptr::null()), 0);
        assert_eq!(mlsh_elastic_sensor_count(ptr::null()), 0);
    }
}

#[test]
fn corpus_and_elastic_domain() {
    let mut corpus = ptr::null_mut();
    unsafe {
        assert_eq!(
            mlsh_corpus_generate(3, 60, 10.0, &mut corpus),
            MlshStatus::Ok
        );
        assert_eq!(mlsh_corpus_len(corpus), 400);
        let mut load = ptr::null_mut();
        let mut class = 0;
        assert_eq!(
            mlsh_corpus_get(corpus, 399, &mut load, &mut class),
            MlshStatus::Ok
        );
        assert_eq!(class, 20);
        assert_eq!(mlsh_load_len(load), 60);
        let mut other = ptr::null_mut();
        assert_eq!(
            mlsh_corpus_get(corpus, 400, &mut other, ptr::null_mut()),
            MlshStatus::InvalidArgument
        );

        let id = CString::new("rect:2.5:3:sensors_only").unwrap();
        let mut domain = ptr::null_mut();
        assert_eq!(
            mlsh_elastic_new(id.as_ptr(), 0.5, &mut domain),
            MlshStatus::Ok
        );
        assert_eq!(mlsh_elastic_sensor_count(domain), 3);
        let mut r = [0.0; 3];
        let mut len = 0;
        assert_eq!(
            mlsh_elastic_hash(domain, load, r.as_mut_ptr(), 3, &mut len),
            MlshStatus::Ok
        );
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        mlsh_elastic_free(domain);
        mlsh_load_free(load);
        mlsh_corpus_free(corpus);
    }
}

#[test]
fn theory_and_collisions() {
    unsafe {
        let mut p = 0.0;
        assert_eq!(mlsh_p2_analytic(1000, &mut p), MlshStatus::Ok);
        assert!((p - 0.997f64.powi(3)).abs() < 1e-15);
        let (mut est, mut se) = (0.0, 0.0);
        assert_eq!(
            mlsh_p2_monte_carlo(100, 0.0, 20_000, 1, &mut est, &mut se),
            MlshStatus::Ok
        );
        assert!(se > 0.0 && (est - 0.97f64.powi(3)).abs() < 5.0 * se);

        let mut r = 0.0;
        assert_eq!(
            mlsh_collision_radius(false, 0.1, 10.0, 0.01, &mut r),
            MlshStatus::Ok
        );
        assert!((r - 2.0 * 0.1 * 0.01 / 10.0).abs() < 1e-18);
        assert_eq!(
            mlsh_collision_radius(false, 0.0, 10.0, 0.01, &mut r),
            MlshStatus::InvalidArgument
        );

        let a = [0.5, 0.5];
        let b = [0.505, 0.495];
        let c = [0.51, 0.49];
        let mut hit = false;
        assert_eq!(
            mlsh_is_collision(a.as_ptr(), b.as_ptr(), 2, 0.01, &mut hit),
            MlshStatus::Ok
        );
        assert!(hit);
        assert_eq!(
            mlsh_is_collision(a.as_ptr(), c.as_ptr(), 2, 0.01, &mut hit),
            MlshStatus::Ok
        );
        assert!(!hit);
    }
}

#[test]
fn runs_an_experiment_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"corpus":{"master_seed":1,"n":40,"length":10.0},"systems":["ss:2","ens:3"],"metrics":[],"output_dir":"store"}"#;
    let path = dir.path().join("exp.json");
    std::fs::write(&path, config).unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut failed = usize::MAX;
    unsafe {
        assert_eq!(
            mlsh_run_experiment(c_path.as_ptr(), false, false, 2, &mut failed),
            MlshStatus::Ok
        );
        assert_eq!(failed, 0);
        // A second fresh run refuses to clobber the store.
        assert_eq!(
            mlsh_run_experiment(c_path.as_ptr(), false, false, 2, &mut failed),
            MlshStatus::Config
        );
        assert_eq!(
            mlsh_run_experiment(c_path.as_ptr(), true, false, 2, &mut failed),
            MlshStatus::Ok
        );
    }
    assert!(dir.path().join("store/table1.csv").exists());
    assert!(!dir.path().join("store/fig4_curves.csv").exists());
}
