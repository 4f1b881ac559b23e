//! C ABI over `mech-lsh`.
//!
//! Every fallible function returns an [`MlshStatus`]; results come back
//! through out-pointers. Objects are opaque handles created by `*_new` /
//! `*_generate` / `*_sample` functions and released with the matching
//! `*_free`. The message of the last error on the calling thread is available
//! from [`mlsh_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mech_lsh::beams::{reactions, sample_supports, SupportSet};
use mech_lsh::elastic::{ElasticHasher, Material};
use mech_lsh::harness::{self, ExperimentConfig, RunOptions, SystemSpec};
use mech_lsh::loads::{generate_corpus, normalize, LoadCorpus};
use mech_lsh::{metrics, theory, Error, HashValue, LoadProfile};
use rand::SeedableRng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlshStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A load or readout that cannot be normalized, or an undefined correlation.
    Degenerate = 3,
    Geometry = 4,
    Solver = 5,
    Io = 6,
    Config = 7,
    /// The output buffer is shorter than the result; the needed length is
    /// still written to the length out-pointer.
    BufferTooSmall = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

/// A sampled distributed load.
pub struct MlshLoad(LoadProfile);

/// The labelled 400-load corpus.
pub struct MlshCorpus(LoadCorpus);

/// A simply supported (k = 2) or composite beam.
pub struct MlshBeam(SupportSet);

/// A meshed and factorized 2-D elastic domain.
pub struct MlshElastic(ElasticHasher);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> MlshStatus {
    match err {
        Error::Argument(_) | Error::UnknownClass(_) => MlshStatus::InvalidArgument,
        Error::DegenerateLoad(_) | Error::DegenerateReadout(_) | Error::UndefinedCorrelation(_) => {
            MlshStatus::Degenerate
        }
        Error::Geometry(_) | Error::Mesh(_) => MlshStatus::Geometry,
        Error::Solver { .. } => MlshStatus::Solver,
        Error::Io { .. } | Error::Json { .. } | Error::Parse { .. } => MlshStatus::Io,
        Error::Config(_) | Error::DigestMismatch { .. } => MlshStatus::Config,
    }
}

struct Failure(MlshStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: MlshStatus, message: &str) -> Failure {
    Failure(status, message.to_string())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MlshStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MlshStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MlshStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(MlshStatus::NullPointer, &format!("{name} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MlshStatus::NullPointer, &format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(MlshStatus::NullPointer, &format!("{name} is null")))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(MlshStatus::NullPointer, &format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MlshStatus::InvalidUtf8, &format!("{name} is not UTF-8")))
}

unsafe fn write_values(
    values: &[f64],
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> Result<(), Failure> {
    *out(out_len, "out_len")? = values.len();
    if cap < values.len() {
        return Err(fail(
            MlshStatus::BufferTooSmall,
            &format!("buffer holds {cap} values, {} needed", values.len()),
        ));
    }
    if buf.is_null() {
        return Err(fail(MlshStatus::NullPointer, "buf is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlsh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `cap > 0`) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mlsh_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// A load from `n` samples on an even grid over `[0, length]`.
///
/// # Safety
/// `samples` must point to `n` readable doubles; `out_load` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_load_new(
    samples: *const f64,
    n: usize,
    length: f64,
    out_load: *mut *mut MlshLoad,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_load, "out_load")?;
        let load = LoadProfile::new(slice(samples, n, "samples")?.to_vec(), length)?;
        *slot = boxed(MlshLoad(load));
        Ok(())
    })
}

/// Clamps positive samples to zero and scales the load to total `-1`.
///
/// # Safety
/// `load` must be a live handle; `out_load` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_load_normalize(
    load: *const MlshLoad,
    out_load: *mut *mut MlshLoad,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_load, "out_load")?;
        let normalized = normalize(&borrow(load, "load")?.0)?;
        *slot = boxed(MlshLoad(normalized));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `load` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlsh_load_len(load: *const MlshLoad) -> usize {
    load.as_ref().map_or(0, |l| l.0.len())
}

/// Copies the samples into `buf`.
///
/// # Safety
/// `load` must be a live handle, `buf` must hold `cap` doubles and `out_len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_load_samples(
    load: *const MlshLoad,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> MlshStatus {
    guard(|| write_values(borrow(load, "load")?.0.samples(), buf, cap, out_len))
}

/// # Safety
/// `load` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlsh_load_free(load: *mut MlshLoad) {
    if !load.is_null() {
        drop(Box::from_raw(load));
    }
}

/// Generates the 20-class, 400-load corpus.
///
/// # Safety
/// `out_corpus` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_corpus_generate(
    master_seed: u64,
    n: usize,
    length: f64,
    out_corpus: *mut *mut MlshCorpus,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_corpus, "out_corpus")?;
        *slot = boxed(MlshCorpus(generate_corpus(master_seed, length, n)?));
        Ok(())
    })
}

/// Number of loads, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlsh_corpus_len(corpus: *const MlshCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// A copy of load `index` and its 1-based class label.
///
/// # Safety
/// `corpus` must be a live handle; `out_load` and `out_class` must be
/// writable (`out_class` may be null).
#[no_mangle]
pub unsafe extern "C" fn mlsh_corpus_get(
    corpus: *const MlshCorpus,
    index: usize,
    out_load: *mut *mut MlshLoad,
    out_class: *mut u32,
) -> MlshStatus {
    guard(|| {
        let corpus = &borrow(corpus, "corpus")?.0;
        let slot = out(out_load, "out_load")?;
        let load = corpus.loads().get(index).ok_or_else(|| {
            fail(
                MlshStatus::InvalidArgument,
                &format!("index {index} out of range for {} loads", corpus.len()),
            )
        })?;
        if let Some(class) = out_class.as_mut() {
            *class = load.class_id().unwrap_or(0);
        }
        *slot = boxed(MlshLoad(load.clone()));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlsh_corpus_free(corpus: *mut MlshCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// A beam with supports at `positions[0..k]` (increasing, first at 0) and
/// minimum gap fraction `m`.
///
/// # Safety
/// `positions` must point to `k` doubles; `out_beam` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_beam_new(
    positions: *const f64,
    k: usize,
    m: f64,
    length: f64,
    out_beam: *mut *mut MlshBeam,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_beam, "out_beam")?;
        let supports = SupportSet::new(slice(positions, k, "positions")?.to_vec(), m, length)?;
        *slot = boxed(MlshBeam(supports));
        Ok(())
    })
}

/// A beam with `k` supports drawn uniformly subject to the minimum gap.
///
/// # Safety
/// `out_beam` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_beam_sample(
    k: usize,
    m: f64,
    length: f64,
    seed: u64,
    out_beam: *mut *mut MlshBeam,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_beam, "out_beam")?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        *slot = boxed(MlshBeam(sample_supports(k, m, length, &mut rng)?));
        Ok(())
    })
}

/// Support positions of a beam.
///
/// # Safety
/// `beam` must be a live handle, `buf` must hold `cap` doubles and `out_len`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_beam_supports(
    beam: *const MlshBeam,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> MlshStatus {
    guard(|| write_values(borrow(beam, "beam")?.0.positions(), buf, cap, out_len))
}

/// Support reactions of `load`, one per support, left to right.
///
/// # Safety
/// `beam` and `load` must be live handles, `buf` must hold `cap` doubles and
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_beam_hash(
    beam: *const MlshBeam,
    load: *const MlshLoad,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> MlshStatus {
    guard(|| {
        let h = reactions(&borrow(load, "load")?.0, &borrow(beam, "beam")?.0)?;
        write_values(h.readouts(), buf, cap, out_len)
    })
}

/// # Safety
/// `beam` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlsh_beam_free(beam: *mut MlshBeam) {
    if !beam.is_null() {
        drop(Box::from_raw(beam));
    }
}

/// Meshes and factorizes an elastic domain given by a system id
/// (`rect:depth:ns:fixity`, `lattice:g`, `custom:C1` or `custom:<file>`).
///
/// # Safety
/// `system_id` must be a NUL-terminated string; `out_domain` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_elastic_new(
    system_id: *const c_char,
    mesh_h: f64,
    out_domain: *mut *mut MlshElastic,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_domain, "out_domain")?;
        let spec: SystemSpec = string(system_id, "system_id")?.parse()?;
        let domain = spec.domain(mesh_h, Path::new(""))?.ok_or_else(|| {
            fail(
                MlshStatus::InvalidArgument,
                &format!("{spec} is not an elastic system"),
            )
        })?;
        *slot = boxed(MlshElastic(ElasticHasher::new(
            &domain,
            &Material::default(),
        )?));
        Ok(())
    })
}

/// Number of sensors, or 0 for a null handle.
///
/// # Safety
/// `domain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mlsh_elastic_sensor_count(domain: *const MlshElastic) -> usize {
    domain.as_ref().map_or(0, |d| d.0.spec().ns())
}

/// Normalized sensor readouts (summing to one) for `load`.
///
/// # Safety
/// `domain` and `load` must be live handles, `buf` must hold `cap` doubles
/// and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_elastic_hash(
    domain: *const MlshElastic,
    load: *const MlshLoad,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> MlshStatus {
    guard(|| {
        let h = borrow(domain, "domain")?.0.hash(&borrow(load, "load")?.0)?;
        write_values(h.readouts(), buf, cap, out_len)
    })
}

/// # Safety
/// `domain` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlsh_elastic_free(domain: *mut MlshElastic) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Whether two readouts agree component-wise to within `s` (strictly).
///
/// # Safety
/// `a` and `b` must point to `len` doubles; `out_collides` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_is_collision(
    a: *const f64,
    b: *const f64,
    len: usize,
    s: f64,
    out_collides: *mut bool,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_collides, "out_collides")?;
        let a = HashValue::new(slice(a, len, "a")?.to_vec())?;
        let b = HashValue::new(slice(b, len, "b")?.to_vec())?;
        *slot = theory::is_collision(&a, &b, s)?;
        Ok(())
    })
}

/// Spearman rank correlation of `x[0..n]` and `y[0..n]` (average ranks for ties).
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `out_rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_spearman_rho(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_rho: *mut f64,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_rho, "out_rho")?;
        *slot = metrics::spearman_rho(slice(x, n, "x")?, slice(y, n, "y")?)?;
        Ok(())
    })
}

/// Closed-form probability that a random 3-support composite beam misses a
/// spike triplet on an `n`-point grid.
///
/// # Safety
/// `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_p2_analytic(n: usize, out_p: *mut f64) -> MlshStatus {
    guard(|| {
        let slot = out(out_p, "out_p")?;
        *slot = theory::p2_analytic(n)?;
        Ok(())
    })
}

/// Monte-Carlo estimate of the same probability with minimum gap fraction `m`.
///
/// # Safety
/// `out_p` and `out_stderr` must be writable (`out_stderr` may be null).
#[no_mangle]
pub unsafe extern "C" fn mlsh_p2_monte_carlo(
    n: usize,
    m: f64,
    trials: u64,
    seed: u64,
    out_p: *mut f64,
    out_stderr: *mut f64,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_p, "out_p")?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let est = theory::p2_monte_carlo(n, m, trials, &mut rng)?;
        *slot = est.value;
        if let Some(se) = out_stderr.as_mut() {
            *se = est.stderr;
        }
        Ok(())
    })
}

/// Collision radius of the simply supported family (`ssc3 = false`) or the
/// three-support composite family (`ssc3 = true`).
///
/// # Safety
/// `out_r` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mlsh_collision_radius(
    ssc3: bool,
    m: f64,
    length: f64,
    s: f64,
    out_r: *mut f64,
) -> MlshStatus {
    guard(|| {
        let slot = out(out_r, "out_r")?;
        *slot = if ssc3 {
            theory::collision_radius_ssc3(m, length, s)?
        } else {
            theory::collision_radius_ss(m, length, s)?
        };
        Ok(())
    })
}

/// Runs the experiment config at `config_path` and emits its CSV report.
/// `workers = 0` uses every core. The number of failed systems goes to
/// `out_failed`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `out_failed` must be
/// writable (it may be null).
#[no_mangle]
pub unsafe extern "C" fn mlsh_run_experiment(
    config_path: *const c_char,
    resume: bool,
    force: bool,
    workers: usize,
    out_failed: *mut usize,
) -> MlshStatus {
    guard(|| {
        let config = ExperimentConfig::load(Path::new(string(config_path, "config_path")?))?;
        let options = RunOptions {
            resume,
            force,
            workers: (workers > 0).then_some(workers),
        };
        let summary = harness::run_experiment(&config, &options)?;
        harness::emit_report_at(&summary.store)?;
        if let Some(f) = out_failed.as_mut() {
            *f = summary.failures.len();
        }
        Ok(())
    })
}
