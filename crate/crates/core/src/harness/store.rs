use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{system_seed, ExperimentConfig, SystemSpec};
use crate::beams::{ensemble_hash, reactions, sample_supports, BeamEnsemble, SupportSet};
use crate::elastic::{ElasticHasher, Material};
use crate::error::{Error, Result};
use crate::hash::HashValue;
use crate::io::{fmt_f64, parse_f64, read_json, write_json, write_text};
use crate::loads::{generate_corpus_with, read_corpus, write_corpus, LoadCorpus, LoadProfile};
use crate::metrics::{EvalContext, EvalReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORPUS_DIR: &str = "corpus";
pub const SYSTEMS_DIR: &str = "systems";
pub const HASHES_FILE: &str = "hashes.csv";
pub const REPORT_FILE: &str = "report.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const SUPPORTS_FILE: &str = "supports.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub digest: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub system_ids: Vec<String>,
}

/// A stored per-system report: the metrics plus the system's shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub family: String,
    pub ns: usize,
    pub depth: Option<f64>,
    #[serde(flatten)]
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFailure {
    pub system_id: String,
    pub stage: String,
    pub error: String,
}

/// Hashes of one system: a single hash per load, or one per member per load.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemHashes {
    Single(Vec<HashValue>),
    Ensemble(Vec<Vec<HashValue>>),
}

impl SystemHashes {
    pub fn ns(&self) -> usize {
        let first = match self {
            SystemHashes::Single(h) => h.first(),
            SystemHashes::Ensemble(m) => m.first().and_then(|h| h.first()),
        };
        first.map_or(0, HashValue::ns)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Keep finished systems of an existing store with the same digest.
    pub resume: bool,
    /// Wipe an existing store even if its digest differs.
    pub force: bool,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub store: PathBuf,
    pub digest: String,
    /// Systems whose hashes were computed in this run.
    pub solved: Vec<String>,
    /// Systems whose reports were computed in this run.
    pub evaluated: Vec<String>,
    /// Systems already complete in the store.
    pub skipped: Vec<String>,
    pub failures: Vec<SystemFailure>,
}

impl RunSummary {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Writes `system_id,load_index,r1,..,rns` rows; ensemble members get ids
/// `system#member`.
pub fn hashes_to_csv(system_id: &str, hashes: &SystemHashes) -> String {
    let mut out = String::new();
    let mut rows = |id: &str, hs: &[HashValue]| {
        for (i, h) in hs.iter().enumerate() {
            out.push_str(id);
            out.push(',');
            out.push_str(&i.to_string());
            for v in h.readouts() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
    };
    match hashes {
        SystemHashes::Single(hs) => rows(system_id, hs),
        SystemHashes::Ensemble(members) => {
            for (m, hs) in members.iter().enumerate() {
                rows(&format!("{system_id}#{m}"), hs);
            }
        }
    }
    out
}

/// Parses a hashes CSV into `(id, hashes)` groups in order of appearance.
pub fn parse_hashes_csv(text: &str, path: &Path) -> Result<Vec<(String, Vec<HashValue>)>> {
    let mut groups: Vec<(String, Vec<HashValue>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().trim().to_string();
        let index: usize = fields
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("missing or invalid load index".into()))?;
        let readouts = fields
            .map(parse_f64)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(bad)?;
        let hash = HashValue::new(readouts).map_err(|e| bad(e.to_string()))?;
        if groups.last().map_or(true, |g| g.0 != id) {
            if groups.iter().any(|g| g.0 == id) {
                return Err(bad(format!("rows of {id} are not contiguous")));
            }
            groups.push((id, Vec::new()));
        }
        let group = groups.last_mut().expect("group just ensured");
        if index != group.1.len() {
            return Err(bad(format!(
                "expected load index {}, found {index}",
                group.1.len()
            )));
        }
        group.1.push(hash);
    }
    Ok(groups)
}

pub fn read_hashes(path: &Path) -> Result<Vec<(String, Vec<HashValue>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hashes_csv(&text, path)
}

fn read_system_hashes(path: &Path, spec: &SystemSpec) -> Result<SystemHashes> {
    let groups = read_hashes(path)?;
    let id = spec.to_string();
    match spec {
        SystemSpec::Ensemble { .. } => {
            let prefix = format!("{id}#");
            if groups.is_empty() || groups.iter().any(|g| !g.0.starts_with(&prefix)) {
                return Err(Error::Config(format!(
                    "{}: not a hash file of {id}",
                    path.display()
                )));
            }
            Ok(SystemHashes::Ensemble(
                groups.into_iter().map(|g| g.1).collect(),
            ))
        }
        _ => match <[_; 1]>::try_from(groups) {
            Ok([(gid, hashes)]) if gid == id => Ok(SystemHashes::Single(hashes)),
            _ => Err(Error::Config(format!(
                "{}: not a hash file of {id}",
                path.display()
            ))),
        },
    }
}

/// Beam supports used by a system, for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportRecord {
    Single(SupportSet),
    Ensemble(BeamEnsemble),
}

/// Hashes every load through one system. Beam supports are drawn from
/// [`system_seed`] of the corpus seed and the system id.
pub fn compute_system(
    spec: &SystemSpec,
    config: &ExperimentConfig,
    loads: &[LoadProfile],
) -> Result<(SystemHashes, Option<SupportRecord>)> {
    let seed = system_seed(config.corpus.master_seed, &spec.to_string());
    compute_system_seeded(spec, config, loads, seed)
}

/// [`compute_system`] with an explicit support seed (ignored by elastic
/// systems).
pub fn compute_system_seeded(
    spec: &SystemSpec,
    config: &ExperimentConfig,
    loads: &[LoadProfile],
    seed: u64,
) -> Result<(SystemHashes, Option<SupportRecord>)> {
    let id = spec.to_string();
    let length = config.corpus.length;
    match spec {
        SystemSpec::Beam { k } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let supports = sample_supports(*k, config.beam_gap(*k), length, &mut rng)?;
            let hashes = loads
                .par_iter()
                .map(|w| reactions(w, &supports))
                .collect::<Result<_>>()?;
            Ok((
                SystemHashes::Single(hashes),
                Some(SupportRecord::Single(supports)),
            ))
        }
        SystemSpec::Ensemble { k } => {
            let ensemble = BeamEnsemble::sample(*k, config.beam_gap(*k), length, seed)?;
            let per_load = loads
                .par_iter()
                .map(|w| ensemble_hash(w, &ensemble))
                .collect::<Result<Vec<_>>>()?;
            let members = (0..ensemble.len())
                .map(|m| per_load.iter().map(|hs| hs[m].clone()).collect())
                .collect();
            Ok((
                SystemHashes::Ensemble(members),
                Some(SupportRecord::Ensemble(ensemble)),
            ))
        }
        _ => {
            let domain = spec
                .domain(config.mesh_h, &config.base_dir)?
                .expect("elastic systems have a domain");
            if (domain.top_length - length).abs() > 1e-9 * length {
                return Err(Error::Config(format!(
                    "{id}: top edge length {} differs from the corpus length {length}",
                    domain.top_length
                )));
            }
            let hasher = ElasticHasher::new(&domain, &Material::default())?;
            Ok((SystemHashes::Single(hasher.hash_all(loads)?), None))
        }
    }
}

/// Metrics for one system's hashes.
pub fn evaluate_system(
    spec: &SystemSpec,
    config: &ExperimentConfig,
    context: &EvalContext,
    hashes: &SystemHashes,
) -> Result<SystemReport> {
    let id = spec.to_string();
    let eval = match hashes {
        SystemHashes::Single(h) => context.evaluate(&id, h)?,
        SystemHashes::Ensemble(m) => context.evaluate_ensemble(&id, m)?,
    };
    let depth = match spec {
        SystemSpec::Beam { .. } | SystemSpec::Ensemble { .. } => None,
        _ => spec
            .domain(config.mesh_h, &config.base_dir)?
            .map(|d| d.depth),
    };
    Ok(SystemReport {
        family: spec.family().to_string(),
        ns: hashes.ns(),
        depth,
        eval,
    })
}

pub fn system_dir(store: &Path, spec: &SystemSpec) -> PathBuf {
    store.join(SYSTEMS_DIR).join(spec.dir_name())
}

fn remove_if_exists(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
        _ => Ok(()),
    }
}

fn remove_dir_if_exists(path: &Path) -> Result<()> {
    match fs::remove_dir_all(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(path, e)),
        _ => Ok(()),
    }
}

fn record_failure(dir: &Path, failure: &SystemFailure) -> Result<()> {
    write_json(&dir.join(FAILURE_FILE), failure)
}

/// Prepares the store directory and returns the corpus to hash.
fn open_store(
    config: &ExperimentConfig,
    store: &Path,
    digest: &str,
    options: &RunOptions,
) -> Result<LoadCorpus> {
    let manifest_path = store.join(MANIFEST_FILE);
    let mut keep = false;
    if manifest_path.exists() {
        let existing: StoreManifest = read_json(&manifest_path)?;
        if existing.digest != digest && !options.force {
            return Err(Error::DigestMismatch {
                path: store.to_path_buf(),
                found: existing.digest,
                expected: digest.to_string(),
            });
        }
        if existing.digest == digest && !options.resume && !options.force {
            return Err(Error::Config(format!(
                "store {} already exists; pass --resume to continue it or --force to start over",
                store.display()
            )));
        }
        keep = existing.digest == digest && options.resume;
    }
    if !keep {
        for sub in [CORPUS_DIR, SYSTEMS_DIR] {
            remove_dir_if_exists(&store.join(sub))?;
        }
        remove_if_exists(&manifest_path)?;
    }

    let corpus_dir = store.join(CORPUS_DIR);
    let corpus = match keep.then(|| read_corpus(&corpus_dir)) {
        Some(Ok(c)) if c.params == config.corpus => c,
        _ => {
            let c = generate_corpus_with(config.corpus)?;
            write_corpus(&c, &corpus_dir)?;
            c
        }
    };
    let manifest = StoreManifest {
        digest: digest.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        system_ids: config
            .system_specs()?
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    write_json(&manifest_path, &manifest)?;
    Ok(corpus)
}

/// Runs a sweep: generates (or reuses) the corpus, hashes every pending
/// system on a worker pool with a single writer, then computes the metrics.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let digest = config.digest()?;
    let store = config.output_path();
    let specs = config.system_specs()?;
    let corpus = open_store(config, &store, &digest, options)?;
    let loads = corpus.loads();

    let mut summary = RunSummary {
        store: store.clone(),
        digest,
        ..Default::default()
    };
    let mut pending_hash = Vec::new();
    let mut pending_eval = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let dir = system_dir(&store, spec);
        remove_if_exists(&dir.join(FAILURE_FILE))?;
        if !dir.join(HASHES_FILE).exists() {
            remove_if_exists(&dir.join(REPORT_FILE))?;
            pending_hash.push(i);
            pending_eval.push(i);
        } else if !dir.join(REPORT_FILE).exists() {
            pending_eval.push(i);
        } else {
            summary.skipped.push(spec.to_string());
        }
    }

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.workers {
            builder = builder.num_threads(n.max(1));
        }
        builder
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
    };

    let mut fresh: BTreeMap<usize, SystemHashes> = BTreeMap::new();
    let mut write_error = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        let jobs = &pending_hash;
        let specs_ref = &specs;
        let pool_ref = &pool;
        scope.spawn(move || {
            pool_ref.install(|| {
                jobs.par_iter().for_each_with(tx, |tx, &i| {
                    let result = compute_system(&specs_ref[i], config, loads);
                    let _ = tx.send((i, result));
                });
            });
        });
        // The single writer: results are persisted in arrival order.
        for (i, result) in rx {
            let spec = &specs[i];
            let dir = system_dir(&store, spec);
            let written = match result {
                Ok((hashes, supports)) => {
                    let w = supports
                        .map_or(Ok(()), |s| write_json(&dir.join(SUPPORTS_FILE), &s))
                        .and_then(|_| {
                            write_text(
                                &dir.join(HASHES_FILE),
                                &hashes_to_csv(&spec.to_string(), &hashes),
                            )
                        });
                    summary.solved.push(spec.to_string());
                    fresh.insert(i, hashes);
                    w
                }
                Err(e) => {
                    let failure = SystemFailure {
                        system_id: spec.to_string(),
                        stage: "hash".into(),
                        error: e.to_string(),
                    };
                    let w = record_failure(&dir, &failure);
                    summary.failures.push(failure);
                    w
                }
            };
            if let Err(e) = written {
                write_error.get_or_insert(e);
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    summary
        .solved
        .sort_by_key(|id| specs.iter().position(|s| &s.to_string() == id));

    let failed: Vec<String> = summary
        .failures
        .iter()
        .map(|f| f.system_id.clone())
        .collect();
    let context = EvalContext::for_loads(loads, config.bucket, config.norm)?;
    pool.install(|| -> Result<()> {
        for &i in &pending_eval {
            let spec = &specs[i];
            let id = spec.to_string();
            if failed.contains(&id) {
                continue;
            }
            let dir = system_dir(&store, spec);
            let hashes = match fresh.remove(&i) {
                Some(h) => Ok(h),
                None => read_system_hashes(&dir.join(HASHES_FILE), spec),
            };
            match hashes.and_then(|h| evaluate_system(spec, config, &context, &h)) {
                Ok(report) => {
                    write_json(&dir.join(REPORT_FILE), &report)?;
                    summary.evaluated.push(id);
                }
                Err(e) => {
                    let failure = SystemFailure {
                        system_id: id,
                        stage: "evaluate".into(),
                        error: e.to_string(),
                    };
                    record_failure(&dir, &failure)?;
                    summary.failures.push(failure);
                }
            }
        }
        Ok(())
    })?;
    summary
        .failures
        .sort_by_key(|f| specs.iter().position(|s| s.to_string() == f.system_id));
    Ok(summary)
}

/// A store read back from disk.
#[derive(Debug, Clone)]
pub struct ResultStore {
    pub root: PathBuf,
    pub manifest: StoreManifest,
    /// Per configured system, in config order: its report or its failure.
    pub entries: Vec<(SystemSpec, std::result::Result<SystemReport, SystemFailure>)>,
}

impl ResultStore {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: StoreManifest = read_json(&root.join(MANIFEST_FILE))?;
        let mut config = manifest.config.clone();
        config.base_dir = root.to_path_buf();
        let mut entries = Vec::new();
        for spec in config.system_specs()? {
            let dir = system_dir(root, &spec);
            let report = dir.join(REPORT_FILE);
            let failure = dir.join(FAILURE_FILE);
            let entry = if report.exists() {
                Ok(read_json(&report)?)
            } else if failure.exists() {
                Err(read_json(&failure)?)
            } else {
                Err(SystemFailure {
                    system_id: spec.to_string(),
                    stage: "missing".into(),
                    error: "no report or failure recorded".into(),
                })
            };
            entries.push((spec, entry));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            entries,
        })
    }

    pub fn corpus(&self) -> Result<LoadCorpus> {
        read_corpus(&self.root.join(CORPUS_DIR))
    }

    pub fn reports(&self) -> impl Iterator<Item = (&SystemSpec, &SystemReport)> {
        self.entries
            .iter()
            .filter_map(|(s, e)| e.as_ref().ok().map(|r| (s, r)))
    }

    pub fn report(&self, id: &str) -> Option<&SystemReport> {
        self.reports()
            .find(|(s, _)| s.to_string() == id)
            .map(|(_, r)| r)
    }

    pub fn failures(&self) -> Vec<&SystemFailure> {
        self.entries
            .iter()
            .filter_map(|(_, e)| e.as_ref().err())
            .collect()
    }

    pub fn hashes(&self, spec: &SystemSpec) -> Result<SystemHashes> {
        read_system_hashes(&system_dir(&self.root, spec).join(HASHES_FILE), spec)
    }
}
