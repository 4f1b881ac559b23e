use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_class_load, normalize, LoadProfile, NoiseConfig, NoiseProvenance};
use super::{CLASS_COUNT, OCTAVE_RANGE};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64};

pub const VARIANTS_PER_CLASS: usize = 20;
pub const LOADS_FILE: &str = "loads.csv";
pub const LOADS_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub master_seed: u64,
    pub n: usize,
    pub length: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
}

impl CorpusParams {
    pub fn new(master_seed: u64, length: f64, n: usize) -> Self {
        Self {
            master_seed,
            n,
            length,
            noise: NoiseConfig::default(),
        }
    }
}

/// The labelled load set: 20 classes times 20 noisy variants, class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCorpus {
    pub params: CorpusParams,
    loads: Vec<LoadProfile>,
}

impl LoadCorpus {
    pub fn loads(&self) -> &[LoadProfile] {
        &self.loads
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    pub fn grid_n(&self) -> usize {
        self.params.n
    }

    /// Class label of every load, in corpus order.
    pub fn labels(&self) -> Vec<u32> {
        self.loads
            .iter()
            .map(|w| w.class_id().unwrap_or(0))
            .collect()
    }
}

pub fn generate_corpus(master_seed: u64, length: f64, n: usize) -> Result<LoadCorpus> {
    generate_corpus_with(CorpusParams::new(master_seed, length, n))
}

/// Builds the corpus. Each class draws its base shape once (KDE point
/// locations included) and then 20 `(seed, octave)` pairs, all from one
/// stream seeded by `master_seed`.
pub fn generate_corpus_with(params: CorpusParams) -> Result<LoadCorpus> {
    if params.n < 3 {
        return Err(Error::arg(format!(
            "a load needs at least 3 samples, got {}",
            params.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.master_seed);
    let mut jobs = Vec::with_capacity(CLASS_COUNT as usize * VARIANTS_PER_CLASS);
    for class_id in 1..=CLASS_COUNT {
        let base = generate_class_load(class_id, params.length, params.n, &mut rng)?;
        for _ in 0..VARIANTS_PER_CLASS {
            let seed = u64::from(rng.gen::<u32>());
            let octave = rng.gen_range(OCTAVE_RANGE);
            jobs.push((base.clone(), seed, octave));
        }
    }
    let loads = jobs
        .into_par_iter()
        .map(|(base, seed, octave)| normalize(&params.noise.apply(&base, seed, octave)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadCorpus { params, loads })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    params: CorpusParams,
    classes: u32,
    variants_per_class: usize,
    loads: usize,
    tool_version: String,
}

/// Writes `loads.csv` and `manifest.json` into `dir`.
pub fn write_corpus(corpus: &LoadCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LOADS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for w in corpus.loads() {
            let noise = w.noise().unwrap_or(NoiseProvenance { seed: 0, octave: 0 });
            write!(
                out,
                "{},{},{}",
                w.class_id().unwrap_or(0),
                noise.seed,
                noise.octave
            )?;
            for v in w.samples() {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(&path, e))?;

    let manifest = Manifest {
        params: corpus.params,
        classes: CLASS_COUNT,
        variants_per_class: VARIANTS_PER_CLASS,
        loads: corpus.len(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = dir.join(LOADS_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads a corpus written by [`write_corpus`].
pub fn read_corpus(dir: &Path) -> Result<LoadCorpus> {
    let path = dir.join(LOADS_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    let params = manifest.params;

    let path = dir.join(LOADS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut loads = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.clone(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split(',');
        let mut int = |name: &str| -> Result<u64> {
            fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("missing or invalid {name}")))
        };
        let class_id = int("class_id")? as u32;
        let seed = int("seed")?;
        let octave = int("octave")? as u32;
        let samples = fields
            .map(parse_f64)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(&bad)?;
        if samples.len() != params.n {
            return Err(bad(format!(
                "expected {} samples, found {}",
                params.n,
                samples.len()
            )));
        }
        let w = LoadProfile::new(samples, params.length)
            .map_err(|e| bad(e.to_string()))?
            .with_class(class_id)
            .with_noise(NoiseProvenance { seed, octave });
        loads.push(w);
    }
    Ok(LoadCorpus { params, loads })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_balance_and_normalization() {
        let corpus = generate_corpus(0, 10.0, 200).unwrap();
        assert_eq!(corpus.len(), 400);
        for class in 1..=CLASS_COUNT {
            let count = corpus.labels().iter().filter(|c| **c == class).count();
            assert_eq!(count, VARIANTS_PER_CLASS);
        }
        for w in corpus.loads() {
            assert!((w.integral() + 1.0).abs() < 1e-10);
            assert!(w.samples().iter().all(|v| *v <= 0.0));
            assert!(OCTAVE_RANGE.contains(&w.noise().unwrap().octave));
        }
    }

    #[test]
    fn reproducible() {
        let a = generate_corpus(5, 10.0, 50).unwrap();
        let b = generate_corpus(5, 10.0, 50).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(6, 10.0, 50).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let corpus = generate_corpus(3, 10.0, 40).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back, corpus);
    }
}
