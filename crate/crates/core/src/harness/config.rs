use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beams::{default_min_gap, max_min_gap, MAX_SUPPORTS};
use crate::elastic::{
    DomainSpec, Fixity, DEFAULT_MESH_H, LATTICE_GRIDS, MAX_SENSORS, MIN_SENSORS, RECT_DEPTHS,
};
use crate::error::{Error, Result};
use crate::loads::{CorpusParams, DEFAULT_LENGTH};
use crate::metrics::DEFAULT_BUCKET;
use crate::norm::Norm;

/// Grid size of the desk-scale configs.
pub const DESK_N: usize = 200;
/// Grid size of the full-fidelity config.
pub const PAPER_N: usize = 1000;
pub const PAPER_MESH_H: f64 = 0.25;
pub const BUILTIN_CUSTOM: [&str; 3] = ["C1", "C2", "C3"];

/// One hashing system in a sweep, written as a short id string:
/// `ss:k`, `ens:k`, `rect:depth:ns:fixity`, `lattice:g` or `custom:C1|path`.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    /// Single beam with `k` supports (simply supported for `k = 2`).
    Beam {
        k: usize,
    },
    /// Hard-voted ensemble of independently drawn `k`-support beams.
    Ensemble {
        k: usize,
    },
    Rect {
        depth: f64,
        ns: usize,
        fixity: Fixity,
    },
    Lattice {
        grid: usize,
    },
    Custom {
        source: String,
    },
}

impl SystemSpec {
    pub fn family(&self) -> &'static str {
        match self {
            SystemSpec::Beam { k: 2 } => "simply_supported",
            SystemSpec::Beam { .. } => "composite",
            SystemSpec::Ensemble { .. } => "ensemble",
            SystemSpec::Rect { .. } => "rectangle",
            SystemSpec::Lattice { .. } => "lattice",
            SystemSpec::Custom { .. } => "custom",
        }
    }

    pub fn is_rectangle(&self) -> bool {
        matches!(self, SystemSpec::Rect { .. })
    }

    pub fn is_elastic(&self) -> bool {
        matches!(
            self,
            SystemSpec::Rect { .. } | SystemSpec::Lattice { .. } | SystemSpec::Custom { .. }
        )
    }

    /// The domain for elastic systems; custom file paths resolve against `base`.
    pub fn domain(&self, mesh_h: f64, base: &Path) -> Result<Option<DomainSpec>> {
        Ok(Some(match self {
            SystemSpec::Beam { .. } | SystemSpec::Ensemble { .. } => return Ok(None),
            SystemSpec::Rect { depth, ns, fixity } => {
                DomainSpec::rectangle(*depth, *ns, *fixity, mesh_h)?
            }
            SystemSpec::Lattice { grid } => DomainSpec::lattice(*grid, mesh_h)?,
            SystemSpec::Custom { source } => {
                if BUILTIN_CUSTOM.contains(&source.as_str()) {
                    DomainSpec::custom_from(source, mesh_h)?
                } else {
                    let path = base.join(source);
                    DomainSpec::custom_from(&path.to_string_lossy(), mesh_h)?
                }
            }
        }))
    }

    /// Directory name inside the store.
    pub fn dir_name(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSpec::Beam { k } => write!(f, "ss:{k}"),
            SystemSpec::Ensemble { k } => write!(f, "ens:{k}"),
            SystemSpec::Rect { depth, ns, fixity } => write!(f, "rect:{depth}:{ns}:{fixity}"),
            SystemSpec::Lattice { grid } => write!(f, "lattice:{grid}"),
            SystemSpec::Custom { source } => write!(f, "custom:{source}"),
        }
    }
}

impl FromStr for SystemSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("system {s:?}: {why}"));
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected kind:parameters"))?;
        let int = |v: &str, what: &str| -> Result<usize> {
            v.trim()
                .parse()
                .map_err(|_| bad(&format!("invalid {what} {v:?}")))
        };
        let beam_k = |v: &str| -> Result<usize> {
            let k = int(v, "support count")?;
            if (2..=MAX_SUPPORTS).contains(&k) {
                Ok(k)
            } else {
                Err(bad(&format!("support count must be in 2..={MAX_SUPPORTS}")))
            }
        };
        match kind {
            "ss" => Ok(SystemSpec::Beam { k: beam_k(rest)? }),
            "ens" => Ok(SystemSpec::Ensemble { k: beam_k(rest)? }),
            "rect" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [depth, ns, fixity] = parts[..] else {
                    return Err(bad("expected rect:depth:ns:fixity"));
                };
                let depth: f64 = depth.trim().parse().map_err(|_| bad("invalid depth"))?;
                if !RECT_DEPTHS.contains(&depth) {
                    return Err(bad(&format!("depth must be one of {RECT_DEPTHS:?}")));
                }
                let ns = int(ns, "sensor count")?;
                if !(MIN_SENSORS..=MAX_SENSORS).contains(&ns) {
                    return Err(bad(&format!(
                        "sensor count must be in {MIN_SENSORS}..={MAX_SENSORS}"
                    )));
                }
                let fixity = fixity
                    .trim()
                    .parse()
                    .map_err(|e: Error| bad(&e.to_string()))?;
                Ok(SystemSpec::Rect { depth, ns, fixity })
            }
            "lattice" => {
                let grid = int(rest, "grid")?;
                if !LATTICE_GRIDS.contains(&grid) {
                    return Err(bad(&format!("grid must be one of {LATTICE_GRIDS:?}")));
                }
                Ok(SystemSpec::Lattice { grid })
            }
            "custom" if !rest.trim().is_empty() => Ok(SystemSpec::Custom {
                source: rest.trim().to_string(),
            }),
            _ => Err(bad("unknown system kind (ss, ens, rect, lattice, custom)")),
        }
    }
}

/// Optional plot-data files written next to `table1.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricOutput {
    Curves,
    Scatter,
    Confusion,
}

fn all_outputs() -> Vec<MetricOutput> {
    vec![
        MetricOutput::Curves,
        MetricOutput::Scatter,
        MetricOutput::Confusion,
    ]
}

fn default_bucket() -> f64 {
    DEFAULT_BUCKET
}

fn default_mesh_h() -> f64 {
    DEFAULT_MESH_H
}

/// A sweep: corpus, systems, metric settings and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusParams,
    pub systems: Vec<String>,
    #[serde(default = "default_bucket")]
    pub bucket: f64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "all_outputs")]
    pub metrics: Vec<MetricOutput>,
    #[serde(default = "default_mesh_h")]
    pub mesh_h: f64,
    /// Minimum support gap fraction for all beams; per-k default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_min_gap: Option<f64>,
    pub output_dir: PathBuf,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// The part of a config that determines stored results.
#[derive(Serialize)]
struct DigestView<'a> {
    corpus: &'a CorpusParams,
    systems: Vec<String>,
    bucket: f64,
    norm: Norm,
    mesh_h: f64,
    beam_min_gap: Option<f64>,
}

impl ExperimentConfig {
    fn with_systems(
        master_seed: u64,
        n: usize,
        mesh_h: f64,
        systems: Vec<String>,
        output_dir: PathBuf,
    ) -> Self {
        Self {
            corpus: CorpusParams::new(master_seed, DEFAULT_LENGTH, n),
            systems,
            bucket: DEFAULT_BUCKET,
            norm: Norm::Linf,
            metrics: all_outputs(),
            mesh_h,
            beam_min_gap: None,
            output_dir,
            base_dir: PathBuf::new(),
        }
    }

    /// Single beams with 2, 3, 5 and 10 supports on the desk grid.
    pub fn desk(master_seed: u64, output_dir: PathBuf) -> Self {
        let systems = [2, 3, 5, 10].iter().map(|k| format!("ss:{k}")).collect();
        Self::with_systems(master_seed, DESK_N, DEFAULT_MESH_H, systems, output_dir)
    }

    /// All 63 systems on the desk grid and coarse meshes.
    pub fn desk_full(master_seed: u64, output_dir: PathBuf) -> Self {
        Self::with_systems(
            master_seed,
            DESK_N,
            DEFAULT_MESH_H,
            all_systems(),
            output_dir,
        )
    }

    /// All 63 systems at full fidelity.
    pub fn paper_scale(master_seed: u64, output_dir: PathBuf) -> Self {
        Self::with_systems(
            master_seed,
            PAPER_N,
            PAPER_MESH_H,
            all_systems(),
            output_dir,
        )
    }

    /// Reads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config: Self = crate::io::read_json(path)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// Parsed systems in config order.
    pub fn system_specs(&self) -> Result<Vec<SystemSpec>> {
        self.systems.iter().map(|s| s.parse()).collect()
    }

    pub fn beam_gap(&self, k: usize) -> f64 {
        self.beam_min_gap.unwrap_or_else(|| default_min_gap(k))
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.n < 2 {
            return Err(Error::Config(format!(
                "grid size N = {} is too small",
                self.corpus.n
            )));
        }
        if !(self.corpus.length > 0.0 && self.corpus.length.is_finite()) {
            return Err(Error::Config("corpus length must be positive".into()));
        }
        if !(self.bucket > 0.0 && self.bucket.is_finite()) {
            return Err(Error::Config("bucket size must be positive".into()));
        }
        if !(self.mesh_h > 0.0 && self.mesh_h.is_finite()) {
            return Err(Error::Config("mesh_h must be positive".into()));
        }
        if self.systems.is_empty() {
            return Err(Error::Config("no systems configured".into()));
        }
        let specs = self.system_specs()?;
        let mut ids = BTreeSet::new();
        let mut dirs = BTreeSet::new();
        for spec in &specs {
            let id = spec.to_string();
            if !ids.insert(id.clone()) || !dirs.insert(spec.dir_name()) {
                return Err(Error::Config(format!("duplicate system {id}")));
            }
            match spec {
                SystemSpec::Beam { k } | SystemSpec::Ensemble { k } => {
                    let m = self.beam_gap(*k);
                    let ok = m > 0.0
                        && if *k == 2 {
                            m < 1.0
                        } else {
                            m <= max_min_gap(*k)
                        };
                    if !ok {
                        return Err(Error::Config(format!(
                            "{id}: minimum gap {m} is not admissible"
                        )));
                    }
                }
                SystemSpec::Custom { .. } => {
                    spec.domain(self.mesh_h, &self.base_dir)
                        .map_err(|e| Error::Config(format!("{id}: {e}")))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the result-determining fields.
    pub fn digest(&self) -> Result<String> {
        let systems = self.system_specs()?.iter().map(|s| s.to_string()).collect();
        let view = DigestView {
            corpus: &self.corpus,
            systems,
            bucket: self.bucket,
            norm: self.norm,
            mesh_h: self.mesh_h,
            beam_min_gap: self.beam_min_gap,
        };
        // serde_json::Value keeps object keys sorted, which canonicalizes.
        let value = serde_json::to_value(&view).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex::encode(Sha256::digest(value.to_string().as_bytes())))
    }
}

/// The 63 systems of the full sweep: 9 single beams, 8 ensembles, 40
/// rectangles, 3 lattices and 3 custom domains.
pub fn all_systems() -> Vec<String> {
    let mut out: Vec<String> = (2..=MAX_SUPPORTS).map(|k| format!("ss:{k}")).collect();
    out.extend((3..=MAX_SUPPORTS).map(|k| format!("ens:{k}")));
    for fixity in [Fixity::SensorsOnly, Fixity::FullBottom] {
        for depth in RECT_DEPTHS {
            for ns in MIN_SENSORS..=MAX_SENSORS {
                out.push(format!("rect:{depth}:{ns}:{fixity}"));
            }
        }
    }
    out.extend(LATTICE_GRIDS.iter().map(|g| format!("lattice:{g}")));
    out.extend(BUILTIN_CUSTOM.iter().map(|c| format!("custom:{c}")));
    out
}

/// Per-system seed for beam support draws: independent of the other systems
/// in the config.
pub fn system_seed(master_seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(format!("{master_seed}/{id}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
