use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use mech_lsh::elastic::{write_vtk, ElasticHasher, Material};
use mech_lsh::harness::{
    self, compute_system_seeded, hashes_to_csv, read_hashes, system_seed, ExperimentConfig,
    ResultStore, RunOptions, SupportRecord, SystemHashes, SystemSpec, HASHES_FILE, SUPPORTS_FILE,
};
use mech_lsh::io::{write_json, write_text};
use mech_lsh::loads::{generate_corpus_with, read_corpus, write_corpus, CorpusParams, NoiseConfig};
use mech_lsh::metrics::{confusion_matrix, EvalContext, DEFAULT_BUCKET};
use mech_lsh::{theory, Error, Norm, Result};

#[derive(Parser)]
#[command(
    name = "mech-lsh",
    version,
    about = "Mechanical systems as locality-sensitive hash functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labelled 400-load corpus.
    GenLoads {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = harness::DESK_N)]
        n: usize,
        #[arg(long, default_value_t = mech_lsh::loads::DEFAULT_LENGTH)]
        length: f64,
        /// Noise amplitude as a fraction of the base shape's peak.
        #[arg(long)]
        amplitude: Option<f64>,
        /// Noise lattice cells across the first octave.
        #[arg(long)]
        base_cells: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hash every load of a corpus through one system.
    Simulate {
        /// ss:k, ens:k, rect:depth:ns:fixity, lattice:g or custom:C1|file
        #[arg(long)]
        system: String,
        #[arg(long)]
        loads: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum support gap fraction (beams).
        #[arg(long)]
        m: Option<f64>,
        /// Support draw seed (beams); derived from the corpus seed by default.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = mech_lsh::elastic::DEFAULT_MESH_H)]
        mesh_h: f64,
        /// Also write `mesh.vtk` with the solution for this load index.
        #[arg(long)]
        vtk_load: Option<usize>,
    },
    /// Spearman rho, 1-NN accuracy and collision curve of stored hashes.
    Evaluate {
        /// Directory holding hashes.csv (or the file itself).
        #[arg(long)]
        hashes: PathBuf,
        #[arg(long)]
        loads: PathBuf,
        #[arg(long = "S", alias = "bucket", default_value_t = DEFAULT_BUCKET)]
        s: f64,
        #[arg(long, default_value = "linf")]
        norm: Norm,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the confusion matrix of the 1-NN predictions here.
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Closed-form and Monte-Carlo beam theory.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Run an experiment sweep from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Overwrite a store produced by a different config.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-emit the CSV report of a finished store.
    Report {
        #[arg(long)]
        store: PathBuf,
    },
    /// Print a preset experiment config as JSON.
    InitConfig {
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "store")]
        output_dir: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Probability that a random 3-support composite beam misses a spike triplet.
    P2 {
        #[arg(long = "N", alias = "n")]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        m: f64,
        /// Monte-Carlo trials; the closed form alone when absent.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collision radius R of a beam family.
    Radius {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        m: f64,
        #[arg(long = "L", alias = "length", default_value_t = mech_lsh::loads::DEFAULT_LENGTH)]
        l: f64,
        #[arg(long = "S", alias = "bucket", default_value_t = DEFAULT_BUCKET)]
        s: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Ss,
    Ssc3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Single beams k = 2, 3, 5, 10 on the desk grid.
    Desk,
    /// All 63 systems on the desk grid and coarse meshes.
    DeskFull,
    /// All 63 systems at N = 1000 and finer meshes.
    Paper,
}

/// Prints to stdout, quietly stopping if the reader has gone away.
fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(value: &serde_json::Value) {
    print_stdout(&serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn gen_loads(
    seed: u64,
    n: usize,
    length: f64,
    amplitude: Option<f64>,
    base_cells: Option<f64>,
    out: &Path,
) -> Result<()> {
    let mut params = CorpusParams::new(seed, length, n);
    let defaults = NoiseConfig::default();
    params.noise.amplitude = amplitude.unwrap_or(defaults.amplitude);
    params.noise.base_cells = base_cells.unwrap_or(defaults.base_cells);
    let corpus = generate_corpus_with(params)?;
    write_corpus(&corpus, out)?;
    eprintln!("wrote {} loads to {}", corpus.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    system: &str,
    loads: &Path,
    out: &Path,
    m: Option<f64>,
    seed: Option<u64>,
    mesh_h: f64,
    vtk_load: Option<usize>,
) -> Result<()> {
    let spec: SystemSpec = system.parse()?;
    let corpus = read_corpus(loads)?;
    let id = spec.to_string();
    let mut config = ExperimentConfig::desk(corpus.params.master_seed, out.to_path_buf());
    config.corpus = corpus.params;
    config.systems = vec![id.clone()];
    config.mesh_h = mesh_h;
    config.beam_min_gap = m;
    config.validate()?;
    let seed = seed.unwrap_or_else(|| system_seed(corpus.params.master_seed, &id));
    let (hashes, supports) = compute_system_seeded(&spec, &config, corpus.loads(), seed)?;
    write_simulation(out, &id, &hashes, supports)?;
    if let Some(i) = vtk_load {
        let domain = spec
            .domain(mesh_h, Path::new(""))?
            .ok_or_else(|| Error::Config("--vtk-load needs an elastic system".into()))?;
        let load = corpus
            .loads()
            .get(i)
            .ok_or_else(|| Error::Config(format!("load index {i} out of range")))?;
        let hasher = ElasticHasher::new(&domain, &Material::default())?;
        let solution = hasher.solve(load)?;
        let path = out.join("mesh.vtk");
        write_vtk(&path, hasher.mesh(), Some(&solution))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn write_simulation(
    out: &Path,
    id: &str,
    hashes: &SystemHashes,
    supports: Option<SupportRecord>,
) -> Result<()> {
    write_text(&out.join(HASHES_FILE), &hashes_to_csv(id, hashes))?;
    if let Some(s) = supports {
        write_json(&out.join(SUPPORTS_FILE), &s)?;
    }
    eprintln!("wrote {}", out.join(HASHES_FILE).display());
    Ok(())
}

fn evaluate(
    hashes: &Path,
    loads: &Path,
    s: f64,
    norm: Norm,
    out: Option<&Path>,
    confusion: Option<&Path>,
) -> Result<()> {
    let file = if hashes.is_dir() {
        hashes.join(HASHES_FILE)
    } else {
        hashes.to_path_buf()
    };
    let groups = read_hashes(&file)?;
    let corpus = read_corpus(loads)?;
    let context = EvalContext::for_loads(corpus.loads(), s, norm)?;
    let (id, report) = match groups.as_slice() {
        [] => return Err(Error::Config(format!("{}: no hashes", file.display()))),
        [(id, h)] if !id.contains('#') => (id.clone(), context.evaluate(id, h)?),
        [(first, _), ..] => {
            let id = first.split('#').next().unwrap_or(first).to_string();
            let members: Vec<_> = groups.iter().map(|g| g.1.clone()).collect();
            (id.clone(), context.evaluate_ensemble(&id, &members)?)
        }
    };
    let spec = id.parse::<SystemSpec>().ok();
    let depth = spec
        .as_ref()
        .and_then(|s| {
            s.domain(mech_lsh::elastic::DEFAULT_MESH_H, Path::new(""))
                .ok()
                .flatten()
        })
        .map(|d| d.depth);
    let value = json!({
        "system_id": id,
        "family": spec.as_ref().map_or("unknown", |s| s.family()),
        "ns": groups[0].1.first().map_or(0, |h| h.ns()),
        "depth": depth,
        "spearman_rho": report.spearman_rho,
        "accuracy": report.accuracy,
        "curve": report.curve,
    });
    match out {
        Some(path) => write_json(path, &value)?,
        None => print_json(&value),
    }
    if let Some(path) = confusion {
        write_text(
            path,
            &confusion_matrix(&report.predictions, &context.labels)?.to_csv(),
        )?;
    }
    Ok(())
}

fn theory_cmd(command: TheoryCommand) -> Result<()> {
    match command {
        TheoryCommand::P2 { n, m, trials, seed } => {
            let analytic = theory::p2_analytic(n).ok();
            let value = match trials {
                Some(trials) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let est = theory::p2_monte_carlo(n, m, trials, &mut rng)?;
                    json!({"value": est.value, "stderr": est.stderr, "trials": est.trials, "analytic": analytic})
                }
                None => json!({ "value": theory::p2_analytic(n)? }),
            };
            print_json(&value);
        }
        TheoryCommand::Radius { family, m, l, s } => {
            let r = match family {
                Family::Ss => theory::collision_radius_ss(m, l, s)?,
                Family::Ssc3 => theory::collision_radius_ssc3(m, l, s)?,
            };
            print_json(&json!({ "value": r }));
        }
    }
    Ok(())
}

fn run(config: &Path, resume: bool, force: bool, workers: Option<usize>) -> Result<bool> {
    let config = ExperimentConfig::load(config)?;
    let options = RunOptions {
        resume,
        force,
        workers,
    };
    let summary = harness::run_experiment(&config, &options)?;
    eprintln!(
        "store {}: {} hashed, {} evaluated, {} already complete, {} failed",
        summary.store.display(),
        summary.solved.len(),
        summary.evaluated.len(),
        summary.skipped.len(),
        summary.failures.len()
    );
    for f in &summary.failures {
        eprintln!("  {} failed during {}: {}", f.system_id, f.stage, f.error);
    }
    report(&summary.store)?;
    Ok(summary.all_succeeded())
}

fn report(store: &Path) -> Result<bool> {
    let store = ResultStore::open(store)?;
    for path in harness::emit_report(&store)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(store.failures().is_empty())
}

fn init_config(preset: Preset, seed: u64, output_dir: PathBuf, out: Option<&Path>) -> Result<()> {
    let config = match preset {
        Preset::Desk => ExperimentConfig::desk(seed, output_dir),
        Preset::DeskFull => ExperimentConfig::desk_full(seed, output_dir),
        Preset::Paper => ExperimentConfig::paper_scale(seed, output_dir),
    };
    match out {
        Some(path) => write_json(path, &config),
        None => {
            print_stdout(&serde_json::to_string_pretty(&config).expect("config serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenLoads {
            seed,
            n,
            length,
            amplitude,
            base_cells,
            out,
        } => gen_loads(seed, n, length, amplitude, base_cells, &out).map(|_| true),
        Command::Simulate {
            system,
            loads,
            out,
            m,
            seed,
            mesh_h,
            vtk_load,
        } => simulate(&system, &loads, &out, m, seed, mesh_h, vtk_load).map(|_| true),
        Command::Evaluate {
            hashes,
            loads,
            s,
            norm,
            out,
            confusion,
        } => evaluate(
            &hashes,
            &loads,
            s,
            norm,
            out.as_deref(),
            confusion.as_deref(),
        )
        .map(|_| true),
        Command::Theory { command } => theory_cmd(command).map(|_| true),
        Command::Run {
            config,
            resume,
            force,
            workers,
        } => run(&config, resume, force, workers),
        Command::Report { store } => report(&store),
        Command::InitConfig {
            preset,
            seed,
            output_dir,
            out,
        } => init_config(preset, seed, output_dir, out.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
