use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use luqpi::bench::{emit_report, run_experiment, ExperimentConfig};
use luqpi::eek::{beek_from_eek_samples, eval_eek, random_inputs, EekConcept, EekSample, Embedding};
use luqpi::learning::{run_trials, Task};
use luqpi::modmath::{group_gen, GroupDescription};
use luqpi::rydberg::{generate_dataset, load_grid, read_jsonl, write_jsonl};

#[derive(Parser)]
#[command(name = "luqpi", version, about = "Privileged-information learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the n-bit safe-prime group as JSON.
    GenGroup {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit EEK samples and their BEEK counterparts as JSON lines.
    EekDemo {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also print the concept key.
        #[arg(long)]
        reveal_key: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn EEK or BEEK concepts from one featured sample, CSV per trial.
    LuqpiRun {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        test_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semi-supervised discrete-cube-root demo, JSON report.
    DcrDemo {
        #[arg(long)]
        bits: u32,
        #[arg(long, default_value_t = 1)]
        labeled: usize,
        #[arg(long, default_value_t = 16)]
        featured: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        test_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground-state phase dataset for a Rydberg chain, JSON lines.
    RydbergGen {
        #[arg(long)]
        atoms: usize,
        /// `builtin` or a file with one `delta_over_omega r0_over_a` pair per line.
        #[arg(long, default_value = "builtin")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// SVM vs SVM+ phase-classification experiment.
    Benchmark {
        #[arg(long)]
        dataset: PathBuf,
        /// TOML or JSON; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn json_line<W: Write + ?Sized, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ConceptLine<'a> {
    kind: &'static str,
    group: &'a GroupDescription,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
}

#[derive(Serialize)]
struct SampleLine<'a, T> {
    kind: &'static str,
    index: usize,
    #[serde(flatten)]
    sample: &'a T,
}

fn eek_demo(n: u32, samples: usize, seed: u64, reveal_key: bool, w: &mut dyn Write) -> Result<()> {
    let group = group_gen(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concept = EekConcept::random(group.clone(), &mut rng);
    let key = reveal_key.then(|| concept.key().to_string());
    json_line(w, &ConceptLine { kind: "concept", group: &group, key })?;
    let eek: Vec<EekSample> = (0..samples)
        .map(|_| {
            let inputs = random_inputs(&group, &mut rng);
            let label = eval_eek(&concept, &inputs)?;
            Ok(EekSample { inputs, label })
        })
        .collect::<Result<_>>()?;
    let beek = beek_from_eek_samples(&Embedding::new(group), &eek, &mut rng)?;
    for (index, (e, b)) in eek.iter().zip(&beek).enumerate() {
        json_line(w, &SampleLine { kind: "eek", index, sample: e })?;
        json_line(w, &SampleLine { kind: "beek", index, sample: b })?;
    }
    Ok(())
}

fn benchmark(dataset: &Path, config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let samples = read_jsonl(dataset)?;
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let output = run_experiment(&cfg, &samples)?;
    let paths = emit_report(&output, out)?;
    eprintln!(
        "{} rows; wrote {}, {} and {} plot files",
        output.rows.len(),
        paths.csv.display(),
        paths.summary.display(),
        paths.plots.len()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenGroup { n, out } => {
            let mut w = sink(&out)?;
            json_line(&mut *w, &group_gen(n)?)?;
            w.flush()?;
        }
        Command::EekDemo { n, samples, seed, reveal_key, out } => {
            let mut w = sink(&out)?;
            eek_demo(n, samples, seed, reveal_key, &mut *w)?;
            w.flush()?;
        }
        Command::LuqpiRun { task, n, trials, seed, test_size, out } => {
            let records = run_trials(task, n, trials, seed, test_size)?;
            let mut csv = csv::Writer::from_writer(sink(&out)?);
            for r in &records {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
        Command::DcrDemo { bits, labeled, featured, seed, test_size, out } => {
            let report = luqpi::dcr::run_demo(bits, labeled, featured, seed, test_size)?;
            let mut w = sink(&out)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
            w.flush()?;
        }
        Command::RydbergGen { atoms, grid, out, seed } => {
            let points = load_grid(&grid)?;
            let samples = generate_dataset(&points, atoms, seed)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            write_jsonl(&samples, &mut w)?;
            w.flush()?;
            let mut counts = [0usize; 3];
            samples.iter().for_each(|s| counts[s.label.index()] += 1);
            eprintln!(
                "{} points at N={atoms}: {} disordered, {} z2, {} z3",
                samples.len(),
                counts[0],
                counts[1],
                counts[2]
            );
        }
        Command::Benchmark { dataset, config, out, seed } => benchmark(&dataset, config.as_deref(), &out, seed)?,
    }
    Ok(())
}
