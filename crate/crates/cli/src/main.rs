use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tropcrit::gallery::{gallery, GalleryCase, FAMILIES};
use tropcrit::newton::{dimension_probe, SampleStatus};
use tropcrit::problem::{parse_generators, parse_order, preset, PresetParams, ProblemSpec, PRESETS};
use tropcrit::rational::parse_rational;
use tropcrit::tropical::to_svg;
use tropcrit::{crit_trop, potential, Error};

const EXIT_PARSE: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "tropcrit", version, about = "Tropical critical loci of toric potential functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the potential function.
    Potential {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Print JSON instead of the formula.
        #[arg(long)]
        json: bool,
    },
    /// Compute the tropical critical locus as JSON.
    Tropical {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Also write an SVG figure (two-dimensional polytopes only).
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Lift sample points to Novikov-field solutions and probe the dimension.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Write every gallery figure and its JSON to a directory.
    Gallery {
        #[arg(default_value = "gallery")]
        dir: PathBuf,
        /// Restrict to one family.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(FAMILIES))]
        only: Option<String>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    /// A preset name or the path of a JSON problem file.
    problem: String,
    /// Columns of K, e.g. `1,2` or `1,0,2;0,1,3`; `-` for the trivial subtorus.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// Truncation order, e.g. `5` or `7/2`.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Parse(String),
    Verify(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Parse(e.to_string())
    }
}

impl ProblemArgs {
    fn load(&self) -> Result<ProblemSpec, Failure> {
        let mut spec = if PRESETS.contains(&self.problem.as_str()) {
            let mut params = PresetParams::default();
            if let Some(a) = &self.alpha {
                params.alpha = parse_rational(a)?;
            }
            if let Some(c) = &self.c {
                params.c = parse_rational(c)?;
            }
            if let Some(d) = &self.d {
                params.d = parse_rational(d)?;
            }
            ProblemSpec::new(preset(&self.problem, &params)?, Vec::new())?
        } else if !Path::new(&self.problem).exists() && !self.problem.ends_with(".json") {
            return Err(Failure::Parse(format!(
                "unknown preset {:?} (expected one of {} or a JSON file)",
                self.problem,
                PRESETS.join(", ")
            )));
        } else {
            let text = fs::read_to_string(&self.problem)
                .map_err(|e| Failure::Io(format!("{}: {e}", self.problem)))?;
            ProblemSpec::from_json(&text)?
        };
        if let Some(k) = &self.k {
            spec.generators = parse_generators(k)?;
        }
        if let Some(o) = &self.order {
            spec.order = parse_order(o)?;
        }
        if let Some(n) = self.samples {
            spec.samples = n;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Potential { problem, json } => {
            let spec = problem.load()?;
            let po = potential(&spec.polytope, &spec.corrections)?;
            if json {
                println!("{}", po.to_json());
            } else {
                println!("{po}");
            }
        }
        Command::Tropical { problem, svg } => {
            let spec = problem.load()?;
            let c = crit_trop(&spec.polytope, &spec.subtorus()?, &spec.corrections)?;
            println!("{}", c.to_json_pretty());
            if let Some(path) = svg {
                write(&path, &to_svg(&c, &spec.polytope)?)?;
            }
        }
        Command::Verify { problem } => {
            let spec = problem.load()?;
            let rep = dimension_probe(
                &spec.polytope,
                &spec.subtorus()?,
                &spec.corrections,
                spec.samples,
                &spec.order,
                spec.seed,
            )?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            let failed = rep.reports.iter().filter(|r| r.status == SampleStatus::Failed).count();
            if failed > 0 {
                return Err(Failure::Verify(format!("{failed} of {} samples failed to lift", rep.samples)));
            }
        }
        Command::Gallery { dir, only } => {
            let cases: Vec<GalleryCase> = gallery()
                .into_iter()
                .filter(|c| only.as_deref().is_none_or(|f| c.family == f))
                .collect();
            let json_dir = dir.join("json");
            fs::create_dir_all(&json_dir).map_err(|e| Failure::Io(format!("{}: {e}", json_dir.display())))?;
            let results: Vec<Result<(), Failure>> = cases
                .par_iter()
                .map(|case| {
                    let c = case.compute()?;
                    write(&dir.join(format!("{}.svg", case.name)), &to_svg(&c, &case.polytope)?)?;
                    write(&json_dir.join(format!("{}.json", case.name)), &format!("{}\n", c.to_json_pretty()))
                })
                .collect();
            for r in results {
                r?;
            }
            for case in &cases {
                println!("{}", case.name);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("TROPCRIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Parse(m) => (EXIT_PARSE, m),
                Failure::Verify(m) => (EXIT_VERIFY, m),
                Failure::Io(m) => (EXIT_IO, m),
            };
            eprintln!("tropcrit: {msg}");
            ExitCode::from(code)
        }
    }
}
