use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use athena_sim::coordinator::StateEncoder;
use athena_sim::harness::ablation::write_ablation;
use athena_sim::harness::{
    ablation_run, geomean_report, grid_search_dse, read_csv, run_matrix, run_one, write_csv, DseMode, Grid, RunConfig,
    SearchSpace, TraceSpec,
};

#[derive(Parser)]
#[command(name = "athena-sim", version, about = "Coordinate prefetchers and off-chip prediction in a trace-driven simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// key = value config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set policy=naive
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> athena_sim::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            c.apply_override(kv)?;
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Coordinate,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic trace file
    GenTrace {
        /// stream:..., chase:... or mix:...
        spec: String,
        #[arg(short, long)]
        out: PathBuf,
        /// Records to generate unless the spec sets n
        #[arg(short, long, default_value_t = 1_100_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run one configuration and print its result row
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the row as CSV here instead of stdout
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Print the effective config and exit
        #[arg(long)]
        dump_config: bool,
    },
    /// Run the Cartesian product of axes on top of a base config
    Matrix {
        /// Grid file: config lines plus `axis key = v1 | v2` lines
        #[arg(short, long)]
        grid: Option<PathBuf>,
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(short, long, value_name = "KEY=V1|V2")]
        axis: Vec<String>,
        /// 0 uses every core
        #[arg(short, long, default_value_t = 0)]
        workers: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Grid-search config keys for the best geomean speedup
    Dse {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// KEY=LO:HI:STEP or KEY=V1|V2
        #[arg(short, long, required = true)]
        axis: Vec<String>,
        /// Tuning trace; repeatable
        #[arg(short, long, required = true)]
        trace: Vec<String>,
        #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
        mode: Mode,
        #[arg(long, default_value_t = 4)]
        max_passes: usize,
        #[arg(short, long, default_value_t = 0)]
        workers: usize,
        /// Scoreboard CSV
        #[arg(long)]
        scoreboard: Option<PathBuf>,
    },
    /// Add state features one at a time, then the uncorrelated reward
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Feature order; defaults to the config's state_features
        #[arg(short, long)]
        features: Option<String>,
        #[arg(short, long, default_value_t = 0)]
        workers: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Geomean speedup per policy from a results CSV
    Report {
        csv: PathBuf,
        #[arg(short, long, default_value = "none")]
        baseline: String,
    },
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> athena_sim::Result<bool> {
    match cli.cmd {
        Cmd::GenTrace { spec, out, n, seed } => {
            let t: TraceSpec = spec.parse()?;
            let loaded = t.load(n, seed)?;
            loaded.save(&out)?;
            eprintln!("wrote {} records to {}", loaded.records.len(), out.display());
        }
        Cmd::Run { cfg, out, dump_config } => {
            let c = cfg.load()?;
            if dump_config {
                c.validate()?;
                print!("{}", c.to_text());
                return Ok(true);
            }
            let r = run_one(&c)?;
            write_csv(output(out.as_deref())?, &[r.row()])?;
            eprintln!("ipc {:.4}  speedup {:.4}", r.ipc(), r.speedup());
        }
        Cmd::Matrix { grid, set, axis, workers, out } => {
            let mut g = match grid {
                Some(p) => Grid::parse(&std::fs::read_to_string(p)?)?,
                None => Grid::default(),
            };
            for kv in &set {
                g.base.apply_override(kv)?;
            }
            for a in &axis {
                g.add_axis_spec(a)?;
            }
            let (rows, ok) = run_matrix(&g, workers);
            write_csv(output(out.as_deref())?, &rows)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", rows.len());
            }
            return Ok(ok);
        }
        Cmd::Dse { cfg, axis, trace, mode, max_passes, workers, scoreboard } => {
            let base = cfg.load()?;
            let mut space = SearchSpace::default();
            for a in &axis {
                space.add_spec(a)?;
            }
            let traces = trace.iter().map(|t| t.parse()).collect::<athena_sim::Result<Vec<TraceSpec>>>()?;
            let mode = match mode {
                Mode::Exhaustive => DseMode::Exhaustive,
                Mode::Coordinate => DseMode::CoordinateDescent { max_passes },
            };
            let r = grid_search_dse(&base, &space, &traces, mode, workers)?;
            if let Some(p) = scoreboard {
                r.write_scoreboard(BufWriter::new(File::create(p)?))?;
            }
            eprintln!("{} points evaluated, best objective {:.4}", r.scoreboard.len(), r.best_score);
            for (k, v) in r.keys.iter().zip(&r.best) {
                println!("{k} = {v}");
            }
        }
        Cmd::Ablate { cfg, features, workers, out } => {
            let base = cfg.load()?;
            let order = match features {
                Some(f) => StateEncoder::parse_list(&f)?,
                None => base.sim.athena.encoder.clone(),
            };
            let rows = ablation_run(&base, order.features(), workers)?;
            write_ablation(output(out.as_deref())?, &rows)?;
        }
        Cmd::Report { csv, baseline } => {
            let rows = read_csv(File::open(csv)?)?;
            println!("{}", geomean_report(&rows, &baseline)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
