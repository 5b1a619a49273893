use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iscsc::opt::{validate_outage_mc, BtiKind};
use iscsc::sim::{
    load_config, read_designs, run_simulation, write_outputs, FilterKind, Scenario, SlotStatus, DESIGN_FILE,
};
use iscsc::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_ALL_INFEASIBLE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "iscsc", version, about = "Semantic ISAC beamforming and tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its result files.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario file without running it.
    Validate {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte-Carlo outage check of every optimized slot of a saved run.
    McOutage {
        /// Run directory written by `run`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["ekf", "pf", "none"])]
    filter: Option<String>,
    #[arg(long)]
    no_semantic: bool,
    #[arg(long)]
    perfect_csi: bool,
    /// Per-slot Monte-Carlo outage draws during the run.
    #[arg(long)]
    mc_samples: Option<usize>,
}

impl Overrides {
    fn scenario(&self) -> iscsc::Result<Scenario> {
        let mut cfg = load_config(&self.config)?.config;
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
        }
        if let Some(f) = &self.filter {
            cfg.simulation.filter = f.parse::<FilterKind>()?;
        }
        if self.no_semantic {
            cfg.semantic.enabled = false;
        }
        if self.perfect_csi {
            cfg.channel.perfect_csi = true;
        }
        if let Some(n) = self.mc_samples {
            cfg.simulation.mc_samples = n;
        }
        cfg.resolve()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn run(overrides: &Overrides, out: &Path) -> iscsc::Result<u8> {
    let scenario = overrides.scenario()?;
    let result = run_simulation(&scenario)?;
    let art = write_outputs(&result, &scenario, out)?;
    let infeasible = result.records.iter().filter(|r| r.status == SlotStatus::Infeasible).count();
    println!(
        "{} slots, {} feasible, {} infeasible -> {}",
        result.records.len(),
        result.feasible_slots(),
        infeasible,
        art.dir.display()
    );
    if let Some(why) = &result.stopped_early {
        println!("stopped early: {why}");
    }
    if !result.records.is_empty() && infeasible == result.records.len() {
        return Ok(EXIT_ALL_INFEASIBLE);
    }
    Ok(0)
}

fn mc_outage(dir: &Path, samples: usize, seed: u64) -> iscsc::Result<u8> {
    let designs = read_designs(&dir.join(DESIGN_FILE))?;
    let path = dir.join("outage.csv");
    let mut csv = String::from("slot,constraint,vehicle,stream,violations,samples,rate,std_error,ci_low,ci_high,epsilon,within\n");
    let (mut checked, mut failed) = (0usize, 0usize);
    for d in &designs {
        let est = validate_outage_mc(
            &d.beams,
            &d.intended,
            &d.eavesdroppers,
            &d.outage_targets(),
            samples,
            seed ^ d.slot as u64,
        )?;
        for o in est {
            let (name, vehicle, stream, eps) = match o.kind {
                BtiKind::Intended { k } => ("intended", k, k, d.epsilon_intended),
                BtiKind::Eavesdropper { l, k } => ("eavesdropper", l, k, d.epsilon_eavesdropper),
            };
            let ok = o.within(eps, 3.0);
            checked += 1;
            failed += usize::from(!ok);
            csv.push_str(&format!(
                "{},{name},{vehicle},{stream},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}\n",
                d.slot,
                o.violations,
                o.samples,
                o.rate,
                o.std_error,
                o.interval.0,
                o.interval.1,
                eps,
                u8::from(ok)
            ));
        }
    }
    std::fs::write(&path, csv).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    println!(
        "{} slots, {checked} constraints, {failed} above epsilon + 3 SE -> {}",
        designs.len(),
        path.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Run { overrides, out } => run(overrides, out),
        Command::Validate { overrides } => overrides.scenario().map(|s| {
            println!(
                "ok: {} antennas, {} vehicles ({} intended), {} slots",
                s.geometry.num_antennas,
                s.vehicles.len(),
                s.num_intended(),
                s.config.simulation.slots
            );
            0
        }),
        Command::McOutage { out, mc_samples, seed } => mc_outage(out, *mc_samples, *seed),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
