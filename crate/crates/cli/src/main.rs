use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fbcoding::airtime::{duty_cycle_table, DutyCycleRow, LoRaParams};
use fbcoding::degree::{optimal_degree_bruteforce, optimal_degree_closed, DegreeContext};
use fbcoding::experiment::{preset, ExperimentSpec, PRESETS};
use fbcoding::ingest::{ingest_run, read_measurements};
use fbcoding::sim::sweep::sweep;
use fbcoding::{Error, PolicyKind, RelayPolicy, SimConfig};

#[derive(Parser)]
#[command(name = "fbcoding", version, about = "Feedback-driven erasure coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for one or more seeds.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        /// Write the event trace of the run to this file (single seed only).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a preset or an experiment file and write a DFR table.
    Experiment {
        /// Preset name or path to an experiment TOML file.
        target: String,
        /// Override the experiment's seed list (comma-separated or `a..=b`).
        #[arg(long)]
        seeds: Option<String>,
        /// Override the number of symbols per run.
        #[arg(long)]
        n_symbols: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frame airtime, minimum coding rate and duty cycle for b = 1..=max_b.
    Airtime {
        #[arg(long, default_value_t = 6)]
        max_b: u32,
        #[arg(long, default_value_t = 7)]
        sf: u32,
        #[arg(long, default_value_t = 125_000)]
        bandwidth: u64,
        #[arg(long, default_value_t = 8)]
        preamble: u32,
        #[arg(long, default_value_t = 0)]
        header: u8,
        #[arg(long, default_value_t = 0)]
        low_data_rate: u8,
        #[arg(long, default_value_t = 1)]
        coding_rate: u8,
        #[arg(long, default_value_t = 4)]
        bytes_per_symbol: u32,
        #[arg(long, default_value_t = 60_000)]
        period_ms: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact argmax degree versus the closed-form degree over a (gap, beta) grid.
    DegreeTable {
        #[arg(long, default_value_t = 64)]
        max_gap: u64,
        /// Only print rows where the two disagree.
        #[arg(long)]
        mismatches_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run with measurement values as symbol payloads and verify recovery.
    Ingest {
        /// CSV of `timestamp,value` rows.
        input: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    Defaults {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct SimArgs {
    /// Base configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    relay: Option<RelayPolicy>,
    #[arg(long)]
    n_symbols: Option<u64>,
    #[arg(long)]
    delta: Option<u64>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    d_nf: Option<usize>,
    #[arg(long)]
    l_m: Option<u32>,
    #[arg(long)]
    l_o: Option<u32>,
    #[arg(long)]
    r_t: Option<usize>,
    #[arg(long)]
    r_m: Option<usize>,
    #[arg(long)]
    p_s: Option<f64>,
    #[arg(long)]
    p_gb: Option<f64>,
    #[arg(long)]
    p_bg: Option<f64>,
    #[arg(long)]
    p_fb: Option<f64>,
    #[arg(long)]
    symbol_bits: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds or an inclusive range `a..=b`.
    #[arg(long)]
    seeds: Option<String>,
}

impl SimArgs {
    fn config(&self) -> anyhow::Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::from_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if self.relay.is_some() {
            cfg.relay = self.relay;
        }
        if let Some(v) = self.symbol_bits {
            cfg.symbol_bits = v;
        }
        let numeric = [
            ("n_symbols", self.n_symbols.map(|v| v as f64)),
            ("delta", self.delta.map(|v| v as f64)),
            ("b", self.b.map(|v| v as f64)),
            ("d_nf", self.d_nf.map(|v| v as f64)),
            ("l_m", self.l_m.map(f64::from)),
            ("l_o", self.l_o.map(f64::from)),
            ("r_t", self.r_t.map(|v| v as f64)),
            ("r_m", self.r_m.map(|v| v as f64)),
            ("p_s", self.p_s),
            ("p_gb", self.p_gb),
            ("p_bg", self.p_bg),
            ("p_fb", self.p_fb),
            ("seed", self.seed.map(|v| v as f64)),
        ];
        for (key, value) in numeric {
            if let Some(v) = value {
                cfg.set_param(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seeds(&self, cfg: &SimConfig) -> anyhow::Result<Vec<u64>> {
        match &self.seeds {
            Some(s) => parse_seeds(s),
            None => Ok(vec![cfg.seed]),
        }
    }
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let usage = |reason: String| Error::InvalidConfig {
        key: "seeds".into(),
        reason,
    };
    let seeds: Vec<u64> = if let Some((lo, hi)) = s.split_once("..=") {
        let lo: u64 = lo.trim().parse().map_err(|_| usage(format!("bad range start `{lo}`")))?;
        let hi: u64 = hi.trim().parse().map_err(|_| usage(format!("bad range end `{hi}`")))?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| usage(format!("bad seed `{t}`"))))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(usage("empty seed list".into()).into());
    }
    Ok(seeds)
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(sim: &SimArgs, trace: Option<PathBuf>, out: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = sim.config()?;
    let seeds = sim.seeds(&cfg)?;
    if trace.is_some() && seeds.len() > 1 {
        return Err(Error::InvalidConfig {
            key: "trace".into(),
            reason: "a trace can only be written for a single seed".into(),
        }
        .into());
    }
    let mut w = output(out)?;
    writeln!(w, "seed,n,delivered,dfr,source_tx,relay_tx,source_xors,relay_xors")?;
    let results = if let Some(path) = trace {
        cfg.trace_output = Some(path);
        cfg.seed = seeds[0];
        vec![(seeds[0], fbcoding::run(&cfg)?)]
    } else {
        let rows = sweep(std::slice::from_ref(&cfg), &seeds)?;
        let row = rows.into_iter().next().expect("one config in, one row out");
        row.seeds.into_iter().zip(row.results).collect()
    };
    for (seed, r) in &results {
        let c = &r.counters;
        writeln!(
            w,
            "{seed},{},{},{:.8},{},{},{},{}",
            r.n, r.m, r.dfr, c.source_tx, c.relay_tx, c.source_xors, c.relay_xors
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_experiment(
    target: &str,
    seeds: Option<&str>,
    n_symbols: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let mut spec = if PRESETS.contains(&target) {
        preset(target)?
    } else if Path::new(target).is_file() {
        ExperimentSpec::from_file(Path::new(target))?
    } else {
        return Err(Error::InvalidConfig {
            key: "experiment".into(),
            reason: format!(
                "`{target}` is neither a file nor a preset; presets: {}",
                PRESETS.join(", ")
            ),
        }
        .into());
    };
    if let Some(s) = seeds {
        spec.seeds = parse_seeds(s)?;
    }
    if let Some(n) = n_symbols {
        spec.base.n_symbols = n;
    }
    spec.validate()?;
    let rows = spec.run()?;
    let out = out.map(Path::to_path_buf).or_else(|| spec.output.clone());
    let mut w = output(out.as_deref())?;
    spec.write_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_degree_table(max_gap: u64, mismatches_only: bool, out: Option<&Path>) -> anyhow::Result<()> {
    let mut w = output(out)?;
    writeln!(w, "gap,beta,exact_degree,closed_form_degree,agree")?;
    for gap in 3..=max_gap {
        for beta in 2..gap {
            let ctx = DegreeContext::new(gap, beta)?;
            let exact = optimal_degree_bruteforce(ctx);
            let closed = optimal_degree_closed(ctx);
            let agree = fbcoding::degree::objective(ctx, exact)? == fbcoding::degree::objective(ctx, closed)?;
            if !mismatches_only || !agree {
                writeln!(w, "{gap},{beta},{exact},{closed},{agree}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_ingest(input: &Path, sim: &SimArgs, out: Option<&Path>) -> anyhow::Result<()> {
    let cfg = sim.config()?;
    let rows = read_measurements(input)?;
    let (result, report) = ingest_run(&cfg, &rows)?;
    let mut w = output(out)?;
    writeln!(w, "symbols,{}", result.generated)?;
    writeln!(w, "dfr,{:.8}", result.dfr)?;
    writeln!(w, "intact,{}", report.intact.len())?;
    writeln!(w, "corrupted,{}", report.corrupted.len())?;
    let expired: Vec<String> = report.expired.iter().map(u64::to_string).collect();
    writeln!(w, "expired,{}", expired.join(";"))?;
    w.flush()?;
    if !report.all_intact() {
        anyhow::bail!(
            "{} delivered payloads differ from the input: {:?}",
            report.corrupted.len(),
            report.corrupted
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { sim, trace, out } => cmd_run(&sim, trace, out.as_deref()),
        Command::Experiment {
            target,
            seeds,
            n_symbols,
            out,
        } => cmd_experiment(&target, seeds.as_deref(), n_symbols, out.as_deref()),
        Command::Airtime {
            max_b,
            sf,
            bandwidth,
            preamble,
            header,
            low_data_rate,
            coding_rate,
            bytes_per_symbol,
            period_ms,
            out,
        } => {
            let p = LoRaParams {
                spreading_factor: sf,
                bandwidth_hz: bandwidth,
                preamble_symbols: preamble,
                header,
                low_data_rate,
                coding_rate,
                bytes_per_symbol,
                period_ms,
            };
            let rows = duty_cycle_table(1..=max_b, &p)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", DutyCycleRow::CSV_HEADER)?;
            for r in &rows {
                writeln!(w, "{}", r.csv_line())?;
            }
            w.flush()?;
            Ok(())
        }
        Command::DegreeTable {
            max_gap,
            mismatches_only,
            out,
        } => cmd_degree_table(max_gap, mismatches_only, out.as_deref()),
        Command::Ingest { input, sim, out } => cmd_ingest(&input, &sim, out.as_deref()),
        Command::Defaults { out } => {
            let mut w = output(out.as_deref())?;
            write!(w, "{}", SimConfig::default().to_toml_string())?;
            w.flush()?;
            Ok(())
        }
    }
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<Error>(),
        Some(Error::InvalidConfig { .. } | Error::InvalidInput(_) | Error::Parse { .. } | Error::Toml(_))
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
