use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use smust::constellation::LegacyConstellation;
use smust::power_alloc::LutGrid;
use smust::sim::{
    build_config_lut, run_fairness_sweep, run_mimo_cdf, run_sched, write_csv, write_jsonl, Columns, Experiment,
    OutputFormat, ResultRecord, SimConfig, FAIRNESS_COLUMNS, MIMO_COLUMNS, SCHED_COLUMNS,
};
use smust::superposition::{Category, CompositeConstellation, CpacSet, PrimeCpacSet};
use smust::{Error, Result};

#[derive(Parser)]
#[command(name = "smust", version, about = "S-MUST link and system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output path; defaults to the config's output path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the SNR-indexed CPAC table (binary plus JSON sidecar).
    Lutgen {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        snr_start: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        snr_stop: Option<f64>,
        #[arg(long)]
        snr_step: Option<f64>,
    },
    /// Symmetric-channel fairness sweep.
    Sweep(Common),
    /// Multi-antenna worst-user rate distribution.
    Mimo {
        #[command(flatten)]
        common: Common,
        /// Load the table instead of building it from the config.
        #[arg(long)]
        lut: Option<PathBuf>,
        /// Override the symmetric-channel SNR.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
    },
    /// System-level scheduling run.
    Sched {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lut: Option<PathBuf>,
    },
    /// Dump a composite alphabet as CSV (I, Q, one bit word per user).
    Constellation(ConstellationArgs),
}

#[derive(Args)]
struct ConstellationArgs {
    /// smust_cat1..3 or must_cat1..3.
    #[arg(long, default_value = "smust_cat3")]
    category: String,
    #[arg(long, default_value = "qpsk")]
    modulation: String,
    #[arg(long, default_value_t = 2)]
    users: usize,
    /// Cat. 3 in-phase moduli.
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 3])]
    q: Vec<u64>,
    /// Cat. 3 quadrature moduli.
    #[arg(long, value_delimiter = ',', default_values_t = [3u64, 2])]
    p: Vec<u64>,
    /// Cat. 1/2 in-phase CPACs.
    #[arg(long, value_delimiter = ',', default_values_t = [2.3, 3.01])]
    alpha: Vec<f64>,
    /// Cat. 1/2 quadrature CPACs.
    #[arg(long, value_delimiter = ',', default_values_t = [3.11, 2.18])]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 31.0)]
    power: f64,
    /// MUST: near-user power fraction.
    #[arg(long, default_value_t = 0.2)]
    near_fraction: f64,
    /// MUST: index of the far user.
    #[arg(long, default_value_t = 0)]
    far: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, expected: Option<Experiment>) -> Result<SimConfig> {
    let mut cfg = SimConfig::load(&common.config)?;
    if let Some(e) = expected.filter(|e| *e != cfg.experiment) {
        return Err(Error::InvalidConfig(format!(
            "{} describes a {:?} experiment, not {:?}",
            common.config.display(),
            cfg.experiment,
            e
        )));
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if common.out.is_some() {
        cfg.output.path = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
            }
            std::fs::write(p, bytes).map_err(|e| Error::Io { path: p.into(), source: e })
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Io { path: "<stdout>".into(), source: e }),
    }
}

fn emit_records(cfg: &SimConfig, records: &[ResultRecord], columns: Columns, extra: serde_json::Value) -> Result<()> {
    let hash = cfg.hash();
    let mut buf = Vec::new();
    match cfg.output.format {
        OutputFormat::Csv => write_csv(records, columns, &hash, &mut buf)?,
        OutputFormat::Jsonl => write_jsonl(records, &hash, &mut buf)?,
    }
    write_output(cfg.output.path.as_deref(), &buf)?;
    if let Some(p) = &cfg.output.path {
        let mut summary = json!({ "out": p, "records": records.len(), "config_hash": hash });
        if let (Some(dst), serde_json::Value::Object(src)) = (summary.as_object_mut(), extra) {
            dst.extend(src);
        }
        println!("{summary}");
    }
    Ok(())
}

fn lut_for(cfg: &SimConfig, path: Option<&Path>) -> Result<LutGrid> {
    match path {
        Some(p) => LutGrid::load(p),
        None => build_config_lut(cfg),
    }
}

fn constellation(args: &ConstellationArgs) -> Result<String> {
    let c = LegacyConstellation::from_name(&args.modulation)?;
    let users = vec![c; args.users];
    let alphabet = match args.category.as_str() {
        "smust_cat1" | "smust_cat2" => {
            let cpacs = CpacSet::new(args.alpha.clone(), args.beta.clone(), args.power)?;
            if args.category == "smust_cat1" {
                CompositeConstellation::cat1(&cpacs, &users)?
            } else {
                CompositeConstellation::cat2(&cpacs, &users)?
            }
        }
        "smust_cat3" => {
            let primes = PrimeCpacSet::new(args.q.clone(), args.p.clone())?;
            CompositeConstellation::cat3(&primes, &users, args.power)?
        }
        "must_cat1" | "must_cat2" | "must_cat3" => {
            let cat = match args.category.as_str() {
                "must_cat1" => Category::MustCat1,
                "must_cat2" => Category::MustCat2,
                _ => Category::MustCat3,
            };
            CompositeConstellation::must(cat, args.near_fraction, &users, args.far, args.power)?
        }
        other => return Err(Error::UnsupportedScheme(other.to_string())),
    };
    Ok(alphabet.to_csv())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lutgen { common, snr_start, snr_stop, snr_step } => {
            let mut cfg = load(&common, None)?;
            cfg.lut.snr_db_start = snr_start.unwrap_or(cfg.lut.snr_db_start);
            cfg.lut.snr_db_stop = snr_stop.unwrap_or(cfg.lut.snr_db_stop);
            cfg.lut.snr_db_step = snr_step.unwrap_or(cfg.lut.snr_db_step);
            cfg.validate()?;
            let lut = build_config_lut(&cfg)?;
            let path = cfg.output.path.clone().unwrap_or_else(|| PathBuf::from("lut.bin"));
            lut.save(&path)?;
            println!(
                "{}",
                json!({ "out": path, "sidecar": LutGrid::sidecar_path(&path), "cells": lut.len(), "config_hash": cfg.hash() })
            );
        }
        Command::Sweep(common) => {
            let cfg = load(&common, Some(Experiment::Fairness))?;
            emit_records(&cfg, &run_fairness_sweep(&cfg)?, FAIRNESS_COLUMNS, json!({}))?;
        }
        Command::Mimo { common, lut, snr_db } => {
            let mut cfg = load(&common, Some(Experiment::Mimo))?;
            if let Some(db) = snr_db {
                cfg.mimo.snr_db = db;
                cfg.validate()?;
            }
            let lut = lut_for(&cfg, lut.as_deref())?;
            emit_records(&cfg, &run_mimo_cdf(&cfg, &lut)?, MIMO_COLUMNS, json!({}))?;
        }
        Command::Sched { common, lut } => {
            let cfg = load(&common, Some(Experiment::Sched))?;
            let lut = lut_for(&cfg, lut.as_deref())?;
            let outcome = run_sched(&cfg, &lut)?;
            let ops: serde_json::Map<String, serde_json::Value> = outcome
                .ops
                .iter()
                .map(|(name, ops)| (name.clone(), serde_json::to_value(ops).expect("counters serialize")))
                .collect();
            log::info!("operation counts: {ops:?}");
            let mut extra = json!({ "ops": ops });
            if let Some(path) = &cfg.output.path {
                let decisions = path.with_extension("decisions.jsonl");
                let hash = cfg.hash();
                let mut buf = Vec::new();
                for round in &outcome.rounds {
                    let mut line = serde_json::to_value(round).expect("decisions serialize");
                    if let Some(obj) = line.as_object_mut() {
                        obj.insert("schema_version".into(), json!(1));
                        obj.insert("config_hash".into(), json!(hash));
                    }
                    buf.extend_from_slice(line.to_string().as_bytes());
                    buf.push(b'\n');
                }
                write_output(Some(&decisions), &buf)?;
                extra["decisions"] = json!(decisions);
            }
            emit_records(&cfg, &outcome.records, SCHED_COLUMNS, extra)?;
        }
        Command::Constellation(args) => {
            let csv = constellation(&args)?;
            write_output(args.out.as_deref(), csv.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
