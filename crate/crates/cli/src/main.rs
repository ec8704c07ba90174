use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand as ClapSubcommand};
use qci_lab::config::{ExperimentConfig, Subcommand};
use qci_lab::experiments;
use qci_lab::output;
use qci_lab::reproduce::{reproduce_all, ReproduceOptions};

/// Experiments on quantum completely integrable systems: geodesic flows,
/// moment maps, eigenfunction sup norms, quasimodes and lattice counts.
///
/// Every experiment reads a flat `key = value` config (`--config FILE`),
/// then applies `--key value` overrides. CSV/JSON artifacts go to
/// `--out DIR` (or the config's `output`). Exit status: 0 ok, 2 finished
/// with assumption warnings, 1 error. `QCI_LAB_THREADS` caps parallelism.
#[derive(Parser)]
#[command(name = "qci-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
    /// Parameter overrides as `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    params: Vec<String>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Check a profile against the standing assumptions.
    Validate(Common),
    /// First-return map of equatorial geodesics and Zoll verdict.
    Returnmap(Common),
    /// Shortest δ-loops from a point over a fan of directions.
    Loops(Common),
    /// Rank of the moment map along a cosphere.
    Rank(Common),
    /// Critical points of a symbol combination on a cosphere.
    Morse(Common),
    /// Separated Laplace eigenmodes on a surface of revolution.
    Modes(Common),
    /// Highest-weight quasimodes, their defect and sup norms.
    Quasimode(Common),
    /// Lattice window counts on the flat torus (count, fit or frames).
    Lattice {
        /// count, fit or frames.
        action: String,
        #[command(flatten)]
        common: Common,
    },
    /// Sup-norm scaling over a family (highest-weight or quasimode).
    Scaling(Common),
    /// Compare the two torus frames' count exponents.
    Frames(Common),
    /// Run every acceptance criterion and write a hashed manifest.
    Reproduce {
        #[arg(long, default_value = "qci-reproduce")]
        out: PathBuf,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Parameter override `<criterion>.<key>=<value>`; repeatable.
        #[arg(long = "set", value_name = "ID.KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated criterion ids to run.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
    },
}

/// Command-line options after the trailing overrides have been scanned for
/// `--config`, `--out` and `--dry-run`.
struct Resolved {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    dry_run: bool,
    overrides: Vec<(String, String)>,
}

/// Splits `--key value` / `--key=value` pairs; dashes in keys become underscores.
fn resolve(common: &Common) -> Result<Resolved> {
    let mut r = Resolved {
        config: common.config.clone(),
        out: common.out.clone(),
        dry_run: common.dry_run,
        overrides: Vec::new(),
    };
    let mut it = common.params.iter();
    while let Some(tok) = it.next() {
        let Some(flag) = tok.strip_prefix("--") else {
            bail!("unexpected argument `{tok}`: overrides are `--key value`");
        };
        if flag == "dry-run" {
            r.dry_run = true;
            continue;
        }
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("`--{flag}` needs a value"))?;
                (flag.to_string(), v.clone())
            }
        };
        match key.as_str() {
            "config" => r.config = Some(value.into()),
            "out" => r.out = Some(value.into()),
            _ => r.overrides.push((key.replace('-', "_"), value)),
        }
    }
    Ok(r)
}

fn build_config(sub: Subcommand, opts: &Resolved, extra: &[(&str, &str)]) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.subcommand != sub {
                bail!("{} holds a `{}` config, not `{sub}`", path.display(), cfg.subcommand);
            }
            cfg
        }
        None => ExperimentConfig::new(sub),
    };
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    for (k, v) in &opts.overrides {
        cfg.set(k, v)?;
    }
    if let Some(out) = &opts.out {
        cfg.set("output", &out.to_string_lossy())?;
    }
    Ok(cfg)
}

fn experiment(sub: Subcommand, common: &Common, extra: &[(&str, &str)]) -> Result<i32> {
    let opts = resolve(common)?;
    let cfg = build_config(sub, &opts, extra)?;
    if opts.dry_run {
        print!("{}", cfg.to_text());
        return Ok(0);
    }
    let out = experiments::run(&cfg)?;
    let dir = cfg.output();
    output::write_all(&dir, &out.artifacts).with_context(|| format!("writing artifacts to {}", dir.display()))?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", out.summary);
    Ok(out.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32> {
    qci_lab::init_threads()?;
    match cli.command {
        Command::Validate(c) => experiment(Subcommand::Validate, &c, &[]),
        Command::Returnmap(c) => experiment(Subcommand::Returnmap, &c, &[]),
        Command::Loops(c) => experiment(Subcommand::Loops, &c, &[]),
        Command::Rank(c) => experiment(Subcommand::Rank, &c, &[]),
        Command::Morse(c) => experiment(Subcommand::Morse, &c, &[]),
        Command::Modes(c) => experiment(Subcommand::Modes, &c, &[]),
        Command::Quasimode(c) => experiment(Subcommand::Quasimode, &c, &[]),
        Command::Lattice { action, common } => experiment(Subcommand::Lattice, &common, &[("action", &action)]),
        Command::Scaling(c) => experiment(Subcommand::Scaling, &c, &[]),
        Command::Frames(c) => experiment(Subcommand::Frames, &c, &[]),
        Command::Reproduce { out, seed, overrides, only } => {
            let overrides = overrides
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .with_context(|| format!("--set {s}: expected ID.KEY=VALUE"))
                })
                .collect::<Result<Vec<_>>>()?;
            let report = reproduce_all(&ReproduceOptions { seed, out_dir: out, overrides, only })?;
            let failures = report.failures();
            if failures.is_empty() {
                println!("all {} criteria passed", report.results.len());
                Ok(0)
            } else {
                let ids: Vec<String> = failures.iter().map(u32::to_string).collect();
                eprintln!("failed criteria: {}", ids.join(", "));
                Ok(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
