use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ipinf_cli::config::{Kind, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "ipinf", version, about = "Inner-product influence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare IP against the exact oracle and check flipped-label detection.
    Verify(RunArgs),
    /// Score, curate, retrain and evaluate over a method x fraction grid.
    Curate(RunArgs),
    /// Attack the test set and evaluate influence-guided defenses.
    Defend(RunArgs),
    /// Merge run directories into record and summary tables.
    Report {
        /// Run directories, or directories containing them.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// INI file with [run], [data], [model], [influence], [curation] and [attack] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeat to run several seeds; each gets its own run directory.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Influence method(s), comma separated or repeated.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Curation fraction(s), comma separated.
    #[arg(long)]
    fraction: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Attacked test fraction(s), comma separated.
    #[arg(long = "attack-frac")]
    attack_frac: Option<String>,
    /// Ensemble size(s), comma separated.
    #[arg(long)]
    ensemble: Option<String>,
    /// Dropout rate range as LO,HI.
    #[arg(long)]
    dropout: Option<String>,
    /// Any other field, as section.key=value.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut add = |field: &str, value: String| out.push((field.to_string(), value));
        if !self.seeds.is_empty() {
            add("run.seeds", join(&self.seeds));
        }
        if let Some(p) = &self.out {
            add("run.out", p.display().to_string());
        }
        if let Some(w) = self.workers {
            add("run.workers", w.to_string());
        }
        if !self.methods.is_empty() {
            add("influence.methods", self.methods.join(","));
        }
        for (field, value) in [
            ("curation.fractions", &self.fraction),
            ("attack.gamma", &self.gamma),
            ("attack.fractions", &self.attack_frac),
            ("influence.ensemble_sizes", &self.ensemble),
            ("influence.dropout", &self.dropout),
        ] {
            if let Some(v) = value {
                add(field, v.clone());
            }
        }
        for s in &self.set {
            let (field, value) = s
                .split_once('=')
                .ok_or_else(|| UsageError(format!("--set expects FIELD=VALUE, got `{s}`")))?;
            add(field.trim(), value.to_string());
        }
        Ok(out)
    }
}

fn join(seeds: &[u64]) -> String {
    seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (kind, args) = match cli.command {
        Command::Verify(a) => (Kind::Verify, a),
        Command::Curate(a) => (Kind::Curate, a),
        Command::Defend(a) => (Kind::Defend, a),
        Command::Report { runs, out } => {
            for path in ipinf_cli::report::write_report(&runs, &out)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
    };
    let text = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?,
        ),
        None => None,
    };
    let cfg = RunConfig::load(kind, text.as_deref(), &args.overrides()?)?;
    for run in ipinf_cli::execute(&cfg)? {
        println!("{}", run.dir.display());
        for line in &run.lines {
            println!("  {line}");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err
        .chain()
        .find_map(|e| e.downcast_ref::<ipinf_core::Error>())
    {
        Some(e) if e.is_numeric() || matches!(e, ipinf_core::Error::DegenerateModel(_)) => 3,
        Some(ipinf_core::Error::Argument(_) | ipinf_core::Error::UnsupportedArch(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
