use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use quantum_vault::acceptance::{run_all, DEFAULT_SEED};
use quantum_vault::attacks::{run_counterfeit_experiment, AttackKind};
use quantum_vault::netsim::{demo_config, named_scenario, NetsimError, NetworkConfig, ScenarioScript, Transcript};
use quantum_vault::netsim::{ScriptAction, ScriptOp};
use quantum_vault::qsim::DEFAULT_MAX_QUBITS;

#[derive(Parser)]
#[command(name = "qvault", version, about = "Quantum money vault simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network scenario from a config file and a script file.
    RunScenario {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Overrides the seed stored in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Transcript destination (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mint one note into a wallet on the demo network.
    MintDemo(DemoArgs),
    /// Mint two notes, then an inter-vault and an intra-vault transfer.
    PayDemo(DemoArgs),
    /// Chain of online payments through the issuer.
    OnlinePayDemo(DemoArgs),
    /// Monte Carlo counterfeiting experiment against Wiesner notes.
    CounterfeitExperiment {
        #[arg(long, value_parser = parse_attack)]
        attack: AttackKind,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=DEFAULT_MAX_QUBITS as u64))]
        qubits: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Report destination (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite and print a pass/fail table.
    VerifyAcceptance {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    s.parse().map_err(|_| format!("expected one of fabricate, random-basis, optimal; got {s:?}"))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<NetsimError> for CliError {
    fn from(e: NetsimError) -> Self {
        match e {
            NetsimError::Config(_) | NetsimError::Script(_) | NetsimError::Json(_) => CliError::Input(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Human-readable report of a finished run. The `audit` line is what a
/// re-fold of the written transcript must reproduce.
fn render_transcript(t: &Transcript) -> (String, bool) {
    let mut out = String::new();
    let Some(summary) = t.summary() else {
        return ("transcript has no summary\n".into(), false);
    };
    writeln!(out, "final time {}  events {}  quiescent {}", summary.final_time, summary.events_processed, summary.quiescent).unwrap();
    writeln!(out, "receipts").unwrap();
    for r in &summary.receipts {
        let serials: Vec<String> = r.serials.iter().map(ToString::to_string).collect();
        let process = serde_json::to_value(r.process).unwrap();
        writeln!(
            out,
            "  {:<10} {:<15} {:<24} amount {:<6} serials [{}]",
            r.correlation_id,
            process.as_str().unwrap_or_default(),
            r.outcome.label(),
            r.amount,
            serials.join(", ")
        )
        .unwrap();
    }
    let ledger = &summary.ledger;
    writeln!(out, "ledger").unwrap();
    writeln!(out, "  issuer active value {}", ledger.ia_active_value).unwrap();
    for (msb, value) in &ledger.custody {
        writeln!(out, "  custody {msb:<10} {value}").unwrap();
    }
    writeln!(out, "  custody total {}", ledger.custody_total).unwrap();
    for (wallet, value) in &ledger.wallets {
        writeln!(out, "  balance {wallet:<10} {value}").unwrap();
    }
    let a = t.audit();
    writeln!(out, "{}", audit_line(&a)).unwrap();
    let conservation = if a.strict_conservation() {
        "OK (active = custody)".to_string()
    } else if a.loss_accounting_holds() {
        format!("OK with losses (active = custody + {} traced losses)", a.losses())
    } else {
        format!("BROKEN ({} unaccounted)", a.unaccounted_value)
    };
    writeln!(out, "conservation {conservation}").unwrap();
    let violations = t.violations();
    if violations.is_empty() {
        writeln!(out, "invariants OK").unwrap();
    } else {
        writeln!(out, "invariant violations: {}", violations.join(", ")).unwrap();
    }
    (out, violations.is_empty())
}

fn audit_line(a: &quantum_vault::netsim::AuditReport) -> String {
    format!(
        "audit active={} custody={} lost={} discarded={} consumed={} stranded={} in-flight={} unaccounted={} rejections={}",
        a.active_value,
        a.custody_value,
        a.lost_value,
        a.discarded_value,
        a.consumed_unsettled_value,
        a.stranded_value,
        a.in_flight_value,
        a.unaccounted_value,
        a.rejections
    )
}

fn run_network(config: NetworkConfig, script: &ScenarioScript, out: Option<&Path>) -> Result<ExitCode, CliError> {
    println!("seed {}", config.seed);
    println!("config digest {}", config.digest());
    let transcript = quantum_vault::netsim::run_scenario(config, script)?;
    if let Some(path) = out {
        write(path, &transcript.to_jsonl())?;
        println!("transcript written to {}", path.display());
    }
    let (text, ok) = render_transcript(&transcript);
    print!("{text}");
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_named(name: &str, args: &DemoArgs) -> Result<ExitCode, CliError> {
    let (config, script) = named_scenario(name, args.seed).expect("built-in scenario");
    println!("scenario {name}");
    run_network(config, &script, args.out.as_deref())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::RunScenario { config, script, seed, out } => {
            let mut config = NetworkConfig::from_json(&read(&config)?)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let script = ScenarioScript::from_json(&read(&script)?)?;
            script.validate(&config)?;
            run_network(config, &script, out.as_deref())
        }
        Command::MintDemo(args) => {
            let script = ScenarioScript {
                actions: vec![ScriptAction::new(
                    0,
                    ScriptOp::Mint {
                        wallet: "alice".into(),
                        value: 100,
                        label: Some("a1".into()),
                    },
                )],
            };
            println!("scenario mint");
            run_network(demo_config(args.seed), &script, args.out.as_deref())
        }
        Command::PayDemo(args) => run_named("happy-path", &args),
        Command::OnlinePayDemo(args) => run_named("online-payment", &args),
        Command::CounterfeitExperiment { attack, qubits, trials, seed, out } => {
            println!("seed {seed}");
            let n = qubits as usize;
            let channel = attack.build().map_err(|e| CliError::Runtime(e.to_string()))?;
            let started = Instant::now();
            let report =
                run_counterfeit_experiment(&channel, n, trials, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("attack {}  qubits {n}  trials {trials}", report.attack);
            println!("successes {}", report.successes);
            println!("estimated rate {:.6} +/- {:.6}", report.estimated_rate, report.stderr);
            println!("exact rate     {:.6}", report.exact_rate);
            println!("(3/4)^n        {:.6}", 0.75f64.powi(n as i32));
            println!("z-score {:.2}  elapsed {:.2}s", report.z_score(), started.elapsed().as_secs_f64());
            if let Some(path) = out {
                write(&path, &serde_json::to_string_pretty(&report).unwrap())?;
                println!("report written to {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyAcceptance { seed } => {
            let report = run_all(seed);
            print!("{}", report.table());
            Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
