//! Command-line front end: simulate experiments, reproduce the built-in
//! Cournot studies, query the analytic oracles, check parameter conditions,
//! and sweep parameters across parallel runs.
//!
//! Player numbers on this surface are 1-based, matching the JSON config
//! format and the CSV headers.

use clap::{Args, Parser, Subcommand};
use gne_core::harness::{self, load_config, preset, run_and_export, validate, ExperimentConfig};
use gne_core::oracle::{best_response_stubborn, solve_quadratic_gne, MuBarPolicy};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gne",
    about = "Distributed measurement-only Nash equilibrium seeking: simulator, oracles, checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config and export its artifacts.
    Simulate(SimulateArgs),
    /// Run the built-in Cournot study (main + fixed-amplitude control, or a
    /// stubborn-player variant).
    Reproduce(ReproduceArgs),
    /// Print the closed-form equilibrium (or stubborn best response) for a
    /// config.
    Oracle(ConfigArg),
    /// Print the parameter-condition report; exits non-zero on dither
    /// frequency violations.
    Check(ConfigArg),
    /// Run one experiment per value of a parameter, in parallel.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Path to a JSON experiment config.
    config: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    /// Output directory (defaults to the config's `outputs.dir`, or
    /// `GNE_ESC_OUT`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Which study to reproduce.
    #[arg(value_parser = ["cournot"])]
    study: String,
    /// Hold players fixed, e.g. `--stubborn 1=5.0` (1-based player numbers);
    /// repeatable.
    #[arg(long, value_name = "PLAYER=VALUE")]
    stubborn: Vec<String>,
    /// Use the literal-frequency operating point (w = 1, delta = 0.05)
    /// instead of the tightly converging default.
    #[arg(long)]
    literal_frequencies: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// Parameter to vary: w, delta, or alpha.
    #[arg(long)]
    param: harness::SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Reproduce(args) => reproduce(args),
        Command::Oracle(args) => oracle(args),
        Command::Check(args) => check(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn stringify(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn report_run(output: &harness::RunOutput, written: &[PathBuf]) {
    let m = &output.summary.final_metrics;
    println!(
        "final t = {:.3}: dist_to_oracle = {}, constraint_violation = {:.3e}, \
         mu_spread = {:.3e}, max_amp = {:.3e}",
        m.t,
        m.dist_to_oracle
            .map(|d| format!("{d:.3e}"))
            .unwrap_or_else(|| "n/a".into()),
        m.constraint_violation,
        m.mu_spread,
        m.max_amp,
    );
    if let Some(oracle) = &output.summary.oracle {
        let target: Vec<String> = oracle.target().iter().map(|v| format!("{v:.6}")).collect();
        println!(
            "oracle target: x* = [{}]{}",
            target.join(", "),
            oracle
                .multiplier()
                .map(|m| format!(", mu = {m:.6}"))
                .unwrap_or_default()
        );
    }
    if let Some(dir) = written.first().and_then(|p| p.parent()) {
        println!("artifacts in {}", dir.display());
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let config = load_config(&args.config).map_err(stringify)?;
    let (output, written) = run_and_export(&config, args.out.as_deref()).map_err(stringify)?;
    print_warnings(&output.warnings);
    report_run(&output, &written);
    Ok(ExitCode::SUCCESS)
}

fn parse_stubborn(specs: &[String]) -> Result<Vec<(usize, f64)>, String> {
    specs
        .iter()
        .map(|spec| {
            let (player, value) = spec
                .split_once('=')
                .ok_or_else(|| format!("expected PLAYER=VALUE, got `{spec}`"))?;
            let player: usize = player
                .trim()
                .parse()
                .map_err(|_| format!("bad player number in `{spec}`"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("bad strategy value in `{spec}`"))?;
            Ok((player, value))
        })
        .collect()
}

fn reproduce(args: ReproduceArgs) -> Result<ExitCode, String> {
    // the only built-in study; clap already restricted the name
    assert_eq!(args.study, "cournot");
    let preset_name = if args.literal_frequencies {
        "cournot4_w1"
    } else {
        "cournot4"
    };
    let base: ExperimentConfig = preset(preset_name).expect("built-in preset");
    let out_root = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(harness::default_output_dir()).join("cournot"));
    let stubborn = parse_stubborn(&args.stubborn)?;

    if stubborn.is_empty() {
        let (output, written) =
            run_and_export(&base, Some(&out_root.join("main"))).map_err(stringify)?;
        print_warnings(&output.warnings);
        println!("main run (adaptive dither amplitude):");
        report_run(&output, &written);

        let mut control = base.clone();
        control.params.freeze_amp = true;
        // long enough to converge, so the artifact isolates the one
        // difference: the dither oscillation never dies
        control.integrator.t_end = 120.0;
        let (output, written) =
            run_and_export(&control, Some(&out_root.join("fixed_amplitude"))).map_err(stringify)?;
        println!("control run (amplitude frozen at its initial value):");
        report_run(&output, &written);
    } else {
        let mut variant = base.clone();
        for &(player, value) in &stubborn {
            variant.stubborn.insert(player, value);
        }
        let label = stubborn
            .iter()
            .map(|(p, v)| format!("p{p}_{v}"))
            .collect::<Vec<_>>()
            .join("_");
        let (output, written) =
            run_and_export(&variant, Some(&out_root.join(format!("stubborn_{label}"))))
                .map_err(stringify)?;
        print_warnings(&output.warnings);
        println!("stubborn run ({label}):");
        report_run(&output, &written);
        let seekers_sum: f64 = output
            .trajectory
            .final_state()
            .iter()
            .enumerate()
            .filter(|(i, _)| !stubborn.iter().any(|&(p, _)| p == i + 1))
            .map(|(_, a)| a.xhat)
            .sum();
        println!("seekers' final total supply: {seekers_sum:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: ConfigArg) -> Result<ExitCode, String> {
    let config = load_config(&args.config).map_err(stringify)?;
    let prepared = validate(&config).map_err(stringify)?;
    let text = if prepared.stubborn.is_empty() {
        let solution = solve_quadratic_gne(&prepared.quadratic).map_err(stringify)?;
        serde_json::to_string_pretty(&solution).expect("serializes")
    } else {
        let response = best_response_stubborn(
            &prepared.quadratic,
            &prepared.stubborn,
            MuBarPolicy::SolveJointly,
        )
        .map_err(stringify)?;
        serde_json::to_string_pretty(&response).expect("serializes")
    };
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn check(args: ConfigArg) -> Result<ExitCode, String> {
    let config = load_config(&args.config).map_err(stringify)?;
    let prepared = validate(&config).map_err(stringify)?;
    print_warnings(&prepared.warnings);
    let report = harness::condition_report(&prepared);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializes")
    );
    if report.freq_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "dither frequency conditions violated ({} finding(s))",
            report.freq_violations.len()
        );
        Ok(ExitCode::from(2))
    }
}

fn sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let config = load_config(&args.config).map_err(stringify)?;
    let out_root = args
        .out
        .unwrap_or_else(|| PathBuf::from(&config.outputs.dir).join("sweep"));
    let rows = harness::sweep(&config, args.param, &args.values, &out_root).map_err(stringify)?;
    for row in &rows {
        println!(
            "{} = {}: dist_to_oracle = {}, constraint_violation = {:.3e} ({})",
            row.param,
            row.value,
            row.final_metrics
                .dist_to_oracle
                .map(|d| format!("{d:.3e}"))
                .unwrap_or_else(|| "n/a".into()),
            row.final_metrics.constraint_violation,
            row.dir.display()
        );
    }
    println!(
        "aggregate written to {}",
        out_root.join("sweep_summary.json").display()
    );
    Ok(ExitCode::SUCCESS)
}
