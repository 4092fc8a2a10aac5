use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use speller_core::analysis::{self, CohortSummary};
use speller_core::blda::BldaConfig;
use speller_core::io::{self, RunConfig, SessionContainer};
use speller_core::paradigm::ParadigmId;
use speller_core::session::{self, CohortSession};

#[derive(Parser)]
#[command(name = "speller", version, about = "Simulate, decode and analyze ERP speller sessions")]
struct Cli {
    /// Base seed for subject generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to one paradigm.
    #[arg(long, global = true, value_parser = parse_paradigm)]
    paradigm: Option<ParadigmId>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate offline and online recordings for every subject and paradigm.
    Synth {
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Train a classifier on an offline recording.
    Train {
        #[arg(long)]
        recording: PathBuf,
    },
    /// Decode an online recording with a trained model.
    Online {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        recording: PathBuf,
    },
    /// Run the full protocol for a cohort of subjects.
    Cohort {
        /// Number of subjects, one seed each.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Summarize the sessions written by `cohort`.
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Recompute the published bit rates from accuracy and trial counts.
    CheckTable2,
}

fn parse_paradigm(s: &str) -> Result<ParadigmId, String> {
    s.parse().map_err(|e: speller_core::Error| e.to_string())
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<speller_core::Error> for Failure {
    fn from(e: speller_core::Error) -> Self {
        match e {
            speller_core::Error::InvalidInput(_) | speller_core::Error::EpochOutOfBounds { .. } => {
                Failure::Validation(e.into())
            }
            _ => Failure::Runtime(e.into()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn validation<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Validation(e.into())
}

fn run_config(cli: &Cli) -> Outcome<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.paradigm.is_some() {
        cfg.paradigm = cli.paradigm;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    io::write_text(path, text).map_err(runtime)
}

fn load_container(path: &Path) -> Outcome<SessionContainer> {
    io::load_session(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(validation)
}

fn synth(cli: &Cli, subjects: Option<usize>) -> Outcome<()> {
    let mut cfg = run_config(cli)?;
    if let Some(n) = subjects {
        cfg.subjects = n;
    }
    let cohort = cfg.cohort()?;
    let out = out_path(cli, "recordings");
    for subject in 0..cohort.subjects {
        let profile = cohort.subject_profile(subject);
        for (position, paradigm) in cohort.order_for(subject).into_iter().enumerate() {
            let protocol = cohort.protocol(paradigm, position);
            let dir = out.join(format!("S{:02}-{}", subject + 1, paradigm.display_name()));
            for (name, rec) in [
                ("offline", session::offline_recording(&profile, &protocol)?),
                ("online", session::online_recording(&profile, &protocol)?),
            ] {
                let container = SessionContainer::new(rec, protocol.clone(), profile.clone());
                io::save_session(&dir.join(name), &container)
                    .with_context(|| format!("writing {}", dir.join(name).display()))
                    .map_err(runtime)?;
            }
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn train(cli: &Cli, recording: &Path) -> Outcome<()> {
    let container = load_container(recording)?;
    let outcome = session::train_on_recording(&container.recording, &BldaConfig::default())?;
    let out = out_path(cli, "model.json");
    io::save_model(&out, &outcome.model).map_err(runtime)?;
    let m = &outcome.model;
    println!(
        "trained on {} epochs: alpha {:.4e}, beta {:.4e}, {} iterations{} -> {}",
        outcome.features.len(),
        m.alpha,
        m.beta,
        m.n_iterations,
        if m.converged { "" } else { " (not converged)" },
        out.display()
    );
    Ok(())
}

fn online(cli: &Cli, model: &Path, recording: &Path) -> Outcome<()> {
    let model = io::load_model(model)?;
    let container = load_container(recording)?;
    let result = session::decode_online(&model, &container.recording, &container.meta.protocol, container.meta.seed)?;
    let out = out_path(cli, "online");
    write(&out.join("session.json"), &io::to_json(&result)?)?;
    write(&out.join("blocks.csv"), &io::blocks_csv(&result))?;
    let t = &result.totals;
    println!(
        "{}: {}/{} correct ({:.1}%), {} trials, {:.1} bits/min",
        result.paradigm_id.display_name(),
        t.correct,
        t.blocks,
        t.accuracy_pct,
        t.trials_total,
        t.bit_rate
    );
    Ok(())
}

fn cohort(cli: &Cli, seeds: Option<usize>) -> Outcome<()> {
    let mut cfg = run_config(cli)?;
    if let Some(n) = seeds {
        cfg.subjects = n;
    }
    let cohort = cfg.cohort()?;
    let out = out_path(cli, "cohort");
    let mut sessions = Vec::new();
    for subject in 0..cohort.subjects {
        let s = session::run_subject(&cohort, subject)?;
        for c in &s {
            eprintln!(
                "S{:02} {}: {:.1}% in {} trials",
                subject + 1,
                c.result.paradigm_id.display_name(),
                c.result.totals.accuracy_pct,
                c.result.totals.trials_total
            );
        }
        sessions.extend(s);
    }
    write(&out.join("results.csv"), &io::results_csv(&sessions))?;
    write(&out.join("sessions.json"), &io::to_json(&sessions)?)?;
    write(&out.join("config.json"), &io::to_json(&cfg)?)?;
    println!("{} sessions -> {}", sessions.len(), out.display());
    Ok(())
}

fn summary_text(summary: &CohortSummary) -> String {
    let mut s = String::new();
    for p in &summary.paradigms {
        let _ = writeln!(
            s,
            "{}: accuracy {:.1}±{:.1}%, trials {:.1}±{:.1}, bit rate {:.1}±{:.1} bits/min; halves {:.1}% -> {:.1}%",
            p.paradigm_id.display_name(),
            p.accuracy_pct.mean,
            p.accuracy_pct.sd,
            p.trials_total.mean,
            p.trials_total.sd,
            p.bit_rate.mean,
            p.bit_rate.sd,
            p.halves.first.accuracy_pct,
            p.halves.last.accuracy_pct
        );
    }
    if let Some(c) = &summary.comparison {
        let _ = writeln!(
            s,
            "MS-P vs LS-P paired t: accuracy p = {:.3}, trials p = {:.3}, bit rate p = {:.3}",
            c.accuracy_pct.paired.p_value, c.trials_total.paired.p_value, c.bit_rate.paired.p_value
        );
    }
    s
}

fn analyze(cli: &Cli, input: &Path) -> Outcome<()> {
    let path = input.join("sessions.json");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(validation)?;
    let mut sessions: Vec<CohortSession> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(validation)?;
    if let Some(p) = cli.paradigm {
        sessions.retain(|s| s.result.paradigm_id == p);
    }
    let summary = analysis::summarize_cohort(&sessions)?;
    let out = out_path(cli, "analysis");
    let halves: Vec<_> = summary.paradigms.iter().map(|p| (p.paradigm_id, &p.halves)).collect();
    let fatigue: Vec<_> = summary.paradigms.iter().map(|p| (p.paradigm_id, &p.fatigue)).collect();
    write(&out.join("table2.csv"), &io::results_csv(&sessions))?;
    write(&out.join("halves.json"), &io::to_json(&halves)?)?;
    write(&out.join("fatigue.json"), &io::to_json(&fatigue)?)?;
    write(&out.join("stats.json"), &io::to_json(&summary)?)?;
    print!("{}", summary_text(&summary));
    Ok(())
}

fn check_table2() -> Outcome<()> {
    let checks = io::check_table2();
    println!("subject,paradigm,accuracy_pct,trials,printed,computed,residual");
    for c in &checks {
        println!(
            "S{},{},{:.1},{},{:.1},{:.2},{:+.3}",
            c.row.subject,
            c.row.paradigm.display_name(),
            c.row.accuracy_pct,
            c.row.trials,
            c.row.bit_rate,
            c.computed,
            c.residual
        );
    }
    let within = checks.iter().filter(|c| c.residual.abs() <= 0.15).count();
    println!("{within}/{} rows within ±0.15 bits/min", checks.len());
    if within == checks.len() {
        Ok(())
    } else {
        Err(runtime(anyhow::anyhow!("{} rows outside tolerance", checks.len() - within)))
    }
}

fn run(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Synth { subjects } => synth(cli, *subjects),
        Command::Train { recording } => train(cli, recording),
        Command::Online { model, recording } => online(cli, model, recording),
        Command::Cohort { seeds } => cohort(cli, *seeds),
        Command::Analyze { input } => analyze(cli, input),
        Command::CheckTable2 => check_table2(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
