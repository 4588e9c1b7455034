//! `erms` command line: validate scenarios, run diagnosis, recommendation,
//! planning and Monte Carlo profiles, or start the session service.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use erms_core::evolution::steps_for;
use erms_core::session::{EventLog, ScenarioCatalog};
use erms_core::*;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "erms", version, about = "Leak diagnosis, shutdown recommendation and test planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a scenario file against the schema and its invariants.
    Validate(Common),
    /// Posterior over the real state and the aggregate leak states.
    Diagnose(Common),
    /// Rank shutdown levels by expected utility.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        decision: DecisionArgs,
        /// Evaluate a single horizon instead of escalating through the list.
        #[arg(long)]
        horizon: Option<f64>,
        /// Time from the observations to the decision.
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
    },
    /// Build an information-gathering plan and compare it with acting now.
    Plan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        decision: DecisionArgs,
        /// Framing constraints as inline JSON or a file path.
        #[arg(long)]
        constraints: Option<String>,
        #[arg(long, default_value = "highest-ev-path")]
        heuristic: Heuristic,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo ignition profiles per shutdown level, as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trajectories: u64,
        /// Markov steps to simulate; defaults to the longest horizon.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        ignition_loss: Option<f64>,
    },
    /// Run the HTTP session service.
    Serve {
        /// Extra scenario files served next to the bundled ones.
        #[arg(long)]
        scenario: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for `<session-id>.jsonl` logs; in memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario JSON file; the bundled gas-compressor scenario when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Evidence as inline JSON or a file path: {"node": "outcome", ...}.
    #[arg(long)]
    pub evidence: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DecisionArgs {
    /// Status-quo shutdown level, by index or name.
    #[arg(long, default_value = "0")]
    pub level: String,
    /// Replace the scenario's ignition loss.
    #[arg(long)]
    pub ignition_loss: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

/// Reads a JSON argument given inline or as a path.
fn json_arg<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {what} file `{arg}`"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what}"))
}

fn load_bundle(path: Option<&Path>) -> Result<ScenarioBundle> {
    match path {
        None => Ok(builtin_gas_compressor()),
        Some(p) => {
            let file = File::open(p).with_context(|| format!("opening scenario `{}`", p.display()))?;
            load_scenario(file).with_context(|| format!("scenario `{}`", p.display()))
        }
    }
}

fn override_loss(bundle: &mut ScenarioBundle, loss: Option<f64>) -> Result<()> {
    if let Some(loss) = loss {
        bundle.value.ignition_loss = loss;
        bundle.validate().context("ignition loss override")?;
    }
    Ok(())
}

fn parse_level(bundle: &ScenarioBundle, level: &str) -> Result<usize> {
    let index = match level.parse::<usize>() {
        Ok(i) => i,
        Err(_) => bundle
            .level_index(level)
            .with_context(|| format!("unknown shutdown level `{level}`"))?,
    };
    if index >= bundle.level_count() {
        bail!("shutdown level {index} does not exist");
    }
    Ok(index)
}

struct Diagnosis {
    detailed: DiscreteDistribution,
    aggregate: DiscreteDistribution,
}

fn diagnose(bundle: &ScenarioBundle, evidence: Option<&str>) -> Result<Diagnosis> {
    let evidence: Evidence = match evidence {
        Some(arg) => json_arg(arg, "evidence")?,
        None => Evidence::new(),
    };
    let detailed = posterior(&bundle.network, &evidence, &bundle.network.real_state_node)?;
    let aggregate = aggregate(&detailed, &bundle.aggregation)?;
    Ok(Diagnosis { detailed, aggregate })
}

fn write_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn distribution_table(out: &mut dyn Write, title: &str, d: &DiscreteDistribution) -> Result<()> {
    writeln!(out, "{title}")?;
    let width = d.outcomes().iter().map(String::len).max().unwrap_or(0);
    for (o, p) in d.outcomes().iter().zip(d.probs()) {
        writeln!(out, "  {o:<width$}  {p:.6}")?;
    }
    Ok(())
}

fn recommendation_table(out: &mut dyn Write, rec: &Recommendation) -> Result<()> {
    writeln!(out, "horizon_used: {}", rec.horizon_used)?;
    writeln!(
        out,
        "  {:<14} {:>18} {:>16} {:>16}",
        "level", "expected_utility", "p_ign_decision", "p_ign_horizon"
    )?;
    for row in &rec.ranked {
        let mark = if row.level == rec.chosen { '*' } else { ' ' };
        writeln!(
            out,
            "{mark} {:<14} {:>18.2} {:>16.6} {:>16.6}",
            row.name, row.expected_utility, row.ignition_prob_at_decision, row.ignition_prob_at_horizon
        )?;
    }
    Ok(())
}

/// Runs one command, writing its report to `out` unless `--out` redirects it.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let out_path = match &cli.command {
        Command::Validate(c) | Command::Diagnose(c) => c.out.clone(),
        Command::Recommend { common, .. } | Command::Plan { common, .. } | Command::Simulate { common, .. } => {
            common.out.clone()
        }
        Command::Serve { .. } => None,
    };
    match out_path {
        Some(path) => {
            let file = File::create(&path).with_context(|| format!("creating `{}`", path.display()))?;
            let mut w = BufWriter::new(file);
            execute(cli.command, &mut w)?;
            w.flush()?;
            Ok(())
        }
        None => execute(cli.command, stdout),
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Validate(c) => {
            let bundle = load_bundle(c.scenario.as_deref())?;
            let summary = json!({
                "valid": true,
                "id": bundle.id,
                "nodes": bundle.network.nodes.len(),
                "real_state_outcomes": bundle.network.real_state().map_or(0, |n| n.outcomes.len()),
                "aggregate_states": AggregateState::labels(),
                "levels": bundle.transitions.levels.iter().map(|l| &l.name).collect::<Vec<_>>(),
                "tests": bundle.tests.iter().map(|t| &t.id).collect::<Vec<_>>(),
            });
            match c.format {
                Format::Json => write_json(out, &summary)?,
                Format::Table => writeln!(
                    out,
                    "ok: scenario `{}`: {} nodes, {} real states, {} levels, {} tests",
                    bundle.id,
                    summary["nodes"],
                    summary["real_state_outcomes"],
                    bundle.level_count(),
                    bundle.tests.len()
                )?,
            }
        }
        Command::Diagnose(c) => {
            let bundle = load_bundle(c.scenario.as_deref())?;
            let d = diagnose(&bundle, c.evidence.as_deref())?;
            let severity = classify_severity(&d.aggregate, false, &bundle.value.severity);
            match c.format {
                Format::Json => write_json(
                    out,
                    &json!({
                        "detailed": d.detailed,
                        "aggregate": d.aggregate,
                        "severity": severity,
                        "response": severity.response(),
                    }),
                )?,
                Format::Table => {
                    distribution_table(out, &bundle.network.real_state_node, &d.detailed)?;
                    distribution_table(out, "aggregate", &d.aggregate)?;
                    writeln!(out, "severity: {severity} ({})", severity.response())?;
                }
            }
        }
        Command::Recommend {
            common,
            decision,
            horizon,
            delay,
        } => {
            let mut bundle = load_bundle(common.scenario.as_deref())?;
            override_loss(&mut bundle, decision.ignition_loss)?;
            let level = parse_level(&bundle, &decision.level)?;
            let d = diagnose(&bundle, common.evidence.as_deref())?;
            let rec = match horizon {
                Some(h) => recommend(&d.aggregate, delay, level, h, &bundle)?,
                None => escalating_recommend(&d.aggregate, delay, level, &bundle)?,
            };
            match common.format {
                Format::Json => write_json(out, &rec)?,
                Format::Table => recommendation_table(out, &rec)?,
            }
        }
        Command::Plan {
            common,
            decision,
            constraints,
            heuristic,
            seed,
        } => {
            let mut bundle = load_bundle(common.scenario.as_deref())?;
            override_loss(&mut bundle, decision.ignition_loss)?;
            let level = parse_level(&bundle, &decision.level)?;
            let d = diagnose(&bundle, common.evidence.as_deref())?;
            let mut constraints: FramingConstraints = match constraints {
                Some(arg) => json_arg(&arg, "constraints")?,
                None => bundle.constraints_default.clone(),
            };
            if let Some(seed) = seed {
                constraints.seed = seed;
            }
            constraints.validate()?;
            let plan = build_plan(&bundle, &d.aggregate, level, &constraints, heuristic)?;
            let act_now = escalating_recommend(&d.aggregate, 0.0, level, &bundle)?;
            match common.format {
                Format::Json => write_json(
                    out,
                    &json!({ "act_now": act_now, "plan": plan }),
                )?,
                Format::Table => {
                    writeln!(out, "act now:")?;
                    recommendation_table(out, &act_now)?;
                    writeln!(out, "plan ({heuristic}, {} expansions):", plan.expansions_used)?;
                    writeln!(out, "  act-now value   {:.2}", plan.act_now_eu())?;
                    writeln!(out, "  plan value      {:.2}", plan.best_eu)?;
                    writeln!(out, "  gain            {:.2}", plan.best_eu - plan.act_now_eu())?;
                    writeln!(out, "  first action    {}", plan.first_action().unwrap_or("act-now"))?;
                }
            }
        }
        Command::Simulate {
            common,
            trajectories,
            steps,
            seed,
            ignition_loss,
        } => {
            let mut bundle = load_bundle(common.scenario.as_deref())?;
            override_loss(&mut bundle, ignition_loss)?;
            if trajectories == 0 {
                bail!("--trajectories must be positive");
            }
            let d = diagnose(&bundle, common.evidence.as_deref())?;
            let longest = bundle.value.horizons.last().copied().unwrap_or(0.0);
            let steps = steps.unwrap_or_else(|| steps_for(longest, bundle.transitions.step_duration));
            let initial = LeakBelief::from_aggregate(&d.aggregate)?;
            let sim = simulate(&bundle, &initial, steps, trajectories, seed)?;
            match common.format {
                Format::Json => write_json(out, &sim)?,
                Format::Table => sim.write_csv(out)?,
            }
        }
        Command::Serve {
            scenario,
            addr,
            data_dir,
        } => {
            let mut catalog = ScenarioCatalog::builtin();
            for path in &scenario {
                catalog.insert(load_bundle(Some(path))?);
            }
            let log = data_dir.map(EventLog::open).transpose()?;
            let state = Arc::new(erms_service::AppState::new(catalog, log)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                writeln!(out, "listening on {}", listener.local_addr()?)?;
                out.flush()?;
                erms_service::serve(listener, state).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
