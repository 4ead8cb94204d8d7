//! Mode dispatch and output writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ste_core::evaluation::{
    bootstrap_with, estimate_tournament, recovery_curve, BootstrapConfig, CoreTarget,
};
use ste_core::estimation::{empirical_tournament, train_ste, ComparisonDataset};
use ste_core::soft::{ste_scores, CoreScores, TOP_CYCLE_RULE, UNCOVERED_RULE};
use ste_core::synthetic::gen_instance;
use ste_core::tournament::{
    condorcet_winner, margin_report, threshold, top_cycle, uncovered_set, AgentRegistry, AgentSet,
};
use toml::{Table, Value};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, Result};
use crate::io::{
    comparisons_csv, load_comparisons, load_matrix, looks_like_comparisons, matrix_csv,
    NamedTournament,
};
use crate::report::{Report, REPORT_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Write a fixed timestamp so reruns are byte-identical.
    pub reproducible: bool,
}

/// Files produced by a run, as (name, contents), before anything touches disk.
pub type Outputs = Vec<(String, String)>;

fn names(agents: &AgentRegistry, set: &AgentSet) -> Value {
    Value::Array(set.iter().map(|&a| agents.name(a).into()).collect())
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn load_tournament(cfg: &ExperimentConfig) -> Result<NamedTournament> {
    match (&cfg.input.matrix, &cfg.input.comparisons) {
        (Some(path), _) => load_matrix(path),
        (None, Some(path)) => {
            let data = load_comparisons(path)?;
            Ok(NamedTournament {
                p: empirical_tournament(&data),
                agents: data.agents().clone(),
            })
        }
        (None, None) => Err(CliError::Config("no input given".into())),
    }
}

fn comparisons(cfg: &ExperimentConfig) -> Result<ComparisonDataset> {
    let path = cfg
        .input
        .comparisons
        .as_ref()
        .ok_or_else(|| CliError::Config("input.comparisons is required".into()))?;
    load_comparisons(path)
}

fn insert_cores(results: &mut Table, agents: &AgentRegistry, s: &CoreScores) {
    results.insert("top_cycle_core".into(), names(agents, &s.top_cycle_core()));
    results.insert("uncovered_core".into(), names(agents, &s.uncovered_core()));
    results.insert("argmax_t".into(), agents.name(s.argmax_t()).into());
    results.insert("argmax_u".into(), agents.name(s.argmax_u()).into());
}

fn solve(cfg: &ExperimentConfig) -> Result<(Table, Outputs)> {
    let NamedTournament { agents, p } = load_tournament(cfg)?;
    if p.n() == 0 {
        return Err(CliError::Data("no agents in input".into()));
    }
    let hard = threshold(&p);
    if !hard.is_tie_free() {
        let (a, b) = hard.ties()[0];
        return Err(CliError::Data(format!(
            "{} tied pair(s) at probability 0.5, first {} vs {}; exact solutions need a tie-free tournament",
            hard.ties().len(),
            agents.name(a),
            agents.name(b)
        )));
    }
    let tc = top_cycle(&hard)?;
    let uc = uncovered_set(&hard)?;
    let winner = condorcet_winner(&hard);
    let mut results = Table::new();
    results.insert("agents".into(), Value::Integer(p.n() as i64));
    results.insert("top_cycle".into(), names(&agents, &tc));
    results.insert("uncovered_set".into(), names(&agents, &uc));
    results.insert(
        "condorcet_winner".into(),
        winner.map_or("none", |w| agents.name(w)).into(),
    );
    results.insert("margin".into(), margin_report(&p).delta.into());
    let mut csv = String::from("agent,in_top_cycle,in_uncovered_set,condorcet_winner\n");
    for a in 0..p.n() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            quote(agents.name(a)),
            flag(tc.contains(&a)),
            flag(uc.contains(&a)),
            flag(winner == Some(a))
        );
    }
    Ok((results, vec![("membership.csv".into(), csv)]))
}

/// Quotes a name for CSV output when needed.
fn quote(name: &str) -> String {
    if name.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", name.replace('"', "\"\""))
    } else {
        name.to_string()
    }
}

fn scores_csv(agents: &AgentRegistry, s: &CoreScores, lambda: Option<&[f64]>) -> String {
    let tc = s.top_cycle_core();
    let uc = s.uncovered_core();
    let mut csv = String::from(if lambda.is_some() {
        "agent,lambda,t,u,in_top_cycle_core,in_uncovered_core\n"
    } else {
        "agent,t,u,in_top_cycle_core,in_uncovered_core\n"
    });
    for a in 0..s.t.len() {
        let _ = write!(csv, "{},", quote(agents.name(a)));
        if let Some(l) = lambda {
            let _ = write!(csv, "{},", l[a]);
        }
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            s.t[a],
            s.u[a],
            flag(tc.contains(&a)),
            flag(uc.contains(&a))
        );
    }
    csv
}

fn soft(cfg: &mut ExperimentConfig) -> Result<(Table, Outputs)> {
    let NamedTournament { agents, p } = load_tournament(cfg)?;
    if p.n() == 0 {
        return Err(CliError::Data("no agents in input".into()));
    }
    cfg.soft = cfg.soft.resolved(p.n());
    let s = ste_scores(&p, &cfg.soft)?;
    let mut results = Table::new();
    results.insert("agents".into(), Value::Integer(p.n() as i64));
    insert_cores(&mut results, &agents, &s);
    Ok((results, vec![("scores.csv".into(), scores_csv(&agents, &s, None))]))
}

fn fit(cfg: &mut ExperimentConfig) -> Result<(Table, Outputs)> {
    let data = comparisons(cfg)?;
    if data.is_empty() {
        return Err(CliError::Data("no comparisons to fit".into()));
    }
    cfg.train.soft = cfg.train.soft.resolved(data.n());
    let out = train_ste(&data, &cfg.train, None)?;
    let agents = data.agents();
    let mut results = Table::new();
    results.insert("agents".into(), Value::Integer(data.n() as i64));
    results.insert("comparisons".into(), Value::Integer(data.len() as i64));
    results.insert("epochs_run".into(), Value::Integer(out.loss_trace.len() as i64));
    results.insert("stopped_early".into(), out.stopped_early.into());
    if let Some(&last) = out.loss_trace.last() {
        results.insert("final_loss".into(), last.into());
    }
    results.insert("final_tau".into(), cfg.train.anneal.tau_min.into());
    insert_cores(&mut results, agents, &out.scores);
    let mut trace = String::from("epoch,loss\n");
    for (e, l) in out.loss_trace.iter().enumerate() {
        let _ = writeln!(trace, "{e},{l}");
    }
    Ok((
        results,
        vec![
            ("scores.csv".into(), scores_csv(agents, &out.scores, Some(out.params.lambda()))),
            ("fitted_matrix.csv".into(), matrix_csv(agents, &out.params.tournament())),
            ("loss_trace.csv".into(), trace),
        ],
    ))
}

fn synth(cfg: &ExperimentConfig) -> Result<(Table, Outputs)> {
    let inst = gen_instance(&cfg.synth)?;
    let agents = inst.dataset.agents();
    let mut results = Table::new();
    results.insert("agents".into(), Value::Integer(cfg.synth.n as i64));
    results.insert("comparisons".into(), Value::Integer(inst.dataset.len() as i64));
    results.insert("effective_seed".into(), Value::String(inst.effective_seed.to_string()));
    results.insert("truth_top_cycle".into(), names(agents, &inst.truth_tc));
    results.insert("truth_uncovered_set".into(), names(agents, &inst.truth_uc));
    results.insert("margin".into(), margin_report(&inst.truth_p).delta.into());
    let mut strengths = String::from("agent,lambda\n");
    for (a, l) in inst.lambda_true.iter().enumerate() {
        let _ = writeln!(strengths, "{},{l}", agents.name(a));
    }
    Ok((
        results,
        vec![
            ("truth_matrix.csv".into(), matrix_csv(agents, &inst.truth_p)),
            ("comparisons.csv".into(), comparisons_csv(&inst.dataset)),
            ("strengths.csv".into(), strengths),
        ],
    ))
}

fn experiment(cfg: &ExperimentConfig) -> Result<(Table, Outputs)> {
    let grid = cfg.experiment.cells(cfg.seed);
    let table = recovery_curve(&grid, &cfg.recovery())?;
    let mut results = Table::new();
    results.insert("cells".into(), Value::Integer(grid.len() as i64));
    results.insert("rows".into(), Value::Integer(table.rows.len() as i64));
    let errors: usize = table.summary.iter().map(|s| s.errors).sum();
    results.insert("failed_runs".into(), Value::Integer(errors as i64));
    Ok((
        results,
        vec![
            ("recovery_rows.csv".into(), table.rows_csv()),
            ("recovery_summary.csv".into(), table.summary_csv()),
        ],
    ))
}

fn bootstrap(cfg: &ExperimentConfig) -> Result<(Table, Outputs)> {
    let data = comparisons(cfg)?;
    let sec = &cfg.bootstrap;
    let rule = match sec.target {
        CoreTarget::TopCycle => TOP_CYCLE_RULE,
        CoreTarget::Uncovered => UNCOVERED_RULE,
    };
    let pipeline = |d: &ComparisonDataset| {
        let p = estimate_tournament(d, sec.estimator, &cfg.train)?;
        let s = ste_scores(&p, &cfg.soft)?;
        Ok(match sec.target {
            CoreTarget::TopCycle => s.t,
            CoreTarget::Uncovered => s.u,
        })
    };
    let bcfg = BootstrapConfig {
        replicates: sec.replicates,
        unit: sec.unit,
        seed: cfg.seed,
    };
    let r = bootstrap_with(&data, &bcfg, pipeline, rule)?;
    let mut results = Table::new();
    results.insert("replicates".into(), Value::Integer(r.replicates as i64));
    results.insert("failed".into(), Value::Integer(r.failed as i64));
    results.insert("stability_jaccard".into(), r.stability_jaccard.into());
    results.insert(
        "rule".into(),
        Value::try_from(r.rule).expect("rule serializes"),
    );
    Ok((results, vec![("bootstrap.csv".into(), r.to_csv())]))
}

/// Computes a resolved config's outputs without touching disk. Modes that
/// learn `n` from their input expand the remaining defaults in `cfg`.
pub fn execute(cfg: &mut ExperimentConfig) -> Result<(Table, Outputs)> {
    let mode = cfg
        .mode
        .ok_or_else(|| CliError::Config("mode is not set".into()))?;
    match mode {
        Mode::Solve => solve(cfg),
        Mode::Soft => soft(cfg),
        Mode::Fit => fit(cfg),
        Mode::Synth => synth(cfg),
        Mode::Experiment => experiment(cfg),
        Mode::Bootstrap => bootstrap(cfg),
    }
}

/// Routes an untyped input file to the matrix or comparison slot.
pub fn assign_input(cfg: &mut ExperimentConfig, path: PathBuf) -> Result<()> {
    if looks_like_comparisons(&path)? {
        cfg.input.comparisons = Some(path);
        cfg.input.matrix = None;
    } else {
        cfg.input.matrix = Some(path);
        cfg.input.comparisons = None;
    }
    Ok(())
}

/// Resolves, computes and writes everything. On failure no output file from
/// this run is left behind.
pub fn run(cfg: ExperimentConfig, mode: Mode, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.resolve(mode)?;
    let (results, mut outputs) = execute(&mut cfg)?;
    let files = outputs.iter().map(|(n, _)| n.clone()).collect();
    let report = Report::new(cfg, results, files, opts.reproducible);
    outputs.push((REPORT_FILE.into(), report.render()));
    write_all(&opts.out, &outputs)
}

fn write_all(out: &Path, outputs: &Outputs) -> Result<Vec<PathBuf>> {
    let created = !out.exists();
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let mut written = Vec::new();
    for (name, body) in outputs {
        let path = out.join(name);
        if let Err(e) = std::fs::write(&path, body) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            if created {
                let _ = std::fs::remove_dir(out);
            }
            return Err(CliError::Io { path, source: e });
        }
        written.push(path);
    }
    Ok(written)
}
