//! Command-line front end: `solve`, `simulate`, `sweep`, `enumerate`, `tune`
//! and `transition`, each writing a comma-separated table.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 solver failure, 4 simulation failure.

use crate::bellman::{solve_beta_star, workload_thresholds, BellmanError, BellmanSolution};
use crate::config::{parse_config, ConfigError, RunConfig};
use crate::params::{derive_ladder, scale_to_limit, DriftLadder, LadderError, ScaleError};
use crate::simulator::{
    enumerate_static, run_experiment, solve_policy, sweep_gamma, transition_experiment, tune_theta0, all_static_policies, Estimate, ExperimentReport,
    Policy, QuarterEstimate, SimError, SolvedPolicy,
};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "engage", version, about = "Engagement-activity policies for a volunteer sign-up list")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal thresholds (thresholds.csv).
    Solve(CommonArgs),
    /// Simulate policies (report.csv).
    Simulate(CommonArgs),
    /// Re-solve and re-simulate over the configured abandonment rates (sweep.csv).
    Sweep(CommonArgs),
    /// Simulate every static activity subset (enumerate.csv).
    Enumerate(CommonArgs),
    /// Search the θ_0 grid for the cheapest dynamic policy (tune.csv).
    Tune(CommonArgs),
    /// Static-to-dynamic switch experiment (transition_a.csv, transition_b.csv).
    Transition(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `static:1,2,3` (1-based activity numbers), `static:` or `dynamic`; repeatable.
    #[arg(long)]
    pub policy: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<u32>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("simulation failed: {0}")]
    Sim(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Sim(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn activity_name(rc: &RunConfig, i: usize) -> String {
    rc.params.activities.get(i).map_or_else(|| format!("#{}", i + 1), |a| format!("`{}`", a.name))
}

fn ladder_error(rc: &RunConfig, e: &LadderError) -> CliError {
    match e {
        LadderError::Tie { a, b, c_hat } => CliError::Solver(format!(
            "activities {} and {} have the same marginal cost {c_hat}; merge them or reprice one (check the marginal-cost ordering)",
            activity_name(rc, *a),
            activity_name(rc, *b)
        )),
        LadderError::AbovePenalty { index, c_hat, p } => CliError::Solver(format!(
            "activity {} has marginal cost {c_hat} above the idleness penalty {p}; it is never worth using, remove it",
            activity_name(rc, *index)
        )),
        other => CliError::Solver(other.to_string()),
    }
}

fn bellman_error(e: &BellmanError) -> CliError {
    let hint = match e {
        BellmanError::Indeterminate { .. } | BellmanError::TerminalGap { .. } | BellmanError::NoUpperBracket { .. } => {
            "; raise solver.x_max or solver.max_escalations"
        }
        BellmanError::RootBracket { .. } => "; tighten solver.tol_beta or reduce solver.step",
        BellmanError::Overflow { .. } | BellmanError::PieceOverflow { .. } => "; reduce solver.x_max",
        _ => "",
    };
    CliError::Solver(format!("{e}{hint}"))
}

fn scale_error(e: &ScaleError) -> CliError {
    CliError::Config(e.to_string())
}

fn sim_error(rc: &RunConfig, e: SimError) -> CliError {
    match e {
        SimError::Solver(b) => bellman_error(&b),
        SimError::Ladder(l) => ladder_error(rc, &l),
        SimError::Scale(s) => scale_error(&s),
        SimError::Policy(p) => CliError::Config(format!("invalid policy: {p}")),
        other => CliError::Sim(other.to_string()),
    }
}

/// Parses `static:1,2,3`, `static:` or `dynamic`.
pub fn parse_policy(spec: &str, n_activities: usize) -> Result<PolicySpec, String> {
    let spec = spec.trim();
    if spec == "dynamic" {
        return Ok(PolicySpec::Dynamic);
    }
    let Some(list) = spec.strip_prefix("static:") else {
        return Err(format!("unknown policy `{spec}`; expected `static:<list>` or `dynamic`"));
    };
    let mut set = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let k: usize = item.parse().map_err(|_| format!("bad activity number `{item}` in `{spec}`"))?;
        if k == 0 || k > n_activities {
            return Err(format!("activity number {k} in `{spec}` outside 1..={n_activities}"));
        }
        if set.contains(&(k - 1)) {
            return Err(format!("activity {k} repeated in `{spec}`"));
        }
        set.push(k - 1);
    }
    Ok(PolicySpec::Static(set))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Static(Vec<usize>),
    Dynamic,
}

struct Provenance<'a> {
    hash: &'a str,
    seed: u64,
    reps: u32,
}

impl Provenance<'_> {
    const HEADER: &'static str = "config_hash,seed,replications";

    fn cols(&self) -> String {
        format!("{},{},{}", self.hash, self.seed, self.reps)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `contents` to `dir/name` through a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |path: &Path, source| CliError::Io { path: path.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| io(&tmp, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| io(&tmp, e))?;
    f.sync_all().map_err(|e| io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, &target).map_err(|e| io(&target, e))?;
    Ok(target)
}

fn load(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut rc = parse_config(&args.config)?;
    if let Some(s) = args.seed {
        rc.sim.seed = s;
    }
    if let Some(r) = args.reps {
        if r == 0 {
            return Err(CliError::Config("--reps must be positive".into()));
        }
        rc.sim.replications = r;
    }
    Ok(rc)
}

pub struct SolveOutput {
    pub ladder: DriftLadder,
    pub solution: BellmanSolution,
    pub queue_thresholds: Vec<f64>,
}

pub fn solve(rc: &RunConfig) -> Result<SolveOutput, CliError> {
    let limit = scale_to_limit(&rc.params).map_err(|e| scale_error(&e))?;
    let ladder = derive_ladder(&limit).map_err(|e| ladder_error(rc, &e))?;
    let solution = solve_beta_star(&ladder, &rc.solver).map_err(|e| bellman_error(&e))?;
    let queue_thresholds = workload_thresholds(&solution, limit.n, limit.classes[0].mu);
    Ok(SolveOutput { ladder, solution, queue_thresholds })
}

pub fn thresholds_csv(rc: &RunConfig, s: &SolveOutput) -> String {
    let prov = Provenance { hash: &rc.hash, seed: rc.sim.seed, reps: rc.sim.replications };
    let mut out = format!("rank,activity,eta,fixed_cost,c_hat,theta,tau,q_star,beta_star,terminal_gap,{}\n", Provenance::HEADER);
    for l in 0..s.ladder.len() {
        let name = &rc.params.activities[s.ladder.order[l]].name;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            l + 1,
            csv_field(name),
            s.ladder.eta[l],
            s.ladder.fixed_cost[l],
            s.ladder.c_hat[l],
            s.ladder.theta[l + 1],
            s.solution.tau[l],
            s.queue_thresholds[l],
            s.solution.beta_star,
            s.solution.terminal_gap,
            prov.cols()
        );
    }
    out
}

fn cmd_solve(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let s = solve(&rc)?;
    write_atomic(&args.out, "thresholds.csv", &thresholds_csv(&rc, &s))?;
    let mut msg = format!(
        "beta* = {:.6}  theta_0 = {}  kappa = {:.6}  sigma^2 = {:.6}  terminal gap = {:.4} at x = {:.2}\n",
        s.solution.beta_star,
        s.ladder.theta[0],
        s.ladder.kappa,
        s.ladder.sigma2,
        s.solution.terminal_gap,
        s.solution.x_max
    );
    let _ = writeln!(msg, "{:>4}  {:<20} {:>9} {:>9} {:>9}", "rank", "activity", "c_hat", "tau", "q*");
    for l in 0..s.ladder.len() {
        let _ = writeln!(
            msg,
            "{:>4}  {:<20} {:>9.4} {:>9.5} {:>9.1}",
            l + 1,
            rc.params.activities[s.ladder.order[l]].name,
            s.ladder.c_hat[l],
            s.solution.tau[l],
            s.queue_thresholds[l]
        );
    }
    Ok(msg)
}

fn policies_for(rc: &RunConfig, specs: &[String]) -> Result<(Vec<Policy>, Option<SolvedPolicy>), CliError> {
    let n = rc.params.activities.len();
    let parsed: Vec<PolicySpec> = if specs.is_empty() {
        all_static_policies(n)
            .into_iter()
            .map(|p| match p {
                Policy::Static(s) => PolicySpec::Static(s),
                _ => unreachable!("static enumeration"),
            })
            .chain(std::iter::once(PolicySpec::Dynamic))
            .collect()
    } else {
        specs.iter().map(|s| parse_policy(s, n)).collect::<Result<_, _>>().map_err(CliError::Config)?
    };
    let solved = if parsed.contains(&PolicySpec::Dynamic) {
        Some(solve_policy(&rc.params, None, &rc.solver).map_err(|e| sim_error(rc, e))?)
    } else {
        None
    };
    let policies = parsed
        .into_iter()
        .map(|p| match p {
            PolicySpec::Static(s) => Policy::Static(s),
            PolicySpec::Dynamic => solved.as_ref().expect("solved when dynamic requested").policy.clone(),
        })
        .collect();
    Ok((policies, solved))
}

pub fn report_csv(rc: &RunConfig, rep: &ExperimentReport) -> String {
    let prov = Provenance { hash: &rc.hash, seed: rc.sim.seed, reps: rc.sim.replications };
    let mut out = format!("policy,metric,mean,half_width,{}\n", Provenance::HEADER);
    let mut row = |policy: &str, metric: &str, e: &Estimate| {
        let _ = writeln!(out, "{},{},{},{},{}", csv_field(policy), csv_field(metric), e.mean, e.half_width, prov.cols());
    };
    for p in &rep.policies {
        row(&p.label, "activity_cost", &p.activity_cost);
        row(&p.label, "idle_cost", &p.idle_cost);
        row(&p.label, "total_cost", &p.total_cost);
        row(&p.label, "idle_pct", &p.idle_pct);
        row(&p.label, "abandon_pct", &p.abandon_pct);
        for (a, u) in rc.params.activities.iter().zip(&p.activity_usage_pct) {
            row(&p.label, &format!("usage_pct:{}", a.name), u);
        }
        row(&p.label, "mean_queue_length", &p.mean_queue_length);
    }
    if let Some(imp) = rep.improvement_pct {
        row("dynamic", "improvement_pct", &Estimate { mean: imp, half_width: f64::NAN });
    }
    out
}

fn summary_table(rep: &ExperimentReport) -> String {
    let mut msg = format!("{:<16} {:>9} {:>9} {:>15} {:>8} {:>8}  usage %\n", "policy", "activity", "idle", "total", "abandon", "queue");
    for (i, p) in rep.policies.iter().enumerate() {
        let flag = if rep.best_static == Some(i) { " *" } else { "" };
        let usage: Vec<String> = p.activity_usage_pct.iter().map(|u| format!("{:.0}", u.mean)).collect();
        let _ = writeln!(
            msg,
            "{:<16} {:>9.0} {:>9.0} {:>9.0} ±{:>4.0} {:>7.2}% {:>8.1}  {}{}",
            p.label,
            p.activity_cost.mean,
            p.idle_cost.mean,
            p.total_cost.mean,
            p.total_cost.half_width,
            p.abandon_pct.mean,
            p.mean_queue_length.mean,
            usage.join("/"),
            flag
        );
    }
    if let Some(imp) = rep.improvement_pct {
        let _ = writeln!(msg, "dynamic improvement over best static: {imp:.1}%");
    }
    msg
}

fn cmd_simulate(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let specs = if args.policy.is_empty() { rc.file.experiment.policies.clone() } else { args.policy.clone() };
    let (policies, _) = policies_for(&rc, &specs)?;
    let rep = run_experiment(&rc.sim, &policies).map_err(|e| sim_error(&rc, e))?;
    write_atomic(&args.out, "report.csv", &report_csv(&rc, &rep))?;
    Ok(summary_table(&rep))
}

fn cmd_enumerate(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let rep = enumerate_static(&rc.sim).map_err(|e| sim_error(&rc, e))?;
    let prov = Provenance { hash: &rc.hash, seed: rc.sim.seed, reps: rc.sim.replications };
    let mut out = format!("policy,activity_cost,idle_cost,total_cost,total_cost_half_width,abandon_pct,mean_queue_length,best,{}\n", Provenance::HEADER);
    for (i, p) in rep.policies.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&p.label),
            p.activity_cost.mean,
            p.idle_cost.mean,
            p.total_cost.mean,
            p.total_cost.half_width,
            p.abandon_pct.mean,
            p.mean_queue_length.mean,
            u8::from(rep.best_static == Some(i)),
            prov.cols()
        );
    }
    write_atomic(&args.out, "enumerate.csv", &out)?;
    Ok(summary_table(&rep))
}

fn cmd_sweep(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let gammas = &rc.file.experiment.gammas_per_day;
    let rows = sweep_gamma(&rc.sim, gammas, &rc.solver).map_err(|e| sim_error(&rc, e))?;
    let prov = Provenance { hash: &rc.hash, seed: rc.sim.seed, reps: rc.sim.replications };
    let nl = rc.params.activities.len();
    let q_cols: Vec<String> = (1..=nl).map(|l| format!("q_star_{l}")).collect();
    let mut out = format!(
        "gamma_per_day,best_static,best_static_cost,best_static_half_width,dynamic_cost,dynamic_half_width,improvement_pct,{},{}\n",
        q_cols.join(","),
        Provenance::HEADER
    );
    let mut msg = format!("{:>8} {:<16} {:>12} {:>12} {:>8}\n", "gamma", "best static", "static", "dynamic", "improv.");
    for r in &rows {
        let q: Vec<String> = r.queue_thresholds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.gamma,
            csv_field(&r.best_static),
            r.best_static_cost.mean,
            r.best_static_cost.half_width,
            r.dynamic_cost.mean,
            r.dynamic_cost.half_width,
            r.improvement_pct,
            q.join(","),
            prov.cols()
        );
        let _ = writeln!(msg, "{:>8} {:<16} {:>12.0} {:>12.0} {:>7.1}%", r.gamma, r.best_static, r.best_static_cost.mean, r.dynamic_cost.mean, r.improvement_pct);
    }
    write_atomic(&args.out, "sweep.csv", &out)?;
    Ok(msg)
}

fn cmd_tune(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let res = tune_theta0(&rc.sim, &rc.file.experiment.theta0_grid, &rc.solver).map_err(|e| sim_error(&rc, e))?;
    let prov = Provenance { hash: &rc.hash, seed: rc.sim.seed, reps: rc.sim.replications };
    let nl = rc.params.activities.len();
    let q_cols: Vec<String> = (1..=nl).map(|l| format!("q_star_{l}")).collect();
    let mut out = format!("theta0,total_cost,total_cost_half_width,best,{},{}\n", q_cols.join(","), Provenance::HEADER);
    let mut msg = String::new();
    for r in &res.grid {
        let q: Vec<String> = r.queue_thresholds.iter().map(|x| x.to_string()).collect();
        let best = r.theta0 == res.best_theta0;
        let _ = writeln!(out, "{},{},{},{},{},{}", r.theta0, r.total_cost.mean, r.total_cost.half_width, u8::from(best), q.join(","), prov.cols());
        let _ = writeln!(msg, "theta_0 {:>6} total {:>8.0} ±{:>5.0}{}", r.theta0, r.total_cost.mean, r.total_cost.half_width, if best { " *" } else { "" });
    }
    write_atomic(&args.out, "tune.csv", &out)?;
    Ok(msg)
}

fn transition_csv(rows: &[QuarterEstimate], diff: Option<&[Estimate]>, policy: &str, prov: &Provenance) -> String {
    let extra = if diff.is_some() { "queue_diff_vs_a,queue_diff_half_width," } else { "" };
    let mut out = format!(
        "quarter,policy,mean_queue,mean_queue_half_width,abandon_pct,abandon_pct_half_width,activity_cost,activity_cost_half_width,{extra}{}\n",
        Provenance::HEADER
    );
    for (q, r) in rows.iter().enumerate() {
        let d = diff.map(|d| format!("{},{},", d[q].mean, d[q].half_width)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{d}{}",
            q + 1,
            csv_field(policy),
            r.mean_queue.mean,
            r.mean_queue.half_width,
            r.abandon_pct.mean,
            r.abandon_pct.half_width,
            r.activity_cost.mean,
            r.activity_cost.half_width,
            prov.cols()
        );
    }
    out
}

fn cmd_transition(args: &CommonArgs) -> Result<String, CliError> {
    let rc = load(args)?;
    let exp = &rc.file.experiment;
    let n = rc.params.activities.len();
    let mut cfg = rc.sim.clone();
    cfg.horizon_years = exp.transition_horizon_years;
    cfg.replications = args.reps.unwrap_or(exp.transition_replications);
    let static_policy = if !args.policy.is_empty() || !exp.transition_static.is_empty() {
        let spec = args.policy.first().unwrap_or(&exp.transition_static);
        match parse_policy(spec, n).map_err(CliError::Config)? {
            PolicySpec::Static(s) => Policy::Static(s),
            PolicySpec::Dynamic => return Err(CliError::Config("the transition's first policy must be static".into())),
        }
    } else {
        let rep = enumerate_static(&rc.sim).map_err(|e| sim_error(&rc, e))?;
        let best = rep.best_static.expect("enumeration yields static policies");
        all_static_policies(n).swap_remove(best)
    };
    let solved = solve_policy(&rc.params, None, &rc.solver).map_err(|e| sim_error(&rc, e))?;
    let series = transition_experiment(&cfg, &static_policy, &solved.policy, exp.switch_quarter).map_err(|e| sim_error(&rc, e))?;
    let prov = Provenance { hash: &rc.hash, seed: cfg.seed, reps: cfg.replications };
    let label_b = format!("{}>dynamic@q{}", static_policy.label(), exp.switch_quarter);
    write_atomic(&args.out, "transition_a.csv", &transition_csv(&series.a, None, "dynamic", &prov))?;
    write_atomic(&args.out, "transition_b.csv", &transition_csv(&series.b, Some(&series.queue_diff), &label_b, &prov))?;
    let sq = exp.switch_quarter;
    let mut msg = format!("Sim A: dynamic; Sim B: {} until quarter {sq}, then dynamic\n", static_policy.label());
    for q in sq.saturating_sub(3)..(sq + 3).min(series.a.len() + 1) {
        if q == 0 {
            continue;
        }
        let d = series.queue_diff[q - 1];
        let _ = writeln!(
            msg,
            "q{:<4} queue A {:>7.1}  B {:>7.1}  B-A {:>6.1} ±{:.1}",
            q,
            series.a[q - 1].mean_queue.mean,
            series.b[q - 1].mean_queue.mean,
            d.mean,
            d.half_width
        );
    }
    Ok(msg)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Transition(a) => cmd_transition(a),
    };
    match result {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_specs() {
        assert_eq!(parse_policy("static:1,2,3", 4), Ok(PolicySpec::Static(vec![0, 1, 2])));
        assert_eq!(parse_policy("static:", 4), Ok(PolicySpec::Static(vec![])));
        assert_eq!(parse_policy("dynamic", 4), Ok(PolicySpec::Dynamic));
        assert!(parse_policy("static:5", 4).is_err());
        assert!(parse_policy("static:1,1", 4).is_err());
        assert!(parse_policy("greedy", 4).unwrap_err().contains("unknown policy"));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
