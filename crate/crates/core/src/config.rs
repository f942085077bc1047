//! TOML run configuration: parsing with file/line diagnostics, conversion to
//! model and simulation types, and lossless re-serialization.

use crate::bellman::SolverOptions;
use crate::params::{
    validate_nth_params, ClassKind, EngagementActivity, FrequencyBand, GammaUnits, NthSystemParams, Schedule, VolunteerClass, WEEKS_PER_YEAR,
};
use crate::simulator::{AbandonModel, ArrivalDays, SimConfig, SlotsModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Io,
    Syntax,
    MissingSection,
    UnknownKey,
    UnitMismatch,
    Invariant,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub path: String,
    /// 1-based line, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{}:{}: {}", self.path, l, c, self.message),
            (Some(l), None) => write!(f, "{}:{}: {}", self.path, l, self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKindSpec {
    Repeat,
    OneTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub share: f64,
    pub rate_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub kind: ClassKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_volunteers: Option<f64>,
    /// Repose exit rate per volunteer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_per_year: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrivals_per_year: Option<f64>,
    pub gamma_per_day: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frequency_mix: Vec<BandSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivitySpec {
    pub name: String,
    /// Class names.
    pub targets: Vec<String>,
    pub fixed_cost_dollars_per_year: f64,
    pub schedule: Schedule,
    pub boost_arrivals_per_activation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotsSpec {
    #[default]
    Fixed,
    Discrete3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbandonSpec {
    #[default]
    Exponential,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub scaling_n: f64,
    pub slots_per_day: u32,
    pub working_days_per_week: u32,
    pub idle_penalty_dollars_per_slot: f64,
    #[serde(default = "d_horizon")]
    pub horizon_years: u32,
    #[serde(default = "d_warmup")]
    pub warmup_years: u32,
    #[serde(default = "d_measure")]
    pub measure_years: u32,
    #[serde(default = "d_reps")]
    pub replications: u32,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub slots_model: SlotsSpec,
    /// Low, middle and high daily slots for `discrete3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots_discrete: Option<[u32; 3]>,
    #[serde(default)]
    pub abandonment: AbandonSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_shape: Option<f64>,
    #[serde(default)]
    pub arrival_days: ArrivalDays,
    #[serde(default)]
    pub weekly_day: u32,
    #[serde(default = "d_true")]
    pub crn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default)]
    pub gamma_units: GammaUnits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default = "d_step")]
    pub step: f64,
    #[serde(default = "d_tol_beta")]
    pub tol_beta: f64,
    #[serde(default = "d_tol_terminal")]
    pub tol_terminal: f64,
    #[serde(default = "d_root_tol")]
    pub root_tol: f64,
    #[serde(default = "d_escalations")]
    pub max_escalations: u32,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::from_options(None, GammaUnits::PerDay, &SolverOptions::default())
    }
}

impl SolverSpec {
    fn from_options(theta0: Option<f64>, gamma_units: GammaUnits, o: &SolverOptions) -> Self {
        SolverSpec {
            theta0,
            gamma_units,
            x_max: o.x_max,
            step: o.step,
            tol_beta: o.tol_beta,
            tol_terminal: o.tol_terminal,
            root_tol: o.root_tol,
            max_escalations: o.max_escalations,
            samples: o.samples,
        }
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            x_max: self.x_max,
            step: self.step,
            tol_beta: self.tol_beta,
            tol_terminal: self.tol_terminal,
            root_tol: self.root_tol,
            max_escalations: self.max_escalations,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Policies for `simulate`; empty means every static subset plus dynamic.
    #[serde(default)]
    pub policies: Vec<String>,
    #[serde(default = "d_gammas")]
    pub gammas_per_day: Vec<f64>,
    #[serde(default = "d_theta_grid")]
    pub theta0_grid: Vec<f64>,
    /// Sim B static policy; empty means the best static found by enumeration.
    #[serde(default)]
    pub transition_static: String,
    #[serde(default = "d_switch")]
    pub switch_quarter: usize,
    #[serde(default = "d_trans_years")]
    pub transition_horizon_years: u32,
    #[serde(default = "d_trans_reps")]
    pub transition_replications: u32,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            policies: Vec::new(),
            gammas_per_day: d_gammas(),
            theta0_grid: d_theta_grid(),
            transition_static: String::new(),
            switch_quarter: d_switch(),
            transition_horizon_years: d_trans_years(),
            transition_replications: d_trans_reps(),
        }
    }
}

fn d_horizon() -> u32 {
    25
}
fn d_warmup() -> u32 {
    20
}
fn d_measure() -> u32 {
    5
}
fn d_reps() -> u32 {
    20
}
fn d_seed() -> u64 {
    20_240_601
}
fn d_true() -> bool {
    true
}
fn d_step() -> f64 {
    SolverOptions::default().step
}
fn d_tol_beta() -> f64 {
    SolverOptions::default().tol_beta
}
fn d_tol_terminal() -> f64 {
    SolverOptions::default().tol_terminal
}
fn d_root_tol() -> f64 {
    SolverOptions::default().root_tol
}
fn d_escalations() -> u32 {
    SolverOptions::default().max_escalations
}
fn d_samples() -> usize {
    SolverOptions::default().samples
}
fn d_gammas() -> Vec<f64> {
    vec![0.005, 0.010, 0.015, 0.020, 0.025]
}
fn d_theta_grid() -> Vec<f64> {
    vec![-2.2, -2.0, -1.8, -1.6, -1.4, -1.2, -1.0, -0.8, -0.6]
}
fn d_switch() -> usize {
    101
}
fn d_trans_years() -> u32 {
    50
}
fn d_trans_reps() -> u32 {
    50
}

/// The file representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub classes: Vec<ClassSpec>,
    pub activities: Vec<ActivitySpec>,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub params: NthSystemParams,
    pub sim: SimConfig,
    pub solver: SolverOptions,
    pub source: Option<PathBuf>,
    /// SHA-256 of the source text, hex.
    pub hash: String,
}

const REQUIRED_SECTIONS: [&str; 3] = ["classes", "activities", "simulation"];

/// Quantity stems and the only unit each is read in.
const UNIT_KEYS: [(&str, &str); 7] = [
    ("gamma", "gamma_per_day"),
    ("rate", "rate_per_year"),
    ("arrivals", "arrivals_per_year"),
    ("fixed_cost", "fixed_cost_dollars_per_year"),
    ("idle_penalty", "idle_penalty_dollars_per_slot"),
    ("population", "population_volunteers"),
    ("boost_arrivals", "boost_arrivals_per_activation"),
];

const UNIT_SUFFIXES: [&str; 12] = [
    "per_day",
    "per_week",
    "per_month",
    "per_year",
    "per_hour",
    "per_quarter",
    "dollars",
    "dollars_per_day",
    "dollars_per_year",
    "dollars_per_slot",
    "volunteers",
    "per_activation",
];

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Io,
        path: label.clone(),
        line: None,
        column: None,
        message: format!("cannot read config: {e}"),
    })?;
    let mut rc = parse_config_str(&text, &label)?;
    rc.source = Some(path.to_path_buf());
    Ok(rc)
}

/// Parses config text; `label` names the source in error messages.
pub fn parse_config_str(text: &str, label: &str) -> Result<RunConfig, ConfigError> {
    let err = |kind, line: Option<usize>, column: Option<usize>, message: String| ConfigError { kind, path: label.to_string(), line, column, message };
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (l, c) = e.span().map(|s| line_col(text, s.start)).unzip();
        err(ConfigErrorKind::Syntax, l, c, e.message().trim().to_string())
    })?;
    for s in REQUIRED_SECTIONS {
        if !table.contains_key(s) {
            return Err(err(ConfigErrorKind::MissingSection, None, None, format!("missing section: {s}")));
        }
    }
    check_units(&toml::Value::Table(table), text, label)?;
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (l, c) = e.span().map(|s| line_col(text, s.start)).unzip();
        let msg = e.message().trim().to_string();
        let kind = if msg.starts_with("unknown field") { ConfigErrorKind::UnknownKey } else { ConfigErrorKind::Syntax };
        err(kind, l, c, msg)
    })?;
    let mut rc = build(&file, text, label)?;
    rc.hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(rc)
}

fn check_units(v: &toml::Value, text: &str, label: &str) -> Result<(), ConfigError> {
    match v {
        toml::Value::Table(t) => {
            for (k, val) in t {
                if let Some(expected) = unit_mismatch(k) {
                    return Err(ConfigError {
                        kind: ConfigErrorKind::UnitMismatch,
                        path: label.to_string(),
                        line: key_line(text, k, 0),
                        column: None,
                        message: format!("unit mismatch: `{k}` given, this quantity is read as `{expected}`"),
                    });
                }
                check_units(val, text, label)?;
            }
            Ok(())
        }
        toml::Value::Array(a) => a.iter().try_for_each(|x| check_units(x, text, label)),
        _ => Ok(()),
    }
}

fn unit_mismatch(key: &str) -> Option<&'static str> {
    for (stem, expected) in UNIT_KEYS {
        if key == expected {
            return None;
        }
        if let Some(rest) = key.strip_prefix(stem).and_then(|r| r.strip_prefix('_')) {
            if UNIT_SUFFIXES.contains(&rest) {
                return Some(expected);
            }
        }
    }
    None
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// Line of the first `key =` at or after line `from` (0-based).
fn key_line(text: &str, key: &str, from: usize) -> Option<usize> {
    text.lines().enumerate().skip(from).find_map(|(i, l)| {
        let t = l.trim_start();
        let rest = t.strip_prefix(key)?;
        rest.trim_start().starts_with('=').then_some(i + 1)
    })
}

/// Line of the `idx`-th `[[section]]` header.
fn array_header_line(text: &str, section: &str, idx: usize) -> Option<usize> {
    let header = format!("[[{section}]]");
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == header)
        .nth(idx)
        .map(|(i, _)| i + 1)
}

fn table_header_line(text: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

/// Best-effort line for a validation field such as `classes[2].population`.
fn locate(text: &str, field: &str) -> Option<usize> {
    for section in ["classes", "activities"] {
        if let Some(rest) = field.strip_prefix(section).and_then(|r| r.strip_prefix('[')) {
            let idx: usize = rest.split(']').next()?.parse().ok()?;
            let header = array_header_line(text, section, idx);
            let key = rest.split("].").nth(1).map(|k| match k {
                "population" => "population_volunteers",
                "repose_exit_rate" => "rate_per_year",
                "arrival_rate" => "arrivals_per_year",
                "abandonment_rate" => "gamma_per_day",
                "fixed_cost" => "fixed_cost_dollars_per_year",
                "boost_per_activation" => "boost_arrivals_per_activation",
                other => other,
            });
            return match (header, key) {
                (Some(h), Some(k)) => key_line(text, k, h).or(Some(h)),
                (h, _) => h,
            };
        }
    }
    table_header_line(text, "simulation")
}

fn build(file: &ConfigFile, text: &str, label: &str) -> Result<RunConfig, ConfigError> {
    let invariant = |line: Option<usize>, message: String| ConfigError {
        kind: ConfigErrorKind::Invariant,
        path: label.to_string(),
        line,
        column: None,
        message,
    };
    let s = &file.simulation;
    let capacity = s.slots_per_day as f64 * s.working_days_per_week as f64 * WEEKS_PER_YEAR;
    let mut classes = Vec::with_capacity(file.classes.len());
    for (j, c) in file.classes.iter().enumerate() {
        let at = |k: &str| array_header_line(text, "classes", j).and_then(|h| key_line(text, k, h)).or(array_header_line(text, "classes", j));
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| invariant(at("kind"), format!("class `{}` needs `{k}`", c.name)));
        let forbid = |v: Option<f64>, k: &str| match v {
            Some(_) => Err(invariant(at(k), format!("class `{}` of this kind does not take `{k}`", c.name))),
            None => Ok(()),
        };
        let mut vc = match c.kind {
            ClassKindSpec::Repeat => {
                forbid(c.arrivals_per_year, "arrivals_per_year")?;
                VolunteerClass::repeat(&c.name, need(c.population_volunteers, "population_volunteers")?, need(c.rate_per_year, "rate_per_year")?, c.gamma_per_day, capacity)
            }
            ClassKindSpec::OneTime => {
                forbid(c.population_volunteers, "population_volunteers")?;
                forbid(c.rate_per_year, "rate_per_year")?;
                VolunteerClass::one_time(&c.name, need(c.arrivals_per_year, "arrivals_per_year")?, c.gamma_per_day, capacity)
            }
        };
        vc.alpha = c.alpha;
        vc.mix_weight = c.mix_weight;
        vc.frequency_mix = c.frequency_mix.iter().map(|b| FrequencyBand { share: b.share, rate_per_year: b.rate_per_year }).collect();
        classes.push(vc);
    }
    for (i, a) in file.classes.iter().enumerate() {
        if file.classes[..i].iter().any(|b| b.name == a.name) {
            return Err(invariant(array_header_line(text, "classes", i), format!("duplicate class name `{}`", a.name)));
        }
    }
    let mut activities = Vec::with_capacity(file.activities.len());
    for (l, a) in file.activities.iter().enumerate() {
        let at = array_header_line(text, "activities", l);
        let mut idx = Vec::with_capacity(a.targets.len());
        for t in &a.targets {
            let j = file
                .classes
                .iter()
                .position(|c| &c.name == t)
                .ok_or_else(|| invariant(at.and_then(|h| key_line(text, "targets", h)).or(at), format!("activity `{}` targets unknown class `{t}`", a.name)))?;
            idx.push(j);
        }
        if idx.is_empty() {
            return Err(invariant(at, format!("activity `{}` has no targets", a.name)));
        }
        if a.schedule == Schedule::Daily && s.working_days_per_week == 0 {
            return Err(invariant(at, "daily activity needs working days".into()));
        }
        activities.push(EngagementActivity::proportional(
            &a.name,
            &classes,
            &idx,
            a.fixed_cost_dollars_per_year,
            a.schedule,
            a.boost_arrivals_per_activation,
            s.working_days_per_week,
        ));
    }
    let params = NthSystemParams {
        classes,
        activities,
        scaling_n: s.scaling_n,
        idleness_penalty: s.idle_penalty_dollars_per_slot,
        slots_per_day: s.slots_per_day,
        working_days_per_week: s.working_days_per_week,
        gamma_units: file.solver.gamma_units,
        theta0_override: file.solver.theta0,
    };
    if let Some(d) = validate_nth_params(&params).into_iter().next() {
        return Err(invariant(locate(text, &d.field), d.to_string()));
    }

    let slots = match (s.slots_model, s.slots_discrete) {
        (SlotsSpec::Fixed, None) => SlotsModel::Fixed(s.slots_per_day),
        (SlotsSpec::Discrete3, Some([a, b, c])) => SlotsModel::Discrete3(a, b, c),
        (SlotsSpec::Fixed, Some(_)) => {
            return Err(invariant(key_line(text, "slots_discrete", 0), "`slots_discrete` needs slots_model = \"discrete3\"".into()))
        }
        (SlotsSpec::Discrete3, None) => return Err(invariant(key_line(text, "slots_model", 0), "slots_model = \"discrete3\" needs `slots_discrete`".into())),
    };
    let abandon = match (s.abandonment, s.gamma_shape) {
        (AbandonSpec::Exponential, None) => AbandonModel::Exponential,
        (AbandonSpec::Gamma, Some(shape)) => AbandonModel::Gamma { shape },
        (AbandonSpec::Exponential, Some(_)) => {
            return Err(invariant(key_line(text, "gamma_shape", 0), "`gamma_shape` needs abandonment = \"gamma\"".into()))
        }
        (AbandonSpec::Gamma, None) => return Err(invariant(key_line(text, "abandonment", 0), "abandonment = \"gamma\" needs `gamma_shape`".into())),
    };
    let sim = SimConfig {
        params: params.clone(),
        horizon_years: s.horizon_years,
        warmup_years: s.warmup_years,
        measure_years: s.measure_years,
        replications: s.replications,
        seed: s.seed,
        slots,
        abandon,
        arrival_days: s.arrival_days,
        weekly_day: s.weekly_day,
        crn: s.crn,
    };
    sim.validate().map_err(|e| invariant(table_header_line(text, "simulation"), e.to_string()))?;
    let solver = file.solver.options();
    if !(solver.step > 0.0 && solver.tol_beta > 0.0 && solver.tol_terminal > 0.0 && solver.root_tol > 0.0 && solver.samples >= 2) {
        return Err(invariant(table_header_line(text, "solver"), "solver step, tolerances and samples must be positive".into()));
    }
    Ok(RunConfig { file: file.clone(), params, sim, solver, source: None, hash: String::new() })
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        self.file.to_toml()
    }
}

impl ConfigFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    /// File form of a parameter set, with default simulation and solver settings.
    pub fn from_params(params: &NthSystemParams) -> Self {
        let classes = params
            .classes
            .iter()
            .map(|c| {
                let (kind, pop, rate, arr) = match c.kind {
                    ClassKind::Repeat { population, repose_exit_rate } => (ClassKindSpec::Repeat, Some(population), Some(repose_exit_rate), None),
                    ClassKind::OneTime { arrival_rate } => (ClassKindSpec::OneTime, None, None, Some(arrival_rate)),
                };
                ClassSpec {
                    name: c.name.clone(),
                    kind,
                    population_volunteers: pop,
                    rate_per_year: rate,
                    arrivals_per_year: arr,
                    gamma_per_day: c.abandonment_rate,
                    alpha: c.alpha,
                    mix_weight: c.mix_weight,
                    frequency_mix: c.frequency_mix.iter().map(|b| BandSpec { share: b.share, rate_per_year: b.rate_per_year }).collect(),
                }
            })
            .collect();
        let activities = params
            .activities
            .iter()
            .map(|a| ActivitySpec {
                name: a.name.clone(),
                targets: a.targets().iter().map(|&j| params.classes[j].name.clone()).collect(),
                fixed_cost_dollars_per_year: a.fixed_cost,
                schedule: a.schedule,
                boost_arrivals_per_activation: a.boost_per_activation,
            })
            .collect();
        let d = SimConfig::new(params.clone());
        ConfigFile {
            classes,
            activities,
            simulation: SimulationSpec {
                scaling_n: params.scaling_n,
                slots_per_day: params.slots_per_day,
                working_days_per_week: params.working_days_per_week,
                idle_penalty_dollars_per_slot: params.idleness_penalty,
                horizon_years: d.horizon_years,
                warmup_years: d.warmup_years,
                measure_years: d.measure_years,
                replications: d.replications,
                seed: d.seed,
                slots_model: SlotsSpec::Fixed,
                slots_discrete: None,
                abandonment: AbandonSpec::Exponential,
                gamma_shape: None,
                arrival_days: d.arrival_days,
                weekly_day: d.weekly_day,
                crn: d.crn,
            },
            solver: SolverSpec::from_options(params.theta0_override, params.gamma_units, &SolverOptions::default()),
            experiment: ExperimentSpec::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::base_case;

    #[test]
    fn base_case_round_trips_through_text() {
        let text = ConfigFile::from_params(&base_case()).to_toml();
        let rc = parse_config_str(&text, "mem").unwrap();
        assert_eq!(rc.params, base_case());
        assert_eq!(rc.to_toml(), text);
    }

    #[test]
    fn empty_file_names_missing_section() {
        let e = parse_config_str("", "empty.toml").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::MissingSection);
        assert!(e.to_string().contains("missing section: classes"), "{e}");
    }

    #[test]
    fn unit_suffix_mismatch_is_reported_with_line() {
        let text = ConfigFile::from_params(&base_case()).to_toml().replacen("gamma_per_day", "gamma_per_year", 1);
        let e = parse_config_str(&text, "f.toml").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::UnitMismatch);
        assert!(e.message.contains("gamma_per_day"));
        let line = e.line.unwrap();
        assert!(text.lines().nth(line - 1).unwrap().starts_with("gamma_per_year"));
    }

    #[test]
    fn unknown_key_has_locus() {
        let text = ConfigFile::from_params(&base_case()).to_toml().replacen("[simulation]\n", "[simulation]\ncolour = 3\n", 1);
        let e = parse_config_str(&text, "f.toml").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::UnknownKey);
        assert_eq!(text.lines().nth(e.line.unwrap() - 1).unwrap(), "colour = 3");
    }

    #[test]
    fn invariant_violation_points_at_class() {
        let text = ConfigFile::from_params(&base_case()).to_toml().replacen("gamma_per_day = 0.01", "gamma_per_day = -0.01", 1);
        let e = parse_config_str(&text, "f.toml").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::Invariant);
        assert!(e.message.contains("abandonment_rate negative"));
        assert!(text.lines().nth(e.line.unwrap() - 1).unwrap().contains("-0.01"));
    }

    #[test]
    fn unit_mismatch_detector() {
        assert_eq!(unit_mismatch("rate_per_day"), Some("rate_per_year"));
        assert_eq!(unit_mismatch("fixed_cost_dollars"), Some("fixed_cost_dollars_per_year"));
        assert_eq!(unit_mismatch("rate_per_year"), None);
        assert_eq!(unit_mismatch("replications"), None);
    }
}
