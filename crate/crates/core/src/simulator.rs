//! Daily-period simulation of the sign-up list under static, dynamic and
//! switching engagement policies.

use crate::bellman::{solve_beta_star, workload_thresholds, BellmanError, SolverOptions};
use crate::params::{derive_ladder, scale_to_limit, ClassKind, LadderError, NthSystemParams, ScaleError, Schedule, DAYS_PER_YEAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::VecDeque;
use std::fmt;

pub const DAYS_PER_QUARTER: usize = 91;
const YEAR_DAYS: usize = 364;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error(transparent)]
    Solver(#[from] BellmanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlotsModel {
    Fixed(u32),
    /// a1, a2, a3 with probabilities 0.25, 0.5, 0.25.
    Discrete3(u32, u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AbandonModel {
    /// Exponential clock with each class's own rate.
    Exponential,
    /// Gamma clock with the given shape and rate shape·γ_j per day, so each
    /// class keeps its mean patience 1/γ_j.
    Gamma { shape: f64 },
}

/// Days on which arrivals accrue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalDays {
    /// Annual rates spread over all 364 calendar days.
    #[default]
    All,
    /// Annual rates spread over working days only.
    Working,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: NthSystemParams,
    pub horizon_years: u32,
    pub warmup_years: u32,
    pub measure_years: u32,
    pub replications: u32,
    pub seed: u64,
    pub slots: SlotsModel,
    pub abandon: AbandonModel,
    pub arrival_days: ArrivalDays,
    /// Weekday (0-6) of weekly activities.
    pub weekly_day: u32,
    /// Replication i of every policy uses the same random streams.
    pub crn: bool,
}

impl SimConfig {
    /// 20-year warmup, 5 measured years, 20 replications.
    pub fn new(params: NthSystemParams) -> Self {
        let slots = SlotsModel::Fixed(params.slots_per_day);
        SimConfig {
            params,
            horizon_years: 25,
            warmup_years: 20,
            measure_years: 5,
            replications: 20,
            seed: 20_240_601,
            slots,
            abandon: AbandonModel::Exponential,
            arrival_days: ArrivalDays::All,
            weekly_day: 0,
            crn: true,
        }
    }

    pub fn calendar(&self) -> Calendar {
        Calendar { working_days: self.params.working_days_per_week, weekly_day: self.weekly_day }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.weekly_day > 6 {
            return Err(SimError::Config(format!("weekly_day {} outside 0-6", self.weekly_day)));
        }
        if self.warmup_years + self.measure_years > self.horizon_years {
            return Err(SimError::Config(format!(
                "warmup {} + measure {} exceeds horizon {} years",
                self.warmup_years, self.measure_years, self.horizon_years
            )));
        }
        if self.measure_years == 0 {
            return Err(SimError::Config("measure_years must be positive".into()));
        }
        if self.replications == 0 {
            return Err(SimError::Config("replications must be positive".into()));
        }
        if let AbandonModel::Gamma { shape } = self.abandon {
            if !(shape > 0.0) {
                return Err(SimError::Config(format!("gamma abandonment needs a positive shape, got {shape}")));
            }
        }
        let diags = crate::params::validate_nth_params(&self.params);
        if !diags.is_empty() {
            let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return Err(SimError::Config(msg.join("; ")));
        }
        Ok(())
    }

    fn horizon_days(&self) -> usize {
        self.horizon_years as usize * YEAR_DAYS
    }

    fn measure_start(&self) -> usize {
        self.warmup_years as usize * YEAR_DAYS
    }

    fn measure_end(&self) -> usize {
        (self.warmup_years + self.measure_years) as usize * YEAR_DAYS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Activities (0-based raw indices) used at every opportunity.
    Static(Vec<usize>),
    /// Queue thresholds per raw activity: activate when the list is shorter.
    Dynamic(Vec<f64>),
    /// `first` before `switch_day`, `second` from it on.
    Switch { first: Box<Policy>, second: Box<Policy>, switch_day: usize },
}

impl Policy {
    fn active(&self, l: usize, queue: usize, day: usize) -> bool {
        match self {
            Policy::Static(set) => set.contains(&l),
            Policy::Dynamic(q) => (queue as f64) < q[l],
            Policy::Switch { first, second, switch_day } => {
                if day < *switch_day {
                    first.active(l, queue, day)
                } else {
                    second.active(l, queue, day)
                }
            }
        }
    }

    pub fn validate(&self, n_activities: usize, horizon_days: usize) -> Result<(), SimError> {
        match self {
            Policy::Static(set) => {
                if let Some(&bad) = set.iter().find(|&&l| l >= n_activities) {
                    return Err(SimError::Policy(format!("activity {} does not exist", bad + 1)));
                }
                Ok(())
            }
            Policy::Dynamic(q) => {
                if q.len() != n_activities {
                    return Err(SimError::Policy(format!("{} thresholds for {} activities", q.len(), n_activities)));
                }
                if q.iter().any(|t| !(*t >= 0.0)) {
                    return Err(SimError::Policy("thresholds must be nonnegative".into()));
                }
                Ok(())
            }
            Policy::Switch { first, second, switch_day } => {
                if *switch_day > horizon_days {
                    return Err(SimError::Policy(format!("switch day {switch_day} beyond horizon {horizon_days}")));
                }
                first.validate(n_activities, horizon_days)?;
                second.validate(n_activities, horizon_days)
            }
        }
    }

    /// Dynamic policy from thresholds in ladder order.
    pub fn dynamic_from_ladder(thresholds: &[f64], order: &[usize]) -> Result<Self, SimError> {
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(SimError::Policy("dynamic thresholds must be strictly decreasing".into()));
        }
        let mut q = vec![0.0; order.len()];
        for (rung, &raw) in order.iter().enumerate() {
            q[raw] = thresholds[rung];
        }
        Ok(Policy::Dynamic(q))
    }

    pub fn label(&self) -> String {
        match self {
            Policy::Static(set) => {
                let mut s = set.clone();
                s.sort_unstable();
                let ids: Vec<String> = s.iter().map(|l| (l + 1).to_string()).collect();
                format!("static:{}", ids.join(","))
            }
            Policy::Dynamic(_) => "dynamic".into(),
            Policy::Switch { first, second, switch_day } => format!("switch:{}>{}@{}", first.label(), second.label(), switch_day),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Weekday layout: working days are `0..working_days` of each 7-day week and
/// weekly activities fall on `weekly_day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Calendar {
    pub working_days: u32,
    pub weekly_day: u32,
}

impl Calendar {
    pub fn is_working_day(&self, day: usize) -> bool {
        day % 7 < self.working_days as usize
    }

    pub fn is_opportunity(&self, schedule: Schedule, day: usize) -> bool {
        match schedule {
            Schedule::Daily => self.is_working_day(day),
            Schedule::Weekly => day % 7 == self.weekly_day as usize,
            Schedule::Monthly => {
                let yd = day % YEAR_DAYS;
                yd % 30 == 0 && yd < 360
            }
        }
    }

    /// Days from `day` to the next opportunity of the same schedule.
    pub fn days_to_next(&self, schedule: Schedule, day: usize) -> usize {
        (1..=2 * YEAR_DAYS)
            .find(|&g| self.is_opportunity(schedule, day + g))
            .expect("every schedule repeats within a year")
    }

    /// Opportunity days within the first year.
    pub fn schedule_for(&self, schedule: Schedule) -> Vec<usize> {
        (0..YEAR_DAYS).filter(|&d| self.is_opportunity(schedule, d)).collect()
    }
}

/// Opportunity days of an activity within one year, weekly activities on day 0.
pub fn schedule_for(schedule: Schedule, working_days_per_week: u32) -> Vec<usize> {
    Calendar { working_days: working_days_per_week, weekly_day: 0 }.schedule_for(schedule)
}

/// Extra daily arrivals per class while activity `activity` is on.
///
/// `boost_per_activation` is spread evenly over the `gap` days until the
/// next opportunity and split across target classes in proportion to their
/// baseline arrivals.
pub fn apply_boost(params: &NthSystemParams, activity: usize, active: bool, gap: usize) -> Vec<f64> {
    let mut out = vec![0.0; params.classes.len()];
    if !active || gap == 0 {
        return out;
    }
    let a = &params.activities[activity];
    let targets = a.targets();
    let total: f64 = targets.iter().map(|&j| params.classes[j].base_arrivals()).sum();
    let per_day = a.boost_per_activation / gap as f64;
    for j in targets {
        out[j] = per_day * params.classes[j].base_arrivals() / total;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuarterStats {
    pub mean_queue: f64,
    pub abandon_pct: f64,
    pub activity_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub activity_cost: f64,
    pub idle_cost: f64,
    pub total_cost: f64,
    pub idle_pct: f64,
    pub abandon_pct: f64,
    pub activity_usage_pct: Vec<f64>,
    pub mean_queue_length: f64,
    /// Whole-horizon counts for flow balance.
    pub arrivals: u64,
    pub served: u64,
    pub abandoned: u64,
    pub final_queue: u64,
    pub quarters: Vec<QuarterStats>,
}

#[derive(Clone, Copy)]
struct Entry {
    band: u16,
    abandon_at: f64,
}

struct Band {
    class: usize,
    /// None for one-time classes.
    population: Option<f64>,
    /// Annual arrival rate of the band (repeat: per volunteer).
    rate: f64,
}

fn bands_of(params: &NthSystemParams) -> Vec<Band> {
    let mut out = Vec::new();
    for (j, c) in params.classes.iter().enumerate() {
        match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => {
                if c.frequency_mix.is_empty() {
                    out.push(Band { class: j, population: Some(population), rate: repose_exit_rate });
                } else {
                    for b in &c.frequency_mix {
                        out.push(Band { class: j, population: Some(population * b.share), rate: b.rate_per_year });
                    }
                }
            }
            ClassKind::OneTime { arrival_rate } => out.push(Band { class: j, population: None, rate: arrival_rate }),
        }
    }
    out
}

const STREAM_ARRIVALS: u64 = 1 << 32;
const STREAM_ABANDON: u64 = 2 << 32;
const STREAM_SLOTS: u64 = 3 << 32;

fn stream(seed: u64, rep: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(purpose);
    rng
}

enum Clock {
    Exp(Vec<Exp<f64>>),
    Gamma(Vec<Option<Gamma<f64>>>),
    Never,
}

/// Simulates one replication.
pub fn run_replication(config: &SimConfig, policy: &Policy, rep_index: u32) -> Result<SimMetrics, SimError> {
    config.validate()?;
    let params = &config.params;
    let horizon = config.horizon_days();
    policy.validate(params.activities.len(), horizon)?;
    let seed_rep = if config.crn { rep_index as u64 } else { rep_index as u64 ^ hash_label(&policy.label()) };

    let bands = bands_of(params);
    let mut arrival_rng: Vec<ChaCha8Rng> = (0..bands.len()).map(|b| stream(config.seed, seed_rep, STREAM_ARRIVALS + b as u64)).collect();
    let mut abandon_rng: Vec<ChaCha8Rng> = (0..params.classes.len()).map(|c| stream(config.seed, seed_rep, STREAM_ABANDON + c as u64)).collect();
    let mut slots_rng = stream(config.seed, seed_rep, STREAM_SLOTS);

    let clock = match config.abandon {
        AbandonModel::Exponential => {
            if params.classes.iter().all(|c| c.abandonment_rate == 0.0) {
                Clock::Never
            } else {
                Clock::Exp(
                    params
                        .classes
                        .iter()
                        .map(|c| Exp::new(c.abandonment_rate.max(f64::MIN_POSITIVE)).expect("positive rate"))
                        .collect(),
                )
            }
        }
        AbandonModel::Gamma { shape } => Clock::Gamma(
            params
                .classes
                .iter()
                .map(|c| {
                    if c.abandonment_rate > 0.0 {
                        Gamma::new(shape, 1.0 / (shape * c.abandonment_rate)).map(Some).map_err(|e| SimError::Config(e.to_string()))
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
    };

    let wd = params.working_days_per_week;
    let cal = config.calendar();
    let n_act = params.activities.len();
    let base_daily: Vec<f64> = params.classes.iter().map(|c| c.base_arrivals()).collect();
    let per_activation: Vec<f64> = params
        .activities
        .iter()
        .map(|a| a.fixed_cost / a.schedule.per_year(wd))
        .collect();
    let (arrival_scale, arrival_on_sunday) = match config.arrival_days {
        ArrivalDays::All => (1.0 / DAYS_PER_YEAR, true),
        ArrivalDays::Working => (1.0 / (wd as f64 * 52.0), false),
    };

    let mut boost_daily = vec![vec![0.0; params.classes.len()]; n_act];
    let mut queue: VecDeque<Entry> = VecDeque::new();
    let mut in_queue = vec![0.0f64; bands.len()];

    let (m0, m1) = (config.measure_start(), config.measure_end());
    let mut used = vec![0u64; n_act];
    let mut opps = vec![0u64; n_act];
    let mut idle_slots = 0u64;
    let mut total_slots = 0u64;
    let mut win_arrivals = 0u64;
    let mut win_abandoned = 0u64;
    let mut queue_sum = 0.0;
    let (mut arrivals, mut served, mut abandoned) = (0u64, 0u64, 0u64);

    let n_quarters = horizon / DAYS_PER_QUARTER;
    let mut quarters = vec![QuarterStats::default(); n_quarters];
    let mut q_arr = vec![0u64; n_quarters];
    let mut q_ab = vec![0u64; n_quarters];

    for day in 0..horizon {
        let measuring = day >= m0 && day < m1;
        let qi = day / DAYS_PER_QUARTER;

        // (1) policy evaluation at opportunities
        for l in 0..n_act {
            let sched = params.activities[l].schedule;
            if !cal.is_opportunity(sched, day) {
                continue;
            }
            let on = policy.active(l, queue.len(), day);
            let gap = cal.days_to_next(sched, day);
            boost_daily[l] = apply_boost(params, l, on, gap);
            if measuring {
                opps[l] += 1;
            }
            if on {
                if measuring {
                    used[l] += 1;
                }
                if qi < n_quarters {
                    quarters[qi].activity_cost += per_activation[l];
                }
            }
        }

        // (2) arrivals
        if arrival_on_sunday || cal.is_working_day(day) {
            let mut mult = vec![1.0; params.classes.len()];
            for b in &boost_daily {
                for (j, x) in b.iter().enumerate() {
                    if *x > 0.0 {
                        mult[j] += x / (base_daily[j] * arrival_scale);
                    }
                }
            }
            for (bi, band) in bands.iter().enumerate() {
                let lam = match band.population {
                    Some(k) => band.rate * (k - in_queue[bi]).max(0.0),
                    None => band.rate,
                } * arrival_scale
                    * mult[band.class];
                if lam <= 0.0 {
                    continue;
                }
                let count = Poisson::new(lam).map_err(|e| SimError::Config(e.to_string()))?.sample(&mut arrival_rng[bi]) as u64;
                let c = band.class;
                for _ in 0..count {
                    let wait = match &clock {
                        Clock::Exp(d) => d[c].sample(&mut abandon_rng[c]),
                        Clock::Gamma(g) => g[c].as_ref().map_or(f64::INFINITY, |g| g.sample(&mut abandon_rng[c])),
                        Clock::Never => f64::INFINITY,
                    };
                    let wait = if params.classes[c].abandonment_rate == 0.0 && matches!(clock, Clock::Exp(_)) { f64::INFINITY } else { wait };
                    queue.push_back(Entry { band: bi as u16, abandon_at: day as f64 + wait });
                }
                in_queue[bi] += count as f64;
                arrivals += count;
                if measuring {
                    win_arrivals += count;
                }
                if qi < n_quarters {
                    q_arr[qi] += count;
                }
            }
        }

        // (3) abandonment
        let now = day as f64;
        let before = queue.len();
        queue.retain(|e| {
            if e.abandon_at <= now {
                in_queue[e.band as usize] -= 1.0;
                false
            } else {
                true
            }
        });
        let gone = (before - queue.len()) as u64;
        abandoned += gone;
        if measuring {
            win_abandoned += gone;
        }
        if qi < n_quarters {
            q_ab[qi] += gone;
        }

        // (4) FCFS service on working days
        if cal.is_working_day(day) {
            let slots = match config.slots {
                SlotsModel::Fixed(s) => s,
                SlotsModel::Discrete3(a1, a2, a3) => {
                    let u: f64 = slots_rng.random();
                    if u < 0.25 {
                        a1
                    } else if u < 0.75 {
                        a2
                    } else {
                        a3
                    }
                }
            } as usize;
            let s = slots.min(queue.len());
            for e in queue.drain(..s) {
                in_queue[e.band as usize] -= 1.0;
            }
            served += s as u64;
            if measuring {
                idle_slots += (slots - s) as u64;
                total_slots += slots as u64;
            }
        }

        if measuring {
            queue_sum += queue.len() as f64;
        }
        if qi < n_quarters {
            quarters[qi].mean_queue += queue.len() as f64 / DAYS_PER_QUARTER as f64;
        }
    }

    for (i, q) in quarters.iter_mut().enumerate() {
        q.abandon_pct = if q_arr[i] > 0 { 100.0 * q_ab[i] as f64 / q_arr[i] as f64 } else { 0.0 };
    }
    let years = config.measure_years as f64;
    // from integer counts, so an always-on activity costs exactly F per year
    let activity_cost: f64 = params
        .activities
        .iter()
        .zip(&used)
        .map(|(a, &u)| a.fixed_cost * (u as f64 / (a.schedule.per_year(wd) * years)))
        .sum();
    let idle_cost = idle_slots as f64 * params.idleness_penalty / years;
    let days = (m1 - m0) as f64;
    Ok(SimMetrics {
        activity_cost,
        idle_cost,
        total_cost: activity_cost + idle_cost,
        idle_pct: if total_slots > 0 { 100.0 * idle_slots as f64 / total_slots as f64 } else { 0.0 },
        abandon_pct: if win_arrivals > 0 { 100.0 * win_abandoned as f64 / win_arrivals as f64 } else { 0.0 },
        activity_usage_pct: used
            .iter()
            .zip(&opps)
            .map(|(&u, &o)| if o > 0 { 100.0 * u as f64 / o as f64 } else { 0.0 })
            .collect(),
        mean_queue_length: queue_sum / days,
        arrivals,
        served,
        abandoned,
        final_queue: queue.len() as u64,
        quarters,
    })
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a, only used to decorrelate policies when CRN is off
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Mean and 95% half-width.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate { mean, half_width: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof").inverse_cdf(0.975);
        Estimate { mean, half_width: t * (var / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub label: String,
    pub activity_cost: Estimate,
    pub idle_cost: Estimate,
    pub total_cost: Estimate,
    pub idle_pct: Estimate,
    pub abandon_pct: Estimate,
    pub activity_usage_pct: Vec<Estimate>,
    pub mean_queue_length: Estimate,
    pub replications: Vec<SimMetrics>,
}

impl PolicyReport {
    fn from_runs(label: String, runs: Vec<SimMetrics>) -> Self {
        let col = |f: &dyn Fn(&SimMetrics) -> f64| Estimate::from_samples(&runs.iter().map(f).collect::<Vec<_>>());
        let n_act = runs.first().map(|m| m.activity_usage_pct.len()).unwrap_or(0);
        PolicyReport {
            label,
            activity_cost: col(&|m| m.activity_cost),
            idle_cost: col(&|m| m.idle_cost),
            total_cost: col(&|m| m.total_cost),
            idle_pct: col(&|m| m.idle_pct),
            abandon_pct: col(&|m| m.abandon_pct),
            activity_usage_pct: (0..n_act).map(|l| col(&|m| m.activity_usage_pct[l])).collect(),
            mean_queue_length: col(&|m| m.mean_queue_length),
            replications: runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub policies: Vec<PolicyReport>,
    /// Index of the cheapest static policy, if any was run.
    pub best_static: Option<usize>,
    /// Cost reduction of the first dynamic policy against the best static, %.
    pub improvement_pct: Option<f64>,
}

impl ExperimentReport {
    pub fn get(&self, label: &str) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.label == label)
    }

    pub fn best_static_report(&self) -> Option<&PolicyReport> {
        self.best_static.map(|i| &self.policies[i])
    }
}

/// Runs every policy for the configured replications.
pub fn run_experiment(config: &SimConfig, policies: &[Policy]) -> Result<ExperimentReport, SimError> {
    if policies.is_empty() {
        return Err(SimError::Policy("at least one policy is required".into()));
    }
    config.validate()?;
    let jobs: Vec<(usize, u32)> = (0..policies.len()).flat_map(|p| (0..config.replications).map(move |r| (p, r))).collect();
    let results: Vec<Result<SimMetrics, SimError>> = jobs.par_iter().map(|&(p, r)| run_replication(config, &policies[p], r)).collect();
    let mut per_policy: Vec<Vec<SimMetrics>> = vec![Vec::new(); policies.len()];
    for ((p, _), res) in jobs.iter().zip(results) {
        per_policy[*p].push(res?);
    }
    let reports: Vec<PolicyReport> = policies
        .iter()
        .zip(per_policy)
        .map(|(pol, runs)| PolicyReport::from_runs(pol.label(), runs))
        .collect();
    let best_static = policies
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Policy::Static(_)))
        .min_by(|a, b| reports[a.0].total_cost.mean.total_cmp(&reports[b.0].total_cost.mean))
        .map(|(i, _)| i);
    let dynamic = policies.iter().position(|p| matches!(p, Policy::Dynamic(_)));
    let improvement_pct = match (best_static, dynamic) {
        (Some(s), Some(d)) => Some(improvement(reports[s].total_cost.mean, reports[d].total_cost.mean)),
        _ => None,
    };
    Ok(ExperimentReport { policies: reports, best_static, improvement_pct })
}

/// 100·(static − dynamic)/static, zero when both are zero.
pub fn improvement(static_cost: f64, dynamic_cost: f64) -> f64 {
    if static_cost == 0.0 {
        0.0
    } else {
        100.0 * (static_cost - dynamic_cost) / static_cost
    }
}

/// Every subset of activities as a static policy.
pub fn all_static_policies(n_activities: usize) -> Vec<Policy> {
    (0u32..(1 << n_activities))
        .map(|mask| Policy::Static((0..n_activities).filter(|l| mask & (1 << l) != 0).collect()))
        .collect()
}

pub fn enumerate_static(config: &SimConfig) -> Result<ExperimentReport, SimError> {
    let n = config.params.activities.len();
    if n > 16 {
        return Err(SimError::Config(format!("{n} activities is too many to enumerate (limit 16)")));
    }
    run_experiment(config, &all_static_policies(n))
}

/// Thresholds from the Bellman solution, with θ_0 replaced when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedPolicy {
    pub theta0: f64,
    pub beta_star: f64,
    pub tau: Vec<f64>,
    /// Queue thresholds in ladder order.
    pub queue_thresholds: Vec<f64>,
    pub policy: Policy,
}

pub fn solve_policy(params: &NthSystemParams, theta0: Option<f64>, opts: &SolverOptions) -> Result<SolvedPolicy, SimError> {
    let limit = scale_to_limit(params)?;
    let mut ladder = derive_ladder(&limit)?;
    if let Some(t) = theta0 {
        ladder = ladder.with_theta0(t)?;
    }
    let sol = solve_beta_star(&ladder, opts)?;
    // all classes share one server, so the first class carries μ
    let mu = limit.classes[0].mu;
    let q = workload_thresholds(&sol, limit.n, mu);
    let policy = Policy::dynamic_from_ladder(&q, &ladder.order)?;
    Ok(SolvedPolicy { theta0: ladder.theta[0], beta_star: sol.beta_star, tau: sol.tau, queue_thresholds: q, policy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub best_static: String,
    pub best_static_cost: Estimate,
    pub dynamic_cost: Estimate,
    pub improvement_pct: f64,
    pub queue_thresholds: Vec<f64>,
}

/// Re-solves and re-simulates the base configuration for each abandonment rate.
pub fn sweep_gamma(config: &SimConfig, gammas: &[f64], opts: &SolverOptions) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::with_capacity(gammas.len());
    for &g in gammas {
        if !(g > 0.0) {
            return Err(SimError::Config(format!("gamma must be positive, got {g}")));
        }
        let mut cfg = config.clone();
        cfg.params = config.params.with_gamma(g);
        let solved = solve_policy(&cfg.params, None, opts)?;
        let mut policies = all_static_policies(cfg.params.activities.len());
        policies.push(solved.policy.clone());
        let rep = run_experiment(&cfg, &policies)?;
        let best = rep.best_static_report().expect("static policies present");
        let dyn_rep = rep.policies.last().expect("dynamic policy present");
        rows.push(SweepRow {
            gamma: g,
            best_static: best.label.clone(),
            best_static_cost: best.total_cost,
            dynamic_cost: dyn_rep.total_cost,
            improvement_pct: rep.improvement_pct.unwrap_or(0.0),
            queue_thresholds: solved.queue_thresholds,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub theta0: f64,
    pub queue_thresholds: Vec<f64>,
    pub total_cost: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_theta0: f64,
    pub grid: Vec<TuneRow>,
}

/// Simulates the dynamic policy for each θ_0 and returns the cheapest.
pub fn tune_theta0(config: &SimConfig, grid: &[f64], opts: &SolverOptions) -> Result<TuneResult, SimError> {
    if grid.is_empty() {
        return Err(SimError::Config("theta_0 grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        if !(t < 0.0) {
            return Err(SimError::Config(format!("theta_0 must be negative, got {t}")));
        }
        let solved = solve_policy(&config.params, Some(t), opts)?;
        let rep = run_experiment(config, &[solved.policy])?;
        rows.push(TuneRow { theta0: t, queue_thresholds: solved.queue_thresholds, total_cost: rep.policies[0].total_cost });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.total_cost.mean.total_cmp(&b.total_cost.mean))
        .expect("grid is nonempty")
        .theta0;
    Ok(TuneResult { best_theta0: best, grid: rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSeries {
    /// Per quarter (index 0 is quarter 1): mean over replications.
    pub a: Vec<QuarterEstimate>,
    pub b: Vec<QuarterEstimate>,
    /// Per-quarter B − A queue difference with its half-width.
    pub queue_diff: Vec<Estimate>,
    pub switch_quarter: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuarterEstimate {
    pub mean_queue: Estimate,
    pub abandon_pct: Estimate,
    pub activity_cost: Estimate,
}

/// Sim A runs `dynamic` throughout; Sim B runs `static_policy` until the
/// switch quarter (1-based) and `dynamic` from it on.
pub fn transition_experiment(config: &SimConfig, static_policy: &Policy, dynamic: &Policy, switch_quarter: usize) -> Result<TransitionSeries, SimError> {
    config.validate()?;
    if switch_quarter == 0 {
        return Err(SimError::Config("switch quarter numbers start at 1".into()));
    }
    let switch_day = (switch_quarter - 1) * DAYS_PER_QUARTER;
    if switch_day > config.horizon_days() {
        return Err(SimError::Config(format!("switch quarter {switch_quarter} beyond horizon")));
    }
    let sim_b = Policy::Switch { first: Box::new(static_policy.clone()), second: Box::new(dynamic.clone()), switch_day };
    let mut cfg = config.clone();
    cfg.crn = true;
    let runs: Vec<Result<(SimMetrics, SimMetrics), SimError>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| Ok((run_replication(&cfg, dynamic, r)?, run_replication(&cfg, &sim_b, r)?)))
        .collect();
    let runs: Vec<(SimMetrics, SimMetrics)> = runs.into_iter().collect::<Result<_, _>>()?;
    let nq = runs.first().map(|r| r.0.quarters.len()).unwrap_or(0);
    let series = |pick: &dyn Fn(&(SimMetrics, SimMetrics)) -> &SimMetrics| -> Vec<QuarterEstimate> {
        (0..nq)
            .map(|q| QuarterEstimate {
                mean_queue: Estimate::from_samples(&runs.iter().map(|r| pick(r).quarters[q].mean_queue).collect::<Vec<_>>()),
                abandon_pct: Estimate::from_samples(&runs.iter().map(|r| pick(r).quarters[q].abandon_pct).collect::<Vec<_>>()),
                activity_cost: Estimate::from_samples(&runs.iter().map(|r| pick(r).quarters[q].activity_cost).collect::<Vec<_>>()),
            })
            .collect()
    };
    let queue_diff = (0..nq)
        .map(|q| Estimate::from_samples(&runs.iter().map(|r| r.1.quarters[q].mean_queue - r.0.quarters[q].mean_queue).collect::<Vec<_>>()))
        .collect();
    Ok(TransitionSeries { a: series(&|r| &r.0), b: series(&|r| &r.1), queue_diff, switch_quarter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::base_case;

    #[test]
    fn schedules_have_expected_counts() {
        assert_eq!(schedule_for(Schedule::Daily, 6).len(), 312);
        assert_eq!(schedule_for(Schedule::Weekly, 6).len(), 52);
        assert_eq!(schedule_for(Schedule::Monthly, 6).len(), 12);
    }

    #[test]
    fn boost_split_is_proportional() {
        let p = base_case();
        let b = apply_boost(&p, 0, true, 1);
        let total = 6720.0 + 52500.0 + 19540.0;
        assert!((b[0] - 2.0 * 6720.0 / total).abs() < 1e-12);
        assert!((b[1] - 2.0 * 52500.0 / total).abs() < 1e-12);
        assert!((b.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let s = apply_boost(&p, 2, true, 30);
        assert_eq!(s[0], 0.0);
        assert!((s[2] - 20.0 / 30.0).abs() < 1e-12);
        assert!(apply_boost(&p, 1, false, 7).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn labels() {
        assert_eq!(Policy::Static(vec![2, 0, 1]).label(), "static:1,2,3");
        assert_eq!(Policy::Static(vec![]).label(), "static:");
    }
}
