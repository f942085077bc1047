//! Raw system parameters, heavy-traffic scaling and the drift ladder.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Calendar days per simulated year (52 weeks of 7 days).
pub const DAYS_PER_YEAR: f64 = 364.0;
/// Weeks per year.
pub const WEEKS_PER_YEAR: f64 = 52.0;
/// Upper edge of the heavy-traffic band for the traffic intensity.
pub const HEAVY_TRAFFIC_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClassKind {
    /// Volunteers that return after a repose period.
    Repeat {
        population: f64,
        /// Mean repose exit rate per volunteer, 1/year.
        repose_exit_rate: f64,
    },
    /// Volunteers that arrive once, arrivals/year.
    OneTime { arrival_rate: f64 },
}

/// A sub-population of a repeat class with its own repose exit rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub share: f64,
    pub rate_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolunteerClass {
    pub name: String,
    pub kind: ClassKind,
    /// Abandonment hazard while on the sign-up list, 1/day.
    pub abandonment_rate: f64,
    /// Service capacity in slots/year.
    pub service_rate: f64,
    /// Weight in the mean-reversion coefficient. `None` means the class share
    /// of baseline arrivals.
    pub mix_weight: Option<f64>,
    /// Scaled rate offset. `None` means derived from the balanced-load identity.
    pub alpha: Option<f64>,
    /// Optional split of a repeat class into sub-populations (simulation only).
    /// Shares sum to one and the share-weighted rate equals the class rate.
    pub frequency_mix: Vec<FrequencyBand>,
}

impl VolunteerClass {
    pub fn repeat(name: &str, population: f64, repose_exit_rate: f64, gamma: f64, mu: f64) -> Self {
        VolunteerClass {
            name: name.to_string(),
            kind: ClassKind::Repeat { population, repose_exit_rate },
            abandonment_rate: gamma,
            service_rate: mu,
            mix_weight: None,
            alpha: None,
            frequency_mix: Vec::new(),
        }
    }

    pub fn one_time(name: &str, arrival_rate: f64, gamma: f64, mu: f64) -> Self {
        VolunteerClass {
            name: name.to_string(),
            kind: ClassKind::OneTime { arrival_rate },
            abandonment_rate: gamma,
            service_rate: mu,
            mix_weight: None,
            alpha: None,
            frequency_mix: Vec::new(),
        }
    }

    /// Baseline arrivals/year with an empty sign-up list.
    pub fn base_arrivals(&self) -> f64 {
        match self.kind {
            ClassKind::Repeat { population, repose_exit_rate } => population * repose_exit_rate,
            ClassKind::OneTime { arrival_rate } => arrival_rate,
        }
    }

    pub fn is_repeat(&self) -> bool {
        matches!(self.kind, ClassKind::Repeat { .. })
    }
}

/// Opportunity calendar of an activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Once per working day.
    Daily,
    /// Once per week, on the first day of the week.
    Weekly,
    /// Twelve times per year, every 30 days from the start of the year.
    Monthly,
}

impl Schedule {
    pub fn per_year(self, working_days_per_week: u32) -> f64 {
        match self {
            Schedule::Daily => working_days_per_week as f64 * WEEKS_PER_YEAR,
            Schedule::Weekly => WEEKS_PER_YEAR,
            Schedule::Monthly => 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementActivity {
    pub name: String,
    /// (class index, repose exit boost per volunteer, 1/year).
    pub repeat_boosts: Vec<(usize, f64)>,
    /// (class index, arrival boost, arrivals/year).
    pub onetime_boosts: Vec<(usize, f64)>,
    /// Cost per year when the activity is always on.
    pub fixed_cost: f64,
    pub schedule: Schedule,
    /// Extra arrivals generated by one activation.
    pub boost_per_activation: f64,
}

impl EngagementActivity {
    /// Builds an activity whose annual arrival increase
    /// `boost_per_activation × activations/year` is split across `targets`
    /// in proportion to their baseline arrivals.
    pub fn proportional(
        name: &str,
        classes: &[VolunteerClass],
        targets: &[usize],
        fixed_cost: f64,
        schedule: Schedule,
        boost_per_activation: f64,
        working_days_per_week: u32,
    ) -> Self {
        let increase = boost_per_activation * schedule.per_year(working_days_per_week);
        let total: f64 = targets.iter().map(|&j| classes[j].base_arrivals()).sum();
        let mut repeat_boosts = Vec::new();
        let mut onetime_boosts = Vec::new();
        for &j in targets {
            let added = increase * classes[j].base_arrivals() / total;
            match classes[j].kind {
                ClassKind::Repeat { population, .. } => repeat_boosts.push((j, added / population)),
                ClassKind::OneTime { .. } => onetime_boosts.push((j, added)),
            }
        }
        EngagementActivity {
            name: name.to_string(),
            repeat_boosts,
            onetime_boosts,
            fixed_cost,
            schedule,
            boost_per_activation,
        }
    }

    /// Annual arrival increase implied by the boosts, arrivals/year.
    pub fn annual_increase(&self, classes: &[VolunteerClass]) -> f64 {
        let rep: f64 = self
            .repeat_boosts
            .iter()
            .map(|&(j, r)| match classes.get(j).map(|c| &c.kind) {
                Some(ClassKind::Repeat { population, .. }) => population * r,
                _ => 0.0,
            })
            .sum();
        rep + self.onetime_boosts.iter().map(|&(_, l)| l).sum::<f64>()
    }

    pub fn targets(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self
            .repeat_boosts
            .iter()
            .chain(self.onetime_boosts.iter())
            .map(|&(j, _)| j)
            .collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}

/// How the daily abandonment hazard enters the mean-reversion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaUnits {
    /// Use the per-day value as is.
    #[default]
    PerDay,
    /// Multiply by 364 days before use.
    PerYear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NthSystemParams {
    pub classes: Vec<VolunteerClass>,
    pub activities: Vec<EngagementActivity>,
    pub scaling_n: f64,
    /// Cost of one unfilled slot, $.
    pub idleness_penalty: f64,
    pub slots_per_day: u32,
    pub working_days_per_week: u32,
    pub gamma_units: GammaUnits,
    /// Explicit θ_0, replacing the value implied by the α offsets.
    pub theta0_override: Option<f64>,
}

impl NthSystemParams {
    pub fn working_days_per_year(&self) -> f64 {
        self.working_days_per_week as f64 * WEEKS_PER_YEAR
    }

    pub fn annual_capacity(&self) -> f64 {
        self.slots_per_day as f64 * self.working_days_per_year()
    }

    /// ρ^n = Σ r k/μ + Σ λ/μ.
    pub fn traffic_intensity(&self) -> f64 {
        self.classes.iter().map(|c| c.base_arrivals() / c.service_rate).sum()
    }

    pub fn total_base_arrivals(&self) -> f64 {
        self.classes.iter().map(|c| c.base_arrivals()).sum()
    }

    /// Mix weights, resolving defaults to baseline arrival shares.
    pub fn mix_weights(&self) -> Vec<f64> {
        let total = self.total_base_arrivals();
        self.classes
            .iter()
            .map(|c| c.mix_weight.unwrap_or(c.base_arrivals() / total))
            .collect()
    }

    /// Copy with every abandonment rate replaced.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut p = self.clone();
        for c in &mut p.classes {
            c.abandonment_rate = gamma;
        }
        p
    }
}

/// One invariant violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub expected: String,
    pub actual: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (expected {}, got {})", self.field, self.message, self.expected, self.actual)
    }
}

fn diag(out: &mut Vec<Diagnostic>, field: String, expected: &str, actual: f64, message: String) {
    out.push(Diagnostic { field, expected: expected.to_string(), actual: format!("{actual}"), message });
}

/// Checks every invariant of the raw parameters. An empty list means valid.
pub fn validate_nth_params(params: &NthSystemParams) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let nc = params.classes.len();
    if nc == 0 {
        out.push(Diagnostic {
            field: "classes".into(),
            expected: "at least one class".into(),
            actual: "0".into(),
            message: "no volunteer classes".into(),
        });
    }
    if !(params.scaling_n > 0.0) {
        diag(&mut out, "scaling_n".into(), "> 0", params.scaling_n, "scaling_n must be positive".into());
    }
    if !(params.idleness_penalty > 0.0) {
        diag(&mut out, "idleness_penalty".into(), "> 0", params.idleness_penalty, "idleness_penalty must be positive".into());
    }
    if params.slots_per_day == 0 {
        diag(&mut out, "slots_per_day".into(), "> 0", 0.0, "slots_per_day must be positive".into());
    }
    if params.working_days_per_week == 0 || params.working_days_per_week > 7 {
        diag(
            &mut out,
            "working_days_per_week".into(),
            "1..=7",
            params.working_days_per_week as f64,
            "working_days_per_week out of range".into(),
        );
    }
    if let Some(t) = params.theta0_override {
        if !(t < 0.0) {
            diag(&mut out, "theta0_override".into(), "< 0", t, "theta0_override must be negative".into());
        }
    }
    let capacity = params.annual_capacity();
    for (j, c) in params.classes.iter().enumerate() {
        let f = |name: &str| format!("classes[{j}].{name}");
        match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => {
                if !(population > 0.0) {
                    diag(&mut out, f("population"), "> 0", population, "population must be positive".into());
                }
                if !(repose_exit_rate > 0.0) {
                    diag(&mut out, f("repose_exit_rate"), "> 0", repose_exit_rate, "repose_exit_rate must be positive".into());
                }
                if !c.frequency_mix.is_empty() {
                    let share: f64 = c.frequency_mix.iter().map(|b| b.share).sum();
                    if (share - 1.0).abs() > 1e-9 {
                        diag(&mut out, f("frequency_mix"), "shares summing to 1", share, "frequency_mix shares do not sum to 1".into());
                    }
                    let mean: f64 = c.frequency_mix.iter().map(|b| b.share * b.rate_per_year).sum();
                    if (mean - repose_exit_rate).abs() > 1e-9 * repose_exit_rate.abs().max(1.0) {
                        diag(&mut out, f("frequency_mix"), &format!("{repose_exit_rate}"), mean, "frequency_mix mean rate differs from repose_exit_rate".into());
                    }
                    for b in &c.frequency_mix {
                        if !(b.share > 0.0) || !(b.rate_per_year > 0.0) {
                            diag(&mut out, f("frequency_mix"), "> 0", b.share.min(b.rate_per_year), "frequency_mix entries must be positive".into());
                        }
                    }
                }
            }
            ClassKind::OneTime { arrival_rate } => {
                if !(arrival_rate > 0.0) {
                    diag(&mut out, f("arrival_rate"), "> 0", arrival_rate, "arrival_rate must be positive".into());
                }
                if !c.frequency_mix.is_empty() {
                    out.push(Diagnostic {
                        field: f("frequency_mix"),
                        expected: "empty".into(),
                        actual: format!("{} bands", c.frequency_mix.len()),
                        message: "frequency_mix only applies to repeat classes".into(),
                    });
                }
            }
        }
        if c.abandonment_rate < 0.0 || c.abandonment_rate.is_nan() {
            diag(&mut out, f("abandonment_rate"), ">= 0", c.abandonment_rate, "abandonment_rate negative".into());
        }
        if !(c.service_rate > 0.0) {
            diag(&mut out, f("service_rate"), "> 0", c.service_rate, "service_rate must be positive".into());
        } else if (c.service_rate - capacity).abs() > 1e-9 * capacity {
            diag(
                &mut out,
                f("service_rate"),
                &format!("{capacity} (slots/day x working days/year)"),
                c.service_rate,
                "service_rate differs from shared server capacity".into(),
            );
        }
        if let Some(x) = c.mix_weight {
            if !(x > 0.0) {
                diag(&mut out, f("mix_weight"), "> 0", x, "mix_weight must be positive".into());
            }
        }
    }
    for (l, a) in params.activities.iter().enumerate() {
        let f = |name: &str| format!("activities[{l}].{name}");
        if !(a.fixed_cost > 0.0) {
            diag(&mut out, f("fixed_cost"), "> 0", a.fixed_cost, "fixed_cost must be positive".into());
        }
        if a.boost_per_activation < 0.0 || a.boost_per_activation.is_nan() {
            diag(&mut out, f("boost_per_activation"), ">= 0", a.boost_per_activation, "boost_per_activation negative".into());
        }
        for &(j, r) in &a.repeat_boosts {
            match params.classes.get(j) {
                Some(c) if c.is_repeat() => {}
                _ => diag(&mut out, f("repeat_boosts"), "index of a repeat class", j as f64, "repeat boost targets a non-repeat class".into()),
            }
            if !(r >= 0.0) {
                diag(&mut out, f("repeat_boosts"), ">= 0", r, "boost negative".into());
            }
        }
        for &(j, lam) in &a.onetime_boosts {
            match params.classes.get(j) {
                Some(c) if !c.is_repeat() => {}
                _ => diag(&mut out, f("onetime_boosts"), "index of a one-time class", j as f64, "one-time boost targets a non-one-time class".into()),
            }
            if !(lam >= 0.0) {
                diag(&mut out, f("onetime_boosts"), ">= 0", lam, "boost negative".into());
            }
        }
        if a.repeat_boosts.is_empty() && a.onetime_boosts.is_empty() {
            out.push(Diagnostic {
                field: f("targets"),
                expected: "at least one target class".into(),
                actual: "none".into(),
                message: "activity has no target classes".into(),
            });
        }
        let implied = a.boost_per_activation * a.schedule.per_year(params.working_days_per_week);
        let increase = a.annual_increase(&params.classes);
        if (implied - increase).abs() > 1.0 {
            diag(
                &mut out,
                f("boost_per_activation"),
                &format!("{increase} arrivals/year from boosts"),
                implied,
                "boost_per_activation x activations/year disagrees with the annual increase".into(),
            );
        }
    }
    if nc > 0 && params.classes.iter().all(|c| c.service_rate > 0.0) {
        let rho = params.traffic_intensity();
        if (rho - 1.0).abs() > HEAVY_TRAFFIC_BAND {
            let side = if rho > 1.0 { "exceeds" } else { "falls below" };
            diag(
                &mut out,
                "traffic_intensity".into(),
                "within 0.05 of 1",
                rho,
                format!("traffic intensity {rho:.2} {side} the {:.2}-{:.2} heavy-traffic band", 1.0 - HEAVY_TRAFFIC_BAND, 1.0 + HEAVY_TRAFFIC_BAND),
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LimitKind {
    Repeat { k_hat: f64, r: f64 },
    OneTime { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitClass {
    pub kind: LimitKind,
    pub mu: f64,
    /// Abandonment rate in the units used by the mean-reversion coefficient.
    pub gamma: f64,
    pub x: f64,
    pub alpha: f64,
    pub alpha_derived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitActivity {
    pub name: String,
    /// Position in the raw activity list.
    pub source_index: usize,
    pub repeat_boosts: Vec<(usize, f64)>,
    pub onetime_boosts: Vec<(usize, f64)>,
    pub fixed_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub classes: Vec<LimitClass>,
    pub activities: Vec<LimitActivity>,
    pub p: f64,
    pub n: f64,
    pub theta0_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaleError {
    #[error("scaling_n must be positive, got {0}")]
    NonPositiveN(f64),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("scaled {field} is nonpositive ({value})")]
    NonPositiveRate { field: String, value: f64 },
}

/// Maps the n-th system onto the limit system.
///
/// Rates carrying an α offset are scaled as `rate = rate^n/(n or 1) − α/√n`.
/// Classes without a supplied α share one common value chosen so the
/// balanced-load identity holds exactly.
pub fn scale_to_limit(params: &NthSystemParams) -> Result<LimitParams, ScaleError> {
    let n = params.scaling_n;
    if !(n > 0.0) {
        return Err(ScaleError::NonPositiveN(n));
    }
    let diags = validate_nth_params(params);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(ScaleError::Invalid(msg.join("; ")));
    }
    let sn = n.sqrt();
    let xs = params.mix_weights();
    let gamma_scale = match params.gamma_units {
        GammaUnits::PerDay => 1.0,
        GammaUnits::PerYear => DAYS_PER_YEAR,
    };

    // Load contribution before the α shift and the α sensitivity of each class.
    let mut base_load = 0.0;
    let mut known_shift = 0.0;
    let mut free_weight = 0.0;
    for c in &params.classes {
        let mu = c.service_rate / n;
        let (load, weight) = match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => {
                let k_hat = population / n;
                (k_hat * repose_exit_rate / mu, k_hat / mu)
            }
            ClassKind::OneTime { arrival_rate } => (arrival_rate / n / mu, 1.0 / mu),
        };
        base_load += load;
        match c.alpha {
            Some(a) => known_shift += weight * a / sn,
            None => free_weight += weight / sn,
        }
    }
    let common_alpha = if free_weight > 0.0 { (base_load - known_shift - 1.0) / free_weight } else { 0.0 };

    let mut classes = Vec::with_capacity(params.classes.len());
    for (j, c) in params.classes.iter().enumerate() {
        let mu = c.service_rate / n;
        let (alpha, derived) = match c.alpha {
            Some(a) => (a, false),
            None => (common_alpha, true),
        };
        let kind = match c.kind {
            ClassKind::Repeat { population, repose_exit_rate } => {
                let r = repose_exit_rate - alpha / sn;
                if !(r > 0.0) {
                    return Err(ScaleError::NonPositiveRate { field: format!("classes[{j}].r"), value: r });
                }
                LimitKind::Repeat { k_hat: population / n, r }
            }
            ClassKind::OneTime { arrival_rate } => {
                let lambda = arrival_rate / n - alpha / sn;
                if !(lambda > 0.0) {
                    return Err(ScaleError::NonPositiveRate { field: format!("classes[{j}].lambda"), value: lambda });
                }
                LimitKind::OneTime { lambda }
            }
        };
        classes.push(LimitClass {
            kind,
            mu,
            gamma: c.abandonment_rate * gamma_scale,
            x: xs[j],
            alpha,
            alpha_derived: derived,
        });
    }
    let activities = params
        .activities
        .iter()
        .enumerate()
        .map(|(l, a)| LimitActivity {
            name: a.name.clone(),
            source_index: l,
            repeat_boosts: a.repeat_boosts.iter().map(|&(j, r)| (j, sn * r)).collect(),
            onetime_boosts: a.onetime_boosts.iter().map(|&(j, lam)| (j, lam / sn)).collect(),
            fixed_cost: a.fixed_cost / sn,
        })
        .collect();
    Ok(LimitParams {
        classes,
        activities,
        p: params.idleness_penalty,
        n,
        theta0_override: params.theta0_override,
    })
}

/// Inverse of [`scale_to_limit`], rebuilding the rate fields of `template`
/// (names, schedules and other simulation-only fields are copied from it).
pub fn unscale(limit: &LimitParams, template: &NthSystemParams) -> NthSystemParams {
    let n = limit.n;
    let sn = n.sqrt();
    let mut out = template.clone();
    out.scaling_n = n;
    out.idleness_penalty = limit.p;
    let gamma_scale = match template.gamma_units {
        GammaUnits::PerDay => 1.0,
        GammaUnits::PerYear => DAYS_PER_YEAR,
    };
    for (c, lc) in out.classes.iter_mut().zip(&limit.classes) {
        c.service_rate = lc.mu * n;
        c.abandonment_rate = lc.gamma / gamma_scale;
        c.kind = match lc.kind {
            LimitKind::Repeat { k_hat, r } => ClassKind::Repeat {
                population: k_hat * n,
                repose_exit_rate: r + lc.alpha / sn,
            },
            LimitKind::OneTime { lambda } => ClassKind::OneTime { arrival_rate: (lambda + lc.alpha / sn) * n },
        };
        if !lc.alpha_derived {
            c.alpha = Some(lc.alpha);
        }
    }
    for (a, la) in out.activities.iter_mut().zip(&limit.activities) {
        a.fixed_cost = la.fixed_cost * sn;
        a.repeat_boosts = la.repeat_boosts.iter().map(|&(j, r)| (j, r / sn)).collect();
        a.onetime_boosts = la.onetime_boosts.iter().map(|&(j, l)| (j, l * sn)).collect();
    }
    out
}

/// |Σ r k̂/μ + Σ λ/μ − 1|.
pub fn balanced_load_check(limit: &LimitParams) -> f64 {
    let load: f64 = limit
        .classes
        .iter()
        .map(|c| match c.kind {
            LimitKind::Repeat { k_hat, r } => r * k_hat / c.mu,
            LimitKind::OneTime { lambda } => lambda / c.mu,
        })
        .sum();
    (load - 1.0).abs()
}

/// Limit-system control structure consumed by the cost and Bellman modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftLadder {
    /// θ_0 … θ_L.
    pub theta: Vec<f64>,
    /// η_1 … η_L.
    pub eta: Vec<f64>,
    /// ĉ_1 … ĉ_L, strictly increasing.
    pub c_hat: Vec<f64>,
    /// F_1 … F_L in ladder order.
    pub fixed_cost: Vec<f64>,
    pub kappa: f64,
    pub sigma2: f64,
    pub p: f64,
    /// c(θ_0) … c(θ_L).
    pub c_of_theta: Vec<f64>,
    /// Raw activity index of each rung.
    pub order: Vec<usize>,
    /// θ_0 implied by the α offsets, kept for reference when overridden.
    pub theta0_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LadderError {
    #[error("activities {a} and {b} have equal marginal cost {c_hat}; merge them")]
    Tie { a: usize, b: usize, c_hat: f64 },
    #[error("activity {index} has marginal cost {c_hat} >= idleness penalty {p}")]
    AbovePenalty { index: usize, c_hat: f64, p: f64 },
    #[error("activity {index} has nonpositive drift increment {eta}")]
    NonPositiveEta { index: usize, eta: f64 },
    #[error("theta_0 must be negative, got {0}")]
    NonNegativeTheta0(f64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("fixed cost of activity {index} must be positive, got {value}")]
    NonPositiveCost { index: usize, value: f64 },
}

impl DriftLadder {
    /// Builds a ladder from per-activity increments and annual costs,
    /// sorting rungs by marginal cost.
    pub fn new(theta0: f64, eta: &[f64], fixed_cost: &[f64], kappa: f64, sigma2: f64, p: f64) -> Result<Self, LadderError> {
        assert_eq!(eta.len(), fixed_cost.len(), "eta and fixed_cost lengths differ");
        if !(theta0 < 0.0) {
            return Err(LadderError::NonNegativeTheta0(theta0));
        }
        if !(kappa > 0.0) {
            return Err(LadderError::NonPositive("kappa"));
        }
        if !(sigma2 > 0.0) {
            return Err(LadderError::NonPositive("sigma2"));
        }
        if !(p > 0.0) {
            return Err(LadderError::NonPositive("p"));
        }
        for (i, (&e, &f)) in eta.iter().zip(fixed_cost).enumerate() {
            if !(e > 0.0) {
                return Err(LadderError::NonPositiveEta { index: i, eta: e });
            }
            if !(f > 0.0) {
                return Err(LadderError::NonPositiveCost { index: i, value: f });
            }
        }
        let c_raw: Vec<f64> = eta.iter().zip(fixed_cost).map(|(e, f)| f / e).collect();
        let mut order: Vec<usize> = (0..eta.len()).collect();
        order.sort_by(|&a, &b| c_raw[a].total_cmp(&c_raw[b]).then(a.cmp(&b)));
        for w in order.windows(2) {
            if c_raw[w[0]] == c_raw[w[1]] {
                return Err(LadderError::Tie { a: w[0], b: w[1], c_hat: c_raw[w[0]] });
            }
        }
        if let Some(&last) = order.last() {
            if c_raw[last] >= p {
                return Err(LadderError::AbovePenalty { index: last, c_hat: c_raw[last], p });
            }
        }
        let eta_s: Vec<f64> = order.iter().map(|&i| eta[i]).collect();
        let f_s: Vec<f64> = order.iter().map(|&i| fixed_cost[i]).collect();
        let c_hat: Vec<f64> = order.iter().map(|&i| c_raw[i]).collect();
        let mut theta = Vec::with_capacity(eta.len() + 1);
        let mut c_of_theta = Vec::with_capacity(eta.len() + 1);
        theta.push(theta0);
        c_of_theta.push(0.0);
        for l in 0..eta_s.len() {
            theta.push(theta[l] + eta_s[l]);
            c_of_theta.push(c_of_theta[l] + f_s[l]);
        }
        Ok(DriftLadder {
            theta,
            eta: eta_s,
            c_hat,
            fixed_cost: f_s,
            kappa,
            sigma2,
            p,
            c_of_theta,
            order,
            theta0_analytic: theta0,
        })
    }

    /// Number of activities L.
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Same ladder with a different θ_0 (all rungs shift together).
    pub fn with_theta0(&self, theta0: f64) -> Result<Self, LadderError> {
        let mut l = DriftLadder::new(theta0, &self.eta, &self.fixed_cost, self.kappa, self.sigma2, self.p)?;
        // rungs are already sorted, so `new` returned the identity order
        l.order = self.order.clone();
        l.theta0_analytic = self.theta0_analytic;
        Ok(l)
    }
}

/// Builds the drift ladder from limit parameters.
pub fn derive_ladder(limit: &LimitParams) -> Result<DriftLadder, LadderError> {
    let mut kappa = 0.0;
    let mut sigma2 = 0.0;
    let mut theta0 = 0.0;
    for c in &limit.classes {
        match c.kind {
            LimitKind::Repeat { k_hat, r } => {
                kappa += (r + c.gamma) * c.x;
                sigma2 += 2.0 * r * k_hat / (c.mu * c.mu);
                theta0 -= k_hat * c.alpha / c.mu;
            }
            LimitKind::OneTime { lambda } => {
                kappa += c.gamma * c.x;
                sigma2 += 2.0 * lambda / (c.mu * c.mu);
                theta0 -= c.alpha / c.mu;
            }
        }
    }
    let eta: Vec<f64> = limit
        .activities
        .iter()
        .map(|a| {
            let rep: f64 = a
                .repeat_boosts
                .iter()
                .map(|&(j, r)| match limit.classes[j].kind {
                    LimitKind::Repeat { k_hat, .. } => k_hat * r / limit.classes[j].mu,
                    LimitKind::OneTime { .. } => 0.0,
                })
                .sum();
            let one: f64 = a.onetime_boosts.iter().map(|&(j, l)| l / limit.classes[j].mu).sum();
            rep + one
        })
        .collect();
    let fixed: Vec<f64> = limit.activities.iter().map(|a| a.fixed_cost).collect();
    let start = limit.theta0_override.unwrap_or(theta0);
    let mut ladder = DriftLadder::new(start, &eta, &fixed, kappa, sigma2, limit.p)?;
    ladder.order = ladder.order.iter().map(|&k| limit.activities[k].source_index).collect();
    ladder.theta0_analytic = theta0;
    Ok(ladder)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> NthSystemParams {
        let classes = vec![
            VolunteerClass::repeat("a", 100.0, 2.6, 0.01, 520.0),
            VolunteerClass::one_time("b", 260.0, 0.01, 520.0),
        ];
        let act = EngagementActivity::proportional("x", &classes, &[0, 1], 10.0, Schedule::Weekly, 1.0, 5);
        NthSystemParams {
            classes,
            activities: vec![act],
            scaling_n: 1.0,
            idleness_penalty: 20.0,
            slots_per_day: 2,
            working_days_per_week: 5,
            gamma_units: GammaUnits::PerDay,
            theta0_override: None,
        }
    }

    #[test]
    fn toy_is_valid() {
        assert!(validate_nth_params(&toy()).is_empty());
    }

    #[test]
    fn identity_scaling_passes_through() {
        let mut p = toy();
        p.classes[0].alpha = Some(0.0);
        p.classes[1].alpha = Some(0.0);
        let l = scale_to_limit(&p).unwrap();
        assert_eq!(l.classes[0].mu, 520.0);
        assert_eq!(l.classes[0].kind, LimitKind::Repeat { k_hat: 100.0, r: 2.6 });
        assert_eq!(l.classes[1].kind, LimitKind::OneTime { lambda: 260.0 });
        assert_eq!(l.activities[0].fixed_cost, 10.0);
    }

    #[test]
    fn derived_alpha_balances_load() {
        let l = scale_to_limit(&toy()).unwrap();
        assert!(balanced_load_check(&l) < 1e-12);
        assert!(l.classes.iter().all(|c| c.alpha_derived));
    }

    #[test]
    fn ladder_sorts_by_marginal_cost() {
        let l = DriftLadder::new(-1.0, &[1.0, 2.0], &[6.0, 2.0], 1.0, 1.0, 10.0).unwrap();
        assert_eq!(l.c_hat, vec![1.0, 6.0]);
        assert_eq!(l.order, vec![1, 0]);
        assert_eq!(l.theta, vec![-1.0, 1.0, 2.0]);
        assert_eq!(l.c_of_theta, vec![0.0, 2.0, 8.0]);
    }

    #[test]
    fn ladder_rejects_ties_and_expensive_rungs() {
        assert!(matches!(DriftLadder::new(-1.0, &[1.0, 2.0], &[2.0, 4.0], 1.0, 1.0, 10.0), Err(LadderError::Tie { .. })));
        assert!(matches!(DriftLadder::new(-1.0, &[1.0], &[12.0], 1.0, 1.0, 10.0), Err(LadderError::AbovePenalty { .. })));
    }

    #[test]
    fn with_theta0_keeps_order() {
        let l = DriftLadder::new(-1.0, &[1.0, 2.0], &[6.0, 2.0], 1.0, 1.0, 10.0).unwrap();
        let m = l.with_theta0(-3.0).unwrap();
        assert_eq!(m.order, l.order);
        assert_eq!(m.theta[0], -3.0);
        assert_eq!(m.c_hat, l.c_hat);
    }
}
