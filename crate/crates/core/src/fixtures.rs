//! Food-bank base case: three volunteer classes, four engagement activities.

use crate::params::{EngagementActivity, FrequencyBand, GammaUnits, NthSystemParams, Schedule, VolunteerClass};

pub const BASE_N: f64 = 56_000.0;
pub const BASE_SLOTS_PER_DAY: u32 = 250;
pub const BASE_WORKING_DAYS: u32 = 6;
pub const BASE_PENALTY: f64 = 50.0;
pub const BASE_GAMMA: f64 = 0.01;
pub const BASE_THETA0: f64 = -1.4;

/// Base case with the tuned θ_0 = −1.4 and γ = 0.01/day.
pub fn base_case() -> NthSystemParams {
    let mu = BASE_SLOTS_PER_DAY as f64 * BASE_WORKING_DAYS as f64 * 52.0;
    let mut c1 = VolunteerClass::repeat("repeat-occasional", 11_200.0, 0.6, BASE_GAMMA, mu);
    c1.alpha = Some(1.370_10);
    c1.frequency_mix = vec![
        FrequencyBand { share: 0.28, rate_per_year: 1.5 },
        FrequencyBand { share: 0.72, rate_per_year: 0.25 },
    ];
    let mut c2 = VolunteerClass::repeat("repeat-frequent", 16_800.0, 3.125, BASE_GAMMA, mu);
    c2.alpha = Some(7.135_95);
    c2.frequency_mix = vec![
        FrequencyBand { share: 0.005, rate_per_year: 52.0 },
        FrequencyBand { share: 0.175, rate_per_year: 12.0 },
        FrequencyBand { share: 0.32, rate_per_year: 2.0 },
        FrequencyBand { share: 0.5, rate_per_year: 0.25 },
    ];
    let c3 = VolunteerClass::one_time("one-time", 19_540.0, BASE_GAMMA, mu);
    let classes = vec![c1, c2, c3];
    let wd = BASE_WORKING_DAYS;
    let activities = vec![
        EngagementActivity::proportional("orientation", &classes, &[0, 1, 2], 936.0, Schedule::Daily, 2.0, wd),
        EngagementActivity::proportional("e-communication", &classes, &[0, 1, 2], 1820.0, Schedule::Weekly, 15.0, wd),
        EngagementActivity::proportional("speaking", &classes, &[2], 720.0, Schedule::Monthly, 20.0, wd),
        EngagementActivity::proportional("tabling", &classes, &[0, 2], 1800.0, Schedule::Monthly, 30.0, wd),
    ];
    NthSystemParams {
        classes,
        activities,
        scaling_n: BASE_N,
        idleness_penalty: BASE_PENALTY,
        slots_per_day: BASE_SLOTS_PER_DAY,
        working_days_per_week: wd,
        gamma_units: GammaUnits::PerDay,
        theta0_override: Some(BASE_THETA0),
    }
}

/// Base case with only one-time volunteers: the repeat classes' baseline
/// arrivals are folded into the one-time class and every boost targets it.
pub fn all_one_time() -> NthSystemParams {
    let base = base_case();
    let mu = base.classes[0].service_rate;
    let total = base.total_base_arrivals();
    let classes = vec![VolunteerClass::one_time("one-time", total, BASE_GAMMA, mu)];
    let wd = base.working_days_per_week;
    let activities = base
        .activities
        .iter()
        .map(|a| EngagementActivity::proportional(&a.name, &classes, &[0], a.fixed_cost, a.schedule, a.boost_per_activation, wd))
        .collect();
    NthSystemParams { classes, activities, theta0_override: base.theta0_override, ..base }
}
