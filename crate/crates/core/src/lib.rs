//! Drift-rate control of a volunteer sign-up list: heavy-traffic scaling,
//! the average-cost Bellman solver, and a daily-period simulator for
//! comparing dynamic threshold policies with static ones.

pub mod bellman;
pub mod cli;
pub mod config;
pub mod cost;
pub mod params;
pub mod special;
pub mod fixtures;
pub mod simulator;
