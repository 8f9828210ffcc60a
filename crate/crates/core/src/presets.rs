//! Standard fluxes and lights used by the battery, tests and command line.

use crate::error::Result;
use crate::flux::Flux;
use crate::germ::Fluxes;
use crate::signal::{Phase, Signal};

/// Quadratic flux on `[0, 1]` peaking at `f_max`.
pub fn unit_flux(f_max: f64) -> Flux {
    Flux::quadratic(0.0, 1.0, f_max).expect("valid quadratic")
}

pub fn unit_fluxes(f0: f64, f1: f64, f2: f64) -> Fluxes {
    Fluxes::new(unit_flux(f0), unit_flux(f1), unit_flux(f2))
}

/// Light that never limits: exit 1 green for `theta1` of the period at the
/// smaller of the two road peaks, exit 2 for the rest.
pub fn never_limited(fluxes: &Fluxes, theta1: f64) -> Result<Signal> {
    let cap = |k: usize| fluxes[0].f_max().min(fluxes[k].f_max());
    Signal::from_durations(&[(theta1, Phase::One, cap(1)), (1.0 - theta1, Phase::Two, cap(2))])
}

/// One stop of length `stop`, then exit 1 for `theta1`, then exit 2 for the
/// rest, at the largest limiter the roads allow.
pub fn stop_then_two_exits(fluxes: &Fluxes, stop: f64, theta1: f64) -> Result<Signal> {
    let a0 = fluxes[0].f_max().min(fluxes[1].f_max()).min(fluxes[2].f_max());
    Signal::from_durations(&[
        (stop, Phase::One, 0.0),
        (theta1, Phase::One, a0),
        (1.0 - stop - theta1, Phase::Two, a0),
    ])
}

/// Closed-form split curves of the never-limited light, `(hat1, hat2)`.
pub fn never_limited_split(fluxes: &Fluxes, theta1: f64, lambda: f64) -> (f64, f64) {
    let theta2 = 1.0 - theta1;
    let phi1 = fluxes[0].f_max().min(fluxes[1].f_max());
    let phi2 = fluxes[0].f_max().min(fluxes[2].f_max());
    let (bar1, bar2) = (theta1 * phi1, theta2 * phi2);
    let share2 = bar2 / (bar1 + bar2);
    if theta2 >= share2 {
        ((theta1 * lambda).max(lambda - bar2), (theta2 * lambda).min(bar2))
    } else {
        ((theta1 * lambda).min(bar1), (theta2 * lambda).max(lambda - bar1))
    }
}

/// Closed-form split curves of the stop-then-two-exits light.
pub fn stop_split(a0: f64, stop: f64, theta1: f64, lambda: f64) -> (f64, f64) {
    let theta2 = 1.0 - stop - theta1;
    let bar1 = a0 * theta1;
    (
        (lambda * (stop + theta1)).min(bar1),
        (lambda * theta2).max(lambda - bar1),
    )
}
