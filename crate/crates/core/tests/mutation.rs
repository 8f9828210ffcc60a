//! A deliberately broken light rule must be caught by the per-step germ audit.

use tljunction::fvm::{
    meso_junction_flux, reconstruct_trace, simulate, BranchField, JunctionFlux, JunctionRule, MesoRule, RunOptions,
};
use tljunction::germ::{meso_germ_violation, Fluxes};
use tljunction::presets::{stop_then_two_exits, unit_fluxes};
use tljunction::signal::Signal;
use tljunction::Result;

/// The light rule with the limiter taken as a floor instead of a ceiling.
struct FlippedLimiter {
    signal: Signal,
    fluxes: Fluxes,
    eps: f64,
}

impl JunctionRule for FlippedLimiter {
    fn flux(&self, t: f64, rho: [f64; 3]) -> Result<JunctionFlux> {
        let seg = self.signal.segment_at(t / self.eps);
        let k = seg.phase.branch();
        let q = seg
            .limiter
            .max(self.fluxes[0].demand(rho[0]))
            .min(self.fluxes[k].supply(rho[k]));
        let mut phi = [q, 0.0, 0.0];
        phi[k] = q;
        let trace = reconstruct_trace(&self.fluxes, rho, phi);
        let violation = meso_germ_violation(seg.limiter, seg.phase, &self.fluxes, &trace);
        Ok(JunctionFlux { phi, trace, violation })
    }
}

fn setup() -> (Fluxes, Signal, BranchField) {
    let fl = unit_fluxes(1.5, 1.0, 1.0);
    let signal = stop_then_two_exits(&fl, 0.2, 0.4).unwrap();
    let field = BranchField::constant([0.3, 0.1, 0.1], 0.02, 2.0).unwrap();
    (fl, signal, field)
}

#[test]
fn correct_rule_passes_every_step() {
    let (fl, signal, field) = setup();
    let rule = MesoRule::new(signal, fl.clone(), 0.2).unwrap();
    let run = simulate(field, &fl, &rule, &RunOptions::new(0.4, 0.9)).unwrap();
    assert_eq!(run.audit_rate(), 1.0);
    assert!(run.worst_violation <= 1e-8);
}

#[test]
fn flipped_limiter_fails_the_audit() {
    let (fl, signal, field) = setup();
    let rule = FlippedLimiter {
        signal,
        fluxes: fl.clone(),
        eps: 0.2,
    };
    let run = simulate(field, &fl, &rule, &RunOptions::new(0.4, 0.9)).unwrap();
    assert!(run.audit_rate() < 1.0, "mutant passed the audit");
    assert!(run.worst_violation > 1e-3, "worst violation {}", run.worst_violation);
}

#[test]
fn flipped_limiter_changes_the_flux_during_the_stop() {
    let (fl, _, _) = setup();
    let rho = [0.3, 0.1, 0.1];
    let honest = meso_junction_flux(0.0, 1, &fl, rho);
    assert_eq!(honest, [0.0; 3]);
    let q = 0.0f64.max(fl[0].demand(rho[0])).min(fl[1].supply(rho[1]));
    assert!(q > 0.5);
}
