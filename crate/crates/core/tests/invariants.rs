use proptest::prelude::*;

use tljunction::effective::build_effective_germ;
use tljunction::flux::Flux;
use tljunction::fvm::{macro_junction_flux, simulate, BranchField, MacroRule, MesoRule, RunOptions};
use tljunction::germ::{dissipation, germ_violation, Fluxes, GermSampler, Triple};
use tljunction::presets::{never_limited, stop_then_two_exits, unit_fluxes};

fn fluxes() -> impl Strategy<Value = Fluxes> {
    (0.5..2.0f64, 0.3..1.5f64, 0.3..1.5f64).prop_map(|(a, b, c)| unit_fluxes(a, b, c))
}

fn sampled_flux() -> impl Strategy<Value = Flux> {
    // Samples of the strictly concave cubic h p (1 - p) (1 + s p). Monotone
    // cubic interpolation can still bend the wrong way near the peak, so
    // samples the constructor rejects are skipped.
    (0.3..2.0f64, 0.0..0.9f64, 5usize..16).prop_filter_map("interpolant not concave", |(height, skew, n)| {
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let p = i as f64 / n as f64;
                (p, height * p * (1.0 - p) * (1.0 + skew * p))
            })
            .collect();
        Flux::sampled(&pts).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn demand_and_supply_envelope_the_flux(f in sampled_flux(), p in 0.0..1.0f64) {
        let v = f.value(p);
        prop_assert!(f.demand(p) >= v - 1e-12 && f.supply(p) >= v - 1e-12);
        prop_assert!((f.demand(p).min(f.supply(p)) - v).abs() < 1e-12);
        prop_assert!(f.demand(p) <= f.f_max() + 1e-12);
    }

    #[test]
    fn fluid_inverse_undoes_the_flux(f0 in 0.3..2.0f64, p in 0.0..0.5f64) {
        let f = Flux::quadratic(0.0, 1.0, f0).unwrap();
        prop_assert!((f.inv_fluid(f.value(p)).unwrap() - p).abs() < 1e-9);
        prop_assert!((f.inv_congested(f.value(1.0 - p)).unwrap() - (1.0 - p)).abs() < 1e-9);
    }

    #[test]
    fn reversal_is_an_involution(f in sampled_flux(), p in 0.0..1.0f64) {
        let back = f.reverse().reverse();
        prop_assert!((back.value(p) - f.value(p)).abs() < 1e-12);
        prop_assert!((f.reverse().value(-p) - f.value(p)).abs() < 1e-12);
        let t = Triple::new(p, 0.5 * p, 1.0 - p);
        prop_assert_eq!(t.reversed().reversed(), t);
    }

    #[test]
    fn effective_germ_points_dissipate(fl in fluxes(), theta1 in 0.1..0.9f64, seed in 0u64..1000) {
        let signal = never_limited(&fl, theta1).unwrap();
        let g = build_effective_germ(&signal, &fl).unwrap().params;
        let mut s = GermSampler::new(&g, &fl, seed);
        for _ in 0..20 {
            let (a, b) = (s.sample(), s.sample());
            prop_assert!(germ_violation(&g, &fl, &a) <= 1e-8);
            prop_assert!(dissipation(&fl, &a, &b) >= -1e-9);
        }
    }

    #[test]
    fn split_curves_share_the_total(fl in fluxes(), stop in 0.0..0.4f64, theta1 in 0.1..0.5f64, l in 0.0..1.0f64) {
        let signal = stop_then_two_exits(&fl, stop, theta1).unwrap();
        let g = build_effective_germ(&signal, &fl).unwrap().params;
        let lambda = l * fl[0].f_max();
        let total = g.hat(1, lambda) + g.hat(2, lambda);
        prop_assert!((total - lambda.min(g.bar(0))).abs() < 1e-12);
        prop_assert!(g.hat(1, lambda) <= g.bar(1) + 1e-12 && g.hat(2, lambda) <= g.bar(2) + 1e-12);
    }

    #[test]
    fn macro_rule_is_monotone_and_conservative(
        fl in fluxes(),
        theta1 in 0.1..0.9f64,
        rho in (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64),
        bump in 0.0..0.2f64,
    ) {
        let signal = never_limited(&fl, theta1).unwrap();
        let g = build_effective_germ(&signal, &fl).unwrap().params;
        let r = [rho.0, rho.1, rho.2];
        let phi = macro_junction_flux(&g, &fl, r);
        prop_assert!((phi[0] - phi[1] - phi[2]).abs() < 1e-12);
        for k in 1..3 {
            prop_assert!(phi[k] <= g.bar(k) + 1e-12 && phi[k] <= fl[k].supply(r[k]) + 1e-12);
        }
        // More upstream mass never lowers the throughput; a fuller exit never raises it.
        let up = macro_junction_flux(&g, &fl, [(r[0] + bump).min(1.0), r[1], r[2]]);
        prop_assert!(up[0] >= phi[0] - 1e-12);
        let down = macro_junction_flux(&g, &fl, [r[0], (r[1] + bump).min(1.0), r[2]]);
        prop_assert!(down[0] <= phi[0] + 1e-12);
    }
}

fn pieces() -> impl Strategy<Value = [Vec<(f64, f64)>; 3]> {
    let branch = || (0.1..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(cut, a, b)| vec![(cut, a), (f64::INFINITY, b)]);
    (branch(), branch(), branch()).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solvers_stay_in_the_box_and_balance_mass(fl in fluxes(), theta1 in 0.1..0.9f64, data in pieces(), eps in 0.05..0.5f64) {
        let signal = never_limited(&fl, theta1).unwrap();
        let field = BranchField::from_pieces(&data, 0.05, 1.5).unwrap();
        let opts = RunOptions { record_steps: true, ..RunOptions::new(0.3, 0.9) };
        let meso = MesoRule::new(signal.clone(), fl.clone(), eps).unwrap();
        let macro_rule = MacroRule::effective(&signal, &fl).unwrap();
        for run in [simulate(field.clone(), &fl, &meso, &opts).unwrap(), simulate(field.clone(), &fl, &macro_rule, &opts).unwrap()] {
            prop_assert!(run.last.check_box(&fl, 1e-12).is_ok());
            prop_assert!(run.worst_ledger < 1e-12);
            prop_assert_eq!(run.audit_rate(), 1.0);
        }
        prop_assert_eq!(field.reversed().reversed(), field);
    }
}
