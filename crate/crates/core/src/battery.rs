//! Acceptance battery. Each criterion is a plain function returning a pass
//! flag and a one-line detail; [`run_battery`] times them against budgets.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::effective::{build_effective_germ, example3_concave_hat, SubgermPoint, TriangleLimiter};
use crate::error::Result;
use crate::fvm::{
    bv_estimate, homogenization_error, homogenization_error_2to1, kato_check, simulate, worst_increase, BranchField,
    JunctionRule, MacroRule, MesoRule, RunOptions,
};
use crate::germ::{
    check_generation, check_germ_property, corner_points, meso_germ_params, split_point, Fluxes, GermParams,
    MesoGermSpec,
};
use crate::hj::{corrector, verify_corrector, CorrectorField, VerifyGrid};
use crate::presets::{never_limited, never_limited_split, stop_split, stop_then_two_exits, unit_fluxes};
use crate::signal::{Phase, Signal};

/// Every numerical threshold of the battery, with its default.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub germ_pairs: usize,
    pub germ_min_dissipation: f64,
    pub generation_grid: usize,
    /// Membership slack in units of the grid spacing.
    pub generation_slack: f64,
    pub generation_dissipation: f64,
    pub closed_form_samples: usize,
    pub closed_form: f64,
    /// Allowed rounding in `hat1 + hat2 = min(λ, bar0)`.
    pub split_sum: f64,
    pub concave_steps: usize,
    pub concave: f64,
    pub order_gap: f64,
    pub corrector_times: usize,
    pub corrector_membership: f64,
    pub corrector_rate: f64,
    pub fixed_point_dx: f64,
    pub fixed_point_factor: f64,
    pub kato_pairs: usize,
    pub kato_step: f64,
    pub homog_dx: f64,
    pub homog_ratio: f64,
    pub homog_relative: f64,
    pub transform_identity: f64,
    pub macro_membership: f64,
    pub bv_factor: f64,
    pub seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            germ_pairs: 10_000,
            germ_min_dissipation: -1e-9,
            generation_grid: 30,
            generation_slack: 5.0,
            generation_dissipation: 1e-10,
            closed_form_samples: 1000,
            closed_form: 1e-8,
            split_sum: 1e-14,
            concave_steps: 512,
            concave: 1e-3,
            order_gap: 0.01,
            corrector_times: 1000,
            corrector_membership: 1e-3,
            corrector_rate: 0.99,
            fixed_point_dx: 1.0 / 200.0,
            fixed_point_factor: 3.0,
            kato_pairs: 5,
            kato_step: 1e-10,
            homog_dx: 1.0 / 400.0,
            homog_ratio: 0.5,
            homog_relative: 0.05,
            transform_identity: 1e-14,
            macro_membership: 1e-8,
            bv_factor: 2.0,
            seed: 20240611,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

pub struct Criterion {
    pub name: &'static str,
    pub group: &'static str,
    pub budget: Duration,
    pub run: fn(&Tolerances) -> Result<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub name: &'static str,
    pub group: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} {:<28} {:>8.2}s / {:>4}s  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

pub fn criteria() -> Vec<Criterion> {
    let s = Duration::from_secs;
    vec![
        Criterion {
            name: "germ-property",
            group: "germ",
            budget: s(10),
            run: germ_property,
        },
        Criterion {
            name: "germ-generation",
            group: "germ",
            budget: s(60),
            run: germ_generation,
        },
        Criterion {
            name: "effective-closed-forms",
            group: "effective",
            budget: s(30),
            run: effective_closed_forms,
        },
        Criterion {
            name: "order-effect",
            group: "effective",
            budget: s(30),
            run: order_effect,
        },
        Criterion {
            name: "corrector-verification",
            group: "corrector",
            budget: s(120),
            run: corrector_verification,
        },
        Criterion {
            name: "corrector-fixed-point",
            group: "corrector",
            budget: s(120),
            run: corrector_fixed_point,
        },
        Criterion {
            name: "kato-contraction",
            group: "fvm",
            budget: s(120),
            run: kato_contraction,
        },
        Criterion {
            name: "homogenization",
            group: "fvm",
            budget: s(600),
            run: homogenization,
        },
        Criterion {
            name: "macro-rule-germ",
            group: "fvm",
            budget: s(120),
            run: macro_rule_germ,
        },
        Criterion {
            name: "bv-bound",
            group: "fvm",
            budget: s(120),
            run: bv_bound,
        },
    ]
}

/// Criteria whose group equals `filter` or whose name starts with it.
pub fn select_criteria(filter: Option<&str>) -> Vec<Criterion> {
    criteria()
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.group == f || c.name.starts_with(f)))
        .collect()
}

/// Runs the criteria picked by [`select_criteria`].
pub fn run_battery(filter: Option<&str>, tol: &Tolerances) -> Vec<CriterionReport> {
    select_criteria(filter)
        .into_iter()
        .map(|c| {
            let start = Instant::now();
            let out = (c.run)(tol).unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
            let elapsed = start.elapsed();
            let in_budget = elapsed <= c.budget;
            let detail = if in_budget {
                out.detail
            } else {
                format!("{} (over budget)", out.detail)
            };
            CriterionReport {
                name: c.name,
                group: c.group,
                pass: out.pass && in_budget,
                detail,
                elapsed,
                budget: c.budget,
            }
        })
        .collect()
}

/// Never-limited light with unequal exits.
pub fn never_limited_setup() -> (Fluxes, Signal, f64) {
    let fl = unit_fluxes(1.0, 1.0, 0.5);
    let theta1 = 0.3;
    (fl.clone(), never_limited(&fl, theta1).expect("valid light"), theta1)
}

/// Stop followed by exit 1 then exit 2.
pub fn stop_setup(theta1: f64) -> (Fluxes, Signal, f64, f64) {
    let fl = unit_fluxes(1.5, 1.0, 1.0);
    let stop = 0.2;
    (
        fl.clone(),
        stop_then_two_exits(&fl, stop, theta1).expect("valid light"),
        stop,
        1.0,
    )
}

/// Homogenization setting: fast incoming road, even split, no limitation.
pub fn homogenization_setup() -> (Fluxes, Signal) {
    let fl = unit_fluxes(2.0, 1.0, 1.0);
    let s = never_limited(&fl, 0.5).expect("valid light");
    (fl, s)
}

fn example_germs() -> Result<Vec<(&'static str, GermParams, Fluxes)>> {
    let (f1, s1, _) = never_limited_setup();
    let (f2, s2, _, _) = stop_setup(0.4);
    let spec = MesoGermSpec::new(s2.clone(), f2.clone())?;
    Ok(vec![
        ("never-limited", build_effective_germ(&s1, &f1)?.params, f1),
        ("stop", build_effective_germ(&s2, &f2)?.params, f2.clone()),
        ("light-phase-1", meso_germ_params(0.3, &spec), f2.clone()),
        ("light-phase-2", meso_germ_params(0.8, &spec), f2),
    ])
}

fn germ_property(tol: &Tolerances) -> Result<Outcome> {
    let germs = example_germs()?;
    let mut worst = f64::INFINITY;
    let mut notes = Vec::new();
    for (i, (name, g, fl)) in germs.iter().enumerate() {
        let r = check_germ_property(g, fl, tol.germ_pairs, tol.seed + i as u64);
        worst = worst.min(r.min_dissipation);
        notes.push(format!("{name}: {:.2e}", r.min_dissipation));
    }
    Ok(Outcome::new(
        worst >= tol.germ_min_dissipation,
        format!("{} pairs each, min D {}", tol.germ_pairs, notes.join(", ")),
    ))
}

fn germ_generation(tol: &Tolerances) -> Result<Outcome> {
    let germs = example_germs()?;
    let reports: Vec<_> = germs
        .par_iter()
        .map(|(name, g, fl)| {
            (
                *name,
                check_generation(
                    g,
                    fl,
                    tol.generation_grid,
                    tol.generation_slack,
                    tol.generation_dissipation,
                ),
            )
        })
        .collect();
    let bad: usize = reports.iter().map(|r| r.1.counterexamples.len()).sum();
    let consts: Vec<String> = reports
        .iter()
        .map(|(n, r)| {
            format!(
                "{n}: {} accepted of {} surface points, C={:.2}",
                r.accepted, r.surface_points, r.empirical_constant
            )
        })
        .collect();
    Ok(Outcome::new(
        bad == 0,
        format!(
            "{}^3 grid, {bad} counterexamples ({})",
            tol.generation_grid,
            consts.join("; ")
        ),
    ))
}

fn effective_closed_forms(tol: &Tolerances) -> Result<Outcome> {
    let n = tol.closed_form_samples;
    let mut err_nl = 0.0f64;
    let mut err_stop = 0.0f64;
    let mut err_sum = 0.0f64;
    let (fl, s, theta1) = never_limited_setup();
    let g = build_effective_germ(&s, &fl)?.params;
    let bar0 = g.bar(0);
    for i in 0..=n {
        let l = bar0 * i as f64 / n as f64;
        let (h1, h2) = never_limited_split(&fl, theta1, l);
        err_nl = err_nl.max((g.hat(1, l) - h1).abs()).max((g.hat(2, l) - h2).abs());
        err_sum = err_sum.max((g.hat(1, l) + g.hat(2, l) - l.min(bar0)).abs());
    }
    for theta1 in [0.4, 0.2, 0.55] {
        let (fl, s, stop, a0) = stop_setup(theta1);
        let g = build_effective_germ(&s, &fl)?.params;
        let bar0 = g.bar(0);
        for i in 0..=n {
            let l = bar0 * i as f64 / n as f64;
            let (h1, h2) = stop_split(a0, stop, theta1, l);
            err_stop = err_stop.max((g.hat(1, l) - h1).abs()).max((g.hat(2, l) - h2).abs());
            err_sum = err_sum.max((g.hat(1, l) + g.hat(2, l) - l.min(bar0)).abs());
        }
    }
    // Concave split from a triangle limiter, against its exact curve.
    let tri = TriangleLimiter {
        low: 0.2,
        high: 0.8,
        descent: 0.5,
    };
    let (mean, t1) = (tri.mean(), tri.switch_time());
    let slope = (tri.high - tri.low) / tri.descent;
    let bar1 = t1 * (mean + tri.low) / 2.0;
    let exact = |l: f64| {
        if l <= tri.low {
            t1 * l
        } else {
            bar1 - (mean - l).powi(2) / (2.0 * slope)
        }
    };
    let levels: Vec<f64> = (0..=64).map(|i| mean * i as f64 / 64.0).collect();
    let cs = example3_concave_hat(&tri, tol.concave_steps, &levels)?;
    let err_tri = levels
        .iter()
        .zip(&cs.hat1)
        .map(|(&l, &h)| (h - exact(l)).abs())
        .fold(0.0, f64::max);
    let pass =
        err_nl <= tol.closed_form && err_stop <= tol.closed_form && err_sum <= tol.split_sum && err_tri <= tol.concave;
    Ok(Outcome::new(
        pass,
        format!(
            "never-limited {err_nl:.1e}, stop {err_stop:.1e}, sum {err_sum:.1e}, concave({}) {err_tri:.1e}",
            tol.concave_steps
        ),
    ))
}

fn order_effect(tol: &Tolerances) -> Result<Outcome> {
    let (fl, s, _, _) = stop_setup(0.4);
    let g = build_effective_germ(&s, &fl)?.params;
    let half = g.bar(0) / 2.0;
    let gap = g.hat(1, half) - g.hat(2, half);
    Ok(Outcome::new(
        gap >= tol.order_gap * g.bar(0),
        format!(
            "hat1 - hat2 at bar0/2 = {gap:.4} (need >= {:.4})",
            tol.order_gap * g.bar(0)
        ),
    ))
}

/// The characteristic points checked for each light: four totals on the
/// split curve, the empty point and the three corners.
pub fn representative_points(signal: &Signal, fluxes: &Fluxes) -> Result<Vec<SubgermPoint>> {
    let bar0 = signal.mean();
    let mut pts: Vec<SubgermPoint> = [0.0, 0.2, 0.5, 0.8, 1.0]
        .iter()
        .map(|&s| SubgermPoint::Fluid {
            p0: fluxes[0].inv_fluid_unchecked(s * bar0),
        })
        .collect();
    pts.extend([
        SubgermPoint::Saturated { k: 1 },
        SubgermPoint::Saturated { k: 2 },
        SubgermPoint::Jammed,
    ]);
    Ok(pts)
}

fn corrector_lights() -> Vec<(&'static str, Fluxes, Signal)> {
    let (f1, s1, _) = never_limited_setup();
    let (f2, s2, _, _) = stop_setup(0.4);
    vec![("never-limited", f1, s1), ("stop", f2, s2)]
}

fn corrector_verification(tol: &Tolerances) -> Result<Outcome> {
    let grid = VerifyGrid {
        n_times: tol.corrector_times,
        ..Default::default()
    };
    let mut jobs = Vec::new();
    for (name, fl, s) in corrector_lights() {
        for p in representative_points(&s, &fl)? {
            jobs.push((name, fl.clone(), s.clone(), p));
        }
    }
    let results: Vec<Result<(String, bool)>> = jobs
        .par_iter()
        .map(|(name, fl, s, p)| {
            let c = corrector(*p, s, fl)?;
            let r = verify_corrector(&c, tol.corrector_membership, &grid);
            let support_ok = !matches!(p, SubgermPoint::Fluid { .. }) || r.incoming_flat_beyond_support;
            let ok = r.passes(tol.corrector_rate, tol.corrector_membership) && support_ok;
            let c_fit = r.decay.iter().map(|d| d.constant).fold(0.0, f64::max);
            Ok((
                format!(
                    "{name}/{p:?}: rate {:.3} C {:.3}{}",
                    r.membership_rate,
                    c_fit,
                    if ok { "" } else { " FAILED" }
                ),
                ok,
            ))
        })
        .collect();
    let mut all = true;
    let mut failed = Vec::new();
    for r in results {
        let (line, ok) = r?;
        all &= ok;
        if !ok {
            failed.push(line);
        }
    }
    let n = jobs.len();
    Ok(Outcome::new(
        all,
        if all {
            format!(
                "{n} correctors: membership >= {} at tol {}, decay constants stable",
                tol.corrector_rate, tol.corrector_membership
            )
        } else {
            failed.join("; ")
        },
    ))
}

/// Corrector cell averages at time `t` on a grid of half-length `half`.
pub fn corrector_field(c: &CorrectorField, t: f64, dx: f64, half: f64) -> Result<BranchField> {
    let mut f = BranchField::constant(c.triple.0, dx, half)?;
    let n = f.n();
    f.cells[0] = c.cell_averages(0, t, -half, dx, n);
    f.cells[1] = c.cell_averages(1, t, 0.0, dx, n);
    f.cells[2] = c.cell_averages(2, t, 0.0, dx, n);
    f.t = t;
    Ok(f)
}

fn corrector_fixed_point(tol: &Tolerances) -> Result<Outcome> {
    let dx = tol.fixed_point_dx;
    let half = 4.0;
    let mut jobs = Vec::new();
    for (name, fl, s) in corrector_lights() {
        for p in representative_points(&s, &fl)? {
            jobs.push((name, fl.clone(), s.clone(), p));
        }
    }
    let bound = tol.fixed_point_factor * dx * 3.0 * half;
    let res: Vec<Result<(String, f64)>> = jobs
        .par_iter()
        .map(|(name, fl, s, p)| {
            let c = corrector(*p, s, fl)?;
            let start = corrector_field(&c, 0.0, dx, half)?;
            let rule = MesoRule::new(s.clone(), fl.clone(), 1.0)?;
            let run = simulate(start.clone(), fl, &rule, &RunOptions::new(1.0, 0.9))?;
            Ok((format!("{name}/{p:?}"), run.last.l1_distance(&start)))
        })
        .collect();
    let mut worst = (String::new(), 0.0f64);
    for r in res {
        let (n, d) = r?;
        if d >= worst.1 {
            worst = (n, d);
        }
    }
    Ok(Outcome::new(
        worst.1 <= bound,
        format!(
            "{} correctors, worst one-period L1 drift {:.2e} ({}) <= {bound:.2e}",
            jobs.len(),
            worst.1,
            worst.0
        ),
    ))
}

/// Random piecewise-constant data within `near` of the node over a shared
/// far-field state, so differences between two draws stay away from the far
/// ends during the run.
fn random_pieces(rng: &mut ChaCha8Rng, fl: &Fluxes, near: f64, far: [f64; 3]) -> [Vec<(f64, f64)>; 3] {
    let mut branch = |j: usize| {
        let mut v = Vec::new();
        let mut d = 0.0;
        while d < near {
            d = (d + rng.gen_range(0.2..0.6)).min(near);
            v.push((d, rng.gen_range(fl[j].a()..=fl[j].c())));
        }
        v.push((f64::INFINITY, far[j]));
        v
    };
    [branch(0), branch(1), branch(2)]
}

fn kato_contraction(tol: &Tolerances) -> Result<Outcome> {
    let (fl, s, _, _) = stop_setup(0.4);
    let horizon = 1.0;
    let near = 1.5;
    // Differences travel at most at the peak speed.
    let half = (near + fl.max_speed() * horizon + 1.0).ceil();
    let dx = 1.0 / 50.0;
    let far = [0.3, 0.2, 0.6];
    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed);
    let pairs: Vec<_> = (0..tol.kato_pairs)
        .map(|_| {
            (
                random_pieces(&mut rng, &fl, near, far),
                random_pieces(&mut rng, &fl, near, far),
            )
        })
        .collect();
    let meso = MesoRule::new(s.clone(), fl.clone(), 0.25)?;
    let mac = MacroRule::effective(&s, &fl)?;
    let rules: [&dyn JunctionRule; 2] = [&meso, &mac];
    let opts = RunOptions::new(horizon, 0.9);
    let mut worst = 0.0f64;
    let mut shrink = Vec::new();
    for rule in rules {
        for (a, b) in &pairs {
            let fa = BranchField::from_pieces(a, dx, half)?;
            let fb = BranchField::from_pieces(b, dx, half)?;
            let series = kato_check(fa, fb, &fl, rule, &opts)?;
            worst = worst.max(worst_increase(&series));
            shrink.push(series.last().unwrap().1 / series[0].1);
        }
    }
    let max_ratio = shrink.iter().copied().fold(0.0, f64::max);
    Ok(Outcome::new(
        worst <= tol.kato_step,
        format!(
            "{} pairs x 2 models, largest step increase {worst:.1e}, final/initial distance <= {max_ratio:.3}",
            tol.kato_pairs
        ),
    ))
}

fn homogenization(tol: &Tolerances) -> Result<Outcome> {
    let (fl, s) = homogenization_setup();
    let half = 4.0;
    let pieces = [vec![(half, 0.75)], vec![(half, 0.0)], vec![(half, 0.0)]];
    let field = BranchField::from_pieces(&pieces, tol.homog_dx, half)?;
    let norm = field.mass();
    let opts = RunOptions::new(2.0, 0.9);
    let eps = [0.25, 0.125, 0.0625, 0.03125];
    let errs = homogenization_error(&field, &s, &fl, &eps, &opts)?;
    let e: Vec<f64> = errs.iter().map(|x| x.1).collect();
    let decreasing = e.windows(2).all(|w| w[1] < w[0]);
    let last = *e.last().unwrap();
    let pass_direct = decreasing && last < tol.homog_ratio * e[0] && last < tol.homog_relative * norm;

    // The converging junction obtained by reversal runs through the same
    // solver and must reproduce the diverging errors.
    let reversed = field.reversed();
    let errs2 = homogenization_error_2to1(&reversed, &s, &fl.reversed(), &eps, &opts)?;
    let gap = errs
        .iter()
        .zip(&errs2)
        .map(|(a, b)| (a.1 - b.1).abs())
        .fold(0.0, f64::max);
    let pass = pass_direct && gap <= tol.transform_identity;
    Ok(Outcome::new(
        pass,
        format!(
            "errors {} (norm {norm:.2}), 2:1 gap {gap:.1e}",
            e.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")
        ),
    ))
}

fn macro_rule_germ(tol: &Tolerances) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut evaluations = 0usize;
    let mut case_err = 0.0f64;
    for (_, fl, s) in corrector_lights() {
        let eff = build_effective_germ(&s, &fl)?;
        let g = &eff.params;
        let rule = MacroRule::new(g.clone(), fl.clone());
        // The four characteristic cases as Riemann data.
        let mut cases = vec![split_point(g, &fl, 0.6 * g.bar(0))];
        cases.extend(corner_points(g, &fl));
        for c in &cases {
            let j = rule.flux(0.0, c.0)?;
            let want = fl.values(c);
            for (phi, w) in j.phi.iter().zip(want) {
                case_err = case_err.max((phi - w).abs());
            }
            worst = worst.max(j.violation);
        }
        // Random node states.
        let mut rng = ChaCha8Rng::seed_from_u64(tol.seed);
        for _ in 0..20_000 {
            let rho = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            worst = worst.max(rule.flux(0.0, rho)?.violation);
            evaluations += 1;
        }
        // Full runs from random Riemann data, every evaluation audited.
        for _ in 0..4 {
            let rho = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            let f = BranchField::constant(rho, 0.02, 2.0)?;
            let run = simulate(f, &fl, &rule, &RunOptions::new(1.0, 0.9))?;
            worst = worst.max(run.worst_violation);
            evaluations += run.steps;
        }
    }
    Ok(Outcome::new(
        worst <= tol.macro_membership && case_err <= 1e-12,
        format!("{evaluations} evaluations, worst trace violation {worst:.1e}, case flux error {case_err:.1e}"),
    ))
}

fn bv_bound(tol: &Tolerances) -> Result<Outcome> {
    let fl = unit_fluxes(1.0, 1.0, 1.0);
    let red = Signal::constant(0.0, Phase::One)?;
    let rule = MesoRule::new(red, fl.clone(), 1.0)?;
    let half = 20.0;
    let tc = 12.0;
    let speed = -fl[0].value(0.2) / (1.0 - 0.2);
    let xc = speed * tc;
    let mut consts = Vec::new();
    for dx in [1.0 / 20.0, 1.0 / 40.0] {
        let f = BranchField::from_pieces(&[vec![(half, 0.2)], vec![(half, 0.0)], vec![(half, 0.0)]], dx, half)?;
        let mut opts = RunOptions::new(tc + 0.4, 0.9);
        opts.snapshots = (0..=80).map(|i| tc - 0.4 + 0.01 * i as f64).collect();
        let run = simulate(f, &fl, &rule, &opts)?;
        for r in [0.25, 0.5, 1.0] {
            consts.push(bv_estimate(&run.snapshots, 0, (tc, xc), r)? / r);
        }
    }
    let (lo, hi) = consts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |a, &c| (a.0.min(c), a.1.max(c)));
    Ok(Outcome::new(
        lo > 0.0 && hi <= tol.bv_factor * lo,
        format!(
            "fitted C over R x dx: {} (spread {:.2})",
            consts.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>().join(" "),
            hi / lo
        ),
    ))
}
