//! Entropy dissipation at a 1:2 junction and the limiter-parametrized germs.
//!
//! A germ is a set of junction traces `P = (p0, p1, p2)` (incoming road 0,
//! exits 1 and 2). The family handled here is fixed by [`GermParams`]: three
//! flux caps and two nondecreasing split curves telling how an upstream
//! demand is shared between the exits. Besides membership this module
//! provides the finite generating set, a stratified sampler used for the
//! pairwise dissipation property, a grid certification of maximality, the
//! time-dependent traffic-light germs, and the reflection that maps 2:1
//! junctions onto 1:2 ones.

use std::ops::Index;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::pl::PlCurve;
use crate::signal::{Phase, Signal};

/// Default absolute tolerance on fluxes for germ membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Junction trace: densities on branches 0 (incoming), 1 and 2 (exits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple(pub [f64; 3]);

impl Triple {
    pub fn new(p0: f64, p1: f64, p2: f64) -> Self {
        Triple([p0, p1, p2])
    }

    /// Reflection `P -> -P` onto the reversed box.
    pub fn reversed(&self) -> Self {
        Triple([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Index<usize> for Triple {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

/// Fluxes of the three branches.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluxes(pub [Flux; 3]);

impl Index<usize> for Fluxes {
    type Output = Flux;
    fn index(&self, j: usize) -> &Flux {
        &self.0[j]
    }
}

impl Fluxes {
    pub fn new(f0: Flux, f1: Flux, f2: Flux) -> Self {
        Fluxes([f0, f1, f2])
    }

    pub fn reversed(&self) -> Self {
        Fluxes([self.0[0].reverse(), self.0[1].reverse(), self.0[2].reverse()])
    }

    pub fn values(&self, p: &Triple) -> [f64; 3] {
        [self[0].value(p[0]), self[1].value(p[1]), self[2].value(p[2])]
    }

    pub fn max_speed(&self) -> f64 {
        self.0.iter().map(Flux::max_speed).fold(0.0, f64::max)
    }

    pub fn in_box(&self, p: &Triple, tol: f64) -> bool {
        (0..3).all(|j| p[j] >= self[j].a() - tol && p[j] <= self[j].c() + tol)
    }

    pub fn check_box(&self, p: &Triple) -> Result<()> {
        for j in 0..3 {
            self[j].eval(p[j])?;
        }
        Ok(())
    }

    /// Fully empty trace `(a0, a1, a2)`.
    pub fn empty(&self) -> Triple {
        Triple([self[0].a(), self[1].a(), self[2].a()])
    }

    /// Fully jammed trace `(c0, c1, c2)`.
    pub fn jammed(&self) -> Triple {
        Triple([self[0].c(), self[1].c(), self[2].c()])
    }
}

/// Caps `bar[0..3]` and split curves `hat[0..2]` (for exits 1 and 2).
#[derive(Debug, Clone, PartialEq)]
pub struct GermParams {
    bar: [f64; 3],
    hat: [PlCurve; 2],
}

impl GermParams {
    /// Validates the structural conditions against the incoming flux peak.
    pub fn new(bar1: f64, bar2: f64, hat1: PlCurve, hat2: PlCurve, f0_max: f64) -> Result<Self> {
        let g = GermParams {
            bar: [bar1 + bar2, bar1, bar2],
            hat: [hat1, hat2],
        };
        g.validate(f0_max)?;
        Ok(g)
    }

    /// Split curves given by a shared λ grid; the second curve is the
    /// complement `min(λ, bar0) - hat1`, so the sum condition holds by
    /// construction at every node.
    pub fn from_split(bar1: f64, bar2: f64, lambdas: &[f64], hat1: &[f64], f0_max: f64) -> Result<Self> {
        let bar0 = bar1 + bar2;
        let hat2: Vec<f64> = lambdas.iter().zip(hat1).map(|(&l, &h)| l.min(bar0) - h).collect();
        Self::new(
            bar1,
            bar2,
            PlCurve::new(lambdas.to_vec(), hat1.to_vec())?,
            PlCurve::new(lambdas.to_vec(), hat2)?,
            f0_max,
        )
    }

    pub fn bar(&self, j: usize) -> f64 {
        self.bar[j]
    }

    pub fn bars(&self) -> [f64; 3] {
        self.bar
    }

    pub fn hat_curve(&self, k: usize) -> &PlCurve {
        &self.hat[k - 1]
    }

    /// `hat_k(λ)` for `k` in `{1, 2}`.
    pub fn hat(&self, k: usize, lambda: f64) -> f64 {
        if lambda >= self.bar[0] {
            return self.bar[k];
        }
        self.hat[k - 1].eval(lambda)
    }

    pub fn validate(&self, f0_max: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGerm(m));
        let [b0, b1, b2] = self.bar;
        if b1 < 0.0 || b2 < 0.0 {
            return bad(format!("caps must be nonnegative, got {b1}, {b2}"));
        }
        if b0 > f0_max + 1e-10 {
            return bad(format!("total cap {b0} exceeds the incoming peak flux {f0_max}"));
        }
        for k in 1..=2 {
            let c = &self.hat[k - 1];
            if c.eval(0.0).abs() > 1e-10 {
                return bad(format!("split curve {k} does not start at 0"));
            }
            if (c.eval(b0) - self.bar[k]).abs() > 1e-10 {
                return bad(format!("split curve {k} does not reach its cap at the total cap"));
            }
            if !c.is_nondecreasing(1e-12) {
                return bad(format!("split curve {k} is not nondecreasing"));
            }
            if c.ys().iter().any(|&y| y < -1e-12 || y > self.bar[k] + 1e-10) {
                return bad(format!("split curve {k} leaves [0, cap]"));
            }
        }
        let mut probe: Vec<f64> = self.hat[0].xs().iter().chain(self.hat[1].xs()).copied().collect();
        probe.extend((0..=64).map(|i| f0_max * i as f64 / 64.0));
        for l in probe {
            let s = self.hat(1, l) + self.hat(2, l);
            if (s - l.min(b0)).abs() > 1e-10 {
                return bad(format!("split curves do not add up to min(λ, cap) at λ = {l}"));
            }
        }
        Ok(())
    }
}

/// `q(pbar, p) = sign(p - pbar) (f(p) - f(pbar))`.
pub fn entropy_flux(f: &Flux, pbar: f64, p: f64) -> f64 {
    let s = if p > pbar {
        1.0
    } else if p < pbar {
        -1.0
    } else {
        0.0
    };
    s * (f.value(p) - f.value(pbar))
}

/// Which side of the junction each branch sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Branch 0 on the negative half-line, exits on the positive one.
    Diverging,
    /// Branch 0 on the positive half-line, feeders 1 and 2 on the negative one.
    Converging,
}

/// Dissipation `q0 - q1 - q2` of a 1:2 junction.
pub fn dissipation(fluxes: &Fluxes, pbar: &Triple, p: &Triple) -> f64 {
    dissipation_oriented(fluxes, Orientation::Diverging, pbar, p)
}

/// Dissipation "entering minus leaving" for either orientation.
pub fn dissipation_oriented(fluxes: &Fluxes, orientation: Orientation, pbar: &Triple, p: &Triple) -> f64 {
    let q: [f64; 3] = std::array::from_fn(|j| entropy_flux(&fluxes[j], pbar[j], p[j]));
    let d = q[0] - q[1] - q[2];
    match orientation {
        Orientation::Diverging => d,
        Orientation::Converging => -d,
    }
}

/// Rankine-Hugoniot residual `f0(p0) - f1(p1) - f2(p2)`.
pub fn rh_residual(fluxes: &Fluxes, p: &Triple) -> f64 {
    let v = fluxes.values(p);
    v[0] - v[1] - v[2]
}

/// Largest violation of the membership conditions (0 for members).
pub fn germ_violation(params: &GermParams, fluxes: &Fluxes, p: &Triple) -> f64 {
    let v = fluxes.values(p);
    let mut worst = rh_residual(fluxes, p).abs();
    for j in 0..3 {
        let box_gap = (fluxes[j].a() - p[j]).max(p[j] - fluxes[j].c()).max(0.0);
        worst = worst.max(box_gap).max(-v[j]).max(v[j] - params.bar(j));
    }
    let demand0 = fluxes[0].demand(p[0]);
    for k in 1..=2 {
        worst = worst.max(params.hat(k, demand0) - fluxes[k].demand(p[k]));
    }
    worst.max(0.0)
}

pub fn germ_contains(params: &GermParams, fluxes: &Fluxes, p: &Triple, tol: f64) -> bool {
    germ_violation(params, fluxes, p) <= tol
}

/// Membership of `v` in the germ of the converging junction with reflected
/// fluxes: supplies replace demands in the split condition.
pub fn germ_contains_reversed(params: &GermParams, reversed: &Fluxes, v: &Triple, tol: f64) -> bool {
    let f = reversed.values(v);
    let mut worst = (f[0] - f[1] - f[2]).abs();
    for (j, &fj) in f.iter().enumerate() {
        worst = worst.max(-fj).max(fj - params.bar(j));
    }
    let supply0 = reversed[0].supply(v[0]);
    for k in 1..=2 {
        worst = worst.max(params.hat(k, supply0) - reversed[k].supply(v[k]));
    }
    worst <= tol
}

/// Fluid-on-every-branch point of the split curve at total flux `λ`.
pub fn split_point(params: &GermParams, fluxes: &Fluxes, lambda: f64) -> Triple {
    Triple([
        fluxes[0].inv_fluid_unchecked(lambda),
        fluxes[1].inv_fluid_unchecked(params.hat(1, lambda)),
        fluxes[2].inv_fluid_unchecked(params.hat(2, lambda)),
    ])
}

/// The two "one exit saturated, other jammed" points and the jammed point.
pub fn corner_points(params: &GermParams, fluxes: &Fluxes) -> [Triple; 3] {
    let (b1, b2) = (params.bar(1), params.bar(2));
    [
        Triple([
            fluxes[0].inv_congested_unchecked(b1),
            fluxes[1].inv_fluid_unchecked(b1),
            fluxes[2].c(),
        ]),
        Triple([
            fluxes[0].inv_congested_unchecked(b2),
            fluxes[1].c(),
            fluxes[2].inv_fluid_unchecked(b2),
        ]),
        fluxes.jammed(),
    ]
}

/// Split curve sampled at `n` totals in `[0, bar0]`, followed by the three
/// corner points.
pub fn generator_set(params: &GermParams, fluxes: &Fluxes, n: usize) -> Vec<Triple> {
    let n = n.max(2);
    let mut out: Vec<Triple> = (0..n)
        .map(|i| split_point(params, fluxes, params.bar(0) * i as f64 / (n - 1) as f64))
        .collect();
    out.extend(corner_points(params, fluxes));
    out
}

/// Random points of the germ drawn through its strata: the fluid split
/// curve, the sheets with one or two jammed exits, the congested-inflow
/// sheets, and the corner points. Totals are biased towards 0 and the cap.
pub struct GermSampler<'a> {
    params: &'a GermParams,
    fluxes: &'a Fluxes,
    rng: ChaCha8Rng,
}

impl<'a> GermSampler<'a> {
    pub fn new(params: &'a GermParams, fluxes: &'a Fluxes, seed: u64) -> Self {
        GermSampler {
            params,
            fluxes,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn total(&mut self) -> f64 {
        let b0 = self.params.bar(0);
        match self.rng.gen_range(0..10) {
            0 => 0.0,
            1 => b0,
            _ => self.rng.gen::<f64>() * b0,
        }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> Option<f64> {
        if hi < lo - 1e-15 {
            return None;
        }
        if hi <= lo {
            return Some(lo);
        }
        Some(match self.rng.gen_range(0..8) {
            0 => lo,
            1 => hi,
            _ => self.rng.gen_range(lo..=hi),
        })
    }

    fn exit(&self, k: usize, flux: f64, congested: bool) -> f64 {
        if congested {
            self.fluxes[k].inv_congested_unchecked(flux)
        } else {
            self.fluxes[k].inv_fluid_unchecked(flux)
        }
    }

    /// Draws one germ point.
    pub fn sample(&mut self) -> Triple {
        loop {
            if let Some(p) = self.try_sample() {
                return p;
            }
        }
    }

    fn try_sample(&mut self) -> Option<Triple> {
        let (pr, fl) = (self.params, self.fluxes);
        let bar = pr.bars();
        let stratum = self.rng.gen_range(0..7);
        let lambda = self.total();
        match stratum {
            0 => Some(split_point(pr, fl, lambda)),
            1 => {
                // Fluid inflow, exit k jammed, exit j fluid at or above its share.
                let k = self.rng.gen_range(1..=2);
                let j = 3 - k;
                let lo = pr.hat(j, lambda).max(lambda - bar[k]);
                let fj = self.uniform(lo, lambda.min(bar[j]))?;
                let mut p = [0.0; 3];
                p[0] = fl[0].inv_fluid_unchecked(lambda);
                p[j] = self.exit(j, fj, false);
                p[k] = self.exit(k, lambda - fj, true);
                Some(Triple(p))
            }
            2 | 3 => {
                // Both exits jammed; inflow fluid or congested.
                let f1 = self.uniform((lambda - bar[2]).max(0.0), lambda.min(bar[1]))?;
                let p0 = if stratum == 2 {
                    fl[0].inv_fluid_unchecked(lambda)
                } else {
                    fl[0].inv_congested_unchecked(lambda)
                };
                Some(Triple([p0, self.exit(1, f1, true), self.exit(2, lambda - f1, true)]))
            }
            4 => {
                // Congested inflow, exit k saturated at its cap, exit j jammed.
                let k = self.rng.gen_range(1..=2);
                let j = 3 - k;
                let lambda = self.uniform(bar[k], bar[0])?;
                let mut p = [0.0; 3];
                p[0] = fl[0].inv_congested_unchecked(lambda);
                p[k] = self.exit(k, bar[k], false);
                p[j] = self.exit(j, lambda - bar[k], true);
                Some(Triple(p))
            }
            5 => Some(Triple([
                fl[0].inv_congested_unchecked(bar[0]),
                self.exit(1, bar[1], false),
                self.exit(2, bar[2], false),
            ])),
            _ => {
                let corners = corner_points(pr, fl);
                Some(match self.rng.gen_range(0..4) {
                    3 => fl.empty(),
                    i => corners[i],
                })
            }
        }
    }
}

/// Outcome of the pairwise dissipation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GermPropertyReport {
    pub pairs: usize,
    pub min_dissipation: f64,
    pub worst_pair: (Triple, Triple),
    /// Largest membership violation among the sampled points (sampler sanity).
    pub max_sample_violation: f64,
}

/// Samples `n_pairs` pairs from the germ and records the smallest dissipation.
pub fn check_germ_property(params: &GermParams, fluxes: &Fluxes, n_pairs: usize, seed: u64) -> GermPropertyReport {
    let mut sampler = GermSampler::new(params, fluxes, seed);
    let mut report = GermPropertyReport {
        pairs: n_pairs,
        min_dissipation: f64::INFINITY,
        worst_pair: (fluxes.empty(), fluxes.empty()),
        max_sample_violation: 0.0,
    };
    for _ in 0..n_pairs {
        let a = sampler.sample();
        let b = sampler.sample();
        for p in [&a, &b] {
            report.max_sample_violation = report.max_sample_violation.max(germ_violation(params, fluxes, p));
        }
        let d = dissipation(fluxes, &a, &b);
        if d < report.min_dissipation {
            report.min_dissipation = d;
            report.worst_pair = (a, b);
        }
    }
    report
}

/// A grid point that dissipates against every generator but is not in the germ.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub point: Triple,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub grid_res: usize,
    /// Points with nonnegative dissipation against all generators.
    pub accepted: usize,
    pub tolerance: f64,
    pub counterexamples: Vec<Counterexample>,
    /// Lattice points placed on the Rankine-Hugoniot surface.
    pub surface_points: usize,
    /// Largest membership violation among accepted points, in units of the
    /// grid spacing `diam / grid_res`: the empirical smallest working constant.
    pub empirical_constant: f64,
}

/// Grid certification of maximality: on a `grid_res^3` grid of the box, every
/// point with `D(Pbar, P) >= -dissipation_tol` for all generators must be in
/// the germ up to `slack * diam / grid_res`.
pub fn check_generation(
    params: &GermParams,
    fluxes: &Fluxes,
    grid_res: usize,
    slack: f64,
    dissipation_tol: f64,
) -> GenerationReport {
    let n = grid_res.max(2);
    let gens = generator_set(params, fluxes, 16 * n + 1);
    let axis = |j: usize| -> Vec<f64> {
        let (a, c) = (fluxes[j].a(), fluxes[j].c());
        (0..n).map(|i| a + (c - a) * i as f64 / (n - 1) as f64).collect()
    };
    let axes = [axis(0), axis(1), axis(2)];
    let diam = (0..3)
        .map(|j| (fluxes[j].c() - fluxes[j].a()).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = diam / n as f64;
    let tolerance = slack * h;
    let mut report = GenerationReport {
        grid_res: n,
        accepted: 0,
        tolerance,
        counterexamples: Vec::new(),
        surface_points: 0,
        empirical_constant: 0.0,
    };
    let test = |p: Triple, report: &mut GenerationReport| {
        if gens.iter().any(|g| dissipation(fluxes, g, &p) < -dissipation_tol) {
            return;
        }
        report.accepted += 1;
        let v = germ_violation(params, fluxes, &p);
        report.empirical_constant = report.empirical_constant.max(v / h);
        if v > tolerance {
            report.counterexamples.push(Counterexample { point: p, violation: v });
        }
    };
    for &p0 in &axes[0] {
        for &p1 in &axes[1] {
            for &p2 in &axes[2] {
                test(Triple([p0, p1, p2]), &mut report);
            }
            // A box lattice rarely meets the Rankine-Hugoniot surface, so the
            // same (p0, p1) pairs are also completed onto it by both roots.
            let rest = fluxes[0].value(p0) - fluxes[1].value(p1);
            if (0.0..=fluxes[2].f_max()).contains(&rest) {
                let f2 = &fluxes[2];
                for p2 in [f2.inv_fluid_unchecked(rest), f2.inv_congested_unchecked(rest)] {
                    test(Triple([p0, p1, p2]), &mut report);
                    report.surface_points += 1;
                }
            }
        }
    }
    report
}

/// Traffic-light setting: signal plus branch fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct MesoGermSpec {
    pub signal: Signal,
    pub fluxes: Fluxes,
}

impl MesoGermSpec {
    pub fn new(signal: Signal, fluxes: Fluxes) -> Result<Self> {
        signal.validate_caps(&fluxes)?;
        Ok(MesoGermSpec { signal, fluxes })
    }
}

/// Germ parameters of the light at time `t`: everything through the green
/// exit, capped by the current limiter.
pub fn meso_germ_params(t: f64, spec: &MesoGermSpec) -> GermParams {
    let seg = spec.signal.segment_at(t);
    meso_params_for(seg.limiter, seg.phase, spec.fluxes[0].f_max())
}

pub(crate) fn meso_params_for(limiter: f64, phase: Phase, f0_max: f64) -> GermParams {
    let top = f0_max.max(limiter);
    let (xs, through): (Vec<f64>, Vec<f64>) = if limiter > 0.0 && limiter < top {
        (vec![0.0, limiter, top], vec![0.0, limiter, limiter])
    } else {
        (vec![0.0, top], vec![0.0, limiter])
    };
    let zero = vec![0.0; xs.len()];
    let through = PlCurve::new(xs.clone(), through).expect("valid nodes");
    let zero = PlCurve::new(xs, zero).expect("valid nodes");
    let (bar1, bar2, h1, h2) = match phase {
        Phase::One => (limiter, 0.0, through, zero),
        Phase::Two => (0.0, limiter, zero, through),
    };
    GermParams {
        bar: [limiter, bar1, bar2],
        hat: [h1, h2],
    }
}

/// Direct description of the light's germ: the red exit carries nothing and
/// `min(A, demand0, supply_k) = f0 = fk` through the green exit `k`.
pub fn meso_germ_violation(limiter: f64, phase: Phase, fluxes: &Fluxes, p: &Triple) -> f64 {
    let k = phase.branch();
    let j = 3 - k;
    let v = fluxes.values(p);
    let pass = limiter.min(fluxes[0].demand(p[0])).min(fluxes[k].supply(p[k]));
    let mut worst = v[j].abs().max((v[0] - v[k]).abs()).max((pass - v[0]).abs());
    for i in 0..3 {
        worst = worst.max((fluxes[i].a() - p[i]).max(p[i] - fluxes[i].c()).max(0.0));
    }
    worst
}

pub fn meso_germ_contains_direct(t: f64, spec: &MesoGermSpec, p: &Triple, tol: f64) -> bool {
    let seg = spec.signal.segment_at(t);
    meso_germ_violation(seg.limiter, seg.phase, &spec.fluxes, p) <= tol
}

/// Sign-pattern characterization of negative dissipation
/// `D = s0 F0 - (s1 F1 + s2 F2)` with `F0 = F1 + F2`: negative exactly when
/// one branch opposes the two others (weakly) with the matching flux sign.
pub fn violated_dissipation_pattern(s: [i8; 3], f: [f64; 3]) -> bool {
    let weak = |i: usize, j: usize, k: usize| -> bool {
        // s_j = s_k != s_i weakly
        s[i] != 0 && s[j] * s[k] >= 0 && s[i] * s[j] <= 0 && s[i] * s[k] <= 0
    };
    let sf = |i: usize| s[i] as f64 * f[i];
    (sf(0) < 0.0 && weak(0, 1, 2)) || (sf(1) > 0.0 && weak(1, 0, 2)) || (sf(2) > 0.0 && weak(2, 0, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(fmax: f64) -> Flux {
        Flux::quadratic(0.0, 1.0, fmax).unwrap()
    }

    /// Example-1 style germ: f0_max = 2, exits f_max = 1, equal green times.
    pub(crate) fn even_split() -> (GermParams, Fluxes) {
        let fl = Fluxes::new(unit(2.0), unit(1.0), unit(1.0));
        let g = GermParams::new(
            0.5,
            0.5,
            PlCurve::from_points(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.5)]).unwrap(),
            PlCurve::from_points(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.5)]).unwrap(),
            2.0,
        )
        .unwrap();
        (g, fl)
    }

    #[test]
    fn entropy_flux_examples() {
        let f = unit(1.0);
        assert_eq!(entropy_flux(&f, 0.3, 0.3), 0.0);
        assert!((entropy_flux(&f, 0.2, 0.5) - 0.36).abs() < 1e-12);
        assert_eq!(entropy_flux(&f, 0.2, 0.5), entropy_flux(&f, 0.5, 0.2));
    }

    #[test]
    fn rh_examples() {
        let (_, fl) = even_split();
        assert_eq!(rh_residual(&fl, &fl.empty()), 0.0);
        assert!(rh_residual(&fl, &fl.jammed()).abs() < 1e-15);
        let p = Triple([
            fl[0].inv_fluid(0.6).unwrap(),
            fl[1].inv_fluid(0.4).unwrap(),
            fl[2].inv_fluid(0.2).unwrap(),
        ]);
        assert!(rh_residual(&fl, &p).abs() < 1e-12);
    }

    #[test]
    fn membership_examples() {
        let (g, fl) = even_split();
        let [p1, p2, p3] = corner_points(&g, &fl);
        for p in [p1, p2, p3] {
            assert!(germ_contains(&g, &fl, &p, MEMBERSHIP_TOL));
        }
        let mut q = split_point(&g, &fl, 0.6);
        q.0[1] = fl[1].inv_fluid_unchecked(fl[1].value(q[1]) + 0.1);
        assert!(!germ_contains(&g, &fl, &q, MEMBERSHIP_TOL));
    }

    #[test]
    fn generator_endpoints() {
        let (g, fl) = even_split();
        let gens = generator_set(&g, &fl, 11);
        assert_eq!(gens.len(), 14);
        assert_eq!(gens[0], fl.empty());
        let end = gens[10];
        assert!((fl[1].value(end[1]) - 0.5).abs() < 1e-12);
        for p in &gens {
            assert!(rh_residual(&fl, p).abs() < 1e-10);
            assert!(germ_contains(&g, &fl, p, MEMBERSHIP_TOL));
        }
    }

    #[test]
    fn sampler_stays_in_germ() {
        let (g, fl) = even_split();
        let r = check_germ_property(&g, &fl, 2000, 7);
        assert!(r.max_sample_violation < 1e-10, "{r:?}");
        assert!(r.min_dissipation >= -1e-9, "{r:?}");
    }

    #[test]
    fn corner_pair_dissipates() {
        let (g, fl) = even_split();
        let [p1, p2, _] = corner_points(&g, &fl);
        assert!(dissipation(&fl, &p1, &p2) >= 0.0);
        assert_eq!(dissipation(&fl, &p1, &p1), 0.0);
    }

    #[test]
    fn over_cap_point_is_caught_by_a_corner() {
        let (g, fl) = even_split();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let corners = corner_points(&g, &fl);
        for _ in 0..500 {
            // RH-consistent triple with total above the cap.
            let lam = rng.gen_range(g.bar(0) + 0.1..2.0);
            let f1 = rng.gen_range((lam - 1.0).max(0.0)..lam.min(1.0));
            let p = Triple([
                if rng.gen() {
                    fl[0].inv_fluid_unchecked(lam)
                } else {
                    fl[0].inv_congested_unchecked(lam)
                },
                if rng.gen() {
                    fl[1].inv_fluid_unchecked(f1)
                } else {
                    fl[1].inv_congested_unchecked(f1)
                },
                if rng.gen() {
                    fl[2].inv_fluid_unchecked(lam - f1)
                } else {
                    fl[2].inv_congested_unchecked(lam - f1)
                },
            ]);
            assert!(corners.iter().any(|c| dissipation(&fl, c, &p) < 0.0), "{p:?}");
        }
    }

    #[test]
    fn meso_params_shape() {
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let sig = Signal::from_durations(&[(0.5, Phase::One, 0.4), (0.5, Phase::Two, 0.0)]).unwrap();
        let spec = MesoGermSpec::new(sig, fl).unwrap();
        let g = meso_germ_params(0.1, &spec);
        assert_eq!(g.bars(), [0.4, 0.4, 0.0]);
        assert_eq!(g.hat(1, 0.3), 0.3);
        assert_eq!(g.hat(1, 0.9), 0.4);
        g.validate(1.0).unwrap();
        let red = meso_germ_params(0.7, &spec);
        assert_eq!(red.bars(), [0.0, 0.0, 0.0]);
        red.validate(1.0).unwrap();
    }

    #[test]
    fn meso_membership_matches_direct_form() {
        let fl = Fluxes::new(unit(1.0), unit(0.8), unit(1.0));
        let sig = Signal::from_durations(&[(0.5, Phase::One, 0.4), (0.5, Phase::Two, 0.7)]).unwrap();
        let spec = MesoGermSpec::new(sig, fl.clone()).unwrap();
        let n = 40;
        for t in [0.2, 0.6] {
            let g = meso_germ_params(t, &spec);
            let mut hits = 0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let p = Triple([
                            i as f64 / (n - 1) as f64,
                            j as f64 / (n - 1) as f64,
                            k as f64 / (n - 1) as f64,
                        ]);
                        let a = germ_contains(&g, &fl, &p, 1e-12);
                        let b = meso_germ_contains_direct(t, &spec, &p, 1e-12);
                        assert_eq!(a, b, "t={t} p={p:?}");
                        hits += a as usize;
                    }
                }
            }
            assert!(hits > 0);
        }
        // Points built on the germ agree too.
        let g = meso_germ_params(0.2, &spec);
        for &lam in &[0.0, 0.2, 0.4] {
            for p0 in [fl[0].inv_fluid_unchecked(lam), fl[0].inv_congested_unchecked(lam)] {
                for p1 in [fl[1].inv_fluid_unchecked(lam), fl[1].inv_congested_unchecked(lam)] {
                    for p2 in [0.0, 1.0] {
                        let p = Triple([p0, p1, p2]);
                        assert_eq!(
                            germ_contains(&g, &fl, &p, 1e-10),
                            meso_germ_contains_direct(0.2, &spec, &p, 1e-10),
                            "{p:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reversal_identities() {
        let (g, fl) = even_split();
        let rev = fl.reversed();
        let mut s = GermSampler::new(&g, &fl, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let pb = Triple(std::array::from_fn(|_| rng.gen::<f64>()));
            let p = Triple(std::array::from_fn(|_| rng.gen::<f64>()));
            let d = dissipation(&fl, &pb, &p);
            let dr = dissipation_oriented(&rev, Orientation::Converging, &pb.reversed(), &p.reversed());
            assert!((d - dr).abs() < 1e-12);
            assert_eq!(p.reversed().reversed(), p);
            assert_eq!(
                germ_contains(&g, &fl, &p, 1e-9),
                germ_contains_reversed(&g, &rev, &p.reversed(), 1e-9)
            );
            let q = s.sample();
            assert!(germ_contains_reversed(&g, &rev, &q.reversed(), 1e-9));
        }
        assert!(germ_contains_reversed(&g, &rev, &fl.jammed().reversed(), 0.0));
    }

    #[test]
    fn sign_pattern_classification_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let signs = [-1i8, 0, 1];
        for &s0 in &signs {
            for &s1 in &signs {
                for &s2 in &signs {
                    let s = [s0, s1, s2];
                    for _ in 0..400 {
                        let mut f1 = if s1 == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                        let mut f2 = if s2 == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                        if s0 == 0 {
                            // F0 must vanish as well.
                            if s1 == 0 || s2 == 0 {
                                f1 = 0.0;
                                f2 = 0.0;
                            } else {
                                f2 = -f1;
                            }
                        }
                        let f = [f1 + f2, f1, f2];
                        let d = s0 as f64 * f[0] - (s1 as f64 * f[1] + s2 as f64 * f[2]);
                        if d.abs() < 1e-12 {
                            // Rounding noise around an exact zero.
                            continue;
                        }
                        assert_eq!(d < 0.0, violated_dissipation_pattern(s, f), "s={s:?} f={f:?} d={d}");
                    }
                }
            }
        }
    }
}
