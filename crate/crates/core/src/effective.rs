//! Homogenized junction condition of a fast periodic traffic light.
//!
//! For an upstream flux level `λ` the light lets through
//! `F_λ(t) = λ - ψ'(t)`, where the queue load
//! `ψ(t) = max_{t1 <= t} ∫_{t1}^t (λ - A)` grows while the limiter `A` is
//! below `λ` and drains otherwise. Averaging `F_λ` over the green times of
//! each exit gives the split curves of the effective germ.
//!
//! Everything is exact for piecewise-constant signals: `ψ` is piecewise
//! linear with knots at signal breakpoints and queue-emptying instants, and
//! `F_λ` is piecewise constant on that refinement.

use crate::error::{Error, Result};
use crate::germ::{Fluxes, GermParams, Triple};
use crate::pl::PeriodicPl;
use crate::signal::{Phase, Segment, Signal};

/// Queue values below this are treated as an empty queue.
const EMPTY_QUEUE: f64 = 1e-14;
/// Above this many segments the pairwise-average kinks are not tabulated.
const MAX_SEGMENTS_FOR_PAIRS: usize = 64;
/// Uniform fill nodes of the split-curve table.
pub const FILL_NODES: usize = 256;

/// Which preimage of the upstream flux level the incoming road carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Fluid inflow: the queue builds and drains, `F = λ` once it is empty.
    Fluid,
    /// Congested inflow at the total cap: the light is always saturated,
    /// `F = A`.
    Congested,
}

/// Constant piece of the passing flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPiece {
    pub start: f64,
    pub end: f64,
    pub value: f64,
    pub phase: Phase,
    /// Whether a queue is present (`ψ > 0`) on the piece.
    pub queued: bool,
}

/// Queue load and passing flux over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionProfile {
    pub lambda: f64,
    pub regime: Regime,
    pub psi: PeriodicPl,
    pub pieces: Vec<FluxPiece>,
}

impl JunctionProfile {
    /// Passing flux `F(t)`, right-continuous.
    pub fn flux(&self, t: f64) -> f64 {
        let s = t - t.floor();
        let k = self.pieces.partition_point(|p| p.start <= s).max(1);
        self.pieces[k - 1].value
    }

    /// `∫_0^1 F 1_{I^k}`.
    pub fn phase_integral(&self, k: usize) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.phase.branch() == k)
            .map(|p| p.value * (p.end - p.start))
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| p.value * (p.end - p.start)).sum()
    }

    /// Measure of the queue-free green time of exit `k`.
    pub fn free_flow_measure(&self, k: usize) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.phase.branch() == k && !p.queued)
            .map(|p| p.end - p.start)
            .sum()
    }

    /// Boundary datum of exit `k`: `-∫_0^t (F 1_{I^k} - level)` as a periodic
    /// profile, where `level` is the mean of `F 1_{I^k}`.
    pub fn exit_load(&self, k: usize) -> PeriodicPl {
        let level = self.phase_integral(k);
        let mut ts = vec![0.0];
        let mut vs = vec![0.0];
        let mut acc = 0.0;
        for p in &self.pieces {
            let fk = if p.phase.branch() == k { p.value } else { 0.0 };
            acc -= (fk - level) * (p.end - p.start);
            ts.push(p.end);
            vs.push(acc);
        }
        PeriodicPl::new(ts, vs).expect("exit load is periodic by construction")
    }
}

/// Effective caps `[∫A, ∫A 1_{I^1}, ∫A 1_{I^2}]`.
pub fn effective_limiters(signal: &Signal) -> [f64; 3] {
    let b1 = signal.phase_mean(1);
    let b2 = signal.phase_mean(2);
    [b1 + b2, b1, b2]
}

fn check_level(signal: &Signal, lambda: f64) -> Result<()> {
    let bar0 = signal.mean();
    if !(lambda >= 0.0) || lambda > bar0 * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::pre(format!(
            "flux level {lambda} must lie in [0, {bar0}] (the mean limiter)"
        )));
    }
    Ok(())
}

/// Queue load by direct breakpoint scan of the max formula.
pub fn psi_scan(signal: &Signal, lambda: f64, t: f64) -> Result<f64> {
    check_level(signal, lambda)?;
    // ψ(t) = λ t - B(t) + max_{t1 ∈ [t-1, t]} (B(t1) - λ t1)
    let value = |t1: f64| signal.antiderivative(t1) - lambda * t1;
    let mut best = value(t).max(value(t - 1.0));
    let base = (t - 1.0).floor();
    for n in 0..3 {
        for bp in signal.breakpoints() {
            let t1 = base + n as f64 + bp;
            if t1 > t - 1.0 && t1 < t {
                best = best.max(value(t1));
            }
        }
    }
    Ok((lambda * t - signal.antiderivative(t) + best).max(0.0))
}

/// Queue load for an incoming density `p0` on the fluid branch.
pub fn psi(signal: &Signal, fluxes: &Fluxes, p0: f64, t: f64) -> Result<f64> {
    let f0 = &fluxes[0];
    if p0 < f0.a() - 1e-12 || p0 > f0.b() + 1e-12 {
        return Err(Error::pre(format!("incoming density {p0} is not on the fluid branch")));
    }
    psi_scan(signal, f0.value(p0), t)
}

/// Builds the exact queue and passing-flux profile for level `λ`.
pub fn junction_profile(signal: &Signal, lambda: f64, regime: Regime) -> Result<JunctionProfile> {
    match regime {
        Regime::Fluid => fluid_profile(signal, lambda),
        Regime::Congested => Ok(congested_profile(signal)),
    }
}

fn congested_profile(signal: &Signal) -> JunctionProfile {
    let bar0 = signal.mean();
    let mut ts = vec![0.0];
    let mut vs = vec![0.0];
    let mut pieces = Vec::new();
    for s in signal.segments() {
        ts.push(s.end);
        vs.push(bar0 * s.end - signal.antiderivative(s.end));
        pieces.push(FluxPiece {
            start: s.start,
            end: s.end,
            value: s.limiter,
            phase: s.phase,
            queued: true,
        });
    }
    JunctionProfile {
        lambda: bar0,
        regime: Regime::Congested,
        psi: PeriodicPl::new(ts, vs).expect("mean-free antiderivative is periodic"),
        pieces,
    }
}

fn fluid_profile(signal: &Signal, lambda: f64) -> Result<JunctionProfile> {
    let mut q = psi_scan(signal, lambda, 0.0)?;
    if q < EMPTY_QUEUE {
        q = 0.0;
    }
    let mut ts = vec![0.0];
    let mut vs = vec![q];
    let mut pieces = Vec::new();
    let push_piece = |pieces: &mut Vec<FluxPiece>, s: &Segment, start: f64, end: f64, queued: bool| {
        if end > start {
            pieces.push(FluxPiece {
                start,
                end,
                value: if queued { s.limiter } else { lambda },
                phase: s.phase,
                queued,
            });
        }
    };
    for s in signal.segments() {
        let slope = lambda - s.limiter;
        let len = s.len();
        if slope >= 0.0 {
            let queued = q > 0.0 || slope > 0.0;
            q += slope * len;
            push_piece(&mut pieces, s, s.start, s.end, queued);
        } else if q == 0.0 {
            push_piece(&mut pieces, s, s.start, s.end, false);
        } else {
            let drain = q / -slope;
            if drain < len {
                let hit = s.start + drain;
                push_piece(&mut pieces, s, s.start, hit, true);
                push_piece(&mut pieces, s, hit, s.end, false);
                if hit > *ts.last().unwrap() && hit < s.end {
                    ts.push(hit);
                    vs.push(0.0);
                }
                q = 0.0;
            } else {
                q += slope * len;
                if q < EMPTY_QUEUE {
                    q = 0.0;
                }
                push_piece(&mut pieces, s, s.start, s.end, true);
            }
        }
        ts.push(s.end);
        vs.push(q);
    }
    let psi = PeriodicPl::new(ts, vs)?;
    Ok(JunctionProfile {
        lambda,
        regime: Regime::Fluid,
        psi,
        pieces,
    })
}

/// Passing flux `F(t)` for the incoming density `p0` (fluid branch, or the
/// congested preimage of the total cap).
pub fn junction_flux_profile(signal: &Signal, fluxes: &Fluxes, p0: f64, t: f64) -> Result<f64> {
    Ok(profile_for_density(signal, fluxes, p0)?.flux(t))
}

/// Profile for an incoming density, choosing the regime from the branch.
pub fn profile_for_density(signal: &Signal, fluxes: &Fluxes, p0: f64) -> Result<JunctionProfile> {
    let f0 = &fluxes[0];
    let bar0 = signal.mean();
    if p0 <= f0.b() + 1e-12 && p0 >= f0.a() - 1e-12 {
        return junction_profile(signal, f0.value(p0), Regime::Fluid);
    }
    let congested_end = f0.inv_congested_unchecked(bar0);
    if (p0 - congested_end).abs() <= 1e-10 {
        return junction_profile(signal, bar0, Regime::Congested);
    }
    Err(Error::pre(format!(
        "incoming density {p0} is neither fluid nor the congested preimage {congested_end} of the total cap"
    )))
}

/// Split value `∫_0^1 F_λ 1_{I^k}`, extended by the cap beyond the total cap.
pub fn hat_lambda(signal: &Signal, k: usize, lambda: f64) -> Result<f64> {
    let bar = effective_limiters(signal);
    if lambda < 0.0 {
        return Err(Error::Range {
            value: lambda,
            max: f64::INFINITY,
        });
    }
    if lambda >= bar[0] {
        return Ok(bar[k]);
    }
    Ok(junction_profile(signal, lambda, Regime::Fluid)?.phase_integral(k))
}

/// Obstacle representation `Φ_λ(t) = sup_{τ >= 0} B(t - τ) + λ τ`.
pub fn obstacle_phi(signal: &Signal, lambda: f64, t: f64) -> Result<f64> {
    check_level(signal, lambda)?;
    let cand = |tau: f64| signal.antiderivative(t - tau) + lambda * tau;
    let mut best = cand(0.0).max(cand(1.0));
    let base = (t - 1.0).floor();
    for n in 0..3 {
        for bp in signal.breakpoints() {
            let tau = t - (base + n as f64 + bp);
            if tau > 0.0 && tau < 1.0 {
                best = best.max(cand(tau));
            }
        }
    }
    Ok(best)
}

/// Passing flux recovered from the obstacle route, `λ + A - Φ'` with the
/// right derivative of `Φ`.
pub fn obstacle_flux(signal: &Signal, lambda: f64, t: f64) -> Result<f64> {
    let phi = obstacle_phi(signal, lambda, t)?;
    let b = signal.antiderivative(t);
    let a = signal.limiter(t);
    let touching = phi - b <= 1e-12 * (1.0 + b.abs());
    let dphi = if touching && a >= lambda { a } else { lambda };
    Ok(lambda + a - dphi)
}

/// The homogenized germ together with the signal it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGerm {
    pub params: GermParams,
    pub signal_fingerprint: String,
    /// Nodes of the split-curve table.
    pub lambdas: Vec<f64>,
}

/// Critical levels where the split curves can kink: limiter values and
/// averages of the limiter between two breakpoints less than a period apart.
pub fn critical_levels(signal: &Signal) -> Vec<f64> {
    let bar0 = signal.mean();
    let segs = signal.segments();
    let mut out: Vec<f64> = segs.iter().map(|s| s.limiter).collect();
    if segs.len() <= MAX_SEGMENTS_FOR_PAIRS {
        let bps = signal.breakpoints();
        for &ti in &bps {
            for n in 0..2 {
                for &tj in &bps {
                    let tj = tj + n as f64;
                    if tj > ti && tj <= ti + 1.0 {
                        out.push((signal.antiderivative(tj) - signal.antiderivative(ti)) / (tj - ti));
                    }
                }
            }
        }
    }
    out.retain(|&l| l > 0.0 && l < bar0);
    out
}

/// Tabulates the split curves on the kink-refined grid.
pub fn build_effective_germ(signal: &Signal, fluxes: &Fluxes) -> Result<EffectiveGerm> {
    signal.validate_caps(fluxes)?;
    let bar = effective_limiters(signal);
    let f0_max = fluxes[0].f_max();
    let mut lambdas: Vec<f64> = critical_levels(signal);
    lambdas.extend((0..=FILL_NODES).map(|i| bar[0] * i as f64 / FILL_NODES as f64));
    lambdas.push(0.0);
    lambdas.push(bar[0]);
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambdas.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + b.abs()));
    if *lambdas.last().unwrap() != bar[0] {
        *lambdas.last_mut().unwrap() = bar[0];
    }
    let mut hat1: Vec<f64> = Vec::with_capacity(lambdas.len() + 1);
    for &l in &lambdas {
        hat1.push(if l >= bar[0] { bar[1] } else { hat_lambda(signal, 1, l)? });
    }
    if bar[0] == 0.0 {
        lambdas = vec![0.0];
        hat1 = vec![0.0];
    }
    if f0_max > *lambdas.last().unwrap() {
        lambdas.push(f0_max);
        hat1.push(bar[1]);
    }
    // Clean sub-rounding decreases so the table is exactly monotone.
    for i in 1..hat1.len() {
        if hat1[i] < hat1[i - 1] && hat1[i - 1] - hat1[i] < 1e-13 {
            hat1[i] = hat1[i - 1];
        }
    }
    let params = GermParams::from_split(bar[1], bar[2], &lambdas, &hat1, f0_max)?;
    Ok(EffectiveGerm {
        params,
        signal_fingerprint: signal.fingerprint(),
        lambdas,
    })
}

/// Exit density fed by the incoming density `p0`: the fluid preimage of the
/// exit's share of `f0(p0)`.
pub fn hat_p(effective: &EffectiveGerm, fluxes: &Fluxes, k: usize, p0: f64) -> Result<f64> {
    let f0 = &fluxes[0];
    if p0 < f0.a() - 1e-12 || p0 > f0.b() + 1e-12 {
        return Err(Error::pre(format!("incoming density {p0} is not on the fluid branch")));
    }
    let lambda = f0.value(p0);
    if lambda > effective.params.bar(0) + 1e-12 {
        return Err(Error::pre(format!(
            "incoming flux {lambda} exceeds the total cap {}",
            effective.params.bar(0)
        )));
    }
    Ok(fluxes[k].inv_fluid_unchecked(effective.params.hat(k, lambda)))
}

/// Element of the characteristic subgerm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubgermPoint {
    /// Fluid inflow `p0` with exits at their fluid shares.
    Fluid { p0: f64 },
    /// Exit `k` saturated at its cap, the other exit jammed.
    Saturated { k: usize },
    /// Every branch jammed.
    Jammed,
}

impl SubgermPoint {
    pub fn triple(&self, params: &GermParams, fluxes: &Fluxes) -> Triple {
        match *self {
            SubgermPoint::Fluid { p0 } => {
                let l = fluxes[0].value(p0);
                Triple([
                    p0,
                    fluxes[1].inv_fluid_unchecked(params.hat(1, l)),
                    fluxes[2].inv_fluid_unchecked(params.hat(2, l)),
                ])
            }
            SubgermPoint::Saturated { k } => {
                let cap = params.bar(k);
                let mut p = fluxes.jammed().0;
                p[0] = fluxes[0].inv_congested_unchecked(cap);
                p[k] = fluxes[k].inv_fluid_unchecked(cap);
                Triple(p)
            }
            SubgermPoint::Jammed => fluxes.jammed(),
        }
    }
}

/// `n` fluid points (totals evenly spread over `[0, bar0]`) plus the two
/// saturated points and the jammed point.
pub fn characteristic_subgerm(effective: &EffectiveGerm, fluxes: &Fluxes, n: usize) -> Vec<(SubgermPoint, Triple)> {
    let g = &effective.params;
    let n = n.max(2);
    let mut pts: Vec<SubgermPoint> = (0..n)
        .map(|i| SubgermPoint::Fluid {
            p0: fluxes[0].inv_fluid_unchecked(g.bar(0) * i as f64 / (n - 1) as f64),
        })
        .collect();
    pts.extend([
        SubgermPoint::Saturated { k: 1 },
        SubgermPoint::Saturated { k: 2 },
        SubgermPoint::Jammed,
    ]);
    pts.into_iter().map(|p| (p, p.triple(g, fluxes))).collect()
}

/// Triangle-wave limiter: decreasing from `high` to `low` over a window of
/// length `descent` centred at `t = 0`, then increasing back. Exit 1 is green
/// on `[0, descent/2)`, exit 2 for the rest of the period. This is the
/// setting in which the exit-1 split curve is concave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleLimiter {
    pub low: f64,
    pub high: f64,
    pub descent: f64,
}

impl TriangleLimiter {
    pub fn validate(&self) -> Result<()> {
        if !(self.low >= 0.0 && self.high > self.low && self.descent > 0.0 && self.descent < 1.0) {
            return Err(Error::pre(format!("triangle limiter hypotheses fail: {self:?}")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    /// End of the exit-1 green time, where the limiter is lowest.
    pub fn switch_time(&self) -> f64 {
        0.5 * self.descent
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = t - t.floor();
        let d = self.descent;
        let down = (self.high - self.low) / d;
        let up = (self.high - self.low) / (1.0 - d);
        if s < 0.5 * d {
            self.mean() - down * s
        } else if s < 1.0 - 0.5 * d {
            self.low + up * (s - 0.5 * d)
        } else {
            self.high - down * (s - (1.0 - 0.5 * d))
        }
    }

    /// Step approximation by exact cell averages on `n` uniform cells.
    pub fn step_signal(&self, n: usize) -> Result<Signal> {
        self.validate()?;
        let cells_green = self.switch_time() * n as f64;
        if (cells_green - cells_green.round()).abs() > 1e-9 {
            return Err(Error::pre("the exit-1 green time must be a whole number of cells"));
        }
        let green = cells_green.round() as usize;
        // Cell averages via the exact integral of the piecewise-linear limiter.
        let kinks = [0.0, 0.5 * self.descent, 1.0 - 0.5 * self.descent, 1.0];
        let integral = |a: f64, b: f64| -> f64 {
            let mut pts = vec![a, b];
            pts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
            pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            pts.windows(2)
                .map(|w| {
                    let m = 0.5 * (w[0] + w[1]);
                    // Linear on each sub-piece, so the midpoint rule is exact.
                    self.value(m) * (w[1] - w[0])
                })
                .sum()
        };
        let pieces: Vec<(f64, Phase, f64)> = (0..n)
            .map(|i| {
                let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let phase = if i < green { Phase::One } else { Phase::Two };
                (1.0 / n as f64, phase, integral(a, b) * n as f64)
            })
            .collect();
        Signal::from_durations(&pieces)
    }
}

/// Exit-1 split curve of a step-approximated triangle limiter, sampled at
/// the given levels, with difference-quotient slopes between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveSplit {
    pub lambdas: Vec<f64>,
    pub hat1: Vec<f64>,
    pub slopes: Vec<f64>,
}

pub fn example3_concave_hat(profile: &TriangleLimiter, n_steps: usize, lambdas: &[f64]) -> Result<ConcaveSplit> {
    let signal = profile.step_signal(n_steps)?;
    let hat1 = lambdas
        .iter()
        .map(|&l| hat_lambda(&signal, 1, l))
        .collect::<Result<Vec<_>>>()?;
    let slopes = lambdas
        .windows(2)
        .zip(hat1.windows(2))
        .map(|(l, h)| (h[1] - h[0]) / (l[1] - l[0]))
        .collect();
    Ok(ConcaveSplit {
        lambdas: lambdas.to_vec(),
        hat1,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::Flux;
    use crate::germ::{check_germ_property, germ_contains, rh_residual};

    fn unit(m: f64) -> Flux {
        Flux::quadratic(0.0, 1.0, m).unwrap()
    }

    fn red_green() -> Signal {
        Signal::from_durations(&[(0.5, Phase::One, 0.0), (0.5, Phase::One, 1.0)]).unwrap()
    }

    fn four_piece() -> Signal {
        Signal::from_durations(&[
            (0.2, Phase::One, 0.1),
            (0.3, Phase::One, 0.9),
            (0.15, Phase::Two, 0.0),
            (0.35, Phase::Two, 0.8),
        ])
        .unwrap()
    }

    #[test]
    fn psi_red_green_hand_computation() {
        let s = red_green();
        // Queue grows at 0.3 during the red half, drains at 0.7 in green.
        assert!((psi_scan(&s, 0.3, 0.5).unwrap() - 0.15).abs() < 1e-14);
        assert!((psi_scan(&s, 0.3, 0.25).unwrap() - 0.075).abs() < 1e-14);
        assert!(psi_scan(&s, 0.3, 0.5 + 0.15 / 0.7 + 0.01).unwrap() < 1e-14);
        let prof = junction_profile(&s, 0.3, Regime::Fluid).unwrap();
        assert!((prof.psi.eval(0.5) - 0.15).abs() < 1e-14);
        assert!((prof.psi.max() - 0.15).abs() < 1e-14);
    }

    #[test]
    fn psi_vanishes_under_a_generous_limiter() {
        let s = Signal::constant(0.8, Phase::One).unwrap();
        for i in 0..10 {
            assert_eq!(psi_scan(&s, 0.5, i as f64 * 0.1).unwrap(), 0.0);
        }
        let prof = junction_profile(&s, 0.5, Regime::Fluid).unwrap();
        assert!(prof.pieces.iter().all(|p| p.value == 0.5));
    }

    #[test]
    fn forward_march_matches_scan() {
        let s = four_piece();
        for &l in &[0.0, 0.05, 0.3, 0.45, s.mean()] {
            let prof = junction_profile(&s, l, Regime::Fluid).unwrap();
            for i in 0..=200 {
                let t = -0.7 + 2.1 * i as f64 / 200.0;
                let a = prof.psi.eval(t);
                let b = psi_scan(&s, l, t).unwrap();
                assert!((a - b).abs() < 1e-12, "λ={l} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn flux_profile_properties() {
        let s = four_piece();
        for &l in &[0.1, 0.3, 0.49, s.mean()] {
            let prof = junction_profile(&s, l, Regime::Fluid).unwrap();
            assert!((prof.integral() - l).abs() < 1e-12);
            for p in &prof.pieces {
                let a = s.limiter(0.5 * (p.start + p.end));
                assert!(p.value <= a + 1e-15 && p.value >= 0.0);
                // F = λ - ψ' on each piece.
                let m = 0.5 * (p.start + p.end);
                let h = 0.25 * (p.end - p.start);
                let dpsi = (prof.psi.eval(m + h) - prof.psi.eval(m - h)) / (2.0 * h);
                assert!((l - dpsi - p.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn obstacle_route_agrees() {
        let s = four_piece();
        for &l in &[0.0, 0.1, 0.3, 0.49] {
            let prof = junction_profile(&s, l, Regime::Fluid).unwrap();
            for p in &prof.pieces {
                let m = 0.5 * (p.start + p.end);
                assert!((obstacle_flux(&s, l, m).unwrap() - p.value).abs() < 1e-10);
                let gap = obstacle_phi(&s, l, m).unwrap() - s.antiderivative(m);
                assert!((gap - prof.psi.eval(m)).abs() < 1e-12);
                if gap <= 1e-13 {
                    assert_eq!(p.value, l, "contact set must carry F = λ");
                }
            }
        }
        // λ = 0: Φ - B equals the queue of a zero inflow, which is zero.
        assert!((obstacle_phi(&s, 0.0, 0.3).unwrap() - s.antiderivative(0.3)).abs() < 1e-15);
    }

    #[test]
    fn congested_endpoint_passes_the_limiter() {
        let s = four_piece();
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let p0 = fl[0].inv_congested(s.mean()).unwrap();
        let prof = profile_for_density(&s, &fl, p0).unwrap();
        assert_eq!(prof.regime, Regime::Congested);
        assert_eq!(prof.flux(0.3), 0.9);
        assert!((prof.psi.eval(0.2) - (s.mean() * 0.2 - 0.02)).abs() < 1e-14);
        assert!(profile_for_density(&s, &fl, 0.9).is_err());
    }

    #[test]
    fn split_curves_are_monotone_and_add_up() {
        let s = four_piece();
        let bar = effective_limiters(&s);
        let mut prev = [0.0, 0.0];
        for i in 0..=300 {
            let l = 1.1 * bar[0] * i as f64 / 300.0;
            let h1 = hat_lambda(&s, 1, l).unwrap();
            let h2 = hat_lambda(&s, 2, l).unwrap();
            assert!((h1 + h2 - l.min(bar[0])).abs() < 1e-13);
            assert!(h1 >= prev[0] - 1e-14 && h2 >= prev[1] - 1e-14);
            prev = [h1, h2];
        }
    }

    #[test]
    fn effective_germ_is_a_valid_germ() {
        let s = four_piece();
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let eff = build_effective_germ(&s, &fl).unwrap();
        let g = &eff.params;
        for i in 0..=100 {
            let l = s.mean() * i as f64 / 100.0;
            // Kinks are tabulated, smooth parts are interpolated.
            assert!((g.hat(1, l) - hat_lambda(&s, 1, l).unwrap()).abs() < 1e-3);
        }
        let r = check_germ_property(g, &fl, 3000, 2);
        assert!(r.min_dissipation >= -1e-9, "{r:?}");
        for (_, p) in characteristic_subgerm(&eff, &fl, 20) {
            assert!(rh_residual(&fl, &p).abs() < 1e-10);
            assert!(germ_contains(g, &fl, &p, 1e-9));
        }
    }

    #[test]
    fn subgerm_shapes() {
        let s = four_piece();
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let eff = build_effective_germ(&s, &fl).unwrap();
        let pts = characteristic_subgerm(&eff, &fl, 5);
        assert_eq!(pts[0].1, fl.empty());
        assert_eq!(pts.last().unwrap().1, fl.jammed());
        assert_eq!(hat_p(&eff, &fl, 1, 0.0).unwrap(), 0.0);
        assert!(hat_p(&eff, &fl, 1, 0.49).is_err());
    }

    #[test]
    fn hat_p_example_one_instance() {
        let fl = Fluxes::new(unit(2.0), unit(1.0), unit(1.0));
        let s = Signal::from_durations(&[(0.5, Phase::One, 1.0), (0.5, Phase::Two, 1.0)]).unwrap();
        let eff = build_effective_germ(&s, &fl).unwrap();
        let p0 = fl[0].inv_fluid(0.6).unwrap();
        for k in 1..=2 {
            let p = hat_p(&eff, &fl, k, p0).unwrap();
            assert!((fl[k].value(p) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_steps_are_exact_averages() {
        let tri = TriangleLimiter {
            low: 0.2,
            high: 0.8,
            descent: 0.5,
        };
        let s = tri.step_signal(64).unwrap();
        assert!((s.mean() - tri.mean()).abs() < 1e-13);
        assert!((s.phase_mean(1) - (0.5 * 0.25 * (0.5 + 0.2))).abs() < 1e-13);
        assert!(tri.step_signal(63).is_err());
    }
}
