//! Time-periodic correctors built from explicit Hamilton-Jacobi formulas.
//!
//! On a half-line `y >= 0` with an increasing concave Hamiltonian `g` and a
//! periodic boundary datum `ψ`, the periodic solution is the Hopf-Lax type
//! formula `w(t, y) = sup_{t1 <= t} ψ(t1) - ξ(t - t1, y)`. Its gradient is the
//! maximizer of `ξ` at the optimal `t1`, and adding a constant density turns
//! it into a periodic entropy solution of the conservation law.
//!
//! The sup is computed exactly. `ψ` is piecewise linear and `-ξ(·, y)` is
//! concave in `t1`, so on each linear piece of `ψ` the objective is concave:
//! the optimum is a piece endpoint or the unique stationary point, which has
//! a closed form. Periodicity bounds the search window.

use crate::effective::{junction_profile, profile_for_density, FluxPiece, Regime, SubgermPoint};
use crate::error::{Error, Result};
use crate::flux::{fundamental_xi, Flux, RestrictedFlux};
use crate::germ::{meso_germ_violation, Fluxes, Triple};
use crate::pl::PeriodicPl;
use crate::signal::Signal;

/// Two optimizers within this value gap are treated as ties.
const TIE: f64 = 1e-12;
/// Maximizers further apart than this flag a kink of `w`.
const KINK: f64 = 1e-6;
/// Cap on the search window, in periods.
const MAX_WINDOW: f64 = 1e4;

/// Periodic boundary datum with the slope bounds required by the formula.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicBoundary {
    psi: PeriodicPl,
}

impl PeriodicBoundary {
    /// Checks `ψ' ∈ [-g(hi), -g(lo)]` on every piece.
    pub fn new(psi: PeriodicPl, g: &RestrictedFlux) -> Result<Self> {
        let (lo, hi) = (-g.value(g.hi()), -g.value(g.lo()));
        for (s, e, slope) in psi.pieces(0.0, 1.0) {
            if slope < lo - 1e-9 || slope > hi + 1e-9 {
                return Err(Error::pre(format!(
                    "boundary slope {slope} on [{s}, {e}] outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(PeriodicBoundary { psi })
    }

    pub fn psi(&self) -> &PeriodicPl {
        &self.psi
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.psi.eval(t)
    }
}

/// Value of the half-line formula with its optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalflineEval {
    pub value: f64,
    /// Optimal `t1`.
    pub t1: f64,
    /// `∂_y w`, the maximizer of `ξ` at the optimal `t1`.
    pub gradient: f64,
    /// Range of maximizers over tied optimizers.
    pub gradient_range: (f64, f64),
    pub kink: bool,
}

/// `w(t, y) = sup_{t1 <= t} ψ(t1) - ξ(t - t1, y)` for `y >= 0`.
pub fn periodic_halfline_w(g: &RestrictedFlux, bdry: &PeriodicBoundary, t: f64, y: f64) -> HalflineEval {
    let y = y.max(0.0);
    let psi = &bdry.psi;
    if psi.is_constant() {
        let p = g.root().unwrap_or(g.lo());
        return HalflineEval {
            value: psi.eval(0.0) + p * y,
            t1: t,
            gradient: p,
            gradient_range: (p, p),
            kink: false,
        };
    }
    // Beyond s0 the time derivative of ξ is positive, so t1 - 1 is dominated
    // by t1 once t - t1 > s0 + 1.
    let window = match g.root() {
        Some(p) if g.deriv(p) > 0.0 => (y / g.deriv(p)).min(MAX_WINDOW),
        _ => MAX_WINDOW,
    } + 2.0;
    let objective = |t1: f64| -> (f64, f64) {
        let e = fundamental_xi(g, t - t1, y);
        (psi.eval(t1) - e.value, e.argmax)
    };
    let mut cands: Vec<(f64, f64, f64)> = Vec::new();
    let mut push = |t1: f64| {
        let (v, p) = objective(t1);
        cands.push((v, p, t1));
    };
    push(t);
    for (s, e, slope) in psi.pieces(t - window, t) {
        push(s);
        let level = -slope;
        if level > g.value(g.lo()) && level < g.value(g.hi()) {
            let ps = g.inverse(level);
            let d = g.deriv(ps);
            if d > 0.0 {
                let t1 = t - y / d;
                if t1 > s && t1 < e {
                    push(t1);
                }
            }
        }
    }
    let best = cands.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let tie = TIE * (1.0 + best.abs());
    let mut lead = cands[0];
    let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &cands {
        if c.0 >= best - tie {
            if c.0 == best {
                lead = *c;
            }
            pmin = pmin.min(c.1);
            pmax = pmax.max(c.1);
        }
    }
    HalflineEval {
        value: lead.0,
        t1: lead.2,
        gradient: lead.1,
        gradient_range: (pmin, pmax),
        kink: pmax - pmin > KINK,
    }
}

/// Envelope-theorem gradient of the half-line formula.
pub fn dx_w(g: &RestrictedFlux, bdry: &PeriodicBoundary, t: f64, y: f64) -> HalflineEval {
    periodic_halfline_w(g, bdry, t, y)
}

/// Potential and density on one road.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadPotential {
    g: RestrictedFlux,
    bdry: PeriodicBoundary,
    base: f64,
    incoming: bool,
    clip_at_zero: bool,
}

impl RoadPotential {
    /// Incoming road at density `p0`, potential on `x <= 0`.
    pub fn incoming(f0: &Flux, p0: f64, psi: PeriodicPl, clip_at_zero: bool) -> Result<Self> {
        let g = RestrictedFlux::congested_mirrored(f0, p0);
        Ok(RoadPotential {
            bdry: PeriodicBoundary::new(psi, &g)?,
            g,
            base: p0,
            incoming: true,
            clip_at_zero,
        })
    }

    /// Exit road at density `p_hat`, potential on `x >= 0`.
    pub fn outgoing(fk: &Flux, p_hat: f64, psi: PeriodicPl) -> Result<Self> {
        let g = RestrictedFlux::fluid_around(fk, p_hat);
        Ok(RoadPotential {
            bdry: PeriodicBoundary::new(psi, &g)?,
            g,
            base: p_hat,
            incoming: false,
            clip_at_zero: false,
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn boundary(&self) -> &PeriodicBoundary {
        &self.bdry
    }

    fn eval(&self, t: f64, x: f64) -> (f64, f64, bool) {
        let y = if self.incoming { -x } else { x };
        let e = periodic_halfline_w(&self.g, &self.bdry, t, y);
        if self.clip_at_zero && e.value <= 0.0 {
            return (0.0, 0.0, false);
        }
        let dx = if self.incoming { -e.gradient } else { e.gradient };
        (e.value, dx, e.kink)
    }

    pub fn potential(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x).0
    }

    pub fn gradient(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x).1
    }

    pub fn density(&self, t: f64, x: f64) -> f64 {
        self.base + self.eval(t, x).1
    }
}

/// Incoming-road potential for the density `p0` (fluid branch or the
/// congested preimage of the total cap).
pub fn w0_potential(signal: &Signal, fluxes: &Fluxes, p0: f64) -> Result<RoadPotential> {
    let prof = profile_for_density(signal, fluxes, p0)?;
    let clip = prof.regime == Regime::Fluid;
    RoadPotential::incoming(&fluxes[0], p0, prof.psi, clip)
}

pub fn w0(signal: &Signal, fluxes: &Fluxes, p0: f64, t: f64, x: f64) -> Result<f64> {
    if x > 0.0 {
        return Err(Error::pre("the incoming potential lives on x <= 0"));
    }
    Ok(w0_potential(signal, fluxes, p0)?.potential(t, x))
}

/// Offset used for numerical traces at the junction.
pub const TRACE_OFFSET: f64 = 1e-6;

/// Demand of the incoming trace and the flux it carries at time `t`.
pub fn trace_flux_w0(signal: &Signal, fluxes: &Fluxes, p0: f64, t: f64) -> Result<(f64, f64)> {
    let road = w0_potential(signal, fluxes, p0)?;
    let u = road.density(t, -TRACE_OFFSET);
    Ok((fluxes[0].demand(u), fluxes[0].value(u)))
}

/// Exit-`k` potential for the fluid incoming density `p0`.
pub fn wj_potential(signal: &Signal, fluxes: &Fluxes, p0: f64, k: usize) -> Result<RoadPotential> {
    let prof = profile_for_density(signal, fluxes, p0)?;
    let p_hat = fluxes[k].inv_fluid_unchecked(prof.phase_integral(k));
    RoadPotential::outgoing(&fluxes[k], p_hat, prof.exit_load(k))
}

pub fn wj(signal: &Signal, fluxes: &Fluxes, p0: f64, k: usize, t: f64, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::pre("exit potentials live on x >= 0"));
    }
    Ok(wj_potential(signal, fluxes, p0, k)?.potential(t, x))
}

/// Density on one branch of a corrector.
#[derive(Debug, Clone, PartialEq)]
pub enum RoadField {
    Constant(f64),
    Potential(RoadPotential),
}

impl RoadField {
    pub fn density(&self, t: f64, x: f64) -> f64 {
        match self {
            RoadField::Constant(c) => *c,
            RoadField::Potential(r) => r.density(t, x),
        }
    }

    pub fn potential(&self, t: f64, x: f64) -> f64 {
        match self {
            RoadField::Constant(_) => 0.0,
            RoadField::Potential(r) => r.potential(t, x),
        }
    }

    /// Density at infinity.
    pub fn base(&self) -> f64 {
        match self {
            RoadField::Constant(c) => *c,
            RoadField::Potential(r) => r.base(),
        }
    }
}

/// Periodic solution of the light problem converging to a subgerm point.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorField {
    pub target: SubgermPoint,
    pub triple: Triple,
    pub fluxes: Fluxes,
    /// The light the corrector solves.
    pub signal: Signal,
    pub roads: [RoadField; 3],
    /// Pieces on which the junction flux is constant.
    pub pieces: Vec<FluxPiece>,
}

/// Builds the corrector of a subgerm point.
pub fn corrector(point: SubgermPoint, signal: &Signal, fluxes: &Fluxes) -> Result<CorrectorField> {
    signal.validate_caps(fluxes)?;
    let bar0 = signal.mean();
    match point {
        SubgermPoint::Fluid { p0 } => {
            let f0 = &fluxes[0];
            if p0 < f0.a() - 1e-12 || p0 > f0.b() + 1e-12 || f0.value(p0) > bar0 + 1e-12 {
                return Err(Error::pre(format!("{p0} is not a fluid subgerm density")));
            }
            let prof = junction_profile(signal, f0.value(p0).min(bar0), Regime::Fluid)?;
            let inc = RoadPotential::incoming(f0, p0, prof.psi.clone(), true)?;
            let exit = |k: usize| -> Result<RoadField> {
                let p_hat = fluxes[k].inv_fluid_unchecked(prof.phase_integral(k));
                Ok(RoadField::Potential(RoadPotential::outgoing(
                    &fluxes[k],
                    p_hat,
                    prof.exit_load(k),
                )?))
            };
            let roads = [RoadField::Potential(inc), exit(1)?, exit(2)?];
            let triple = Triple([roads[0].base(), roads[1].base(), roads[2].base()]);
            Ok(CorrectorField {
                target: point,
                triple,
                fluxes: fluxes.clone(),
                signal: signal.clone(),
                roads,
                pieces: prof.pieces,
            })
        }
        SubgermPoint::Saturated { k } => {
            if k != 1 && k != 2 {
                return Err(Error::pre(format!("exit index {k} is not 1 or 2")));
            }
            let through = signal.restricted_to(k);
            let cap = through.mean();
            let prof = junction_profile(&through, cap, Regime::Congested)?;
            let p0 = fluxes[0].inv_congested_unchecked(cap);
            let inc = RoadPotential::incoming(&fluxes[0], p0, prof.psi.clone(), false)?;
            let p_hat = fluxes[k].inv_fluid_unchecked(cap);
            let out = RoadPotential::outgoing(&fluxes[k], p_hat, prof.exit_load(k))?;
            let mut roads = [
                RoadField::Potential(inc),
                RoadField::Constant(fluxes[1].c()),
                RoadField::Constant(fluxes[2].c()),
            ];
            roads[k] = RoadField::Potential(out);
            let triple = Triple([roads[0].base(), roads[1].base(), roads[2].base()]);
            Ok(CorrectorField {
                target: point,
                triple,
                fluxes: fluxes.clone(),
                signal: signal.clone(),
                roads,
                pieces: prof.pieces,
            })
        }
        SubgermPoint::Jammed => {
            let j = fluxes.jammed();
            let pieces = signal
                .segments()
                .iter()
                .map(|s| FluxPiece {
                    start: s.start,
                    end: s.end,
                    value: 0.0,
                    phase: s.phase,
                    queued: true,
                })
                .collect();
            Ok(CorrectorField {
                target: point,
                triple: j,
                fluxes: fluxes.clone(),
                signal: signal.clone(),
                roads: [
                    RoadField::Constant(j[0]),
                    RoadField::Constant(j[1]),
                    RoadField::Constant(j[2]),
                ],
                pieces,
            })
        }
    }
}

/// Identifies which subgerm case a triple belongs to.
pub fn classify_subgerm(p: &Triple, signal: &Signal, fluxes: &Fluxes, tol: f64) -> Result<SubgermPoint> {
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    if (0..3).all(|j| close(p[j], fluxes[j].c())) {
        return Ok(SubgermPoint::Jammed);
    }
    for k in 1..=2 {
        let cap = signal.phase_mean(k);
        let j = 3 - k;
        if close(p[j], fluxes[j].c())
            && close(p[0], fluxes[0].inv_congested_unchecked(cap))
            && close(p[k], fluxes[k].inv_fluid_unchecked(cap))
        {
            return Ok(SubgermPoint::Saturated { k });
        }
    }
    let f0 = &fluxes[0];
    if p[0] >= f0.a() - tol && p[0] <= f0.b() + tol && f0.value(p[0]) <= signal.mean() + tol {
        let p0 = p[0].clamp(f0.a(), f0.b());
        let prof = junction_profile(signal, f0.value(p0).min(signal.mean()), Regime::Fluid)?;
        let ok = (1..=2).all(|k| close(p[k], fluxes[k].inv_fluid_unchecked(prof.phase_integral(k))));
        if ok {
            return Ok(SubgermPoint::Fluid { p0 });
        }
    }
    Err(Error::pre(format!("{p:?} is not in the characteristic subgerm")))
}

impl CorrectorField {
    /// Density on branch `j` (`x <= 0` for branch 0, `x >= 0` for exits).
    pub fn density(&self, j: usize, t: f64, x: f64) -> f64 {
        self.roads[j].density(t, x)
    }

    /// Trace triple at the junction, read at `x = ∓offset`.
    pub fn trace(&self, t: f64, offset: f64) -> Triple {
        Triple([
            self.density(0, t, -offset),
            self.density(1, t, offset),
            self.density(2, t, offset),
        ])
    }

    /// Time averages of the three trace fluxes, integrated exactly over the
    /// pieces on which the junction flux is constant.
    pub fn junction_flux_average(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for p in &self.pieces {
            let tr = self.trace(0.5 * (p.start + p.end), TRACE_OFFSET);
            let v = self.fluxes.values(&tr);
            for j in 0..3 {
                acc[j] += v[j] * (p.end - p.start);
            }
        }
        acc
    }

    /// `∫_x^{x+dx} u dx` from the potential on branch `j`.
    fn cell_mass(&self, j: usize, t: f64, x: f64, dx: f64) -> f64 {
        let r = &self.roads[j];
        r.base() * dx + r.potential(t, x + dx) - r.potential(t, x)
    }

    /// Cell averages of branch `j` on a grid of `n` cells starting at `x0`.
    pub fn cell_averages(&self, j: usize, t: f64, x0: f64, dx: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.cell_mass(j, t, x0 + i as f64 * dx, dx) / dx)
            .collect()
    }
}

/// Sampling parameters for [`verify_corrector`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyGrid {
    pub n_times: usize,
    pub trace_offset: f64,
    pub decay_ms: Vec<f64>,
    pub decay_times: usize,
    /// Cells probed for the conservation residual, per branch.
    pub residual_cells: usize,
    pub residual_dx: f64,
    pub residual_dt: f64,
    pub residual_subsamples: usize,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        VerifyGrid {
            n_times: 1000,
            trace_offset: TRACE_OFFSET,
            decay_ms: vec![10.0, 20.0, 40.0],
            decay_times: 128,
            residual_cells: 8,
            residual_dx: 0.05,
            residual_dt: 0.05,
            residual_subsamples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub m: f64,
    pub sup_deviation: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorReport {
    /// Fraction of sampled times whose trace lies in the light's germ.
    pub membership_rate: f64,
    pub worst_membership_violation: f64,
    /// Largest flux through a red exit.
    pub red_exit_flux: f64,
    /// `|avg flux0 - avg flux1 - avg flux2|`.
    pub flux_balance_gap: f64,
    /// Largest normalized conservation residual `|R| / Δt` over probe cells.
    pub conservation_residual: f64,
    pub decay: Vec<DecayFit>,
    /// Fitted constant grows by at most a factor 2 over the last doubling of `M`.
    pub decay_stable: bool,
    /// Radius beyond which the incoming density equals its far value on the
    /// sampled grid (`None` when no compact support was detected).
    pub incoming_support: Option<f64>,
    /// Whether the incoming density is exactly the far value on
    /// `[-4 C - 1, -C)` at all sampled times.
    pub incoming_flat_beyond_support: bool,
}

impl CorrectorReport {
    pub fn passes(&self, membership_rate: f64, tol: f64) -> bool {
        self.membership_rate >= membership_rate && self.red_exit_flux <= tol && self.decay_stable
    }
}

/// Checks trace-germ membership, decay, conservation and flux balance.
pub fn verify_corrector(u: &CorrectorField, tol: f64, grid: &VerifyGrid) -> CorrectorReport {
    let fl = &u.fluxes;
    let mut inside = 0usize;
    let mut worst = 0.0f64;
    let mut red = 0.0f64;
    for i in 0..grid.n_times {
        let t = (i as f64 + 0.5) / grid.n_times as f64;
        let seg = u.signal.segment_at(t);
        let tr = u.trace(t, grid.trace_offset);
        let v = meso_germ_violation(seg.limiter, seg.phase, fl, &tr);
        worst = worst.max(v);
        if v <= tol {
            inside += 1;
        }
        let j = seg.phase.other().branch();
        red = red.max(fl[j].value(tr[j]).abs());
    }
    let avg = u.junction_flux_average();
    let balance = (avg[0] - avg[1] - avg[2]).abs();

    // Conservation residual on probe cells next to the junction.
    let mut residual = 0.0f64;
    let (dx, dt, m) = (grid.residual_dx, grid.residual_dt, grid.residual_subsamples.max(1));
    for j in 0..3 {
        let f = &fl[j];
        for c in 0..grid.residual_cells {
            let x = if j == 0 {
                -(c as f64 + 1.0) * dx - grid.trace_offset
            } else {
                c as f64 * dx + grid.trace_offset
            };
            for &t0 in &[0.1, 0.45, 0.8] {
                let mass = u.cell_mass(j, t0 + dt, x, dx) - u.cell_mass(j, t0, x, dx);
                let q = |xx: f64| -> f64 {
                    (0..m)
                        .map(|s| f.value(u.density(j, t0 + (s as f64 + 0.5) * dt / m as f64, xx)))
                        .sum::<f64>()
                        * dt
                        / m as f64
                };
                let r = mass + q(x + dx) - q(x);
                residual = residual.max(r.abs() / dt);
            }
        }
    }

    // Decay of the deviation from the far-field densities. Peaks sit next to
    // shocks, so the coarse time scan is refined around its best sample.
    let deviation = |j: usize, t: f64, x: f64| (u.density(j, t, x) - u.roads[j].base()).abs();
    let sup_in_time = |j: usize, x: f64| -> f64 {
        let n = grid.decay_times.max(1);
        let h = 1.0 / n as f64;
        let (mut best_t, mut best) = (0.0, -1.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let v = deviation(j, t, x);
            if v > best {
                (best_t, best) = (t, v);
            }
        }
        let m = 4 * n;
        (0..=m)
            .map(|i| deviation(j, best_t - h + 2.0 * h * i as f64 / m as f64, x))
            .fold(best, f64::max)
    };
    let mut decay = Vec::new();
    for &mm in &grid.decay_ms {
        let mut sup = 0.0f64;
        for &s in &[1.0, 1.25, 1.5, 2.0, 3.0, 4.0] {
            let x = mm * s;
            sup = sup.max(sup_in_time(0, -x));
            for k in 1..=2 {
                sup = sup.max(sup_in_time(k, x));
            }
        }
        decay.push(DecayFit {
            m: mm,
            sup_deviation: sup,
            constant: sup * mm,
        });
    }
    // Low flows keep an undecayed plateau for a while, so stability is read
    // on the last doubling of the distance.
    let decay_stable = match decay.len() {
        0 | 1 => true,
        n => decay[n - 1].constant <= 2.0 * decay[n - 2].constant + 1e-12,
    };

    // Compact support of the incoming perturbation in the fluid case.
    let (mut support, mut flat) = (None, true);
    if matches!(u.target, SubgermPoint::Fluid { .. }) {
        let base = u.roads[0].base();
        let deviates = |x: f64| (0..64).any(|i| u.density(0, (i as f64 + 0.5) / 64.0, x) != base);
        // Fine probes near the node, coarse ones further out.
        let probes = (1..=200)
            .map(|i| (i as f64 * 0.005, 0.005))
            .chain((21..=1000).map(|i| (i as f64 * 0.05, 0.05)));
        let (mut last, mut step) = (0.0, 0.0);
        for (r, h) in probes {
            if deviates(-r) {
                (last, step) = (r, h);
            }
        }
        // The scan only brackets the edge; round up to the next probe.
        let edge = if last > 0.0 { last + step } else { 0.0 };
        support = Some(edge);
        let mut x = -(edge + 1e-3);
        while x > -(4.0 * edge + 1.0) {
            if deviates(x) {
                flat = false;
                break;
            }
            x -= 0.1;
        }
    }
    CorrectorReport {
        membership_rate: inside as f64 / grid.n_times.max(1) as f64,
        worst_membership_violation: worst,
        red_exit_flux: red,
        flux_balance_gap: balance,
        conservation_residual: residual,
        decay,
        decay_stable,
        incoming_support: support,
        incoming_flat_beyond_support: flat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{build_effective_germ, characteristic_subgerm, psi};
    use crate::signal::Phase;

    fn unit(m: f64) -> Flux {
        Flux::quadratic(0.0, 1.0, m).unwrap()
    }

    fn stop_signal() -> (Signal, Fluxes) {
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let s =
            Signal::from_durations(&[(0.2, Phase::One, 0.0), (0.4, Phase::One, 1.0), (0.4, Phase::Two, 1.0)]).unwrap();
        (s, fl)
    }

    fn wavy_boundary(g: &RestrictedFlux) -> PeriodicBoundary {
        // Slopes 0.1 and -0.1 stay inside the admissible range for g below.
        let psi = PeriodicPl::new(vec![0.0, 0.3, 0.8, 1.0], vec![0.0, 0.03, -0.02, 0.0]).unwrap();
        PeriodicBoundary::new(psi, g).unwrap()
    }

    #[test]
    fn constant_datum_gives_affine_potential() {
        let g = RestrictedFlux::fluid_around(&unit(1.0), 0.2);
        let b = PeriodicBoundary::new(PeriodicPl::constant(0.7), &g).unwrap();
        let e = periodic_halfline_w(&g, &b, 0.3, 2.0);
        assert!((e.value - 0.7).abs() < 1e-15);
        assert!(e.gradient.abs() < 1e-12);
    }

    #[test]
    fn boundary_identity_and_periodicity() {
        let g = RestrictedFlux::fluid_around(&unit(1.0), 0.2);
        let b = wavy_boundary(&g);
        for &t in &[0.0, 0.3, 0.55, 0.8, 0.99] {
            assert!((periodic_halfline_w(&g, &b, t, 0.0).value - b.eval(t)).abs() < 1e-10);
        }
        for i in 0..50 {
            let t = i as f64 * 0.137;
            let x = (i % 7) as f64 * 0.31;
            let a = periodic_halfline_w(&g, &b, t, x).value;
            let c = periodic_halfline_w(&g, &b, t + 1.0, x).value;
            assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn value_matches_dense_search() {
        let g = RestrictedFlux::fluid_around(&unit(1.0), 0.2);
        let b = wavy_boundary(&g);
        for &(t, x) in &[(0.4, 0.3), (0.9, 1.7), (0.1, 0.05), (0.65, 4.0)] {
            let e = periodic_halfline_w(&g, &b, t, x);
            let dense = (0..=400_000)
                .map(|i| {
                    let t1 = t - 20.0 * i as f64 / 400_000.0;
                    b.eval(t1) - fundamental_xi(&g, t - t1, x).value
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(e.value >= dense - 1e-12);
            assert!(e.value - dense < 1e-7, "t={t} x={x}");
        }
    }

    #[test]
    fn envelope_gradient_matches_finite_differences() {
        let g = RestrictedFlux::fluid_around(&unit(1.0), 0.2);
        let b = wavy_boundary(&g);
        let h = 1e-5;
        let mut checked = 0;
        for i in 0..100 {
            let t = (i as f64 * 0.6180339887) % 1.0;
            let x = 0.05 + (i as f64 * 0.414) % 3.0;
            let e = dx_w(&g, &b, t, x);
            let l = dx_w(&g, &b, t, x - h);
            let r = dx_w(&g, &b, t, x + h);
            if e.kink || l.kink || r.kink || (l.gradient - r.gradient).abs() > 1e-3 {
                continue;
            }
            let fd = (r.value - l.value) / (2.0 * h);
            assert!((fd - e.gradient).abs() < 1e-4, "t={t} x={x}");
            checked += 1;
        }
        assert!(checked > 80);
    }

    #[test]
    fn incoming_potential_examples() {
        let (s, fl) = stop_signal();
        let p0 = fl[0].inv_fluid(0.5).unwrap();
        for &t in &[0.0, 0.1, 0.2, 0.35, 0.7] {
            let w = w0(&s, &fl, p0, t, 0.0).unwrap();
            assert!((w - psi(&s, &fl, p0, t).unwrap()).abs() < 1e-10);
        }
        // Nondecreasing in x, compactly supported.
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let x = -5.0 + 5.0 * i as f64 / 100.0;
            let w = w0(&s, &fl, p0, 0.15, x).unwrap();
            assert!(w >= prev - 1e-14);
            prev = w;
        }
        assert_eq!(w0(&s, &fl, p0, 0.15, -20.0).unwrap(), 0.0);
        // Peak inflow under a signal at the peak everywhere: nothing happens.
        let full = Signal::constant(1.0, Phase::One).unwrap();
        assert_eq!(w0(&full, &fl, 0.5, 0.3, -0.7).unwrap(), 0.0);
    }

    #[test]
    fn incoming_trace_flux() {
        let (s, fl) = stop_signal();
        let p0 = fl[0].inv_fluid(0.5).unwrap();
        // Red: the queue is present, the trace is congested and nothing passes.
        let (demand, flux) = trace_flux_w0(&s, &fl, p0, 0.1).unwrap();
        assert!((demand - 1.0).abs() < 1e-12 && flux.abs() < 1e-9);
        // Late green, queue gone: the trace is the upstream state.
        let (demand, flux) = trace_flux_w0(&s, &fl, p0, 0.9).unwrap();
        assert!((demand - 0.5).abs() < 1e-9 && (flux - 0.5).abs() < 1e-9);
        let gen = Signal::constant(0.9, Phase::One).unwrap();
        for &t in &[0.1, 0.6] {
            let (d, f) = trace_flux_w0(&gen, &fl, p0, t).unwrap();
            assert!((d - 0.5).abs() < 1e-9 && (f - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn exit_potential_examples() {
        let fl = Fluxes::new(unit(1.0), unit(1.0), unit(1.0));
        let all_one = Signal::constant(0.8, Phase::One).unwrap();
        let p0 = fl[0].inv_fluid(0.6).unwrap();
        assert_eq!(wj(&all_one, &fl, p0, 1, 0.4, 2.0).unwrap(), 0.0);
        let (s, fl) = stop_signal();
        let road = wj_potential(&s, &fl, p0, 1).unwrap();
        for &t in &[0.0, 0.2, 0.5, 0.77] {
            let w = road.potential(t, 0.0);
            assert!((w - road.boundary().eval(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn jammed_corrector_is_constant() {
        let (s, fl) = stop_signal();
        let c = corrector(SubgermPoint::Jammed, &s, &fl).unwrap();
        assert_eq!(c.trace(0.3, TRACE_OFFSET), fl.jammed());
        let r = verify_corrector(
            &c,
            1e-3,
            &VerifyGrid {
                n_times: 50,
                decay_times: 8,
                ..Default::default()
            },
        );
        assert_eq!(r.conservation_residual, 0.0);
        assert_eq!(r.membership_rate, 1.0);
    }

    #[test]
    fn fluid_corrector_properties() {
        let (s, fl) = stop_signal();
        let eff = build_effective_germ(&s, &fl).unwrap();
        let pts = characteristic_subgerm(&eff, &fl, 5);
        let (pt, triple) = pts[2];
        let c = corrector(pt, &s, &fl).unwrap();
        assert!((0..3).all(|j| (c.triple[j] - triple[j]).abs() < 1e-3));
        let avg = c.junction_flux_average();
        assert!((avg[0] - avg[1] - avg[2]).abs() < 1e-8);
        assert!((avg[0] - fl[0].value(triple[0])).abs() < 1e-8);
        for i in 0..40 {
            let t = i as f64 * 0.173;
            let x = 0.05 + (i % 5) as f64 * 0.7;
            for j in 0..3 {
                let xx = if j == 0 { -x } else { x };
                let a = c.density(j, t, xx);
                assert!((a - c.density(j, t + 1.0, xx)).abs() < 1e-10);
                assert!(a >= fl[j].a() - 1e-12 && a <= fl[j].c() + 1e-12);
            }
        }
        let r = verify_corrector(
            &c,
            1e-3,
            &VerifyGrid {
                n_times: 400,
                decay_times: 32,
                ..Default::default()
            },
        );
        assert!(r.membership_rate >= 0.99, "{r:?}");
        assert!(r.red_exit_flux < 1e-3, "{r:?}");
        assert!(r.incoming_flat_beyond_support, "{r:?}");
    }

    #[test]
    fn classification_round_trip() {
        let (s, fl) = stop_signal();
        let eff = build_effective_germ(&s, &fl).unwrap();
        for (pt, tr) in characteristic_subgerm(&eff, &fl, 4) {
            let back = classify_subgerm(&tr, &s, &fl, 1e-9).unwrap();
            match (pt, back) {
                (SubgermPoint::Fluid { p0: a }, SubgermPoint::Fluid { p0: b }) => assert!((a - b).abs() < 1e-9),
                (a, b) => assert_eq!(a, b),
            }
        }
        assert!(classify_subgerm(&Triple([0.9, 0.1, 0.1]), &s, &fl, 1e-9).is_err());
    }
}
