//! First-order Godunov finite volumes on the three-branch junction.
//!
//! Every branch carries a uniform grid of `n` cells of width `dx`. The
//! incoming road sits on `[-L, 0]` and is stored far end first, so its last
//! cell touches the node; exits sit on `[0, L]` with cell 0 at the node. The
//! far ends use copy (zero-gradient) ghost cells.
//!
//! The node couples the branches through a [`JunctionRule`]. Two rules are
//! provided: the light rule that switches with the signal, and the
//! homogenized rule built from an effective germ. Each evaluation also
//! reconstructs a trace triple from the flux vector and audits it against the
//! germ the rule is supposed to realize.

use rayon::prelude::*;

use crate::effective::build_effective_germ;
use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::germ::{germ_violation, meso_germ_violation, Fluxes, GermParams, Triple};
use crate::signal::Signal;

/// Flux vectors whose reconstructed traces miss the germ by more than this
/// abort the homogenized rule.
pub const MACRO_AUDIT_TOL: f64 = 1e-8;

/// Tolerance under which a trace counts as a germ member in the audit.
pub const AUDIT_TOL: f64 = 1e-8;

/// Demand-supply Godunov flux for a concave flux.
pub fn godunov_flux(f: &Flux, ul: f64, ur: f64) -> f64 {
    f.demand(ul).min(f.supply(ur))
}

/// Checked variant of [`godunov_flux`].
pub fn godunov_flux_checked(f: &Flux, ul: f64, ur: f64) -> Result<f64> {
    f.eval(ul)?;
    f.eval(ur)?;
    Ok(godunov_flux(f, ul, ur))
}

/// Flux through the node with the trace triple it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionFlux {
    pub phi: [f64; 3],
    pub trace: Triple,
    /// Distance of the trace from the germ the rule realizes.
    pub violation: f64,
}

/// Node coupling. `t` is the midpoint of the step the flux is used for.
pub trait JunctionRule {
    fn flux(&self, t: f64, rho: [f64; 3]) -> Result<JunctionFlux>;

    /// First instant after `t` at which the rule changes; steps never cross it.
    fn next_switch(&self, _t: f64) -> f64 {
        f64::INFINITY
    }
}

/// Trace densities consistent with the node fluxes and the adjacent cells:
/// a cell value is kept when it already carries the flux on the admissible
/// side, otherwise the flux is inverted on that side.
pub fn reconstruct_trace(fluxes: &Fluxes, rho: [f64; 3], phi: [f64; 3]) -> Triple {
    let f0 = &fluxes[0];
    let p0 = if rho[0] <= f0.b() && (f0.value(rho[0]) - phi[0]).abs() <= 1e-13 {
        rho[0]
    } else {
        f0.inv_congested_unchecked(phi[0])
    };
    let exit = |k: usize| {
        let f = &fluxes[k];
        if rho[k] >= f.b() && (f.value(rho[k]) - phi[k]).abs() <= 1e-13 {
            rho[k]
        } else {
            f.inv_fluid_unchecked(phi[k])
        }
    };
    Triple([p0, exit(1), exit(2)])
}

/// The signal rule, time-compressed by `eps`: on phase `k` the node passes
/// `min(A, demand0, supply_k)` into exit `k` and nothing into the other.
pub fn meso_junction_flux(limiter: f64, k: usize, fluxes: &Fluxes, rho: [f64; 3]) -> [f64; 3] {
    let q = limiter.min(fluxes[0].demand(rho[0])).min(fluxes[k].supply(rho[k]));
    let mut phi = [q, 0.0, 0.0];
    phi[k] = q;
    phi
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesoRule {
    pub signal: Signal,
    pub fluxes: Fluxes,
    pub eps: f64,
}

impl MesoRule {
    pub fn new(signal: Signal, fluxes: Fluxes, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Scenario(format!("eps must be positive, got {eps}")));
        }
        signal.validate_caps(&fluxes)?;
        Ok(MesoRule { signal, fluxes, eps })
    }
}

impl JunctionRule for MesoRule {
    fn flux(&self, t: f64, rho: [f64; 3]) -> Result<JunctionFlux> {
        let seg = self.signal.segment_at(t / self.eps);
        let phi = meso_junction_flux(seg.limiter, seg.phase.branch(), &self.fluxes, rho);
        let trace = reconstruct_trace(&self.fluxes, rho, phi);
        let violation = meso_germ_violation(seg.limiter, seg.phase, &self.fluxes, &trace);
        Ok(JunctionFlux { phi, trace, violation })
    }

    fn next_switch(&self, t: f64) -> f64 {
        let s = t / self.eps;
        let mut next = self.eps * self.signal.next_breakpoint(s);
        if next - t <= 1e-12 * self.eps.max(t.abs()) {
            next = self.eps * self.signal.next_breakpoint(next / self.eps + 1e-9);
        }
        next
    }
}

/// Homogenized node rule for the germ with caps `bar` and split curves `hat`.
///
/// With demand `d`, ceilings `c_k = min(supply_k, bar_k)` and total
/// `L = min(d, bar0)`, the largest total `λ* <= L` whose split fits under both
/// ceilings is found by exact inversion of the split curves. If it reaches
/// `L` the split at `L` is returned. Otherwise the binding exits get their
/// ceilings and the other exit takes what is left of `L`, up to its ceiling.
pub fn macro_junction_flux(params: &GermParams, fluxes: &Fluxes, rho: [f64; 3]) -> [f64; 3] {
    let d = fluxes[0].demand(rho[0]);
    let c = [
        0.0,
        fluxes[1].supply(rho[1]).min(params.bar(1)),
        fluxes[2].supply(rho[2]).min(params.bar(2)),
    ];
    let total = d.min(params.bar(0));
    let reach = |k: usize| params.hat_curve(k).sup_sublevel(c[k], 0.0, total).unwrap_or(0.0);
    let (l1, l2) = (reach(1), reach(2));
    let star = l1.min(l2).min(total);
    if star >= total {
        let h1 = params.hat(1, total);
        let h2 = params.hat(2, total);
        return [h1 + h2, h1, h2];
    }
    let binds = |k: usize, lk: f64| lk <= star || params.hat(k, star) >= c[k];
    let (b1, b2) = (binds(1, l1), binds(2, l2));
    let (p1, p2) = match (b1, b2) {
        (true, true) => (c[1], c[2]),
        (true, false) => (c[1], (total - c[1]).min(c[2]).max(0.0)),
        _ => ((total - c[2]).min(c[1]).max(0.0), c[2]),
    };
    [p1 + p2, p1, p2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroRule {
    pub params: GermParams,
    pub fluxes: Fluxes,
}

impl MacroRule {
    pub fn new(params: GermParams, fluxes: Fluxes) -> Self {
        MacroRule { params, fluxes }
    }

    /// Rule of the effective germ of `signal`.
    pub fn effective(signal: &Signal, fluxes: &Fluxes) -> Result<Self> {
        Ok(MacroRule::new(
            build_effective_germ(signal, fluxes)?.params,
            fluxes.clone(),
        ))
    }
}

impl JunctionRule for MacroRule {
    fn flux(&self, _t: f64, rho: [f64; 3]) -> Result<JunctionFlux> {
        let phi = macro_junction_flux(&self.params, &self.fluxes, rho);
        let trace = reconstruct_trace(&self.fluxes, rho, phi);
        let violation = germ_violation(&self.params, &self.fluxes, &trace);
        if violation > MACRO_AUDIT_TOL {
            return Err(Error::InvalidGerm(format!(
                "node state {rho:?} gives fluxes {phi:?} whose trace {:?} misses the germ by {violation:e}",
                trace.0
            )));
        }
        Ok(JunctionFlux { phi, trace, violation })
    }
}

/// Cell averages on the three branches.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchField {
    pub dx: f64,
    pub cells: [Vec<f64>; 3],
    pub t: f64,
    /// Whether branch `j` lies on `x <= 0`. The solver always runs with only
    /// branch 0 incoming; the flags let reversed fields report positions.
    pub incoming: [bool; 3],
}

impl BranchField {
    /// Uniform cells on `[0, half_length]` per branch.
    pub fn constant(values: [f64; 3], dx: f64, half_length: f64) -> Result<Self> {
        let n = cell_count(dx, half_length)?;
        Ok(BranchField {
            dx,
            cells: [vec![values[0]; n], vec![values[1]; n], vec![values[2]; n]],
            t: 0.0,
            incoming: [true, false, false],
        })
    }

    /// Exact cell averages of piecewise-constant data. Each branch gets
    /// `(until, rho)` pieces by distance from the node; the last piece is
    /// extended to the far end.
    pub fn from_pieces(pieces: &[Vec<(f64, f64)>; 3], dx: f64, half_length: f64) -> Result<Self> {
        let n = cell_count(dx, half_length)?;
        let mut cells: [Vec<f64>; 3] = Default::default();
        for j in 0..3 {
            let p = &pieces[j];
            if p.is_empty() {
                return Err(Error::Scenario(format!("branch {j} has no initial data")));
            }
            let mut by_dist = Vec::with_capacity(n);
            for i in 0..n {
                let (lo, hi) = (i as f64 * dx, (i + 1) as f64 * dx);
                let m = p.iter().position(|&(until, _)| until > lo).unwrap_or(p.len() - 1);
                let until = if m + 1 == p.len() { f64::INFINITY } else { p[m].0 };
                if until >= hi {
                    by_dist.push(p[m].1);
                    continue;
                }
                let mut acc = 0.0;
                let mut from = 0.0;
                for (m, &(until, rho)) in p.iter().enumerate() {
                    let until = if m + 1 == p.len() { f64::INFINITY } else { until };
                    let overlap = hi.min(until) - lo.max(from);
                    if overlap > 0.0 {
                        acc += overlap * rho;
                    }
                    from = until;
                }
                by_dist.push(acc / dx);
            }
            if j == 0 {
                by_dist.reverse();
            }
            cells[j] = by_dist;
        }
        Ok(BranchField {
            dx,
            cells,
            t: 0.0,
            incoming: [true, false, false],
        })
    }

    pub fn n(&self) -> usize {
        self.cells[0].len()
    }

    /// Cell centre of cell `i` on branch `j`, in branch coordinates.
    pub fn x(&self, j: usize, i: usize) -> f64 {
        let n = self.cells[j].len();
        if self.incoming[j] {
            -((n - i) as f64 - 0.5) * self.dx
        } else {
            (i as f64 + 0.5) * self.dx
        }
    }

    /// Cells touching the node.
    pub fn junction_cells(&self) -> [f64; 3] {
        let n = self.n();
        [self.cells[0][n - 1], self.cells[1][0], self.cells[2][0]]
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().map(|c| c.iter().sum::<f64>()).sum::<f64>() * self.dx
    }

    /// `Σ_j ||ρ^j - ρ̃^j||_1`.
    pub fn l1_distance(&self, other: &BranchField) -> f64 {
        (0..3)
            .map(|j| {
                self.cells[j]
                    .iter()
                    .zip(&other.cells[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
            * self.dx
    }

    pub fn check_box(&self, fluxes: &Fluxes, tol: f64) -> Result<()> {
        for j in 0..3 {
            let f = &fluxes[j];
            if let Some(&v) = self.cells[j].iter().find(|&&v| v < f.a() - tol || v > f.c() + tol) {
                return Err(Error::Domain {
                    value: v,
                    lo: f.a(),
                    hi: f.c(),
                });
            }
        }
        Ok(())
    }

    /// `(p, x) -> (-p, -x)` on every branch. Incoming and outgoing swap.
    pub fn reversed(&self) -> BranchField {
        let flip = |c: &Vec<f64>| c.iter().rev().map(|v| -v).collect::<Vec<f64>>();
        BranchField {
            dx: self.dx,
            cells: [flip(&self.cells[0]), flip(&self.cells[1]), flip(&self.cells[2])],
            t: self.t,
            incoming: [!self.incoming[0], !self.incoming[1], !self.incoming[2]],
        }
    }
}

fn cell_count(dx: f64, half_length: f64) -> Result<usize> {
    if !(dx > 0.0 && half_length > 0.0) {
        return Err(Error::Scenario(format!(
            "grid needs dx > 0 and L > 0, got {dx}, {half_length}"
        )));
    }
    let n = (half_length / dx).round();
    if n < 2.0 || (n * dx - half_length).abs() > 1e-9 * half_length {
        return Err(Error::Scenario(format!(
            "L = {half_length} is not a multiple of dx = {dx}"
        )));
    }
    Ok(n as usize)
}

/// Outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: f64,
    pub dt: f64,
    pub node: JunctionFlux,
    /// Flux entering through the far end of the incoming road.
    pub inflow: f64,
    /// Flux leaving through the far ends of the exits.
    pub outflow: f64,
    pub mass_before: f64,
    pub mass_after: f64,
}

impl StepInfo {
    /// `ΔM - (in - out) Δt`.
    pub fn ledger_residual(&self) -> f64 {
        self.mass_after - self.mass_before - (self.inflow - self.outflow) * self.dt
    }
}

/// Largest stable step for the fluxes at the given CFL number.
pub fn cfl_step(fluxes: &Fluxes, dx: f64, cfl: f64) -> f64 {
    cfl * dx / fluxes.max_speed()
}

/// One conservative update with the node fluxes evaluated at mid-step.
pub fn step(field: &mut BranchField, fluxes: &Fluxes, rule: &dyn JunctionRule, dt: f64) -> Result<StepInfo> {
    let limit = cfl_step(fluxes, field.dx, 1.0);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let n = field.n();
    let mass_before = field.mass();
    let node = rule.flux(field.t + 0.5 * dt, field.junction_cells())?;
    let r = dt / field.dx;

    let c0 = &field.cells[0];
    let f0 = &fluxes[0];
    let inflow = f0.value(c0[0]);
    let mut faces = Vec::with_capacity(n + 1);
    faces.push(inflow);
    faces.extend(c0.windows(2).map(|w| godunov_flux(f0, w[0], w[1])));
    faces.push(node.phi[0]);
    let next0: Vec<f64> = (0..n).map(|i| c0[i] - r * (faces[i + 1] - faces[i])).collect();

    let mut outflow = 0.0;
    let mut next = [next0, Vec::new(), Vec::new()];
    for k in 1..=2 {
        let c = &field.cells[k];
        let f = &fluxes[k];
        faces.clear();
        faces.push(node.phi[k]);
        faces.extend(c.windows(2).map(|w| godunov_flux(f, w[0], w[1])));
        let out = f.value(c[n - 1]);
        faces.push(out);
        outflow += out;
        next[k] = (0..n).map(|i| c[i] - r * (faces[i + 1] - faces[i])).collect();
    }
    field.cells = next;
    let t = field.t;
    field.t += dt;
    Ok(StepInfo {
        t,
        dt,
        node,
        inflow,
        outflow,
        mass_before,
        mass_after: field.mass(),
    })
}

/// Run controls.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    pub cfl: f64,
    pub snapshots: Vec<f64>,
    pub record_steps: bool,
}

impl RunOptions {
    pub fn new(horizon: f64, cfl: f64) -> Self {
        RunOptions {
            horizon,
            cfl,
            snapshots: Vec::new(),
            record_steps: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub phi: [f64; 3],
    pub trace: Triple,
    /// Cells adjacent to the node, the cell-average trace proxy.
    pub cells: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<BranchField>,
    pub trace: Vec<TraceRow>,
    pub ledger: Vec<LedgerRow>,
    pub last: BranchField,
    pub steps: usize,
    pub worst_violation: f64,
    pub worst_ledger: f64,
    /// Steps whose reconstructed trace lies in the germ within [`AUDIT_TOL`].
    pub audit_pass: usize,
}

impl Trajectory {
    pub fn audit_rate(&self) -> f64 {
        self.audit_pass as f64 / self.steps.max(1) as f64
    }
}

/// Step sizes shared by every run on the same grid, clipped at rule switches,
/// snapshot times and the horizon.
fn next_dt(t: f64, base: f64, rule: &dyn JunctionRule, stops: &[f64], horizon: f64) -> f64 {
    let mut end = (t + base).min(horizon).min(rule.next_switch(t));
    if let Some(&s) = stops.iter().find(|&&s| s > t + 1e-14) {
        end = end.min(s);
    }
    end - t
}

/// Advances `field` to the horizon.
pub fn simulate(field: BranchField, fluxes: &Fluxes, rule: &dyn JunctionRule, opts: &RunOptions) -> Result<Trajectory> {
    field.check_box(fluxes, 1e-12)?;
    let base = cfl_step(fluxes, field.dx, opts.cfl);
    let mut stops: Vec<f64> = opts.snapshots.iter().copied().filter(|&s| s <= opts.horizon).collect();
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();
    let mut field = field;
    let mut out = Trajectory {
        snapshots: Vec::new(),
        trace: Vec::new(),
        ledger: Vec::new(),
        last: field.clone(),
        steps: 0,
        worst_violation: 0.0,
        worst_ledger: 0.0,
        audit_pass: 0,
    };
    let mut pending = stops.iter().peekable();
    while pending.peek().is_some_and(|&&s| s <= field.t) {
        out.snapshots.push(field.clone());
        pending.next();
    }
    while field.t < opts.horizon - 1e-13 {
        let dt = next_dt(field.t, base, rule, &stops, opts.horizon);
        let cells = field.junction_cells();
        let info = step(&mut field, fluxes, rule, dt)?;
        out.steps += 1;
        out.worst_violation = out.worst_violation.max(info.node.violation);
        out.worst_ledger = out.worst_ledger.max(info.ledger_residual().abs());
        if info.node.violation <= AUDIT_TOL {
            out.audit_pass += 1;
        }
        if opts.record_steps {
            out.trace.push(TraceRow {
                t: info.t,
                phi: info.node.phi,
                trace: info.node.trace,
                cells,
            });
            out.ledger.push(LedgerRow {
                t: field.t,
                dt,
                mass: info.mass_after,
                inflow: info.inflow,
                outflow: info.outflow,
                residual: info.ledger_residual(),
            });
        }
        while pending.peek().is_some_and(|&&s| s <= field.t + 1e-12) {
            out.snapshots.push(field.clone());
            pending.next();
        }
    }
    field.check_box(fluxes, 1e-10)?;
    out.last = field;
    Ok(out)
}

/// Runs the converging problem by reversal: the data and fluxes are
/// reflected, the diverging solver runs, and the result is reflected back.
pub fn simulate_2to1(
    field: BranchField,
    fluxes: &Fluxes,
    rule_for_reversed: &dyn JunctionRule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let rf = fluxes.reversed();
    let traj = simulate(field.reversed(), &rf, rule_for_reversed, opts)?;
    let back = |t: &TraceRow| TraceRow {
        t: t.t,
        phi: t.phi,
        trace: t.trace.reversed(),
        cells: [-t.cells[0], -t.cells[1], -t.cells[2]],
    };
    Ok(Trajectory {
        snapshots: traj.snapshots.iter().map(BranchField::reversed).collect(),
        trace: traj.trace.iter().map(back).collect(),
        ledger: traj.ledger,
        last: traj.last.reversed(),
        steps: traj.steps,
        worst_violation: traj.worst_violation,
        worst_ledger: traj.worst_ledger,
        audit_pass: traj.audit_pass,
    })
}

/// `||ρ^ε(T) - ρ(T)||_1` per `ε`, against the homogenized rule on the same grid.
pub fn homogenization_error(
    field: &BranchField,
    signal: &Signal,
    fluxes: &Fluxes,
    eps_list: &[f64],
    opts: &RunOptions,
) -> Result<Vec<(f64, f64)>> {
    let reference = simulate(field.clone(), fluxes, &MacroRule::effective(signal, fluxes)?, opts)?.last;
    eps_list
        .par_iter()
        .map(|&eps| {
            let rule = MesoRule::new(signal.clone(), fluxes.clone(), eps)?;
            let run = simulate(field.clone(), fluxes, &rule, opts)?;
            Ok((eps, run.last.l1_distance(&reference)))
        })
        .collect()
}

/// Same sweep for the converging junction described by reversal of `fluxes`
/// and `field` (the diverging problem it reverses to is what is solved).
pub fn homogenization_error_2to1(
    field: &BranchField,
    signal: &Signal,
    fluxes: &Fluxes,
    eps_list: &[f64],
    opts: &RunOptions,
) -> Result<Vec<(f64, f64)>> {
    let rf = fluxes.reversed();
    let reference = simulate_2to1(field.clone(), fluxes, &MacroRule::effective(signal, &rf)?, opts)?.last;
    eps_list
        .par_iter()
        .map(|&eps| {
            let rule = MesoRule::new(signal.clone(), rf.clone(), eps)?;
            let run = simulate_2to1(field.clone(), fluxes, &rule, opts)?;
            Ok((eps, run.last.l1_distance(&reference)))
        })
        .collect()
}

/// Distance series `d(t_n)` between two runs stepped in lockstep.
pub fn kato_check(
    a: BranchField,
    b: BranchField,
    fluxes: &Fluxes,
    rule: &dyn JunctionRule,
    opts: &RunOptions,
) -> Result<Vec<(f64, f64)>> {
    if a.n() != b.n() || a.dx != b.dx {
        return Err(Error::pre("Kato check needs both data on the same grid"));
    }
    let base = cfl_step(fluxes, a.dx, opts.cfl);
    let (mut a, mut b) = (a, b);
    let mut out = vec![(a.t, a.l1_distance(&b))];
    while a.t < opts.horizon - 1e-13 {
        let dt = next_dt(a.t, base, rule, &[], opts.horizon);
        step(&mut a, fluxes, rule, dt)?;
        step(&mut b, fluxes, rule, dt)?;
        out.push((a.t, a.l1_distance(&b)));
    }
    Ok(out)
}

/// Largest one-step increase of a distance series.
pub fn worst_increase(series: &[(f64, f64)]) -> f64 {
    series.windows(2).map(|w| w[1].1 - w[0].1).fold(0.0, f64::max)
}

/// Space-time variation `V(u; Q_{R/3}(t, x))` on branch `j`: the time
/// integral over `|s - t| < R/3` of the spatial variation on
/// `|y - x| < R/3`, from snapshots taken densely in time.
pub fn bv_estimate(snapshots: &[BranchField], j: usize, center: (f64, f64), r: f64) -> Result<f64> {
    let h = r / 3.0;
    let (tc, xc) = center;
    let inside: Vec<&BranchField> = snapshots.iter().filter(|s| (s.t - tc).abs() <= h).collect();
    if inside.len() < 2 {
        return Err(Error::pre(format!("fewer than two snapshots within {h} of t = {tc}")));
    }
    let f = inside[0];
    let sign_ok = if f.incoming[j] { xc + h < 0.0 } else { xc - h > 0.0 };
    if !sign_ok {
        return Err(Error::pre(format!(
            "box around x = {xc} of half-width {h} meets the node"
        )));
    }
    let span = f.n() as f64 * f.dx;
    if xc.abs() + h > span {
        return Err(Error::pre(format!("box around x = {xc} leaves the branch")));
    }
    let tv = |s: &BranchField| -> f64 {
        let idx: Vec<usize> = (0..s.n()).filter(|&i| (s.x(j, i) - xc).abs() < h).collect();
        idx.windows(2)
            .map(|w| (s.cells[j][w[1]] - s.cells[j][w[0]]).abs())
            .sum()
    };
    let mean = inside.iter().map(|s| tv(s)).sum::<f64>() / inside.len() as f64;
    Ok(2.0 * h * mean)
}

/// Cell-average proxy of the node trace of branch `j`.
pub fn boundary_trace(traj: &Trajectory, j: usize) -> Vec<(f64, f64)> {
    traj.trace.iter().map(|r| (r.t, r.cells[j])).collect()
}
