//! Piecewise-linear curves: finite tables with constant extension and
//! 1-periodic profiles.

use crate::error::{Error, Result};

/// Piecewise-linear interpolant through `(x, y)` nodes, extended by constants
/// outside the node range.
#[derive(Debug, Clone, PartialEq)]
pub struct PlCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PlCurve {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::pre("curve needs matching, nonempty node arrays"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::pre("curve nodes must strictly increase"));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::pre("curve nodes must be finite"));
        }
        Ok(PlCurve { xs, ys })
    }

    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            points.iter().map(|p| p.0).collect(),
            points.iter().map(|p| p.1).collect(),
        )
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.ys.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// Largest `x` in `[x_lo, x_hi]` with `eval(x) <= level`, for a
    /// nondecreasing curve. Returns `None` when even `eval(x_lo) > level`.
    pub fn sup_sublevel(&self, level: f64, x_lo: f64, x_hi: f64) -> Option<f64> {
        if self.eval(x_lo) > level {
            return None;
        }
        if self.eval(x_hi) <= level {
            return Some(x_hi);
        }
        // First node above x_lo whose value exceeds the level.
        let start = self.xs.partition_point(|&v| v <= x_lo);
        let mut prev_x = x_lo;
        let mut prev_y = self.eval(x_lo);
        for k in start..self.xs.len() {
            let (xk, yk) = (self.xs[k].min(x_hi), self.eval(self.xs[k].min(x_hi)));
            if yk > level {
                if yk == prev_y {
                    return Some(prev_x);
                }
                let x = prev_x + (level - prev_y) * (xk - prev_x) / (yk - prev_y);
                return Some(x.clamp(prev_x, xk));
            }
            prev_x = xk;
            prev_y = yk;
            if self.xs[k] >= x_hi {
                break;
            }
        }
        Some(x_hi)
    }
}

/// 1-periodic continuous piecewise-linear function given by knots on `[0, 1]`
/// with equal end values.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPl {
    ts: Vec<f64>,
    vs: Vec<f64>,
}

impl PeriodicPl {
    pub fn new(ts: Vec<f64>, vs: Vec<f64>) -> Result<Self> {
        if ts.len() < 2 || ts.len() != vs.len() {
            return Err(Error::pre("periodic profile needs at least two knots"));
        }
        if ts[0] != 0.0 || ts[ts.len() - 1] != 1.0 {
            return Err(Error::pre("periodic knots must span [0, 1]"));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::pre("periodic knots must strictly increase"));
        }
        let gap = (vs[0] - vs[vs.len() - 1]).abs();
        if gap > 1e-9 * (1.0 + vs[0].abs()) {
            return Err(Error::pre(format!("profile is not periodic (gap {gap:e})")));
        }
        let mut vs = vs;
        let n = vs.len();
        vs[n - 1] = vs[0];
        Ok(PeriodicPl { ts, vs })
    }

    pub fn constant(v: f64) -> Self {
        PeriodicPl {
            ts: vec![0.0, 1.0],
            vs: vec![v, v],
        }
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts.iter().copied().zip(self.vs.iter().copied())
    }

    pub fn is_constant(&self) -> bool {
        self.vs.iter().all(|&v| v == self.vs[0])
    }

    pub fn max(&self) -> f64 {
        self.vs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.vs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = t - t.floor();
        let k = self.ts.partition_point(|&v| v <= s).clamp(1, self.ts.len() - 1);
        let (t0, t1) = (self.ts[k - 1], self.ts[k]);
        let (v0, v1) = (self.vs[k - 1], self.vs[k]);
        v0 + (v1 - v0) * (s - t0) / (t1 - t0)
    }

    /// Linear pieces `(start, end, slope)` meeting `[t_lo, t_hi]`, in
    /// absolute time, clipped to the window.
    pub fn pieces(&self, t_lo: f64, t_hi: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut period = t_lo.floor();
        while period < t_hi {
            for k in 1..self.ts.len() {
                let s = period + self.ts[k - 1];
                let e = period + self.ts[k];
                if e <= t_lo || s >= t_hi {
                    continue;
                }
                let slope = (self.vs[k] - self.vs[k - 1]) / (self.ts[k] - self.ts[k - 1]);
                out.push((s.max(t_lo), e.min(t_hi), slope));
            }
            period += 1.0;
        }
        out
    }
}
