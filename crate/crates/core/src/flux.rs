//! Strictly concave fluxes on a bounded density interval.
//!
//! A [`Flux`] lives on `[a, c]`, vanishes at both ends and peaks at `b`.
//! Besides point evaluation it provides the demand/supply envelopes, the
//! inverses on the fluid (`[a, b]`) and congested (`[b, c]`) branches and the
//! reflection `v -> f(-v)` used to turn a 2:1 junction into a 1:2 one.
//!
//! [`RestrictedFlux`] is an increasing concave piece of a shifted flux; it is
//! the Hamiltonian of the half-line Hamilton-Jacobi problems and carries the
//! closed-form Legendre-type maximizer behind [`fundamental_xi`].

use crate::error::{Error, Result};

/// Slack accepted by the checked evaluators before a density counts as
/// outside the domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `f(p) = 4 f_max (p - a)(c - p) / (c - a)^2`.
    Quadratic,
    /// Monotone cubic Hermite interpolant through sampled points.
    Sampled(Hermite),
}

#[derive(Debug, Clone, PartialEq)]
struct Hermite {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Hermite {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        let end_slope = |h0: f64, h1: f64, d0: f64, d1: f64| -> f64 {
            // One-sided three-point estimate, kept on the side of the secant.
            let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s * d0 <= 0.0 && d0 != 0.0 {
                0.0
            } else if d0 * d1 < 0.0 && s.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                s
            }
        };
        if n == 2 {
            slopes = vec![d[0]; 2];
        } else {
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], d[0], d[1]);
            slopes[n - 1] = end_slope(xs[n - 1] - xs[n - 2], xs[n - 2] - xs[n - 3], d[n - 2], d[n - 3]);
        }
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[i] = (w0 + w1) / (w0 / d[i - 1] + w1 / d[i]);
            }
        }
        Hermite { xs, ys, slopes }
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }

    fn deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.ys[i] + (-6.0 * t2 + 6.0 * t) * self.ys[i + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[i]
            + (3.0 * t2 - 2.0 * t) * self.slopes[i + 1]
    }

    fn mirrored(&self) -> Self {
        Hermite {
            xs: self.xs.iter().rev().map(|x| -x).collect(),
            ys: self.ys.iter().rev().copied().collect(),
            slopes: self.slopes.iter().rev().map(|s| -s).collect(),
        }
    }
}

/// Strictly concave flux on `[a, c]` with `f(a) = f(c) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flux {
    a: f64,
    b: f64,
    c: f64,
    f_max: f64,
    shape: Shape,
}

impl Flux {
    pub fn quadratic(a: f64, c: f64, f_max: f64) -> Result<Self> {
        if !(a.is_finite() && c.is_finite() && a < c) {
            return Err(Error::InvalidFlux(format!("need a < c, got [{a}, {c}]")));
        }
        if !(f_max > 0.0 && f_max.is_finite()) {
            return Err(Error::InvalidFlux(format!("need f_max > 0, got {f_max}")));
        }
        Ok(Flux {
            a,
            b: 0.5 * (a + c),
            c,
            f_max,
            shape: Shape::Quadratic,
        })
    }

    /// Flux interpolated through `(p, f)` samples. The samples must start and
    /// end at zero flux and the interpolant must pass a second-difference
    /// concavity test.
    pub fn sampled(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidFlux("need at least three samples".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidFlux("sample densities must increase".into()));
        }
        if ys[0].abs() > 1e-12 || ys[ys.len() - 1].abs() > 1e-12 {
            return Err(Error::InvalidFlux("flux must vanish at both ends".into()));
        }
        let herm = Hermite::new(xs.clone(), ys);
        let (a, c) = (xs[0], xs[xs.len() - 1]);
        let n = 400;
        let h = (c - a) / n as f64;
        for i in 1..n {
            let p = a + i as f64 * h;
            let dd = herm.eval(p - h) - 2.0 * herm.eval(p) + herm.eval(p + h);
            if dd >= 0.0 {
                return Err(Error::InvalidFlux(format!(
                    "interpolant is not strictly concave near p = {p}"
                )));
            }
        }
        // Golden-section search for the peak of a unimodal interpolant.
        let (mut lo, mut hi) = (a, c);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..BISECTION_STEPS {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if herm.eval(m1) < herm.eval(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let b = 0.5 * (lo + hi);
        let f_max = herm.eval(b);
        if f_max <= 0.0 {
            return Err(Error::InvalidFlux("flux must be positive inside".into()));
        }
        Ok(Flux {
            a,
            b,
            c,
            f_max,
            shape: Shape::Sampled(herm),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.shape, Shape::Quadratic)
    }

    fn quad_k(&self) -> f64 {
        4.0 * self.f_max / ((self.c - self.a) * (self.c - self.a))
    }

    /// Unchecked evaluation, used in hot loops. Densities slightly outside
    /// the domain are evaluated on the analytic continuation.
    #[inline]
    pub fn value(&self, p: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic => self.quad_k() * (p - self.a) * (self.c - p),
            Shape::Sampled(h) => h.eval(p.clamp(self.a, self.c)),
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.value(p))
    }

    fn check(&self, p: f64) -> Result<()> {
        if p.is_nan() || p < self.a - DOMAIN_SLACK || p > self.c + DOMAIN_SLACK {
            return Err(Error::Domain {
                value: p,
                lo: self.a,
                hi: self.c,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn deriv(&self, p: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic => self.quad_k() * (self.a + self.c - 2.0 * p),
            Shape::Sampled(h) => h.deriv(p.clamp(self.a, self.c)),
        }
    }

    /// Largest characteristic speed on the domain.
    pub fn max_speed(&self) -> f64 {
        self.deriv(self.a).abs().max(self.deriv(self.c).abs())
    }

    /// Demand: nondecreasing envelope, `f` up to `b` then `f_max`.
    #[inline]
    pub fn demand(&self, p: f64) -> f64 {
        if p <= self.b {
            self.value(p)
        } else {
            self.f_max
        }
    }

    /// Supply: nonincreasing envelope, `f_max` up to `b` then `f`.
    #[inline]
    pub fn supply(&self, p: f64) -> f64 {
        if p >= self.b {
            self.value(p)
        } else {
            self.f_max
        }
    }

    fn check_level(&self, lambda: f64) -> Result<f64> {
        if lambda.is_nan() || lambda < -DOMAIN_SLACK || lambda > self.f_max + DOMAIN_SLACK {
            return Err(Error::Range {
                value: lambda,
                max: self.f_max,
            });
        }
        Ok(lambda.clamp(0.0, self.f_max))
    }

    /// Fluid preimage of a flux level, in `[a, b]`.
    pub fn inv_fluid(&self, lambda: f64) -> Result<f64> {
        let l = self.check_level(lambda)?;
        Ok(self.inv_fluid_unchecked(l))
    }

    /// Congested preimage of a flux level, in `[b, c]`.
    pub fn inv_congested(&self, lambda: f64) -> Result<f64> {
        let l = self.check_level(lambda)?;
        Ok(self.inv_congested_unchecked(l))
    }

    pub(crate) fn inv_fluid_unchecked(&self, lambda: f64) -> f64 {
        let l = lambda.clamp(0.0, self.f_max);
        match &self.shape {
            Shape::Quadratic => self.b - 0.5 * (self.c - self.a) * (1.0 - l / self.f_max).max(0.0).sqrt(),
            Shape::Sampled(_) => bisect(self.a, self.b, |p| self.value(p) - l),
        }
    }

    pub(crate) fn inv_congested_unchecked(&self, lambda: f64) -> f64 {
        let l = lambda.clamp(0.0, self.f_max);
        match &self.shape {
            Shape::Quadratic => self.b + 0.5 * (self.c - self.a) * (1.0 - l / self.f_max).max(0.0).sqrt(),
            Shape::Sampled(_) => bisect(self.b, self.c, |p| l - self.value(p)),
        }
    }

    /// Density where the derivative equals `z`, clipped to the domain.
    pub fn deriv_inverse(&self, z: f64) -> f64 {
        match &self.shape {
            Shape::Quadratic => (self.b - 0.5 * z / self.quad_k()).clamp(self.a, self.c),
            Shape::Sampled(_) => {
                if z >= self.deriv(self.a) {
                    self.a
                } else if z <= self.deriv(self.c) {
                    self.c
                } else {
                    bisect(self.a, self.c, |p| z - self.deriv(p))
                }
            }
        }
    }

    /// The reflected flux `v -> f(-v)` on `[-c, -a]`. This is an involution.
    pub fn reverse(&self) -> Flux {
        let shape = match &self.shape {
            Shape::Quadratic => Shape::Quadratic,
            Shape::Sampled(h) => Shape::Sampled(h.mirrored()),
        };
        Flux {
            a: -self.c,
            b: -self.b,
            c: -self.a,
            f_max: self.f_max,
            shape,
        }
    }
}

/// Root of an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    if g(lo) >= 0.0 {
        return lo;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Increasing concave piece `g(p) = f(shift ± p) - offset` on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedFlux {
    base: Flux,
    mirror: bool,
    shift: f64,
    offset: f64,
    lo: f64,
    hi: f64,
}

impl RestrictedFlux {
    /// `g(p) = f(p)` on a subinterval of the fluid branch.
    pub fn fluid(base: &Flux, lo: f64, hi: f64) -> Result<Self> {
        if lo < base.a - DOMAIN_SLACK || hi > base.b + DOMAIN_SLACK || lo >= hi {
            return Err(Error::pre(format!(
                "[{lo}, {hi}] is not a subinterval of the fluid branch [{}, {}]",
                base.a, base.b
            )));
        }
        Ok(RestrictedFlux {
            base: base.clone(),
            mirror: false,
            shift: 0.0,
            offset: 0.0,
            lo,
            hi,
        })
    }

    /// Fluid branch seen from `center`: `g(p) = f(center + p) - f(center)` on
    /// `[a - center, b - center]`.
    pub fn fluid_around(base: &Flux, center: f64) -> Self {
        RestrictedFlux {
            base: base.clone(),
            mirror: false,
            shift: center,
            offset: base.value(center),
            lo: base.a - center,
            hi: base.b - center,
        }
    }

    /// Congested branch seen from `center` through a mirror:
    /// `g(q) = f(center - q) - f(center)` on `[center - c, center - b]`.
    pub fn congested_mirrored(base: &Flux, center: f64) -> Self {
        RestrictedFlux {
            base: base.clone(),
            mirror: true,
            shift: center,
            offset: base.value(center),
            lo: center - base.c,
            hi: center - base.b,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    fn arg(&self, p: f64) -> f64 {
        if self.mirror {
            self.shift - p
        } else {
            self.shift + p
        }
    }

    #[inline]
    pub fn value(&self, p: f64) -> f64 {
        self.base.value(self.arg(p)) - self.offset
    }

    #[inline]
    pub fn deriv(&self, p: f64) -> f64 {
        let d = self.base.deriv(self.arg(p));
        if self.mirror {
            -d
        } else {
            d
        }
    }

    /// Solves `g(p) = v`, clipped to `[lo, hi]`.
    pub fn inverse(&self, v: f64) -> f64 {
        if v <= self.value(self.lo) {
            return self.lo;
        }
        if v >= self.value(self.hi) {
            return self.hi;
        }
        let level = v + self.offset;
        let p = if self.mirror {
            self.shift - self.base.inv_congested_unchecked(level)
        } else {
            self.base.inv_fluid_unchecked(level) - self.shift
        };
        p.clamp(self.lo, self.hi)
    }

    /// Solves `g'(p) = z`, clipped to `[lo, hi]`.
    pub fn deriv_inverse(&self, z: f64) -> f64 {
        if z >= self.deriv(self.lo) {
            return self.lo;
        }
        if z <= self.deriv(self.hi) {
            return self.hi;
        }
        let p = if self.mirror {
            self.shift - self.base.deriv_inverse(-z)
        } else {
            self.base.deriv_inverse(z) - self.shift
        };
        p.clamp(self.lo, self.hi)
    }

    /// The zero of `g`, when `g(lo) <= 0 <= g(hi)`.
    pub fn root(&self) -> Option<f64> {
        let (glo, ghi) = (self.value(self.lo), self.value(self.hi));
        if glo > 1e-14 || ghi < -1e-14 {
            return None;
        }
        Some(self.inverse(0.0))
    }
}

/// Value and maximizer of `max_{p in [lo, hi]} (-p y + s g(p))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiEval {
    pub value: f64,
    pub argmax: f64,
}

/// The fundamental solution of `w_s + g(w_y)`-type half-line problems,
/// `xi(s, y) = max_{p in [lo, hi]} (-p y + s g(p))` for `s >= 0`, `y >= 0`.
/// Its partial derivatives are `-argmax` in `y` and `g(argmax)` in `s`.
pub fn fundamental_xi(g: &RestrictedFlux, s: f64, y: f64) -> XiEval {
    let argmax = if s <= 0.0 { g.lo } else { g.deriv_inverse(y / s) };
    XiEval {
        value: -argmax * y + s * g.value(argmax),
        argmax,
    }
}

/// Left-road version for `y <= 0` with `g` given in mirrored coordinates
/// (see [`RestrictedFlux::congested_mirrored`]); the maximizer is reported
/// in the original, unmirrored coordinate.
pub fn fundamental_xi_left(g_mirrored: &RestrictedFlux, s: f64, y: f64) -> XiEval {
    let e = fundamental_xi(g_mirrored, s, -y);
    XiEval {
        value: e.value,
        argmax: -e.argmax,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Flux {
        Flux::quadratic(0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn quadratic_shape() {
        let f = unit();
        assert_eq!(f.b(), 0.5);
        assert!((f.value(0.5) - 1.0).abs() < 1e-15);
        assert!(f.value(0.0).abs() < 1e-15 && f.value(1.0).abs() < 1e-15);
        assert!((f.deriv(0.0) - 4.0).abs() < 1e-15);
        assert_eq!(f.max_speed(), 4.0);
    }

    #[test]
    fn inverses_hit_the_level() {
        let f = Flux::quadratic(-0.3, 2.0, 1.7).unwrap();
        for i in 0..=50 {
            let l = f.f_max() * i as f64 / 50.0;
            let pf = f.inv_fluid(l).unwrap();
            let pc = f.inv_congested(l).unwrap();
            assert!(pf <= f.b() && pc >= f.b());
            assert!((f.value(pf) - l).abs() < 1e-12);
            assert!((f.value(pc) - l).abs() < 1e-12);
        }
        assert!((f.inv_fluid(0.75 * 1.7).unwrap() - (-0.3 + 0.25 * 2.3)).abs() < 1e-12);
    }

    #[test]
    fn domain_and_range_errors() {
        let f = unit();
        assert!(matches!(f.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(f.inv_fluid(1.2), Err(Error::Range { .. })));
        assert!(f.eval(1.0 + 1e-12).is_ok());
    }

    #[test]
    fn envelopes() {
        let f = unit();
        assert_eq!(f.demand(0.8), 1.0);
        assert!((f.demand(0.2) - f.value(0.2)).abs() < 1e-15);
        assert_eq!(f.supply(0.2), 1.0);
        assert!((f.supply(0.8) - f.value(0.8)).abs() < 1e-15);
    }

    #[test]
    fn reverse_is_mirror_and_involution() {
        let f = Flux::quadratic(0.1, 1.3, 2.0).unwrap();
        let r = f.reverse();
        assert_eq!((r.a(), r.c()), (-1.3, -0.1));
        for i in 0..=20 {
            let v = -1.3 + 1.2 * i as f64 / 20.0;
            assert!((r.value(v) - f.value(-v)).abs() < 1e-14);
        }
        assert_eq!(r.reverse(), f);

        let s = Flux::sampled(&[(0.0, 0.0), (0.25, 0.75), (0.5, 1.0), (0.75, 0.75), (1.0, 0.0)]).unwrap();
        assert_eq!(s.reverse().reverse(), s);
        assert!((s.reverse().value(-0.3) - s.value(0.3)).abs() < 1e-14);
    }

    #[test]
    fn sampled_flux_matches_samples() {
        let pts: Vec<(f64, f64)> = (0..=20)
            .map(|i| {
                let p = i as f64 / 20.0;
                (p, 4.0 * p * (1.0 - p))
            })
            .collect();
        let s = Flux::sampled(&pts).unwrap();
        assert!((s.b() - 0.5).abs() < 1e-6);
        assert!((s.f_max() - 1.0).abs() < 1e-3);
        for &(p, v) in &pts {
            assert!((s.value(p) - v).abs() < 1e-14);
        }
        let l = 0.6;
        assert!((s.value(s.inv_fluid(l).unwrap()) - l).abs() < 1e-12);
        assert!((s.value(s.inv_congested(l).unwrap()) - l).abs() < 1e-12);
    }

    #[test]
    fn sampled_rejects_convex_data() {
        let bad = [(0.0, 0.0), (0.4, 0.2), (0.6, 0.9), (1.0, 0.0)];
        assert!(Flux::sampled(&bad).is_err());
        assert!(Flux::sampled(&[(0.0, 0.1), (0.5, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn xi_matches_brute_force() {
        let f = unit();
        let g = RestrictedFlux::fluid(&f, 0.0, 0.5).unwrap();
        for &(s, y) in &[(0.0, 0.3), (1.0, 0.0), (0.7, 0.4), (0.1, 2.0), (3.0, 0.5), (2.0, 9.0)] {
            let e = fundamental_xi(&g, s, y);
            let brute = (0..=20000)
                .map(|i| {
                    let p = 0.5 * i as f64 / 20000.0;
                    -p * y + s * g.value(p)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(e.value >= brute - 1e-12, "s={s} y={y}");
            assert!(e.value - brute < 1e-6, "s={s} y={y}");
        }
    }

    #[test]
    fn xi_partials_by_finite_differences() {
        let f = unit();
        let g = RestrictedFlux::fluid_around(&f, 0.2);
        let (s, y, h) = (0.8, 0.5, 1e-6);
        let e = fundamental_xi(&g, s, y);
        let dy = (fundamental_xi(&g, s, y + h).value - fundamental_xi(&g, s, y - h).value) / (2.0 * h);
        let ds = (fundamental_xi(&g, s + h, y).value - fundamental_xi(&g, s - h, y).value) / (2.0 * h);
        assert!((dy + e.argmax).abs() < 1e-6);
        assert!((ds - g.value(e.argmax)).abs() < 1e-6);
    }

    #[test]
    fn restricted_pieces_are_increasing() {
        let f = Flux::quadratic(0.0, 1.0, 2.0).unwrap();
        let up = RestrictedFlux::fluid_around(&f, 0.3);
        let down = RestrictedFlux::congested_mirrored(&f, 0.3);
        for g in [&up, &down] {
            let n = 100;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=n {
                let p = g.lo() + (g.hi() - g.lo()) * i as f64 / n as f64;
                let v = g.value(p);
                assert!(v >= prev);
                prev = v;
                assert!((g.inverse(v) - p).abs() < 1e-9);
            }
            let r = g.root().unwrap();
            assert!(g.value(r).abs() < 1e-12);
        }
        assert!(up.root().unwrap().abs() < 1e-12);
        let z = 0.7;
        let p = down.deriv_inverse(z);
        assert!((down.deriv(p) - z).abs() < 1e-12);
    }

    #[test]
    fn left_xi_is_the_mirror() {
        let f = unit();
        let p0 = 0.3;
        let gm = RestrictedFlux::congested_mirrored(&f, p0);
        let (s, y) = (0.6, -0.25);
        let e = fundamental_xi_left(&gm, s, y);
        // Direct maximization over p in [b - p0, c - p0] of -p y + s (f(p0 + p) - f(p0)).
        let brute = (0..=20000)
            .map(|i| {
                let p = (0.5 - p0) + 0.5 * i as f64 / 20000.0;
                -p * y + s * (f.value(p0 + p) - f.value(p0))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((e.value - brute).abs() < 1e-6);
        assert!(e.argmax >= 0.5 - p0 - 1e-12);
    }
}
