//! The 1-periodic traffic-light signal: a piecewise-constant flux limiter
//! together with the green phase (exit branch 1 or 2) active on each piece.

use crate::error::{Error, Result};
use crate::germ::Fluxes;

/// Exit branch that is green.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    One,
    Two,
}

impl Phase {
    pub fn from_index(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Phase::One),
            2 => Ok(Phase::Two),
            _ => Err(Error::InvalidSignal(format!("phase must be 1 or 2, got {k}"))),
        }
    }

    /// Branch index, 1 or 2.
    pub fn branch(self) -> usize {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Phase::One => Phase::Two,
            Phase::Two => Phase::One,
        }
    }
}

/// One constant piece `[start, end)` of the signal within `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub limiter: f64,
    pub phase: Phase,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Right-continuous, 1-periodic, piecewise-constant limiter and phase map.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    segments: Vec<Segment>,
    /// `B` at each segment start; `cum[n] = mean limiter`.
    cum: Vec<f64>,
}

impl Signal {
    /// Builds a signal from consecutive `(duration, phase, limiter)` pieces
    /// whose durations sum to one period.
    pub fn from_durations(pieces: &[(f64, Phase, f64)]) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidSignal("signal has no segments".into()));
        }
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSignal(format!(
                "segment durations must sum to the period 1, got {total}"
            )));
        }
        let mut segments = Vec::with_capacity(pieces.len());
        let mut t = 0.0;
        for (i, &(d, phase, a)) in pieces.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidSignal(format!("segment {i} has duration {d}")));
            }
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidSignal(format!("segment {i} has limiter {a}")));
            }
            let end = if i + 1 == pieces.len() { 1.0 } else { t + d };
            segments.push(Segment {
                start: t,
                end,
                limiter: a,
                phase,
            });
            t = end;
        }
        Self::from_segments(segments)
    }

    /// Builds a signal from explicit segments covering `[0, 1)`.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() || segments[0].start != 0.0 || segments[segments.len() - 1].end != 1.0 {
            return Err(Error::InvalidSignal("segments must cover [0, 1)".into()));
        }
        if segments.windows(2).any(|w| w[0].end != w[1].start) || segments.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidSignal("segments must be sorted and contiguous".into()));
        }
        let mut cum = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for s in &segments {
            acc += s.limiter * s.len();
            cum.push(acc);
        }
        Ok(Signal { segments, cum })
    }

    /// Constant limiter with a single phase for the whole period.
    pub fn constant(limiter: f64, phase: Phase) -> Result<Self> {
        Self::from_durations(&[(1.0, phase, limiter)])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Breakpoints (segment starts) within `[0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).collect()
    }

    fn index(&self, t: f64) -> usize {
        let s = t - t.floor();
        let k = self.segments.partition_point(|seg| seg.start <= s);
        k.saturating_sub(1)
    }

    /// Segment active at `t`, right-continuous.
    pub fn segment_at(&self, t: f64) -> &Segment {
        &self.segments[self.index(t)]
    }

    pub fn limiter(&self, t: f64) -> f64 {
        self.segment_at(t).limiter
    }

    pub fn phase(&self, t: f64) -> Phase {
        self.segment_at(t).phase
    }

    /// `1_{I^k}(t)` for `k` in `{1, 2}`.
    pub fn indicator(&self, k: usize, t: f64) -> bool {
        self.phase(t).branch() == k
    }

    /// Mean limiter over a period, the total effective limiter.
    pub fn mean(&self) -> f64 {
        self.cum[self.segments.len()]
    }

    /// Mean of `A 1_{I^k}`.
    pub fn phase_mean(&self, k: usize) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.phase.branch() == k)
            .map(|s| s.limiter * s.len())
            .sum()
    }

    /// Antiderivative `B` of the limiter with `B(0) = 0`, exact.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let n = t.floor();
        let s = t - n;
        let i = self.index(s);
        let seg = &self.segments[i];
        n * self.mean() + self.cum[i] + seg.limiter * (s - seg.start)
    }

    /// Next breakpoint strictly after `t` (in absolute time).
    pub fn next_breakpoint(&self, t: f64) -> f64 {
        let n = t.floor();
        let s = t - n;
        let i = self.index(s);
        n + self.segments[i].end
    }

    /// Same phases with the limiter replaced by `A 1_{I^k}`.
    pub fn restricted_to(&self, k: usize) -> Signal {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                limiter: if s.phase.branch() == k { s.limiter } else { 0.0 },
                ..*s
            })
            .collect();
        Signal::from_segments(segments).expect("restriction keeps a valid layout")
    }

    /// Checks the cap `0 <= A <= min(f0_max, fk_max)` on each phase-k piece.
    pub fn validate_caps(&self, fluxes: &Fluxes) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            let k = s.phase.branch();
            let cap = fluxes[0].f_max().min(fluxes[k].f_max());
            if s.limiter > cap + 1e-12 {
                return Err(Error::InvalidSignal(format!(
                    "limiter cap violated on segment {i} (phase {k}): A = {} exceeds \
                     min(f0_max, f{k}_max) = {cap}; the light cannot pass more than \
                     either road carries",
                    s.limiter
                )));
            }
        }
        Ok(())
    }

    /// Short stable fingerprint of the signal contents.
    pub fn fingerprint(&self) -> String {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for s in &self.segments {
            s.start.to_bits().hash(&mut h);
            s.end.to_bits().hash(&mut h);
            s.limiter.to_bits().hash(&mut h);
            s.phase.hash(&mut h);
        }
        format!("{:016x}", h.finish())
    }
}
