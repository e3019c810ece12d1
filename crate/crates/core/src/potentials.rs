//! Symmetric piecewise-constant barriers.
//!
//! Units throughout the crate: `hbar = m = 1`, so `E = k^2 / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing widths and positions that are
/// produced by floating-point sums.
const POSITION_RTOL: f64 = 1e-12;

/// One constant-potential slab of the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub width: f64,
    pub height: f64,
}

/// A mirror-symmetric barrier on `[a, b]` built from constant segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    a: f64,
    b: f64,
    segments: Vec<Segment>,
    edges: Vec<f64>,
}

impl BarrierSpec {
    /// Builds a barrier from an explicit segment list and validates it.
    pub fn new(a: f64, segments: Vec<Segment>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidBarrier("left edge a must be finite".into()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidBarrier("segment list is empty".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.width.is_finite() && s.width > 0.0) {
                return Err(Error::InvalidBarrier(format!(
                    "segment {i}: width must be positive and finite, got {}",
                    s.width
                )));
            }
            if !s.height.is_finite() {
                return Err(Error::InvalidBarrier(format!(
                    "segment {i}: height must be finite, got {}",
                    s.height
                )));
            }
        }
        let total: f64 = segments.iter().map(|s| s.width).sum();
        let b = a + total;
        let mut segments = segments;
        // Last width absorbs the rounding of the running sum so widths add
        // up to b - a.
        let n = segments.len();
        if n > 1 {
            let head: f64 = segments[..n - 1].iter().map(|s| s.width).sum();
            let rest = (b - a) - head;
            if rest > 0.0 {
                segments[n - 1].width = rest;
            }
        } else {
            segments[0].width = b - a;
        }
        let mut edges = Vec::with_capacity(n + 1);
        let mut x = a;
        edges.push(a);
        for s in &segments[..n - 1] {
            x += s.width;
            edges.push(x);
        }
        edges.push(b);
        let barrier = Self {
            a,
            b,
            segments,
            edges,
        };
        barrier.validate()?;
        Ok(barrier)
    }

    /// Checks `b > a`, positive widths summing to `b - a`, and mirror symmetry
    /// (heights exact, widths to rounding).
    pub fn validate(&self) -> Result<()> {
        if !(self.b > self.a) {
            return Err(Error::InvalidBarrier(format!(
                "need b > a, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        let span = self.b - self.a;
        let total: f64 = self.segments.iter().map(|s| s.width).sum();
        if (total - span).abs() > POSITION_RTOL * span.max(1.0) {
            return Err(Error::InvalidBarrier(format!(
                "widths sum to {total}, expected b - a = {span}"
            )));
        }
        let n = self.segments.len();
        for i in 0..n / 2 {
            let l = self.segments[i];
            let r = self.segments[n - 1 - i];
            if l.height != r.height {
                return Err(Error::InvalidBarrier(format!(
                    "asymmetric heights: segment {i} has {}, mirror segment {} has {}",
                    l.height,
                    n - 1 - i,
                    r.height
                )));
            }
            if (l.width - r.width).abs() > POSITION_RTOL * span.max(1.0) {
                return Err(Error::InvalidBarrier(format!(
                    "asymmetric widths: segment {i} has {}, mirror segment {} has {}",
                    l.width,
                    n - 1 - i,
                    r.width
                )));
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Barrier midpoint `(a + b) / 2`.
    pub fn x_c(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segment boundaries, `edges[0] = a` and `edges[n] = b`.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Index of the segment containing `x` (clamped to the barrier).
    pub fn segment_index(&self, x: f64) -> usize {
        let n = self.segments.len();
        match self.edges[1..n].binary_search_by(|e| e.partial_cmp(&x).unwrap()) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(n - 1)
    }

    /// Potential at `x`; zero outside `[a, b]`.
    pub fn potential(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            0.0
        } else {
            self.segments[self.segment_index(x)].height
        }
    }

    /// Mean of the potential over `[lo, hi]`, exact for the piecewise-constant
    /// profile. Used by grid-based solvers to place discontinuities.
    pub fn cell_average(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(hi > lo);
        let mut acc = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let l = self.edges[i].max(lo);
            let r = self.edges[i + 1].min(hi);
            if r > l {
                acc += s.height * (r - l);
            }
        }
        acc / (hi - lo)
    }

    pub fn max_height(&self) -> f64 {
        self.segments.iter().map(|s| s.height).fold(f64::MIN, f64::max)
    }

    /// True when any segment lies below zero. The model equations do not forbid
    /// wells, but nothing here has been validated against them.
    pub fn has_wells(&self) -> bool {
        self.segments.iter().any(|s| s.height < 0.0)
    }

    /// Copy with every segment height shifted by `delta`. The shift is confined
    /// to `[a, b]`.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                width: s.width,
                height: s.height + delta,
            })
            .collect();
        Self::new(self.a, segments)
    }

    /// Breakpoints of every piecewise-smooth field on the barrier: segment
    /// edges plus the midpoint, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = self.edges.clone();
        let xc = self.x_c();
        if !pts.iter().any(|&e| (e - xc).abs() <= POSITION_RTOL * self.width()) {
            pts.push(xc);
        }
        pts.sort_by(|l, r| l.partial_cmp(r).unwrap());
        pts
    }
}

/// Single-segment barrier of height `v0` on `[a, b]`.
pub fn make_rectangular(a: f64, b: f64, v0: f64) -> Result<BarrierSpec> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidBarrier("edges must be finite".into()));
    }
    if !(b > a) {
        return Err(Error::InvalidBarrier(format!(
            "need b > a, got a = {a}, b = {b}"
        )));
    }
    if !v0.is_finite() {
        return Err(Error::InvalidBarrier(format!(
            "height must be finite, got {v0}"
        )));
    }
    BarrierSpec::new(
        a,
        vec![Segment {
            width: b - a,
            height: v0,
        }],
    )
}

/// Barrier formed by `half_profile` (left half, outside in) followed by its
/// mirror image.
pub fn make_symmetric(a: f64, half_profile: &[(f64, f64)]) -> Result<BarrierSpec> {
    if half_profile.is_empty() {
        return Err(Error::InvalidBarrier("half profile is empty".into()));
    }
    let half: Vec<Segment> = half_profile
        .iter()
        .map(|&(width, height)| Segment { width, height })
        .collect();
    let mut segments = half.clone();
    segments.extend(half.iter().rev().copied());
    BarrierSpec::new(a, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_examples() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        assert_eq!(b.segments().len(), 1);
        assert_eq!(b.segments()[0].width, 1.0);
        assert_eq!(b.segments()[0].height, 2.0);
        assert_eq!(b.x_c(), 0.5);

        let free = make_rectangular(0.0, 1.0, 0.0).unwrap();
        assert_eq!(free.segments()[0].height, 0.0);

        assert_eq!(make_rectangular(-1.0, 1.0, 5.0).unwrap().x_c(), 0.0);
    }

    #[test]
    fn rectangular_rejects_bad_input() {
        assert!(make_rectangular(1.0, 1.0, 1.0).is_err());
        assert!(make_rectangular(1.0, 0.0, 1.0).is_err());
        assert!(make_rectangular(0.0, 1.0, f64::NAN).is_err());
        assert!(make_rectangular(0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn symmetric_examples() {
        let r = make_symmetric(0.0, &[(0.5, 1.0)]).unwrap();
        assert_eq!(r.a(), 0.0);
        assert_eq!(r.b(), 1.0);
        assert!(r.segments().iter().all(|s| s.height == 1.0));

        let st = make_symmetric(0.0, &[(0.25, 1.0), (0.25, 2.0)]).unwrap();
        let heights: Vec<f64> = st.segments().iter().map(|s| s.height).collect();
        assert_eq!(heights, vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(st.x_c(), 0.5);
        st.validate().unwrap();

        assert!(make_symmetric(0.0, &[]).is_err());
        assert!(make_symmetric(0.0, &[(-0.1, 1.0)]).is_err());
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let err = BarrierSpec::new(
            0.0,
            vec![
                Segment { width: 0.5, height: 1.0 },
                Segment { width: 0.5, height: 2.0 },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidBarrier(_)));
    }

    #[test]
    fn potential_lookup_and_average() {
        let st = make_symmetric(0.0, &[(0.25, 1.0), (0.25, 2.0)]).unwrap();
        assert_eq!(st.potential(-0.1), 0.0);
        assert_eq!(st.potential(0.1), 1.0);
        assert_eq!(st.potential(0.3), 2.0);
        assert_eq!(st.potential(0.9), 1.0);
        assert_eq!(st.potential(1.1), 0.0);
        let avg = st.cell_average(0.2, 0.3);
        assert!((avg - 1.5).abs() < 1e-14);
        assert_eq!(st.breakpoints(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);

        let r = make_rectangular(0.0, 1.0, 2.0).unwrap();
        assert_eq!(r.breakpoints(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn wells_are_flagged() {
        let w = make_symmetric(0.0, &[(0.5, -1.0)]).unwrap();
        assert!(w.has_wells());
        assert!(!make_rectangular(0.0, 1.0, 1.0).unwrap().has_wells());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn half_profile() -> impl Strategy<Value = Vec<(f64, f64)>> {
            prop::collection::vec((0.05f64..2.0, -1.0f64..5.0), 1..6)
        }

        proptest! {
            #[test]
            fn mirror_symmetric_potential(
                a in -5.0f64..5.0,
                half in half_profile(),
                u in 0.0f64..1.0,
            ) {
                let b = make_symmetric(a, &half).unwrap();
                prop_assert!(b.validate().is_ok());
                prop_assert_eq!(b.x_c(), 0.5 * (b.a() + b.b()));
                let total: f64 = b.segments().iter().map(|s| s.width).sum();
                prop_assert!((total - (b.b() - b.a())).abs() <= 1e-12 * b.width().max(1.0));
                let x = b.a() + u * b.width();
                let mirror = 2.0 * b.x_c() - x;
                let near_edge = b.edges().iter().any(|e| (e - x).abs() < 1e-9);
                if !near_edge {
                    prop_assert_eq!(b.potential(x), b.potential(mirror));
                }
            }
        }
    }
}
