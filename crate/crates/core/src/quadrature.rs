//! Quadrature helpers shared by the packet and time modules.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Quadrature nodes with weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct XGrid {
    pub xs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl XGrid {
    /// Uniform grid with trapezoid weights.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 3 || !(hi > lo) {
            return Err(Error::Domain(format!(
                "uniform grid needs hi > lo and >= 3 points (got [{lo}, {hi}], {points})"
            )));
        }
        let h = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
        let mut weights = vec![h; points];
        weights[0] = 0.5 * h;
        weights[points - 1] = 0.5 * h;
        Ok(Self { xs, weights })
    }

    /// Composite Gauss-Legendre rule whose panel edges include every breakpoint
    /// inside `(lo, hi)`.
    pub fn panels(lo: f64, hi: f64, breakpoints: &[f64], max_width: f64, order: usize) -> Result<Self> {
        if !(hi > lo) || !(max_width > 0.0) || order == 0 {
            return Err(Error::Domain(format!(
                "panel grid needs hi > lo, positive panel width and order (got [{lo}, {hi}], {max_width}, {order})"
            )));
        }
        let mut cuts = vec![lo];
        cuts.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        cuts.sort_by(|l, r| l.partial_cmp(r).unwrap());
        cuts.dedup();
        let (gx, gw) = gauss_legendre(order);
        let mut xs = Vec::new();
        let mut weights = Vec::new();
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            let pieces = ((r - l) / max_width).ceil().max(1.0) as usize;
            let h = (r - l) / pieces as f64;
            for p in 0..pieces {
                let pl = l + p as f64 * h;
                let mid = pl + 0.5 * h;
                for (x, wt) in gx.iter().zip(&gw) {
                    xs.push(mid + 0.5 * h * x);
                    weights.push(0.5 * h * wt);
                }
            }
        }
        Ok(Self { xs, weights })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Trapezoid weights for a uniform grid of `n` points with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Adaptive Simpson integration with a relative tolerance on the whole-interval
/// estimate plus an absolute floor.
pub fn adaptive_simpson<F>(f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    const MAX_DEPTH: u32 = 40;
    let flo = f(lo);
    let fhi = f(hi);
    let mid = 0.5 * (lo + hi);
    let fmid = f(mid);
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    // coarse magnitude estimate from a 9-point pass for the relative target
    let probe: f64 = (0..=8)
        .map(|i| f(lo + (hi - lo) * i as f64 / 8.0).abs())
        .sum::<f64>()
        * (hi - lo)
        / 9.0;
    let tol = (rel_tol * probe.max(whole.abs())).max(abs_tol);
    recurse(&f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let flm = f(lm);
    let frm = f(rm);
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Resolution(format!(
            "adaptive Simpson did not converge on [{lo}, {hi}]"
        )));
    }
    Ok(recurse(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)?
        + recurse(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=16 {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n = {n}, p = {p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn panel_grid_respects_breakpoints() {
        let g = XGrid::panels(-1.0, 2.0, &[0.0, 0.3, 5.0], 0.4, 8).unwrap();
        let total: f64 = g.weights.iter().sum();
        assert!((total - 3.0).abs() < 1e-13);
        // step function integrates exactly when the step is a breakpoint
        let vals: Vec<f64> = g.xs.iter().map(|&x| if x < 0.3 { 1.0 } else { 2.0 }).collect();
        assert!((g.integrate(&vals) - (1.3 + 2.0 * 1.7)).abs() < 1e-13);
    }

    #[test]
    fn uniform_trapezoid() {
        let g = XGrid::uniform(0.0, 1.0, 101).unwrap();
        let vals: Vec<f64> = g.xs.iter().map(|x| x * x).collect();
        assert!((g.integrate(&vals) - 1.0 / 3.0).abs() < 2e-5);
        assert!(XGrid::uniform(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn simpson_converges() {
        let v = adaptive_simpson(|x: f64| x.sin().powi(2), 0.0, 3.0, 1e-12, 1e-15).unwrap();
        let exact = 1.5 - (6.0f64).sin() / 4.0;
        assert!((v - exact).abs() < 1e-11);
    }
}
