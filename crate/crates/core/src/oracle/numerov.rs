//! Numerov integration of `psi'' = 2 (V - E) psi` on a uniform grid anchored
//! at `a`. Grid nodes that land on a potential step use the mean of the two
//! sides.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::BarrierSpec;

#[derive(Debug, Clone, Serialize)]
pub struct NumerovSolution {
    pub k: f64,
    pub h: f64,
    pub xs: Vec<f64>,
    /// Field normalized to unit incident amplitude.
    pub psi: Vec<Complex64>,
    pub a_t: Complex64,
    pub a_r: Complex64,
}

/// Numerov amplitudes at spacing `h` and `h / 2`, Richardson-combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumerovAmplitudes {
    pub k: f64,
    pub a_t: Complex64,
    pub a_r: Complex64,
    /// `|A_T(h) - A_T(h/2)| + |A_R(h) - A_R(h/2)|`.
    pub error: f64,
}

fn node_potential(barrier: &BarrierSpec, x: f64, h: f64) -> f64 {
    let tol = 1e-9 * h;
    if barrier.edges().iter().any(|&e| (x - e).abs() < tol) {
        0.5 * (barrier.potential(x - tol * 10.0) + barrier.potential(x + tol * 10.0))
    } else {
        barrier.potential(x)
    }
}

/// Integrates from the transmitted side (`psi = exp(i k x)` past `b`) to the
/// incident side and reads the amplitudes off two nodes left of `a`.
pub fn numerov_solve(barrier: &BarrierSpec, k: f64, h: f64) -> Result<NumerovSolution> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive and finite, got {k}")));
    }
    if !(h > 0.0) || h * k > 0.5 {
        return Err(Error::Resolution(format!("Numerov spacing {h} too coarse for k = {k}")));
    }
    let e = 0.5 * k * k;
    let a = barrier.a();
    let cells = (barrier.width() / h).round() as i64;
    // two free nodes on each side
    let n = (cells + 5) as usize;
    let xs: Vec<f64> = (0..n).map(|j| a + (j as f64 - 2.0) * h).collect();
    let f: Vec<f64> = xs
        .iter()
        .map(|&x| 2.0 * (node_potential(barrier, x, h) - e))
        .collect();
    let c = h * h / 12.0;
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    for j in [n - 1, n - 2] {
        psi[j] = Complex64::from_polar(1.0, k * xs[j]);
    }
    if xs[n - 2] < barrier.b() - 1e-9 * h {
        return Err(Error::Resolution(format!(
            "Numerov grid with h = {h} does not reach past b = {}",
            barrier.b()
        )));
    }
    let mut scale = 0.0;
    for j in (1..n - 1).rev() {
        psi[j - 1] = (2.0 * (1.0 + 5.0 * c * f[j]) * psi[j] - (1.0 - c * f[j + 1]) * psi[j + 1])
            / (1.0 - c * f[j - 1]);
        let m = psi[j - 1].norm();
        if m > 1e150 {
            // keep magnitudes finite through very opaque barriers
            for v in psi.iter_mut() {
                *v /= m;
            }
            scale += m.ln();
        }
    }
    // psi = alpha e^{ikx} + beta e^{-ikx} at nodes 0 and 1
    let (x0, x1) = (xs[0], xs[1]);
    let e0 = Complex64::from_polar(1.0, k * x0);
    let e1 = Complex64::from_polar(1.0, k * x1);
    let det = e0 * e1.conj() - e1 * e0.conj();
    let alpha = (psi[0] * e1.conj() - psi[1] * e0.conj()) / det;
    let beta = (e0 * psi[1] - e1 * psi[0]) / det;
    let a_t = (-scale).exp() / alpha;
    let a_r = beta / alpha;
    for v in psi.iter_mut() {
        *v /= alpha;
    }
    Ok(NumerovSolution {
        k,
        h,
        xs,
        psi,
        a_t,
        a_r,
    })
}

/// Amplitudes from spacings `h` and `h / 2` with one Richardson step
/// (`O(h^2)` leading error from the potential steps).
pub fn numerov_amplitudes(barrier: &BarrierSpec, k: f64, h: f64) -> Result<NumerovAmplitudes> {
    let c = numerov_solve(barrier, k, h)?;
    let f = numerov_solve(barrier, k, 0.5 * h)?;
    Ok(NumerovAmplitudes {
        k,
        a_t: (4.0 * f.a_t - c.a_t) / 3.0,
        a_r: (4.0 * f.a_r - c.a_r) / 3.0,
        error: (f.a_t - c.a_t).norm() + (f.a_r - c.a_r).norm(),
    })
}
