//! Crank-Nicolson propagation of `i psi_t = -psi_xx / 2 + V psi` with a
//! fourth-order compact (Numerov) discretization in space and zero Dirichlet
//! walls. Every step is a tridiagonal solve.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::BarrierSpec;

/// Density in the outer wall layers that counts as contamination.
pub const WALL_DENSITY: f64 = 1e-8;
/// Fraction of the grid at each end watched for contamination.
const WALL_FRACTION: f64 = 0.02;

/// Uniform spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub h: f64,
}

impl GridSpec {
    /// Grid on `[x_lo, x_hi]` whose nodes contain `anchor` (typically `a`).
    pub fn anchored(x_lo: f64, x_hi: f64, h: f64, anchor: f64) -> Result<Self> {
        if !(x_hi > x_lo) || !(h > 0.0) {
            return Err(Error::Domain(format!(
                "grid needs x_hi > x_lo and h > 0 (got [{x_lo}, {x_hi}], {h})"
            )));
        }
        let lo = anchor - ((anchor - x_lo) / h).ceil() * h;
        let hi = anchor + ((x_hi - anchor) / h).ceil() * h;
        Ok(Self { x_lo: lo, x_hi: hi, h })
    }

    pub fn points(&self) -> usize {
        ((self.x_hi - self.x_lo) / self.h).round() as usize + 1
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points()).map(|j| self.x_lo + j as f64 * self.h).collect()
    }
}

/// Factorized propagator for one grid, potential and time step.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    grid: GridSpec,
    dt: f64,
    /// LHS `B + i dt/2 M` in Thomas form: sub-diagonal, modified super
    /// diagonal and inverse pivots.
    lower: Vec<Complex64>,
    upper: Vec<Complex64>,
    pivot_inv: Vec<Complex64>,
    /// RHS `B - i dt/2 M` diagonals.
    r_lower: Vec<Complex64>,
    r_diag: Vec<Complex64>,
    r_upper: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

fn node_potential(barrier: &BarrierSpec, x: f64, h: f64) -> f64 {
    let tol = 1e-9 * h;
    if barrier.edges().iter().any(|&e| (x - e).abs() < tol) {
        0.5 * (barrier.potential(x - 10.0 * tol) + barrier.potential(x + 10.0 * tol))
    } else {
        barrier.potential(x)
    }
}

impl CrankNicolson {
    pub fn new(barrier: &BarrierSpec, grid: GridSpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let xs = grid.xs();
        if xs.len() < 8 {
            return Err(Error::Resolution("Crank-Nicolson grid needs at least 8 nodes".into()));
        }
        let v: Vec<f64> = xs.iter().map(|&x| node_potential(barrier, x, grid.h)).collect();
        // interior unknowns 1..n-1
        let m = xs.len() - 2;
        let h2 = grid.h * grid.h;
        let half = Complex64::new(0.0, 0.5 * dt);
        let (mut lo, mut di, mut up) = (vec![Complex64::default(); m], vec![Complex64::default(); m], vec![Complex64::default(); m]);
        let (mut rl, mut rd, mut ru) = (lo.clone(), di.clone(), up.clone());
        for i in 0..m {
            let j = i + 1;
            let (m_l, m_d, m_u) = (
                -0.5 / h2 + v[j - 1] / 12.0,
                1.0 / h2 + 10.0 * v[j] / 12.0,
                -0.5 / h2 + v[j + 1] / 12.0,
            );
            let (b_o, b_d) = (1.0 / 12.0, 10.0 / 12.0);
            lo[i] = b_o + half * m_l;
            di[i] = b_d + half * m_d;
            up[i] = b_o + half * m_u;
            rl[i] = b_o - half * m_l;
            rd[i] = b_d - half * m_d;
            ru[i] = b_o - half * m_u;
        }
        // Thomas factorization of the constant left-hand side
        let mut upper = vec![Complex64::default(); m];
        let mut pivot_inv = vec![Complex64::default(); m];
        let mut prev = Complex64::default();
        for i in 0..m {
            let p = di[i] - if i > 0 { lo[i] * prev } else { Complex64::default() };
            pivot_inv[i] = 1.0 / p;
            prev = up[i] * pivot_inv[i];
            upper[i] = prev;
        }
        Ok(Self {
            grid,
            dt,
            lower: lo,
            upper,
            pivot_inv,
            r_lower: rl,
            r_diag: rd,
            r_upper: ru,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step in place; the wall values stay zero.
    pub fn step(&self, psi: &mut [Complex64]) {
        let m = psi.len() - 2;
        let mut rhs = vec![Complex64::default(); m];
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = self.r_lower[i] * psi[i] + self.r_diag[i] * psi[i + 1] + self.r_upper[i] * psi[i + 2];
        }
        // forward sweep
        let mut y = vec![Complex64::default(); m];
        for i in 0..m {
            let carry = if i > 0 { self.lower[i] * y[i - 1] } else { Complex64::default() };
            y[i] = (rhs[i] - carry) * self.pivot_inv[i];
        }
        // back substitution
        for i in (0..m - 1).rev() {
            y[i] = y[i] - self.upper[i] * y[i + 1];
        }
        psi[1..=m].copy_from_slice(&y);
        psi[0] = Complex64::default();
        psi[m + 1] = Complex64::default();
    }

    fn wall_density(&self, psi: &[Complex64]) -> f64 {
        let n = psi.len();
        let layer = ((n as f64 * WALL_FRACTION) as usize).max(2);
        psi[..layer]
            .iter()
            .chain(&psi[n - layer..])
            .map(|v| v.norm_sqr())
            .fold(0.0, f64::max)
    }

    /// Propagates `psi0` from time 0 and records the state at every entry of
    /// `record` (nonnegative, ascending, multiples of `dt` up to rounding).
    pub fn propagate(&self, psi0: &[Complex64], record: &[f64]) -> Result<Trajectory> {
        if psi0.len() != self.grid.points() {
            return Err(Error::Domain(format!(
                "initial state has {} samples for a grid of {}",
                psi0.len(),
                self.grid.points()
            )));
        }
        if record.windows(2).any(|w| w[1] < w[0]) || record.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Domain("record times must be nonnegative and ascending".into()));
        }
        let mut psi = psi0.to_vec();
        psi[0] = Complex64::default();
        let last = psi.len() - 1;
        psi[last] = Complex64::default();
        let mut out = Trajectory {
            times: Vec::with_capacity(record.len()),
            states: Vec::with_capacity(record.len()),
        };
        let mut steps_done = 0usize;
        for &t in record {
            let target = (t / self.dt).round() as usize;
            while steps_done < target {
                self.step(&mut psi);
                steps_done += 1;
                if steps_done.is_multiple_of(64) {
                    let d = self.wall_density(&psi);
                    if d > WALL_DENSITY {
                        return Err(Error::BoundaryContamination {
                            step: steps_done,
                            density: d,
                        });
                    }
                }
            }
            let d = self.wall_density(&psi);
            if d > WALL_DENSITY {
                return Err(Error::BoundaryContamination {
                    step: steps_done,
                    density: d,
                });
            }
            out.times.push(steps_done as f64 * self.dt);
            out.states.push(psi.clone());
        }
        Ok(out)
    }
}

/// Crank-Nicolson at `dt` and `dt / 2`, combined by one Richardson step in
/// `dt^2`.
pub fn propagate_richardson(
    barrier: &BarrierSpec,
    grid: GridSpec,
    dt: f64,
    psi0: &[Complex64],
    record: &[f64],
) -> Result<Trajectory> {
    let coarse = CrankNicolson::new(barrier, grid, dt)?.propagate(psi0, record)?;
    let fine = CrankNicolson::new(barrier, grid, 0.5 * dt)?.propagate(psi0, record)?;
    let states = coarse
        .states
        .iter()
        .zip(&fine.states)
        .map(|(c, f)| c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
        .collect();
    Ok(Trajectory {
        times: fine.times,
        states,
    })
}

/// Richardson in both `dt` and `h`: runs [`propagate_richardson`] on `grid`
/// and on the grid with half the spacing, then combines them on the nodes of
/// `grid`. `psi0_fine` is sampled on the half-spacing grid.
pub fn propagate_extrapolated(
    barrier: &BarrierSpec,
    grid: GridSpec,
    dt: f64,
    psi0_fine: &[Complex64],
    record: &[f64],
) -> Result<Trajectory> {
    let fine_grid = GridSpec {
        h: 0.5 * grid.h,
        ..grid
    };
    if psi0_fine.len() != fine_grid.points() {
        return Err(Error::Domain(format!(
            "fine initial state has {} samples for a grid of {}",
            psi0_fine.len(),
            fine_grid.points()
        )));
    }
    let psi0: Vec<Complex64> = psi0_fine.iter().step_by(2).copied().collect();
    let coarse = propagate_richardson(barrier, grid, dt, &psi0, record)?;
    let fine = propagate_richardson(barrier, fine_grid, dt, psi0_fine, record)?;
    let states = coarse
        .states
        .iter()
        .zip(&fine.states)
        .map(|(c, f)| {
            c.iter()
                .zip(f.iter().step_by(2))
                .map(|(c, f)| (4.0 * f - c) / 3.0)
                .collect()
        })
        .collect();
    Ok(Trajectory {
        times: coarse.times,
        states,
    })
}

/// `sqrt(h sum |u - v|^2)`.
pub fn l2_distance(h: f64, u: &[Complex64], v: &[Complex64]) -> f64 {
    (h * u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_rectangular;

    fn gaussian(xs: &[f64], x0: f64, sigma: f64, k0: f64) -> Vec<Complex64> {
        let norm = (std::f64::consts::PI * sigma * sigma).powf(-0.25);
        xs.iter()
            .map(|&x| {
                let d = x - x0;
                Complex64::from_polar(norm * (-d * d / (2.0 * sigma * sigma)).exp(), k0 * d)
            })
            .collect()
    }

    #[test]
    fn free_gaussian_spreads_as_expected() {
        let b = make_rectangular(0.0, 1.0, 0.0).unwrap();
        let grid = GridSpec::anchored(-40.0, 40.0, 0.02, 0.0).unwrap();
        let xs = grid.xs();
        let (x0, s, k0) = (-10.0, 3.0, 1.0);
        let psi0 = gaussian(&xs, x0, s, k0);
        let tr = propagate_richardson(&b, grid, 0.02, &psi0, &[10.0]).unwrap();
        let t = tr.times[0];
        let i = Complex64::new(0.0, 1.0);
        let exact: Vec<Complex64> = xs
            .iter()
            .map(|&x| {
                let s2 = Complex64::new(s * s, t);
                let pref = (s * s / std::f64::consts::PI).powf(0.25) / s2.sqrt();
                let d = x - x0;
                pref * (-(d - k0 * t).powi(2) / (2.0 * s2) + i * k0 * (d - 0.5 * k0 * t)).exp()
            })
            .collect();
        let err = l2_distance(grid.h, &tr.states[0], &exact);
        assert!(err < 1e-6, "{err}");
        let norm = l2_distance(grid.h, &tr.states[0], &vec![Complex64::default(); xs.len()]);
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wall_contact_is_detected() {
        let b = make_rectangular(0.0, 1.0, 0.0).unwrap();
        let grid = GridSpec::anchored(-20.0, 5.0, 0.05, 0.0).unwrap();
        let psi0 = gaussian(&grid.xs(), -10.0, 2.0, 2.0);
        let cn = CrankNicolson::new(&b, grid, 0.05).unwrap();
        assert!(matches!(
            cn.propagate(&psi0, &[20.0]),
            Err(Error::BoundaryContamination { .. })
        ));
    }
}
