//! Splitting `Psi_full = Psi_tr + Psi_ref` for a symmetric barrier.
//!
//! Left of the barrier `Psi_tr = A_tr_in e^{ikx}` and
//! `Psi_ref = A_ref_in e^{ikx} + A_full_R e^{-ikx}` with `A_tr_in + A_ref_in = 1`,
//! `|A_tr_in| = |A_full_T|`, `|A_ref_in| = |A_full_R|`. Of the two amplitude
//! sets meeting these conditions the one making `Psi_ref` odd about `x_c` is
//! selected.
//!
//! Any solution on a symmetric barrier is a combination of `Psi_full(x)` and
//! its mirror `Psi_full(2 x_c - x)`. With `A_ref_in = z` the reflection
//! sub-state is `Psi_ref(x) = z Psi_full(x) + beta(z) Psi_full(2 x_c - x)`,
//! `beta(z) = A_full_R (1 - z) e^{-2ik x_c} / A_full_T`. Both terms are
//! evaluated with the stable stationary representation, so the interior field
//! stays accurate for opaque barriers.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::BarrierSpec;
use crate::stationary::{check_sorted, propagate_cauchy, ScatteringSolution};

/// Below this reflection coefficient `Psi_ref` is taken as identically zero.
pub const DEGENERATE_R: f64 = 1e-12;

/// Largest relative residual accepted for the odd branch.
pub const BRANCH_TOLERANCE: f64 = 1e-8;

/// Unitarity slack accepted by [`candidates`].
const UNITARITY_SLACK: f64 = 1e-9;

/// Samples per half-barrier used to find the peak of `|Psi_ref|`.
const PEAK_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Odd,
    Even,
}

/// The two solutions `z` of `|z| = |A_R|`, `|1 - z| = |A_T|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidates {
    pub plus: Complex64,
    pub minus: Complex64,
    /// `1 - plus`, formed as `T - i sqrt(T R)` rather than by subtraction,
    /// which would lose every digit of `T` on opaque barriers.
    pub plus_tr: Complex64,
    /// `1 - minus`.
    pub minus_tr: Complex64,
    pub degenerate: bool,
}

/// Candidate `A_ref_in` values `1 - (T -+ i sqrt(T R)) = R +- i sqrt(T R)`.
pub fn candidates(a_t: Complex64, a_r: Complex64) -> Result<Candidates> {
    let t = a_t.norm_sqr();
    let r = a_r.norm_sqr();
    let residual = (t + r - 1.0).abs();
    if !(residual <= UNITARITY_SLACK) {
        return Err(Error::Domain(format!(
            "amplitudes violate unitarity: |T + R - 1| = {residual:e}"
        )));
    }
    let im = (t * r).sqrt();
    let plus_tr = Complex64::new(t, -im);
    let minus_tr = Complex64::new(t, im);
    Ok(Candidates {
        plus: 1.0 - plus_tr,
        minus: 1.0 - minus_tr,
        plus_tr,
        minus_tr,
        degenerate: r == 0.0 || t == 0.0,
    })
}

/// Decomposed stationary state at one wavenumber.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub k: f64,
    pub a_tr_in: Complex64,
    pub a_ref_in: Complex64,
    pub a_tr_r: Complex64,
    pub a_ref_r: Complex64,
    pub branch: Branch,
    /// Set when `R < DEGENERATE_R`; `Psi_ref` is then identically zero.
    pub degenerate: bool,
    /// `|Psi_ref(x_c)| / max |Psi_ref|` for the chosen amplitudes.
    pub center_residual: f64,
    /// Same quantity for the rejected candidate.
    pub rejected_residual: f64,
    /// `|Psi_ref(x_c)|` from naive forward propagation of the left data,
    /// normalized as above. Diagnostic only: it degrades as `e^{kappa L/2}`.
    pub forward_residual: f64,
    mirror: Complex64,
    sol: Arc<ScatteringSolution>,
}

impl Decomposition {
    pub fn solution(&self) -> &ScatteringSolution {
        &self.sol
    }

    pub fn shared_solution(&self) -> &Arc<ScatteringSolution> {
        &self.sol
    }

    pub fn t_coef(&self) -> f64 {
        self.sol.t_coef
    }

    pub fn r_coef(&self) -> f64 {
        self.sol.r_coef
    }

    /// `A_tr_in + A_ref_in - 1`.
    pub fn sum_residual(&self) -> f64 {
        (self.a_tr_in + self.a_ref_in - 1.0).norm()
    }

    /// Largest deviation in the modulus conditions.
    pub fn modulus_residual(&self) -> f64 {
        let tr = (self.a_tr_in.norm() - self.sol.a_t.norm()).abs();
        let rf = (self.a_ref_in.norm() - self.sol.a_r.norm()).abs();
        tr.max(rf)
    }

    fn mirror_point(&self, x: f64) -> f64 {
        2.0 * self.sol.barrier().x_c() - x
    }

    /// Unmasked `Psi_ref(x)` and derivative on the whole line.
    pub fn eval_ref(&self, x: f64) -> (Complex64, Complex64) {
        if self.degenerate {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let (p, dp) = self.sol.eval_with_derivative(x);
        let (m, dm) = self.sol.eval_with_derivative(self.mirror_point(x));
        (
            self.a_ref_in * p + self.mirror * m,
            self.a_ref_in * dp - self.mirror * dm,
        )
    }

    /// Unmasked `Psi_tr(x)` and derivative on the whole line.
    pub fn eval_tr(&self, x: f64) -> (Complex64, Complex64) {
        let (p, dp) = self.sol.eval_with_derivative(x);
        if self.degenerate {
            return (p, dp);
        }
        let (m, dm) = self.sol.eval_with_derivative(self.mirror_point(x));
        (
            self.a_tr_in * p - self.mirror * m,
            self.a_tr_in * dp + self.mirror * dm,
        )
    }

    /// Masked sub-states `(psi_tr, psi_tr', psi_ref, psi_ref')` at `x`.
    /// Right of `x_c`, `psi_ref = 0` and `psi_tr = Psi_full`.
    pub fn eval_masked(&self, x: f64) -> [Complex64; 4] {
        let zero = Complex64::new(0.0, 0.0);
        if x > self.sol.barrier().x_c() {
            let (p, dp) = self.sol.eval_with_derivative(x);
            [p, dp, zero, zero]
        } else {
            let (t, dt) = self.eval_tr(x);
            let (r, dr) = self.eval_ref(x);
            [t, dt, r, dr]
        }
    }
}

fn mirror_coefficient(sol: &ScatteringSolution, w: Complex64) -> Result<Complex64> {
    if sol.a_t.norm() == 0.0 {
        return Err(Error::Domain(format!(
            "transmission amplitude underflows at k = {}; decomposition undefined",
            sol.k
        )));
    }
    let xc = sol.barrier().x_c();
    let phase = Complex64::from_polar(1.0, -2.0 * sol.k * xc);
    Ok(sol.a_r * phase * (w / sol.a_t))
}

struct Scored {
    z: Complex64,
    w: Complex64,
    mirror: Complex64,
    /// `|z + beta| / (|z| + |beta|)`, zero for an exactly odd `Psi_ref`.
    factor: f64,
    center: f64,
}

fn score(barrier: &BarrierSpec, sol: &ScatteringSolution, z: Complex64, w: Complex64) -> Result<Scored> {
    let mirror = mirror_coefficient(sol, w)?;
    let xc = barrier.x_c();
    let sum = z + mirror;
    let factor = sum.norm() / (z.norm() + mirror.norm()).max(f64::MIN_POSITIVE);
    let ref_at = |x: f64| {
        z * sol.eval(x) + mirror * sol.eval(2.0 * xc - x)
    };
    let peak = (0..=PEAK_SAMPLES)
        .map(|i| {
            let x = barrier.a() + (xc - barrier.a()) * i as f64 / PEAK_SAMPLES as f64;
            ref_at(x).norm()
        })
        .fold(0.0f64, f64::max);
    let center = ref_at(xc).norm() / peak.max(f64::MIN_POSITIVE);
    Ok(Scored {
        z,
        w,
        mirror,
        factor,
        center,
    })
}

fn build(
    sol: Arc<ScatteringSolution>,
    chosen: &Scored,
    other: Option<&Scored>,
    branch: Branch,
) -> Decomposition {
    let barrier = sol.barrier();
    let a = barrier.a();
    let k = sol.k;
    let z = chosen.z;
    let ik = Complex64::new(0.0, k);
    let inc = Complex64::from_polar(1.0, k * a);
    let refl = sol.a_r * inc.conj();
    let (fwd, _) = propagate_cauchy(
        barrier,
        k,
        a,
        z * inc + refl,
        ik * (z * inc - refl),
        barrier.x_c(),
    );
    let peak = z.norm() + sol.a_r.norm();
    Decomposition {
        k,
        a_tr_in: chosen.w,
        a_ref_in: z,
        a_tr_r: Complex64::new(0.0, 0.0),
        a_ref_r: sol.a_r,
        branch,
        degenerate: false,
        center_residual: chosen.center,
        rejected_residual: other.map_or(f64::NAN, |o| o.center),
        forward_residual: fwd.norm() / peak.max(f64::MIN_POSITIVE),
        mirror: chosen.mirror,
        sol,
    }
}

fn degenerate(sol: Arc<ScatteringSolution>) -> Decomposition {
    Decomposition {
        k: sol.k,
        a_tr_in: Complex64::new(1.0, 0.0),
        a_ref_in: Complex64::new(0.0, 0.0),
        a_tr_r: Complex64::new(0.0, 0.0),
        a_ref_r: sol.a_r,
        branch: Branch::Odd,
        degenerate: true,
        center_residual: 0.0,
        rejected_residual: 0.0,
        forward_residual: 0.0,
        mirror: Complex64::new(0.0, 0.0),
        sol,
    }
}

/// Picks the candidate whose `Psi_ref` vanishes at `x_c`.
pub fn select_odd_branch(
    barrier: &BarrierSpec,
    sol: &Arc<ScatteringSolution>,
    cands: &Candidates,
) -> Result<Decomposition> {
    if sol.r_coef < DEGENERATE_R {
        return Ok(degenerate(Arc::clone(sol)));
    }
    let p = score(barrier, sol, cands.plus, cands.plus_tr)?;
    let m = score(barrier, sol, cands.minus, cands.minus_tr)?;
    let (best, other) = if p.factor <= m.factor { (p, m) } else { (m, p) };
    if best.factor > BRANCH_TOLERANCE {
        return Err(Error::BranchSelection {
            k: sol.k,
            residual: best.factor,
        });
    }
    if other.factor <= BRANCH_TOLERANCE {
        return Err(Error::AmbiguousBranch {
            k: sol.k,
            odd: best.factor,
            even: other.factor,
        });
    }
    Ok(build(Arc::clone(sol), &best, Some(&other), Branch::Odd))
}

/// The rejected (even) amplitude set, for comparison output.
pub fn select_even_branch(
    barrier: &BarrierSpec,
    sol: &Arc<ScatteringSolution>,
    cands: &Candidates,
) -> Result<Decomposition> {
    if sol.r_coef < DEGENERATE_R {
        let mut d = degenerate(Arc::clone(sol));
        d.branch = Branch::Even;
        return Ok(d);
    }
    let p = score(barrier, sol, cands.plus, cands.plus_tr)?;
    let m = score(barrier, sol, cands.minus, cands.minus_tr)?;
    let (odd, even) = if p.factor <= m.factor { (p, m) } else { (m, p) };
    Ok(build(Arc::clone(sol), &even, Some(&odd), Branch::Even))
}

/// Candidates plus odd-branch selection in one call.
pub fn decompose(sol: &Arc<ScatteringSolution>) -> Result<Decomposition> {
    let cands = candidates(sol.a_t, sol.a_r)?;
    select_odd_branch(sol.barrier(), sol, &cands)
}

/// Masked sub-state samples on a grid.
#[derive(Debug, Clone)]
pub struct MaskedSubstates {
    pub xs: Vec<f64>,
    pub full: Vec<Complex64>,
    pub tr: Vec<Complex64>,
    pub refl: Vec<Complex64>,
}

/// Samples `psi_tr`, `psi_ref` and `Psi_full` on a sorted grid that extends past
/// both barrier edges, and checks the pointwise sum.
pub fn masked_substates(dec: &Decomposition, xs: &[f64]) -> Result<MaskedSubstates> {
    check_sorted(xs)?;
    let barrier = dec.solution().barrier();
    match (xs.first(), xs.last()) {
        (Some(&lo), Some(&hi)) if lo < barrier.a() && hi > barrier.b() => {}
        _ => {
            return Err(Error::Domain(format!(
                "grid must extend beyond [{}, {}] on both sides",
                barrier.a(),
                barrier.b()
            )))
        }
    }
    let mut full = Vec::with_capacity(xs.len());
    let mut tr = Vec::with_capacity(xs.len());
    let mut refl = Vec::with_capacity(xs.len());
    for &x in xs {
        let f = dec.solution().eval(x);
        let [t, _, r, _] = dec.eval_masked(x);
        let scale = f.norm().max(t.norm()).max(r.norm()).max(1e-300);
        if (t + r - f).norm() > 1e-10 * scale.max(1.0) {
            return Err(Error::Tolerance(format!(
                "psi_tr + psi_ref != Psi_full at x = {x}: residual {:e}",
                (t + r - f).norm()
            )));
        }
        full.push(f);
        tr.push(t);
        refl.push(r);
    }
    Ok(MaskedSubstates {
        xs: xs.to_vec(),
        full,
        tr,
        refl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{make_rectangular, make_symmetric};
    use crate::stationary::{current_exact, probability_current, solve_stationary};

    fn rect_t(v0: f64, l: f64, e: f64) -> f64 {
        let kappa = (2.0 * (v0 - e)).sqrt();
        1.0 / (1.0 + v0 * v0 * (kappa * l).sinh().powi(2) / (4.0 * e * (v0 - e)))
    }

    /// Odd solution integrated outwards from the midpoint with RK4 (steps
    /// aligned to the segment edges), matched to plane waves at `a`. Returns
    /// `A_ref_in` such that the `e^{-ikx}` coefficient equals `A_full_R`.
    fn odd_oracle(b: &BarrierSpec, k: f64, a_r: Complex64) -> Complex64 {
        let e = 0.5 * k * k;
        let mut pts: Vec<f64> = b.breakpoints().into_iter().filter(|&x| x <= b.x_c()).collect();
        pts.reverse();
        let (mut u, mut du) = (0.0f64, 1.0f64);
        for w in pts.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            let v = b.potential(0.5 * (hi + lo));
            let f = 2.0 * (v - e);
            let n = 20_000;
            let h = -(hi - lo) / n as f64;
            for _ in 0..n {
                let k1 = (du, f * u);
                let k2 = (du + 0.5 * h * k1.1, f * (u + 0.5 * h * k1.0));
                let k3 = (du + 0.5 * h * k2.1, f * (u + 0.5 * h * k2.0));
                let k4 = (du + h * k3.1, f * (u + h * k3.0));
                u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                du += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            }
        }
        let a = b.a();
        let ik = Complex64::new(0.0, k);
        let p = 0.5 * (u + du / ik) * Complex64::from_polar(1.0, -k * a);
        let q = 0.5 * (u - du / ik) * Complex64::from_polar(1.0, k * a);
        a_r * p / q
    }

    #[test]
    fn candidate_examples() {
        let c = candidates(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(c.plus, Complex64::new(0.0, 0.0));
        assert_eq!(c.minus, Complex64::new(0.0, 0.0));
        assert!(c.degenerate);

        let s = 0.5f64.sqrt();
        let c = candidates(Complex64::new(s, 0.0), Complex64::new(0.0, s)).unwrap();
        for z in [c.plus, c.minus] {
            assert!((z.norm_sqr() - 0.5).abs() < 1e-15);
            assert!(((1.0 - z).norm_sqr() - 0.5).abs() < 1e-15);
            assert!((z.re - 0.5).abs() < 1e-15 && (z.im.abs() - 0.5).abs() < 1e-15);
        }

        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let sol = solve_stationary(&b, 1.0).unwrap();
        let t = rect_t(2.0, 1.0, 0.5);
        let c = candidates(sol.a_t, sol.a_r).unwrap();
        for z in [c.plus, c.minus] {
            assert!((z.re - (1.0 - t)).abs() < 1e-12);
            assert!((z.im.abs() - (t * (1.0 - t)).sqrt()).abs() < 1e-12);
            assert!((z.norm() - sol.a_r.norm()).abs() < 1e-12);
            assert!(((1.0 - z).norm() - sol.a_t.norm()).abs() < 1e-12);
        }

        assert!(candidates(Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn free_particle_is_degenerate() {
        let b = make_rectangular(0.0, 1.0, 0.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.a_ref_in, Complex64::new(0.0, 0.0));
        assert_eq!(d.branch, Branch::Odd);
        assert_eq!(d.eval_ref(0.3).0, Complex64::new(0.0, 0.0));
        let xs: Vec<f64> = (0..41).map(|i| -1.0 + i as f64 * 0.075).collect();
        let m = masked_substates(&d, &xs).unwrap();
        for i in 0..xs.len() {
            assert_eq!(m.refl[i], Complex64::new(0.0, 0.0));
            assert!((m.tr[i] - m.full[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn rectangular_odd_branch_matches_outward_oracle() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        assert_eq!(d.branch, Branch::Odd);
        assert!(d.center_residual < 1e-8);
        assert!(d.rejected_residual > 1e-3);
        assert!(d.forward_residual < 1e-8);
        let oracle = odd_oracle(&b, 1.0, sol.a_r);
        assert!((oracle - d.a_ref_in).norm() < 1e-9, "{oracle} vs {}", d.a_ref_in);
        assert!((d.a_ref_in.re - sol.r_coef).abs() < 1e-12);
        assert!(d.sum_residual() == 0.0);
        assert!(d.modulus_residual() < 1e-12);

        let even = select_even_branch(&b, &sol, &candidates(sol.a_t, sol.a_r).unwrap()).unwrap();
        assert_eq!(even.branch, Branch::Even);
        assert!((even.a_ref_in - d.a_ref_in.conj()).norm() < 1e-12);
        // even branch is symmetric about the midpoint
        for x in [0.1, 0.3, -0.5] {
            let l = even.eval_ref(x).0;
            let r = even.eval_ref(1.0 - x).0;
            assert!((l - r).norm() < 1e-10 * l.norm());
        }
    }

    #[test]
    fn staircase_matches_outward_oracle() {
        let b = make_symmetric(-0.2, &[(0.3, 1.5), (0.25, 0.4), (0.1, 3.0)]).unwrap();
        for k in [0.4, 1.1, 2.3] {
            let sol = Arc::new(solve_stationary(&b, k).unwrap());
            let d = decompose(&sol).unwrap();
            let oracle = odd_oracle(&b, k, sol.a_r);
            assert!((oracle - d.a_ref_in).norm() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn resonance_is_degenerate() {
        let v0 = 1.0;
        let kp = std::f64::consts::PI;
        let k = (kp * kp + 2.0 * v0).sqrt();
        let b = make_rectangular(0.0, 1.0, v0).unwrap();
        let sol = Arc::new(solve_stationary(&b, k).unwrap());
        let d = decompose(&sol).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.a_ref_in, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn odd_symmetry_and_center_zero() {
        let b = make_symmetric(0.0, &[(0.4, 2.0), (0.3, 0.5)]).unwrap();
        let sol = Arc::new(solve_stationary(&b, 0.8).unwrap());
        let d = decompose(&sol).unwrap();
        let xc = b.x_c();
        let peak = (0..100)
            .map(|i| d.eval_ref(b.a() + 0.01 * i as f64 * (xc - b.a())).0.norm())
            .fold(0.0, f64::max);
        assert!(d.eval_ref(xc).0.norm() < 1e-9 * peak);
        for i in 0..50 {
            let x = -2.0 + i as f64 * 0.07;
            let s = d.eval_ref(x).0 + d.eval_ref(2.0 * xc - x).0;
            assert!(s.norm() < 1e-8 * peak);
        }
    }

    #[test]
    fn derivative_jumps_cancel_at_center() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        let xc = b.x_c();
        let [_, dtr_l, _, dref_l] = d.eval_masked(xc);
        let [_, dtr_r, _, dref_r] = d.eval_masked(xc + 1e-13);
        let jump_tr = dtr_r - dtr_l;
        let jump_ref = dref_r - dref_l;
        assert!(jump_ref.norm() > 1e-3);
        assert!((jump_tr + jump_ref).norm() < 1e-7);
    }

    #[test]
    fn masked_currents_are_constant() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        let dx = 1e-4;
        let xs: Vec<f64> = (0..25001).map(|i| -1.0 + i as f64 * dx).collect();
        let m = masked_substates(&d, &xs).unwrap();
        let j_ref = probability_current(&m.refl, dx).unwrap();
        for (i, &j) in j_ref.iter().enumerate() {
            if xs[i + 1] < b.x_c() - 2.0 * dx {
                assert!(j.abs() < 1e-6, "x = {}", xs[i + 1]);
            }
        }
        let target = sol.t_coef * sol.k;
        for x in [-0.8, 0.0, 0.2, 0.49, 0.5, 0.51, 0.9, 1.5] {
            let [t, dt, r, dr] = d.eval_masked(x);
            assert!((current_exact(t, dt) - target).abs() < 1e-12 * target.max(1.0));
            assert!(current_exact(r, dr).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_grid_must_cover_barrier() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        assert!(masked_substates(&d, &[0.1, 0.5, 2.0]).is_err());
        assert!(masked_substates(&d, &[-1.0, 0.5, 0.9]).is_err());
    }

    #[test]
    fn opaque_barrier_still_decomposes() {
        let b = make_rectangular(0.0, 30.0, 2.0).unwrap();
        let sol = Arc::new(solve_stationary(&b, 1.0).unwrap());
        let d = decompose(&sol).unwrap();
        assert!(d.center_residual < 1e-8);
        assert!(d.modulus_residual() < 1e-9);
        assert!((d.a_ref_in.re - sol.r_coef).abs() < 1e-10);
    }
}
