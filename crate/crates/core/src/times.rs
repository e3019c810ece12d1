//! Dwell, Larmor and phase times.
//!
//! Larmor times are computed two ways: as a time integral of the interior
//! probability of a sub-packet (route A) and as a spectral average of the
//! single-energy dwell times (route B).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::{Decomposition, DEGENERATE_R};
use crate::error::{Error, Result};
use crate::potentials::BarrierSpec;
use crate::quadrature::{adaptive_simpson, XGrid};
use crate::stationary::{solve_stationary, ScatteringSolution};
use crate::wavepacket::PacketEvolution;

/// Relative tolerance of the dwell-time quadrature.
pub const DWELL_TOLERANCE: f64 = 1e-10;
/// Interior probability below which the scattering event counts as over.
pub const WINDOW_THRESHOLD: f64 = 1e-10;

/// Sub-process whose time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubProcess {
    Tr,
    Ref,
}

impl SubProcess {
    /// Spatial region of the sub-process: `[a, b]` for transmission,
    /// `[a, x_c]` for reflection.
    pub fn region(self, barrier: &BarrierSpec) -> (f64, f64) {
        match self {
            SubProcess::Tr => (barrier.a(), barrier.b()),
            SubProcess::Ref => (barrier.a(), barrier.x_c()),
        }
    }
}

fn region_integral<F: Fn(f64) -> f64>(barrier: &BarrierSpec, lo: f64, hi: f64, f: F) -> Result<f64> {
    let mut cuts = vec![lo];
    cuts.extend(barrier.breakpoints().into_iter().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive_simpson(&f, w[0], w[1], DWELL_TOLERANCE, 1e-300)?;
    }
    Ok(total)
}

/// `tau_dwell_tr(k) = \int_a^b |psi_tr|^2 dx / (k T)`.
pub fn dwell_time_tr(dec: &Decomposition) -> Result<f64> {
    let sol = dec.solution();
    let b = sol.barrier();
    let t = sol.t_coef;
    if !(t > 0.0) {
        return Err(Error::UndefinedTime(format!("transmission vanishes at k = {}", dec.k)));
    }
    let xc = b.x_c();
    let integral = region_integral(b, b.a(), b.b(), |x| {
        if x > xc {
            sol.eval(x).norm_sqr()
        } else {
            dec.eval_masked(x)[0].norm_sqr()
        }
    })?;
    Ok(integral / (dec.k * t))
}

/// `tau_dwell_ref(k) = \int_a^{x_c} |psi_ref|^2 dx / (k R)`.
pub fn dwell_time_ref(dec: &Decomposition) -> Result<f64> {
    let sol = dec.solution();
    let b = sol.barrier();
    let r = sol.r_coef;
    if dec.degenerate || r <= DEGENERATE_R {
        return Err(Error::UndefinedTime(format!(
            "reflection time undefined at k = {}: R = {r:e}",
            dec.k
        )));
    }
    let integral = region_integral(b, b.a(), b.x_c(), |x| dec.eval_ref(x).0.norm_sqr())?;
    Ok(integral / (dec.k * r))
}

/// Time-domain Larmor time.
#[derive(Debug, Clone, Serialize)]
pub struct RouteA {
    pub value: f64,
    /// `\int dt \int |psi|^2 dx` before dividing by the sub-process norm.
    pub integral: f64,
    pub window: (f64, f64),
    /// Per-slice contributions, all nonnegative.
    pub slices: Vec<f64>,
}

/// Spectral Larmor time with the two candidate weightings.
#[derive(Debug, Clone, Serialize)]
pub struct RouteB {
    /// Weights `|G|^2 T(k) / T` (or `R`).
    pub squared: f64,
    /// Weights `G(k) T(k)` normalized by `\int G T dk`, as printed.
    pub printed: Complex64,
    /// `\int |G|^2 T dk` divided by the sub-process norm.
    pub weight_norm_squared: f64,
    /// `\int G T dk` divided by the sub-process norm.
    pub weight_norm_printed: Complex64,
}

/// Interior amplitude table: `psi(x_i, t) = sum_j table[i][j] exp(-i E_j t)`.
struct InteriorTable {
    energies: Vec<f64>,
    weights: Vec<f64>,
    rows: Vec<Vec<Complex64>>,
}

impl InteriorTable {
    fn new(evo: &PacketEvolution, which: SubProcess) -> Result<Self> {
        let barrier = evo.barrier();
        let (lo, hi) = which.region(barrier);
        let k_max = evo.v_max();
        let v_max = barrier.segments().iter().map(|s| s.height.abs()).fold(0.0, f64::max);
        let q = (k_max * k_max + 2.0 * v_max).sqrt().max(1e-3);
        let grid = XGrid::panels(lo, hi, &barrier.breakpoints(), 1.0 / q, 10)?;
        let amps = evo.spectral_amplitudes();
        let decs = evo.decompositions();
        let rows = grid
            .xs
            .par_iter()
            .map(|&x| {
                decs.iter()
                    .zip(&amps)
                    .map(|(d, (_, _, c))| {
                        let [tr, _, rf, _] = d.eval_masked(x);
                        c * match which {
                            SubProcess::Tr => tr,
                            SubProcess::Ref => rf,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            energies: amps.iter().map(|a| a.1).collect(),
            weights: grid.weights,
            rows,
        })
    }

    fn density(&self, t: f64) -> f64 {
        let phases: Vec<Complex64> = self
            .energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * t))
            .collect();
        self.rows
            .iter()
            .zip(&self.weights)
            .map(|(row, w)| {
                let psi: Complex64 = row.iter().zip(&phases).map(|(a, p)| a * p).sum();
                w * psi.norm_sqr()
            })
            .sum()
    }
}

/// `(1 / N) \int dt \int_region |psi(x, t)|^2 dx` where `N` is the sub-process
/// norm (`T` or `R` of the packet). With `window = None` the event window is
/// found by stepping out from the arrival time until the interior probability
/// drops below [`WINDOW_THRESHOLD`].
pub fn larmor_time_route_a(
    evo: &PacketEvolution,
    which: SubProcess,
    window: Option<(f64, f64)>,
) -> Result<RouteA> {
    let norm = sub_norm(evo, which)?;
    let table = InteriorTable::new(evo, which)?;
    let p = evo.packet();
    let step = (p.sigma / p.k0) / 4.0;
    let (t0, t1) = match window {
        Some((t0, t1)) => {
            if !(t1 > t0) {
                return Err(Error::Domain(format!("empty time window [{t0}, {t1}]")));
            }
            for t in [t0, t1] {
                let v = table.density(t);
                if v >= WINDOW_THRESHOLD {
                    return Err(Error::WindowTooSmall { t, value: v });
                }
            }
            (t0, t1)
        }
        None => {
            let arrival = (evo.barrier().x_c() - p.x0) / p.k0;
            (
                find_edge(&table, arrival, -step)?,
                find_edge(&table, arrival, step)?,
            )
        }
    };
    let pieces = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / pieces as f64;
    let slices: Vec<f64> = (0..pieces)
        .into_par_iter()
        .map(|i| {
            let lo = t0 + i as f64 * h;
            adaptive_simpson(|t| table.density(t), lo, lo + h, 1e-9, 1e-16)
        })
        .collect::<Result<_>>()?;
    let integral: f64 = slices.iter().sum();
    Ok(RouteA {
        value: integral / norm,
        integral,
        window: (t0, t1),
        slices,
    })
}

fn find_edge(table: &InteriorTable, start: f64, step: f64) -> Result<f64> {
    const MAX_STEPS: usize = 200_000;
    let mut t = start;
    let mut below = 0;
    for _ in 0..MAX_STEPS {
        t += step;
        // two consecutive points under threshold guard against a node of the
        // interior density
        if table.density(t) < WINDOW_THRESHOLD {
            below += 1;
            if below == 2 {
                return Ok(t);
            }
        } else {
            below = 0;
        }
    }
    Err(Error::WindowTooSmall {
        t,
        value: table.density(t),
    })
}

fn sub_norm(evo: &PacketEvolution, which: SubProcess) -> Result<f64> {
    let n = match which {
        SubProcess::Tr => evo.spectral_t(),
        SubProcess::Ref => evo.spectral_r(),
    };
    if n <= DEGENERATE_R {
        return Err(Error::UndefinedTime(format!(
            "{which:?} sub-process carries probability {n:e}"
        )));
    }
    Ok(n)
}

/// Per-k dwell times on the packet grid.
pub fn dwell_table(evo: &PacketEvolution, which: SubProcess) -> Result<Vec<f64>> {
    evo.decompositions()
        .par_iter()
        .map(|d| match which {
            SubProcess::Tr => dwell_time_tr(d),
            SubProcess::Ref => {
                if d.degenerate {
                    // no reflected sub-state at this energy; carries zero weight
                    Ok(0.0)
                } else {
                    dwell_time_ref(d)
                }
            }
        })
        .collect()
}

/// Spectral average of `dwell` weighted by `T(k)` or `R(k)`.
pub fn larmor_time_route_b(evo: &PacketEvolution, which: SubProcess, dwell: &[f64]) -> Result<RouteB> {
    let decs = evo.decompositions();
    if dwell.len() != decs.len() {
        return Err(Error::Domain(format!(
            "dwell table has {} entries for {} grid points",
            dwell.len(),
            decs.len()
        )));
    }
    let norm = sub_norm(evo, which)?;
    let p = evo.packet();
    let (mut sq, mut sq_w) = (0.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mut pr, mut pr_w) = (zero, zero);
    for (((d, tau), g), w) in decs.iter().zip(dwell).zip(&p.big_g).zip(&p.weights) {
        let c = match which {
            SubProcess::Tr => d.t_coef(),
            SubProcess::Ref => d.r_coef(),
        };
        sq += w * g.norm_sqr() * c * tau;
        sq_w += w * g.norm_sqr() * c;
        pr += g * (w * c * tau);
        pr_w += g * (w * c);
    }
    Ok(RouteB {
        squared: sq / sq_w,
        printed: pr / pr_w,
        weight_norm_squared: sq_w / norm,
        weight_norm_printed: pr_w / norm,
    })
}

/// Transmission phase time at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTime {
    pub k: f64,
    /// `d arg A_T / dE`: delay relative to free flight.
    pub delay: f64,
    /// `(b - a) / k + delay`: barrier traversal time of the transmitted peak.
    pub traversal: f64,
    /// Difference between the two Richardson levels.
    pub error: f64,
}

/// Phase time from fourth-order central differences of `arg A_T` in energy,
/// refined once by Richardson extrapolation.
pub fn phase_time(barrier: &BarrierSpec, k: f64) -> Result<PhaseTime> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive and finite, got {k}")));
    }
    let e = 0.5 * k * k;
    let h = 1e-3 * e;
    let center = solve_stationary(barrier, k)?;
    let d1 = phase_derivative(barrier, &center, e, h)?;
    let d2 = phase_derivative(barrier, &center, e, 0.5 * h)?;
    let delay = (16.0 * d2 - d1) / 15.0;
    Ok(PhaseTime {
        k,
        delay,
        traversal: barrier.width() / k + delay,
        error: (d2 - d1).abs(),
    })
}

fn phase_derivative(barrier: &BarrierSpec, center: &ScatteringSolution, e: f64, h: f64) -> Result<f64> {
    let mut phase = [0.0; 5];
    // unwrap outwards from the centre: each neighbour step must stay below pi/2
    for (side, order) in [(1.0, [3usize, 4]), (-1.0, [1, 0])] {
        let mut last = center.a_t;
        let mut prev = 0.0;
        for (n, &slot) in order.iter().enumerate() {
            let en = e + side * (n as f64 + 1.0) * h;
            let sol = solve_stationary(barrier, (2.0 * en).sqrt())?;
            let step = (sol.a_t / last).arg();
            if step.abs() >= 0.5 * std::f64::consts::PI {
                return Err(Error::PhaseUnwrap { k: center.k, step });
            }
            prev += step;
            phase[slot] = prev;
            last = sol.a_t;
        }
    }
    Ok((phase[0] - 8.0 * phase[1] + 8.0 * phase[3] - phase[4]) / (12.0 * h))
}

/// Phase times over a grid of wavenumbers.
pub fn phase_times(barrier: &BarrierSpec, ks: &[f64]) -> Result<Vec<PhaseTime>> {
    ks.par_iter().map(|&k| phase_time(barrier, k)).collect()
}

/// Larmor time of one sub-process by both routes.
#[derive(Debug, Clone, Serialize)]
pub struct LarmorTimes {
    pub route_a: RouteA,
    pub route_b: RouteB,
    /// `|A - B_squared| / B_squared`.
    pub residual_squared: f64,
    /// `|A - B_printed| / |B_printed|`.
    pub residual_printed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeReport {
    pub ks: Vec<f64>,
    pub dwell_tr: Vec<f64>,
    pub dwell_ref: Vec<f64>,
    pub tau_l_tr: LarmorTimes,
    /// `None` when the packet is not reflected.
    pub tau_l_ref: Option<LarmorTimes>,
    pub phase: Vec<PhaseTime>,
    /// Spectral transmission and reflection probabilities of the packet.
    pub t_packet: f64,
    pub r_packet: f64,
}

fn larmor_times(evo: &PacketEvolution, which: SubProcess, dwell: &[f64]) -> Result<LarmorTimes> {
    let route_a = larmor_time_route_a(evo, which, None)?;
    let route_b = larmor_time_route_b(evo, which, dwell)?;
    Ok(LarmorTimes {
        residual_squared: (route_a.value - route_b.squared).abs() / route_b.squared,
        residual_printed: (Complex64::new(route_a.value, 0.0) - route_b.printed).norm()
            / route_b.printed.norm(),
        route_a,
        route_b,
    })
}

/// Full time report for a packet.
pub fn time_report(evo: &PacketEvolution) -> Result<TimeReport> {
    let dwell_tr = dwell_table(evo, SubProcess::Tr)?;
    let dwell_ref = dwell_table(evo, SubProcess::Ref)?;
    let tau_l_tr = larmor_times(evo, SubProcess::Tr, &dwell_tr)?;
    let tau_l_ref = if evo.spectral_r() > DEGENERATE_R {
        Some(larmor_times(evo, SubProcess::Ref, &dwell_ref)?)
    } else {
        None
    };
    let ks = evo.packet().ks.clone();
    let phase = phase_times(evo.barrier(), &ks)?;
    Ok(TimeReport {
        dwell_tr,
        dwell_ref,
        tau_l_tr,
        tau_l_ref,
        phase,
        t_packet: evo.spectral_t(),
        r_packet: evo.spectral_r(),
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::potentials::make_rectangular;
    use crate::stationary::{solve_shared, SolutionCache};
    use crate::wavepacket::{make_gaussian_packet, KGridSpec};
    use std::sync::Arc;

    fn dec(b: &BarrierSpec, k: f64) -> Decomposition {
        let sol = Arc::new(solve_shared(Arc::new(b.clone()), k).unwrap());
        decompose(&sol).unwrap()
    }

    /// Closed-form transmission phase of a rectangular barrier, `arg A_T`.
    fn rect_phase(v0: f64, l: f64, k: f64) -> f64 {
        let kappa = (2.0 * v0 - k * k).sqrt();
        let ratio = (kappa * kappa - k * k) / (2.0 * k * kappa);
        -(ratio * (kappa * l).tanh()).atan() - k * l
    }

    #[test]
    fn free_dwell_is_transit_time() {
        let b = make_rectangular(0.0, 3.0, 0.0).unwrap();
        let d = dec(&b, 1.7);
        assert!((dwell_time_tr(&d).unwrap() - 3.0 / 1.7).abs() < 1e-10);
        assert!(matches!(dwell_time_ref(&d), Err(Error::UndefinedTime(_))));
    }

    #[test]
    fn rectangular_dwell_matches_riemann_sum() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let d = dec(&b, 1.0);
        let n = 200_000;
        let h = 1.0 / n as f64;
        let (mut tr, mut rf) = (0.0, 0.0);
        for i in 0..n {
            let x = (i as f64 + 0.5) * h;
            let [t, _, r, _] = d.eval_masked(x);
            tr += t.norm_sqr() * h;
            if x < 0.5 {
                rf += r.norm_sqr() * h;
            }
        }
        let sol = d.solution();
        let tau_tr = dwell_time_tr(&d).unwrap();
        let tau_rf = dwell_time_ref(&d).unwrap();
        assert!(tau_tr > 0.0 && tau_rf > 0.0);
        assert!((tau_tr - tr / sol.t_coef).abs() < 1e-8 * tau_tr);
        assert!((tau_rf - rf / sol.r_coef).abs() < 1e-8 * tau_rf);
    }

    #[test]
    fn resonance_has_no_reflection_time() {
        // k^2 / 2 - V0 = (pi / L)^2 / 2 gives R = 0
        let v0 = 1.0;
        let k = (2.0 * v0 + std::f64::consts::PI.powi(2)).sqrt();
        let b = make_rectangular(0.0, 1.0, v0).unwrap();
        let d = dec(&b, k);
        assert!(matches!(dwell_time_ref(&d), Err(Error::UndefinedTime(_))));
    }

    #[test]
    fn phase_time_matches_closed_form() {
        let v0 = 2.0;
        for l in [1.0, 2.0, 4.0, 8.0] {
            let b = make_rectangular(0.0, l, v0).unwrap();
            let k = 1.0;
            let p = phase_time(&b, k).unwrap();
            let dk = 1e-5;
            let exact = (rect_phase(v0, l, k + dk) - rect_phase(v0, l, k - dk)) / (2.0 * dk) / k;
            assert!((p.delay - exact).abs() < 1e-7 * exact.abs().max(1.0), "L = {l}: {} vs {exact}", p.delay);
        }
        let free = make_rectangular(0.0, 2.0, 0.0).unwrap();
        let p = phase_time(&free, 1.3).unwrap();
        assert!(p.delay.abs() < 1e-10);
        assert!((p.traversal - 2.0 / 1.3).abs() < 1e-10);
    }

    #[test]
    fn phase_time_saturates() {
        let t: Vec<f64> = [2.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&l| phase_time(&make_rectangular(0.0, l, 2.0).unwrap(), 1.0).unwrap().traversal)
            .collect();
        for w in t.windows(3) {
            assert!((w[2] - w[1]).abs() < (w[1] - w[0]).abs());
        }
    }

    #[test]
    fn free_packet_routes() {
        let b = make_rectangular(0.0, 2.0, 0.0).unwrap();
        let p = make_gaussian_packet(&b, -120.0, 20.0, 1.0, KGridSpec::default()).unwrap();
        let cache = SolutionCache::new(&b);
        let evo = PacketEvolution::new(&cache, p).unwrap();
        let dwell = dwell_table(&evo, SubProcess::Tr).unwrap();
        let rb = larmor_time_route_b(&evo, SubProcess::Tr, &dwell).unwrap();
        let ra = larmor_time_route_a(&evo, SubProcess::Tr, None).unwrap();
        assert!((ra.value - 2.0).abs() < 0.01 * 2.0, "{}", ra.value);
        assert!((ra.value - rb.squared).abs() < 1e-6 * rb.squared);
        assert!(ra.slices.iter().all(|&s| s >= 0.0));
        assert!((rb.weight_norm_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_window_must_cover_the_event() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let p = make_gaussian_packet(&b, -40.0, 7.0, 1.0, KGridSpec { points: 512, half_width: 6.5 }).unwrap();
        let cache = SolutionCache::new(&b);
        let evo = PacketEvolution::new(&cache, p).unwrap();
        let err = larmor_time_route_a(&evo, SubProcess::Tr, Some((0.0, 40.0))).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall { .. }));
    }
}
