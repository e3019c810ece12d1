//! Larmor clock: a weak field along z inside `[a, b]` precesses a spin that
//! starts along +x; the in-plane angle of the scattered spin divided by the
//! Larmor frequency is the clock reading.
//!
//! The spin-up component sees `V - omega / 2` inside the barrier and the
//! spin-down component `V + omega / 2`, so each is an ordinary scalar problem.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::crank_nicolson::{propagate_extrapolated, GridSpec};
use crate::potentials::BarrierSpec;
use crate::stationary::solve_stationary;
use crate::wavepacket::{Component, PacketEvolution, SpectralPacket};

/// Default Larmor frequencies in units of the mean energy `E0`.
pub const OMEGA_LADDER: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
/// Relative change between ladder steps beyond which the field is not
/// perturbative.
pub const PERTURBATIVE_CHANGE: f64 = 0.05;
/// Largest relative spread of the extrapolated limit along the ladder.
pub const EXTRAPOLATION_SPREAD: f64 = 0.01;
/// Relative size of differences treated as round-off.
const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinAmplitudes {
    pub k: f64,
    pub t_up: Complex64,
    pub t_down: Complex64,
    pub r_up: Complex64,
    pub r_down: Complex64,
}

impl SpinAmplitudes {
    /// Largest `| |A_T|^2 + |A_R|^2 - 1 |` over the two components.
    pub fn unitarity_residual(&self) -> f64 {
        let up = (self.t_up.norm_sqr() + self.r_up.norm_sqr() - 1.0).abs();
        let down = (self.t_down.norm_sqr() + self.r_down.norm_sqr() - 1.0).abs();
        up.max(down)
    }
}

/// Amplitudes of both spin components at wavenumber `k`.
pub fn spin_resolved_amplitudes(barrier: &BarrierSpec, omega: f64, k: f64) -> Result<SpinAmplitudes> {
    if !omega.is_finite() {
        return Err(Error::Domain(format!("Larmor frequency must be finite, got {omega}")));
    }
    let up = solve_stationary(&barrier.shifted(-0.5 * omega)?, k)?;
    let down = solve_stationary(&barrier.shifted(0.5 * omega)?, k)?;
    Ok(SpinAmplitudes {
        k,
        t_up: up.a_t,
        t_down: down.a_t,
        r_up: up.a_r,
        r_down: down.a_r,
    })
}

/// Clock readings of one packet at one Larmor frequency.
#[derive(Debug, Clone, Serialize)]
pub struct SpinScatteringRun {
    pub omega: f64,
    pub amplitudes: Vec<SpinAmplitudes>,
    /// In-plane precession angle of the transmitted spin.
    pub theta_t: f64,
    /// In-plane precession angle of the reflected spin.
    pub theta_r: f64,
    pub tau_tr: f64,
    pub tau_ref: f64,
    /// `ln(P_up / P_down) / (2 omega)` for the transmitted and reflected
    /// spins: the out-of-plane (spin-rotation) reading, diagnostic only.
    pub tau_tr_out_of_plane: f64,
    pub tau_ref_out_of_plane: f64,
    /// `arg(A_T^+ conj(A_T^-)) / omega` per wavenumber.
    pub per_k_tau_tr: Vec<f64>,
    pub max_unitarity_residual: f64,
}

/// Spin readings of the transmitted and reflected parts of `packet` long after
/// scattering. Distinct wavenumbers separate in space, so the spin sums run
/// over `|G|^2`.
pub fn spin_run(barrier: &BarrierSpec, packet: &SpectralPacket, omega: f64) -> Result<SpinScatteringRun> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("Larmor frequency must be positive, got {omega}")));
    }
    let amplitudes: Vec<SpinAmplitudes> = packet
        .ks
        .par_iter()
        .map(|&k| spin_resolved_amplitudes(barrier, omega, k))
        .collect::<Result<_>>()?;
    let zero = Complex64::new(0.0, 0.0);
    let (mut st, mut sr) = (zero, zero);
    let (mut tu, mut td, mut ru, mut rd) = (0.0, 0.0, 0.0, 0.0);
    for ((a, g), w) in amplitudes.iter().zip(&packet.big_g).zip(&packet.weights) {
        let p = w * g.norm_sqr();
        st += p * a.t_up * a.t_down.conj();
        sr += p * a.r_up * a.r_down.conj();
        tu += p * a.t_up.norm_sqr();
        td += p * a.t_down.norm_sqr();
        ru += p * a.r_up.norm_sqr();
        rd += p * a.r_down.norm_sqr();
    }
    let theta_t = st.arg();
    let theta_r = sr.arg();
    Ok(SpinScatteringRun {
        omega,
        theta_t,
        theta_r,
        tau_tr: theta_t / omega,
        tau_ref: theta_r / omega,
        tau_tr_out_of_plane: (tu / td).ln() / (2.0 * omega),
        tau_ref_out_of_plane: (ru / rd).ln() / (2.0 * omega),
        per_k_tau_tr: amplitudes
            .iter()
            .map(|a| (a.t_up * a.t_down.conj()).arg() / omega)
            .collect(),
        max_unitarity_residual: amplitudes
            .iter()
            .map(SpinAmplitudes::unitarity_residual)
            .fold(0.0, f64::max),
        amplitudes,
    })
}

/// Extrapolated clock time of one sub-process.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    /// Readings along the ladder.
    pub sequence: Vec<f64>,
    /// Richardson limits from consecutive pairs.
    pub limits: Vec<f64>,
    pub value: f64,
    /// Spread of the last two limits.
    pub error: f64,
    /// Every halving shrinks the change by at least 1.5 (or the changes sit
    /// at round-off).
    pub converging: bool,
    /// Successive readings differ by less than 5%.
    pub perturbative: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClockTimes {
    pub omegas: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub tau_tr: Extrapolation,
    /// `None` when the packet is not reflected.
    pub tau_ref: Option<Extrapolation>,
    pub tau_tr_out_of_plane: Vec<f64>,
    pub tau_ref_out_of_plane: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Clock times along `ladder` (multiples of the mean energy), extrapolated to
/// zero field in `omega^2`.
pub fn clock_times(barrier: &BarrierSpec, packet: &SpectralPacket, ladder: &[f64]) -> Result<ClockTimes> {
    if ladder.len() < 3 || ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder[2] <= 0.0 {
        return Err(Error::Domain(format!(
            "Larmor ladder needs >= 3 strictly decreasing positive entries, got {ladder:?}"
        )));
    }
    let e0 = packet.energy();
    let omegas: Vec<f64> = ladder.iter().map(|f| f * e0).collect();
    let runs: Vec<SpinScatteringRun> = omegas
        .par_iter()
        .map(|&w| spin_run(barrier, packet, w))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let min_height = barrier
        .segments()
        .iter()
        .map(|s| s.height.abs())
        .filter(|&h| h > 0.0)
        .fold(f64::INFINITY, f64::min);
    if omegas[0] > 0.1 * e0.min(min_height) {
        warnings.push(format!(
            "largest Larmor frequency {} is not small against E0 = {e0} and min |V| = {min_height}",
            omegas[0]
        ));
    }
    let tr_seq: Vec<f64> = runs.iter().map(|r| r.tau_tr).collect();
    let tau_tr = extrapolate(&omegas, &tr_seq, "transmission", &mut warnings)?;
    // reflection of the field-free barrier; the field steps alone reflect
    // an O(omega^2) fraction that carries no clock reading
    let r0: Vec<f64> = packet
        .ks
        .par_iter()
        .map(|&k| solve_stationary(barrier, k).map(|s| s.r_coef))
        .collect::<Result<_>>()?;
    let reflected = packet.spectral_average(&r0);
    let tau_ref = if reflected > 1e-12 {
        let seq: Vec<f64> = runs.iter().map(|r| r.tau_ref).collect();
        Some(extrapolate(&omegas, &seq, "reflection", &mut warnings)?)
    } else {
        None
    };
    Ok(ClockTimes {
        theta_t: runs.iter().map(|r| r.theta_t).collect(),
        theta_r: runs.iter().map(|r| r.theta_r).collect(),
        tau_tr_out_of_plane: runs.iter().map(|r| r.tau_tr_out_of_plane).collect(),
        tau_ref_out_of_plane: runs.iter().map(|r| r.tau_ref_out_of_plane).collect(),
        omegas,
        tau_tr,
        tau_ref,
        warnings,
    })
}

fn extrapolate(omegas: &[f64], seq: &[f64], label: &str, warnings: &mut Vec<String>) -> Result<Extrapolation> {
    let limits: Vec<f64> = (0..seq.len() - 1)
        .map(|i| {
            let r2 = (omegas[i] / omegas[i + 1]).powi(2);
            (r2 * seq[i + 1] - seq[i]) / (r2 - 1.0)
        })
        .collect();
    let n = limits.len();
    let value = limits[n - 1];
    let error = (limits[n - 1] - limits[n - 2]).abs();
    let scale = value.abs().max(1e-300);
    let diffs: Vec<f64> = seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let noise = NOISE_FLOOR * scale;
    let converging = diffs
        .windows(2)
        .all(|d| d[1] <= noise || d[0] >= 1.5 * d[1]);
    let perturbative = seq
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= PERTURBATIVE_CHANGE * w[1].abs());
    if !perturbative {
        warnings.push(format!(
            "{label} clock readings change by more than 5% between Larmor frequencies: {seq:?}"
        ));
    }
    if !converging || error > EXTRAPOLATION_SPREAD * scale {
        return Err(Error::NonConvergent {
            omegas: omegas.to_vec(),
            values: seq.to_vec(),
        });
    }
    Ok(Extrapolation {
        sequence: seq.to_vec(),
        limits,
        value,
        error,
        converging,
        perturbative,
    })
}

/// Precession angles from explicit time stepping of both spin components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeDomainCheck {
    pub omega: f64,
    pub theta_t_spectral: f64,
    pub theta_t_time_domain: f64,
    pub theta_r_spectral: f64,
    pub theta_r_time_domain: f64,
}

/// Propagates the packet of `evo` through the field region with
/// Crank-Nicolson, once per spin component, from `t_start` to `t_end`, and
/// reads the in-plane angles of the parts right of `b` and left of `a`.
pub fn time_domain_check(
    evo: &PacketEvolution,
    omega: f64,
    grid: GridSpec,
    dt: f64,
    t_start: f64,
    t_end: f64,
) -> Result<TimeDomainCheck> {
    if !(t_end > t_start) {
        return Err(Error::Domain(format!("empty time span [{t_start}, {t_end}]")));
    }
    let barrier = evo.barrier();
    let fine = GridSpec {
        h: 0.5 * grid.h,
        ..grid
    };
    let psi0 = evo.synthesize(Component::Full, t_start, &fine.xs())?;
    let span = [t_end - t_start];
    let up = propagate_extrapolated(&barrier.shifted(-0.5 * omega)?, grid, dt, &psi0, &span)?;
    let down = propagate_extrapolated(&barrier.shifted(0.5 * omega)?, grid, dt, &psi0, &span)?;
    let zero = Complex64::new(0.0, 0.0);
    let (mut st, mut sr) = (zero, zero);
    for ((x, u), d) in grid.xs().iter().zip(&up.states[0]).zip(&down.states[0]) {
        let s = u * d.conj();
        if *x > barrier.b() {
            st += s;
        } else if *x < barrier.a() {
            sr += s;
        }
    }
    let run = spin_run(barrier, evo.packet(), omega)?;
    Ok(TimeDomainCheck {
        omega,
        theta_t_spectral: run.theta_t,
        theta_t_time_domain: st.arg(),
        theta_r_spectral: run.theta_r,
        theta_r_time_domain: sr.arg(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::make_rectangular;
    use crate::wavepacket::{make_gaussian_packet, KGridSpec};

    #[test]
    fn zero_field_leaves_spin_in_place() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let a = spin_resolved_amplitudes(&b, 0.0, 1.0).unwrap();
        assert_eq!(a.t_up, a.t_down);
        assert!((a.t_up * a.t_down.conj()).arg().abs() < 1e-12);
        assert!(a.unitarity_residual() < 1e-10);
    }

    #[test]
    fn free_flight_precesses_for_the_transit_time() {
        let b = make_rectangular(0.0, 3.0, 0.0).unwrap();
        let k = 1.4;
        let mut prev = f64::INFINITY;
        for omega in [1e-2, 5e-3, 2.5e-3] {
            let a = spin_resolved_amplitudes(&b, omega, k).unwrap();
            let tau = (a.t_up * a.t_down.conj()).arg() / omega;
            let err = (tau - 3.0 / k).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn angle_is_odd_and_linear_in_the_field() {
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let th = |w: f64| {
            let a = spin_resolved_amplitudes(&b, w, 1.0).unwrap();
            (a.t_up * a.t_down.conj()).arg()
        };
        let w = 1e-4;
        assert!(th(w) != 0.0);
        assert!((th(w) + th(-w)).abs() < 1e-9);
        assert!((th(2.0 * w) / th(w) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn packet_clock_calibrates_on_free_flight() {
        let b = make_rectangular(0.0, 2.0, 0.0).unwrap();
        let p = make_gaussian_packet(&b, -120.0, 20.0, 1.0, KGridSpec::default()).unwrap();
        let c = clock_times(&b, &p, &OMEGA_LADDER).unwrap();
        assert!((c.tau_tr.value - 2.0).abs() < 0.01 * 2.0, "{:?}", c.tau_tr);
        assert!(c.tau_tr.converging && c.tau_tr.perturbative);
        assert!(c.tau_ref.is_none());
    }

    #[test]
    fn reflected_clock_is_positive_for_a_high_barrier() {
        let b = make_rectangular(0.0, 2.0, 10.0).unwrap();
        let p = make_gaussian_packet(&b, -60.0, 10.0, 1.0, KGridSpec::default()).unwrap();
        let c = clock_times(&b, &p, &OMEGA_LADDER).unwrap();
        let r = c.tau_ref.unwrap();
        assert!(r.value.is_finite() && r.value > 0.0, "{r:?}");
    }

    #[test]
    fn time_domain_angles_match_spectral_readings() {
        use crate::stationary::SolutionCache;
        let b = make_rectangular(0.0, 1.0, 2.0).unwrap();
        let p = make_gaussian_packet(&b, -40.0, 7.0, 1.0, KGridSpec::default()).unwrap();
        let evo = PacketEvolution::new(&SolutionCache::new(&b), p).unwrap();
        let grid = GridSpec::anchored(-130.0, 130.0, 0.05, 0.0).unwrap();
        let c = time_domain_check(&evo, 0.01, grid, 0.05, 15.0, 95.0).unwrap();
        assert!(c.theta_t_spectral.abs() > 1e-3);
        assert!((c.theta_t_time_domain - c.theta_t_spectral).abs() < 1e-3 * c.theta_t_spectral.abs(), "{c:?}");
        assert!((c.theta_r_time_domain - c.theta_r_spectral).abs() < 1e-3 * c.theta_r_spectral.abs(), "{c:?}");
    }

    #[test]
    fn bad_ladder_is_rejected() {
        let b = make_rectangular(0.0, 1.0, 1.0).unwrap();
        let p = make_gaussian_packet(&b, -60.0, 10.0, 1.0, KGridSpec::default()).unwrap();
        assert!(clock_times(&b, &p, &[1e-3, 2e-3, 1e-4]).is_err());
    }
}
