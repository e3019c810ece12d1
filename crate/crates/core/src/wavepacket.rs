//! Spectral wave packets built from the stationary sub-states.
//!
//! A packet is `field(x, t) = (2 pi)^{-1/2} \int G(k) phi(x; k) e^{-i E t} dk`
//! over the positive-k grid, with `phi` one of `Psi_full`, `psi_tr`, `psi_ref`.
//! With `\int |G|^2 dk = 1` the full packet has unit norm.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::{decompose, Decomposition};
use crate::error::{Error, Result};
use crate::potentials::BarrierSpec;
use crate::quadrature::{trapezoid_weights, XGrid};
use crate::stationary::{check_sorted, SolutionCache};

/// Tail level of `|g|` at the grid cutoffs, relative to its peak.
pub const TAIL_LEVEL: f64 = 1e-8;
/// Largest admissible fraction of `|g|^2` at `k <= 0`.
pub const NEGATIVE_K_FRACTION: f64 = 1e-10;
/// Largest admissible edge density of a snapshot.
pub const EDGE_DENSITY: f64 = 1e-10;
/// Norm drift between two k-resolutions that counts as aliasing.
pub const ALIASING_DRIFT: f64 = 1e-4;

/// How the k-grid is laid out around `k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KGridSpec {
    pub points: usize,
    /// Half-width of the grid in units of `1 / sigma`.
    pub half_width: f64,
}

impl Default for KGridSpec {
    fn default() -> Self {
        Self {
            points: 2048,
            half_width: 6.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralPacket {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub ks: Vec<f64>,
    pub dk: f64,
    /// Trapezoid weights of the k-grid.
    pub weights: Vec<f64>,
    /// Fourier amplitude of the initial state.
    pub g: Vec<Complex64>,
    /// `G(k) = g(k) - g(-k)`.
    pub big_g: Vec<Complex64>,
    /// `\int |G|^2 dk` on the grid before renormalization.
    pub raw_norm: f64,
    /// `|g|` at the cutoffs relative to its peak.
    pub tail_ratio: f64,
    /// Fraction of `|g|^2` at `k <= 0` (analytic).
    pub negative_fraction: f64,
}

impl SpectralPacket {
    /// `\int |G|^2 dk` on the grid.
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.big_g)
            .map(|(w, g)| w * g.norm_sqr())
            .sum()
    }

    /// `\int |G|^2 f(k) dk` on the grid.
    pub fn spectral_average(&self, f: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.big_g)
            .zip(f)
            .map(|((w, g), v)| w * g.norm_sqr() * v)
            .sum()
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.k0 * self.k0
    }

    pub fn k_max(&self) -> f64 {
        *self.ks.last().unwrap()
    }
}

fn gaussian_amplitude(sigma: f64, k0: f64, x0: f64, k: f64) -> Complex64 {
    let norm = (sigma * sigma / PI).powf(0.25);
    let env = (-0.5 * sigma * sigma * (k - k0).powi(2)).exp();
    Complex64::from_polar(norm * env, -k * x0)
}

/// Gaussian packet centred at `x0` with width `sigma` and mean wavenumber `k0`,
/// placed left of `barrier` far enough for completed scattering.
pub fn make_gaussian_packet(
    barrier: &BarrierSpec,
    x0: f64,
    sigma: f64,
    k0: f64,
    grid: KGridSpec,
) -> Result<SpectralPacket> {
    if !(sigma.is_finite() && sigma > 0.0 && k0.is_finite() && x0.is_finite()) {
        return Err(Error::Domain(format!(
            "packet parameters must be finite with sigma > 0 (x0 = {x0}, sigma = {sigma}, k0 = {k0})"
        )));
    }
    if !(x0 + 5.0 * sigma < barrier.a()) {
        return Err(Error::CompletedScattering(format!(
            "packet must start left of the barrier: x0 + 5 sigma = {} >= a = {}",
            x0 + 5.0 * sigma,
            barrier.a()
        )));
    }
    if !(k0 - 5.0 / sigma > 0.0) {
        return Err(Error::CompletedScattering(format!(
            "negative-k content not negligible: k0 - 5/sigma = {} <= 0",
            k0 - 5.0 / sigma
        )));
    }
    if grid.points < 16 || !(grid.half_width > 0.0) {
        return Err(Error::Domain(format!(
            "k-grid needs >= 16 points and positive half width (got {}, {})",
            grid.points, grid.half_width
        )));
    }
    let k_lo = k0 - grid.half_width / sigma;
    let k_hi = k0 + grid.half_width / sigma;
    if !(k_lo > 0.0) {
        return Err(Error::CompletedScattering(format!(
            "k-grid reaches k <= 0 (k0 - {}/sigma = {k_lo}); increase sigma or k0",
            grid.half_width
        )));
    }
    let n = grid.points;
    let dk = (k_hi - k_lo) / (n - 1) as f64;
    let ks: Vec<f64> = (0..n).map(|i| k_lo + i as f64 * dk).collect();
    let weights = trapezoid_weights(n, dk);
    let g: Vec<Complex64> = ks
        .iter()
        .map(|&k| gaussian_amplitude(sigma, k0, x0, k))
        .collect();
    let big_g: Vec<Complex64> = ks
        .iter()
        .zip(&g)
        .map(|(&k, &gk)| gk - gaussian_amplitude(sigma, k0, x0, -k))
        .collect();
    let peak = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tail_ratio = g[0].norm().max(g[n - 1].norm()) / peak;
    // \int_{-inf}^0 |g|^2 dk = erfc(sigma k0) / 2, bounded by the Gaussian tail
    let negative_fraction = gaussian_tail(sigma * k0);
    if tail_ratio >= TAIL_LEVEL {
        return Err(Error::Domain(format!(
            "spectral tails {tail_ratio:e} at the cutoffs exceed {TAIL_LEVEL:e}; widen the k-grid"
        )));
    }
    if negative_fraction >= NEGATIVE_K_FRACTION {
        return Err(Error::CompletedScattering(format!(
            "fraction {negative_fraction:e} of the spectrum lies at k <= 0"
        )));
    }
    let mut packet = SpectralPacket {
        x0,
        sigma,
        k0,
        ks,
        dk,
        weights,
        g,
        big_g,
        raw_norm: 0.0,
        tail_ratio,
        negative_fraction,
    };
    let raw = packet.norm();
    let s = raw.sqrt();
    for v in packet.g.iter_mut().chain(packet.big_g.iter_mut()) {
        *v /= s;
    }
    packet.raw_norm = raw;
    Ok(packet)
}

/// Upper bound for `erfc(z) / 2`, `z > 0`.
fn gaussian_tail(z: f64) -> f64 {
    // erfc(z) <= exp(-z^2) / (z sqrt(pi)) for z > 0
    0.5 * (-z * z).exp() / (z * PI.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Full,
    Tr,
    Ref,
}

/// Per-k data needed for synthesis.
#[derive(Debug, Clone)]
struct Mode {
    k: f64,
    energy: f64,
    /// `w_k G(k) / sqrt(2 pi)`
    amplitude: Complex64,
    a_t: Complex64,
    a_r: Complex64,
    /// incoming / outgoing coefficients of the sub-states left of the barrier
    tr_in: Complex64,
    tr_out: Complex64,
    ref_in: Complex64,
    ref_out: Complex64,
}

/// Samples of the three packets at one time.
#[derive(Debug, Clone)]
pub struct Fields {
    pub full: Vec<Complex64>,
    pub tr: Vec<Complex64>,
    pub refl: Vec<Complex64>,
}

/// Packet synthesis engine for one barrier and one spectral packet.
#[derive(Debug, Clone)]
pub struct PacketEvolution {
    barrier: Arc<BarrierSpec>,
    packet: SpectralPacket,
    modes: Vec<Mode>,
    decompositions: Vec<Arc<Decomposition>>,
}

impl PacketEvolution {
    /// Solves and decomposes every k on the packet grid (in parallel, memoized
    /// through `cache`).
    pub fn new(cache: &SolutionCache, packet: SpectralPacket) -> Result<Self> {
        let decompositions: Vec<Arc<Decomposition>> = packet
            .ks
            .par_iter()
            .map(|&k| -> Result<Arc<Decomposition>> {
                let sol = cache.get(k)?;
                Ok(Arc::new(decompose(&sol)?))
            })
            .collect::<Result<_>>()?;
        let norm = (2.0 * PI).sqrt();
        let modes = decompositions
            .iter()
            .zip(packet.big_g.iter().zip(&packet.weights))
            .map(|(d, (&g, &w))| {
                let sol = d.solution();
                let (tr_in, tr_out, ref_in, ref_out) = if d.degenerate {
                    (Complex64::new(1.0, 0.0), sol.a_r, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
                } else {
                    (d.a_tr_in, d.a_tr_r, d.a_ref_in, d.a_ref_r)
                };
                Mode {
                    k: d.k,
                    energy: sol.energy,
                    amplitude: g * w / norm,
                    a_t: sol.a_t,
                    a_r: sol.a_r,
                    tr_in,
                    tr_out,
                    ref_in,
                    ref_out,
                }
            })
            .collect();
        Ok(Self {
            barrier: Arc::clone(cache.barrier()),
            packet,
            modes,
            decompositions,
        })
    }

    pub fn barrier(&self) -> &BarrierSpec {
        &self.barrier
    }

    pub fn packet(&self) -> &SpectralPacket {
        &self.packet
    }

    pub fn decompositions(&self) -> &[Arc<Decomposition>] {
        &self.decompositions
    }

    /// `(k, E, w_k G(k) / sqrt(2 pi))` for every grid point.
    pub fn spectral_amplitudes(&self) -> Vec<(f64, f64, Complex64)> {
        self.modes.iter().map(|m| (m.k, m.energy, m.amplitude)).collect()
    }

    /// Spectral transmission probability `\int |G|^2 T(k) dk`.
    pub fn spectral_t(&self) -> f64 {
        let t: Vec<f64> = self.decompositions.iter().map(|d| d.t_coef()).collect();
        self.packet.spectral_average(&t)
    }

    /// Spectral reflection probability `\int |G|^2 R(k) dk`.
    pub fn spectral_r(&self) -> f64 {
        let r: Vec<f64> = self.decompositions.iter().map(|d| d.r_coef()).collect();
        self.packet.spectral_average(&r)
    }

    /// Fastest group velocity on the grid.
    pub fn v_max(&self) -> f64 {
        self.packet.k_max()
    }

    fn phases(&self, t: f64) -> Vec<Complex64> {
        self.modes
            .iter()
            .map(|m| m.amplitude * Complex64::from_polar(1.0, -m.energy * t))
            .collect()
    }

    fn sample(&self, phases: &[Complex64], x: f64) -> [Complex64; 3] {
        let zero = Complex64::new(0.0, 0.0);
        let (a, b) = (self.barrier.a(), self.barrier.b());
        if x < a || x > b {
            let k_lo = self.modes[0].k;
            let step = Complex64::from_polar(1.0, self.packet.dk * x);
            let mut z = Complex64::from_polar(1.0, k_lo * x);
            let (mut full, mut tr, mut refl) = (zero, zero, zero);
            for (j, (m, c)) in self.modes.iter().zip(phases).enumerate() {
                if j % 64 == 0 {
                    z = Complex64::from_polar(1.0, m.k * x);
                }
                if x < a {
                    let zc = z.conj();
                    full += c * (z + m.a_r * zc);
                    tr += c * (m.tr_in * z + m.tr_out * zc);
                    refl += c * (m.ref_in * z + m.ref_out * zc);
                } else {
                    full += c * m.a_t * z;
                }
                z *= step;
            }
            if x > b {
                tr = full;
            }
            [full, tr, refl]
        } else {
            let (mut full, mut tr, mut refl) = (zero, zero, zero);
            for (d, c) in self.decompositions.iter().zip(phases) {
                let f = d.solution().eval(x);
                let [t, _, r, _] = d.eval_masked(x);
                full += c * f;
                tr += c * t;
                refl += c * r;
            }
            [full, tr, refl]
        }
    }

    /// All three packets at time `t` on `xs`.
    pub fn fields(&self, t: f64, xs: &[f64]) -> Fields {
        let phases = self.phases(t);
        let samples: Vec<[Complex64; 3]> = xs
            .par_iter()
            .with_min_len(64)
            .map(|&x| self.sample(&phases, x))
            .collect();
        let mut out = Fields {
            full: Vec::with_capacity(xs.len()),
            tr: Vec::with_capacity(xs.len()),
            refl: Vec::with_capacity(xs.len()),
        };
        for [f, t, r] in samples {
            out.full.push(f);
            out.tr.push(t);
            out.refl.push(r);
        }
        out
    }

    /// One packet component at time `t` on a sorted grid.
    pub fn synthesize(&self, component: Component, t: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
        check_sorted(xs)?;
        let f = self.fields(t, xs);
        Ok(match component {
            Component::Full => f.full,
            Component::Tr => f.tr,
            Component::Ref => f.refl,
        })
    }

    /// Rate `dT_t/dt = Im(Psi_full^* d_x psi_ref)` at `x_c`: probability
    /// exchanged between the two sub-packets across the barrier midpoint.
    /// Single-energy states give zero; packets pick up cross-energy terms.
    pub fn center_exchange(&self, t: f64) -> f64 {
        let phases = self.phases(t);
        let xc = self.barrier.x_c();
        let zero = Complex64::new(0.0, 0.0);
        let (mut full, mut dref) = (zero, zero);
        for (d, c) in self.decompositions.iter().zip(&phases) {
            full += c * d.solution().eval(xc);
            dref += c * d.eval_ref(xc).1;
        }
        (full.conj() * dref).im
    }

    /// Grid covering the packet support for all `|t| <= t_max`.
    pub fn support_bounds(&self, t_max: f64) -> (f64, f64) {
        let reach = self.v_max() * t_max.abs();
        let s = self.packet.sigma;
        (
            self.packet.x0 - 10.0 * s - reach,
            self.barrier.b() + 10.0 * s + reach,
        )
    }

    /// Composite Gauss-Legendre grid over [`Self::support_bounds`], with panel
    /// edges on every barrier breakpoint.
    pub fn quadrature_grid(&self, t_max: f64) -> Result<XGrid> {
        let (lo, hi) = self.support_bounds(t_max);
        let wavelength = 2.0 * PI / self.v_max();
        XGrid::panels(lo, hi, &self.barrier.breakpoints(), 0.25 * wavelength, 10)
    }

    pub fn snapshot(&self, t: f64, grid: &XGrid) -> PacketSnapshot {
        let f = self.fields(t, &grid.xs);
        PacketSnapshot {
            t,
            xs: grid.xs.clone(),
            weights: grid.weights.clone(),
            full: f.full,
            tr: f.tr,
            refl: f.refl,
        }
    }

    /// Norm drift of `Psi_full` at `t` between this k-grid and one with half the
    /// points. Large values mean the coarser grid aliases.
    pub fn aliasing_drift(&self, cache: &SolutionCache, t: f64, grid: &XGrid) -> Result<f64> {
        let p = &self.packet;
        let coarse_spec = KGridSpec {
            points: p.ks.len() / 2,
            half_width: (p.k_max() - p.k0) * p.sigma,
        };
        let coarse = make_gaussian_packet(&self.barrier, p.x0, p.sigma, p.k0, coarse_spec)?;
        let coarse = PacketEvolution::new(cache, coarse)?;
        let n_fine = self.snapshot(t, grid).norms().norm_full;
        let n_coarse = coarse.snapshot(t, grid).norms().norm_full;
        Ok((n_fine - n_coarse).abs())
    }
}

/// Builds a packet and doubles its k-grid until the aliasing detector is quiet
/// at `t_max` (at most `max_doublings` times).
pub fn refined_evolution(
    cache: &SolutionCache,
    x0: f64,
    sigma: f64,
    k0: f64,
    spec: KGridSpec,
    t_max: f64,
    max_doublings: usize,
) -> Result<PacketEvolution> {
    let mut spec = spec;
    for attempt in 0..=max_doublings {
        let packet = make_gaussian_packet(cache.barrier(), x0, sigma, k0, spec)?;
        let evo = PacketEvolution::new(cache, packet)?;
        let grid = evo.quadrature_grid(t_max)?;
        let drift = evo.aliasing_drift(cache, t_max, &grid)?;
        if drift <= ALIASING_DRIFT {
            return Ok(evo);
        }
        if attempt == max_doublings {
            return Err(Error::GridRefinement {
                drift,
                coarse: spec.points / 2,
                fine: spec.points,
            });
        }
        spec.points *= 2;
    }
    unreachable!()
}

/// Norms and overlap of the sub-state packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub norm_full: f64,
    pub t_t: f64,
    pub r_t: f64,
    pub overlap_re: f64,
    pub overlap_im: f64,
}

#[derive(Debug, Clone)]
pub struct PacketSnapshot {
    pub t: f64,
    pub xs: Vec<f64>,
    /// Quadrature weights for `xs`.
    pub weights: Vec<f64>,
    pub full: Vec<Complex64>,
    pub tr: Vec<Complex64>,
    pub refl: Vec<Complex64>,
}

impl PacketSnapshot {
    /// Weighted inner products without support checks.
    pub fn norms(&self) -> Norms {
        let mut n = [0.0f64; 3];
        let mut ov = Complex64::new(0.0, 0.0);
        for i in 0..self.xs.len() {
            let w = self.weights[i];
            n[0] += w * self.full[i].norm_sqr();
            n[1] += w * self.tr[i].norm_sqr();
            n[2] += w * self.refl[i].norm_sqr();
            ov += w * self.tr[i].conj() * self.refl[i];
        }
        Norms {
            norm_full: n[0],
            t_t: n[1],
            r_t: n[2],
            overlap_re: ov.re,
            overlap_im: ov.im,
        }
    }

    /// Largest pointwise `|Psi_full - psi_tr - psi_ref|`.
    pub fn linearity_residual(&self) -> f64 {
        self.full
            .iter()
            .zip(self.tr.iter().zip(&self.refl))
            .map(|(f, (t, r))| (f - t - r).norm())
            .fold(0.0, f64::max)
    }
}

/// `(norm_full, T_t, R_t, overlap_re)` after checking that the grid edges carry
/// no density.
pub fn norms_and_overlap(snapshot: &PacketSnapshot) -> Result<Norms> {
    let n = snapshot.xs.len();
    if n < 3 {
        return Err(Error::Domain("snapshot grid needs at least 3 points".into()));
    }
    let edge = snapshot.full[0]
        .norm_sqr()
        .max(snapshot.full[n - 1].norm_sqr());
    if edge >= EDGE_DENSITY {
        return Err(Error::SupportTruncation { edge_density: edge });
    }
    Ok(snapshot.norms())
}
