//! Run configuration.
//!
//! ```toml
//! [barrier]
//! a = 0.0
//! b = 1.0            # rectangular barrier: b and height
//! height = 2.0
//! # half_profile = [[0.25, 1.0], [0.25, 2.0]]   # mirrored staircase
//! # segments = [[0.3, 1.0], [0.4, 2.0], [0.3, 1.0]]  # full list, must be symmetric
//!
//! [packet]
//! x0 = -40.0
//! sigma = 7.0
//! k0 = 1.0
//! k_points = 2048     # optional
//! half_width = 6.5    # optional, in units of 1/sigma
//!
//! [run]
//! k_min = 0.1         # solve / decompose grid
//! k_max = 3.0
//! k_count = 300
//! # k_values = [1.0, 2.0]
//! times = [0.0, 20.0, 40.0]   # evolve
//! field_points = 2001
//! omega_ladder = [1e-3, 5e-4, 2.5e-4]   # larmor, units of E0
//! numerov_h = 2e-3   # --oracle settings
//! cn_h = 0.05
//! cn_dt = 0.05
//!
//! [tolerances]        # optional overrides of the selected profile
//! unitarity = 1e-10
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::potentials::{make_rectangular, make_symmetric, BarrierSpec, Segment};
use crate::wavepacket::{make_gaussian_packet, KGridSpec, SpectralPacket};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub a: f64,
    pub b: Option<f64>,
    pub height: Option<f64>,
    pub half_profile: Option<Vec<[f64; 2]>>,
    pub segments: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub k_points: Option<usize>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub k_count: Option<usize>,
    pub k_values: Option<Vec<f64>>,
    pub times: Option<Vec<f64>>,
    pub field_points: Option<usize>,
    pub omega_ladder: Option<Vec<f64>>,
    pub numerov_h: Option<f64>,
    pub cn_h: Option<f64>,
    pub cn_dt: Option<f64>,
}

/// Acceptance thresholds applied to command outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// `|T + R - 1|` per wavenumber.
    pub unitarity: f64,
    /// Decomposition identity residuals.
    pub decomposition: f64,
    /// Packet norm drift.
    pub norm: f64,
    /// Relative difference of the two Larmor-time routes.
    pub routes: f64,
    /// Numerov vs transfer-matrix amplitudes.
    pub numerov: f64,
    /// L2 distance between Crank-Nicolson and spectral synthesis.
    pub crank_nicolson: f64,
    /// Relative difference of time-stepped and spectral precession angles.
    pub clock_oracle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Default,
    Strict,
}

impl Tolerances {
    pub fn profile(p: ToleranceProfile) -> Self {
        match p {
            ToleranceProfile::Default => Self {
                unitarity: 1e-10,
                decomposition: 1e-9,
                norm: 1e-6,
                routes: 1e-3,
                numerov: 1e-6,
                crank_nicolson: 1e-4,
                clock_oracle: 1e-3,
            },
            ToleranceProfile::Strict => Self {
                unitarity: 1e-12,
                decomposition: 1e-11,
                norm: 1e-8,
                routes: 1e-4,
                numerov: 1e-8,
                crank_nicolson: 1e-5,
                clock_oracle: 1e-4,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub unitarity: Option<f64>,
    pub decomposition: Option<f64>,
    pub norm: Option<f64>,
    pub routes: Option<f64>,
    pub numerov: Option<f64>,
    pub crank_nicolson: Option<f64>,
    pub clock_oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub barrier: BarrierConfig,
    pub packet: Option<PacketConfig>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(key, format!("must be positive and finite, got {v}")))
    }
}

fn pairs(key: &str, list: &[[f64; 2]]) -> Result<Vec<(f64, f64)>> {
    if list.is_empty() {
        return Err(config_err(key, "must not be empty"));
    }
    list.iter()
        .enumerate()
        .map(|(i, [w, h])| {
            positive(&format!("{key}[{i}] width"), *w)?;
            finite(&format!("{key}[{i}] height"), *h)?;
            Ok((*w, *h))
        })
        .collect()
}

impl RunConfig {
    /// Parses and validates a config. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let barrier = self.barrier()?;
        if let Some(p) = &self.packet {
            self.packet_for(&barrier, p)?;
        }
        let r = &self.run;
        if let Some(v) = r.k_min {
            positive("run.k_min", v)?;
        }
        if let Some(v) = r.k_max {
            positive("run.k_max", v)?;
        }
        if let (Some(lo), Some(hi)) = (r.k_min, r.k_max) {
            if !(hi > lo) {
                return Err(config_err("run.k_max", format!("must exceed run.k_min ({hi} <= {lo})")));
            }
        }
        if let Some(n) = r.k_count {
            if n < 1 {
                return Err(config_err("run.k_count", "must be at least 1"));
            }
        }
        if let Some(ks) = &r.k_values {
            for (i, &k) in ks.iter().enumerate() {
                positive(&format!("run.k_values[{i}]"), k)?;
            }
        }
        if let Some(ts) = &r.times {
            if ts.is_empty() {
                return Err(config_err("run.times", "must not be empty"));
            }
            for (i, &t) in ts.iter().enumerate() {
                finite(&format!("run.times[{i}]"), t)?;
            }
            if ts.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(config_err("run.times", "must be strictly increasing"));
            }
        }
        if let Some(n) = r.field_points {
            if n < 3 {
                return Err(config_err("run.field_points", "must be at least 3"));
            }
        }
        if let Some(l) = &r.omega_ladder {
            if l.len() < 3 {
                return Err(config_err(
                    "run.omega_ladder",
                    format!("needs at least 3 Larmor frequencies for extrapolation, got {}", l.len()),
                ));
            }
            for (i, &w) in l.iter().enumerate() {
                positive(&format!("run.omega_ladder[{i}]"), w)?;
            }
            if l.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(config_err("run.omega_ladder", "must be strictly decreasing"));
            }
        }
        for (key, v) in [
            ("run.numerov_h", r.numerov_h),
            ("run.cn_h", r.cn_h),
            ("run.cn_dt", r.cn_dt),
        ] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.unitarity", t.unitarity),
            ("tolerances.decomposition", t.decomposition),
            ("tolerances.norm", t.norm),
            ("tolerances.routes", t.routes),
            ("tolerances.numerov", t.numerov),
            ("tolerances.crank_nicolson", t.crank_nicolson),
            ("tolerances.clock_oracle", t.clock_oracle),
        ] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        Ok(())
    }

    pub fn barrier(&self) -> Result<BarrierSpec> {
        let c = &self.barrier;
        let a = finite("barrier.a", c.a)?;
        let forms = [
            c.b.is_some() || c.height.is_some(),
            c.half_profile.is_some(),
            c.segments.is_some(),
        ];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(config_err(
                "barrier",
                "give exactly one of (b, height), half_profile or segments",
            ));
        }
        let spec = if let Some(hp) = &c.half_profile {
            make_symmetric(a, &pairs("barrier.half_profile", hp)?)
        } else if let Some(segs) = &c.segments {
            let segs = pairs("barrier.segments", segs)?
                .into_iter()
                .map(|(width, height)| Segment { width, height })
                .collect();
            BarrierSpec::new(a, segs)
        } else {
            let b = c.b.ok_or_else(|| config_err("barrier.b", "missing"))?;
            let h = c.height.ok_or_else(|| config_err("barrier.height", "missing"))?;
            let b = finite("barrier.b", b)?;
            if !(b > a) {
                return Err(config_err("barrier.b", format!("must exceed barrier.a ({b} <= {a})")));
            }
            make_rectangular(a, b, finite("barrier.height", h)?)
        };
        spec.map_err(|e| config_err("barrier", e))
    }

    fn packet_for(&self, barrier: &BarrierSpec, p: &PacketConfig) -> Result<SpectralPacket> {
        finite("packet.x0", p.x0)?;
        positive("packet.sigma", p.sigma)?;
        positive("packet.k0", p.k0)?;
        let grid = self.k_grid()?;
        make_gaussian_packet(barrier, p.x0, p.sigma, p.k0, grid).map_err(|e| config_err("packet", e))
    }

    fn k_grid(&self) -> Result<KGridSpec> {
        let mut g = KGridSpec::default();
        if let Some(p) = &self.packet {
            if let Some(n) = p.k_points {
                if n < 16 {
                    return Err(config_err("packet.k_points", "must be at least 16"));
                }
                g.points = n;
            }
            if let Some(w) = p.half_width {
                g.half_width = positive("packet.half_width", w)?;
            }
        }
        Ok(g)
    }

    /// The packet section, required by the packet commands.
    pub fn packet(&self) -> Result<(SpectralPacket, KGridSpec)> {
        let p = self
            .packet
            .as_ref()
            .ok_or_else(|| config_err("packet", "section required for this command"))?;
        let barrier = self.barrier()?;
        Ok((self.packet_for(&barrier, p)?, self.k_grid()?))
    }

    /// Wavenumbers for the stationary tables: `run.k_values`, else a uniform
    /// grid from `run.k_min/k_max/k_count`, else the packet's spectral window.
    pub fn k_values(&self) -> Result<Vec<f64>> {
        let r = &self.run;
        if let Some(ks) = &r.k_values {
            return Ok(ks.clone());
        }
        let n = r.k_count.unwrap_or(201);
        let (lo, hi) = match (r.k_min, r.k_max, &self.packet) {
            (Some(lo), Some(hi), _) => (lo, hi),
            (_, _, Some(p)) => {
                let w = self.k_grid()?.half_width / p.sigma;
                (r.k_min.unwrap_or(p.k0 - w), r.k_max.unwrap_or(p.k0 + w))
            }
            _ => return Err(config_err("run.k_min", "k range needs run.k_min and run.k_max (or a packet)")),
        };
        if n == 1 {
            return Ok(vec![lo]);
        }
        Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
    }

    pub fn tolerances(&self, profile: ToleranceProfile) -> Tolerances {
        let mut t = Tolerances::profile(profile);
        let o = &self.tolerances;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut t.unitarity, o.unitarity);
        set(&mut t.decomposition, o.decomposition);
        set(&mut t.norm, o.norm);
        set(&mut t.routes, o.routes);
        set(&mut t.numerov, o.numerov);
        set(&mut t.crank_nicolson, o.crank_nicolson);
        set(&mut t.clock_oracle, o.clock_oracle);
        t
    }

    /// SHA-256 of the canonical JSON form of the parsed config, so formatting
    /// and comments do not change the hash.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECT: &str = r#"
[barrier]
a = 0.0
b = 1.0
height = 2.0

[packet]
x0 = -40.0
sigma = 7.0
k0 = 1.0
"#;

    #[test]
    fn parses_rectangular_config() {
        let c = RunConfig::parse(RECT).unwrap();
        let b = c.barrier().unwrap();
        assert_eq!(b.x_c(), 0.5);
        assert_eq!(c.k_values().unwrap().len(), 201);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse(&format!("{RECT}\n[run]\nfoo = 1\n")).unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn negative_width_names_the_key() {
        let text = "[barrier]\na = 0.0\nhalf_profile = [[0.5, 1.0], [-0.1, 2.0]]\n";
        let err = RunConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("barrier.half_profile[1] width"), "{err}");
    }

    #[test]
    fn asymmetric_segments_are_rejected() {
        let text = "[barrier]\na = 0.0\nsegments = [[0.5, 1.0], [0.5, 2.0]]\n";
        assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))));
    }

    #[test]
    fn packet_preconditions_checked_at_parse_time() {
        let text = RECT.replace("x0 = -40.0", "x0 = -10.0");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("packet"), "{err}");
    }

    #[test]
    fn short_ladder_is_rejected() {
        let err = RunConfig::parse(&format!("{RECT}\n[run]\nomega_ladder = [1e-3]\n")).unwrap_err();
        assert!(err.to_string().contains("run.omega_ladder"), "{err}");
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = RunConfig::parse(RECT).unwrap();
        let b = RunConfig::parse(&RECT.replace("b = 1.0", "b   =   1.0  # right edge")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse(&RECT.replace("height = 2.0", "height = 2.5")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
