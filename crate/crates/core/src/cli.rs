//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical tolerance
//! failure, 4 internal error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifact::{fmt_f64, write_csv, write_json, Metadata};
use crate::config::{RunConfig, ToleranceProfile, Tolerances};
use crate::decomposition::{decompose, Decomposition, BRANCH_TOLERANCE};
use crate::error::Error;
use crate::larmor_clock::{clock_times, time_domain_check, ClockTimes, TimeDomainCheck, OMEGA_LADDER};
use crate::oracle::crank_nicolson::{l2_distance, propagate_extrapolated, GridSpec};
use crate::oracle::numerov::numerov_amplitudes;
use crate::potentials::BarrierSpec;
use crate::stationary::{solve_shared, SolutionCache};
use crate::times::{
    dwell_table, larmor_time_route_b, phase_time, time_report, PhaseTime, SubProcess, TimeReport,
};
use crate::wavepacket::{norms_and_overlap, refined_evolution, Component, Norms, PacketEvolution};

#[derive(Debug, Parser)]
#[command(name = "qscatter", version, about = "Transmission and reflection sub-processes of 1D scattering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "qscatter-out")]
    pub out: PathBuf,
    /// Also run the independent reference solvers.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Tolerance set applied to the checks.
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Default)]
    pub tolerance_profile: ProfileArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Default,
    Strict,
}

impl From<ProfileArg> for ToleranceProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Default => ToleranceProfile::Default,
            ProfileArg::Strict => ToleranceProfile::Strict,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Transmission and reflection amplitudes over a k-grid.
    Solve,
    /// Sub-state amplitudes over a k-grid.
    Decompose,
    /// Packet snapshots, norms and overlaps.
    Evolve,
    /// Dwell, Larmor and phase times.
    Times,
    /// Larmor clock readings.
    Larmor,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Decompose => "decompose",
            Command::Evolve => "evolve",
            Command::Times => "times",
            Command::Larmor => "larmor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidBarrier(_) | Error::CompletedScattering(_) => CliError::Config(msg),
            Error::Domain(_) | Error::Io(_) => CliError::Internal(msg),
            _ => CliError::Tolerance(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Shared state of one command invocation.
pub struct Context {
    pub config: RunConfig,
    pub barrier: BarrierSpec,
    pub out: PathBuf,
    pub oracle: bool,
    pub profile: ToleranceProfile,
    pub tolerances: Tolerances,
}

impl Context {
    pub fn new(config: RunConfig, out: &Path, oracle: bool, profile: ToleranceProfile) -> CliResult<Self> {
        let barrier = config.barrier()?;
        std::fs::create_dir_all(out).map_err(|e| CliError::Internal(format!("{}: {e}", out.display())))?;
        Ok(Self {
            tolerances: config.tolerances(profile),
            config,
            barrier,
            out: out.to_path_buf(),
            oracle,
            profile,
        })
    }

    fn meta(&self, command: &str) -> CliResult<Metadata> {
        Ok(Metadata::new(command, &self.config, self.profile)?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn finish(failures: Vec<String>) -> CliResult<()> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

#[derive(Serialize)]
struct SolveSummary {
    metadata: Metadata,
    k_count: usize,
    max_unitarity_residual: f64,
    numerov_max_difference: Option<f64>,
}

pub fn cmd_solve(ctx: &Context) -> CliResult<()> {
    let ks = ctx.config.k_values()?;
    let shared = Arc::new(ctx.barrier.clone());
    let sols = ks
        .par_iter()
        .map(|&k| solve_shared(Arc::clone(&shared), k))
        .collect::<crate::Result<Vec<_>>>()?;
    let numerov = if ctx.oracle {
        let h = ctx.config.run.numerov_h.unwrap_or(2e-3);
        Some(
            ks.par_iter()
                .map(|&k| numerov_amplitudes(&ctx.barrier, k, h))
                .collect::<crate::Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let mut header = vec!["k", "re_a_t", "im_a_t", "re_a_r", "im_a_r", "t", "r", "unitarity_residual"];
    if numerov.is_some() {
        header.extend(["numerov_a_t_diff", "numerov_a_r_diff"]);
    }
    let mut max_u: f64 = 0.0;
    let mut max_n: f64 = 0.0;
    let rows: Vec<Vec<String>> = sols
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let u = s.unitarity_residual();
            max_u = max_u.max(u);
            let mut row = vec![
                f(s.k),
                f(s.a_t.re),
                f(s.a_t.im),
                f(s.a_r.re),
                f(s.a_r.im),
                f(s.t_coef),
                f(s.r_coef),
                f(u),
            ];
            if let Some(n) = &numerov {
                let (dt, dr) = ((n[i].a_t - s.a_t).norm(), (n[i].a_r - s.a_r).norm());
                max_n = max_n.max(dt.max(dr));
                row.extend([f(dt), f(dr)]);
            }
            row
        })
        .collect();
    write_csv(&ctx.path("amplitudes.csv"), &header, &rows)?;
    let summary = SolveSummary {
        metadata: ctx.meta("solve")?,
        k_count: ks.len(),
        max_unitarity_residual: max_u,
        numerov_max_difference: numerov.as_ref().map(|_| max_n),
    };
    write_json(&ctx.path("solve.json"), &summary)?;
    let tol = ctx.tolerances;
    let mut failures = Vec::new();
    check(&mut failures, max_u <= tol.unitarity, || {
        format!("unitarity residual {max_u:e} > {:e}", tol.unitarity)
    });
    if numerov.is_some() {
        check(&mut failures, max_n <= tol.numerov, || {
            format!("Numerov difference {max_n:e} > {:e}", tol.numerov)
        });
    }
    finish(failures)
}

#[derive(Serialize)]
struct DecomposeSummary {
    metadata: Metadata,
    k_count: usize,
    degenerate_count: usize,
    max_sum_residual: f64,
    max_modulus_residual: f64,
    max_re_ref_in_minus_r: f64,
    max_center_residual: f64,
}

pub fn cmd_decompose(ctx: &Context) -> CliResult<()> {
    let ks = ctx.config.k_values()?;
    let shared = Arc::new(ctx.barrier.clone());
    let decs: Vec<Decomposition> = ks
        .par_iter()
        .map(|&k| decompose(&Arc::new(solve_shared(Arc::clone(&shared), k)?)))
        .collect::<crate::Result<_>>()?;
    let header = [
        "k",
        "re_a_tr_in",
        "im_a_tr_in",
        "re_a_ref_in",
        "im_a_ref_in",
        "branch",
        "degenerate",
        "center_residual",
        "rejected_residual",
        "sum_residual",
        "modulus_residual",
        "re_ref_in_minus_r",
    ];
    let mut s = DecomposeSummary {
        metadata: ctx.meta("decompose")?,
        k_count: ks.len(),
        degenerate_count: 0,
        max_sum_residual: 0.0,
        max_modulus_residual: 0.0,
        max_re_ref_in_minus_r: 0.0,
        max_center_residual: 0.0,
    };
    let rows: Vec<Vec<String>> = decs
        .iter()
        .map(|d| {
            let re_minus_r = (d.a_ref_in.re - d.r_coef()).abs();
            s.degenerate_count += d.degenerate as usize;
            s.max_sum_residual = s.max_sum_residual.max(d.sum_residual());
            s.max_modulus_residual = s.max_modulus_residual.max(d.modulus_residual());
            s.max_re_ref_in_minus_r = s.max_re_ref_in_minus_r.max(re_minus_r);
            s.max_center_residual = s.max_center_residual.max(d.center_residual);
            vec![
                f(d.k),
                f(d.a_tr_in.re),
                f(d.a_tr_in.im),
                f(d.a_ref_in.re),
                f(d.a_ref_in.im),
                format!("{:?}", d.branch).to_lowercase(),
                if d.degenerate { "degenerate".into() } else { "regular".into() },
                f(d.center_residual),
                f(d.rejected_residual),
                f(d.sum_residual()),
                f(d.modulus_residual()),
                f(re_minus_r),
            ]
        })
        .collect();
    write_csv(&ctx.path("decomposition.csv"), &header, &rows)?;
    let tol = ctx.tolerances.decomposition;
    let mut failures = Vec::new();
    check(&mut failures, s.max_sum_residual <= tol, || {
        format!("A_tr_in + A_ref_in - 1 residual {:e} > {tol:e}", s.max_sum_residual)
    });
    check(&mut failures, s.max_modulus_residual <= tol, || {
        format!("modulus residual {:e} > {tol:e}", s.max_modulus_residual)
    });
    check(&mut failures, s.max_center_residual <= BRANCH_TOLERANCE, || {
        format!("center residual {:e} > {BRANCH_TOLERANCE:e}", s.max_center_residual)
    });
    write_json(&ctx.path("decompose.json"), &s)?;
    finish(failures)
}

fn packet_evolution(ctx: &Context, t_max: f64) -> CliResult<PacketEvolution> {
    let (packet, grid) = ctx.config.packet()?;
    let cache = SolutionCache::new(&ctx.barrier);
    Ok(refined_evolution(&cache, packet.x0, packet.sigma, packet.k0, grid, t_max, 2)?)
}

fn default_times(ctx: &Context) -> CliResult<Vec<f64>> {
    if let Some(ts) = &ctx.config.run.times {
        return Ok(ts.clone());
    }
    let (p, _) = ctx.config.packet()?;
    let t_end = 2.0 * (ctx.barrier.x_c() - p.x0) / p.k0;
    Ok((0..=10).map(|i| t_end * i as f64 / 10.0).collect())
}

#[derive(Serialize)]
struct TimedNorms {
    t: f64,
    #[serde(flatten)]
    norms: Norms,
    center_exchange: f64,
    linearity_residual: f64,
}

#[derive(Serialize)]
struct CnComparison {
    h: f64,
    dt: f64,
    start: f64,
    l2: Vec<f64>,
    max_l2: f64,
}

#[derive(Serialize)]
struct EvolveSummary {
    metadata: Metadata,
    k_points: usize,
    spectral_t: f64,
    spectral_r: f64,
    norms: Vec<TimedNorms>,
    max_norm_drift: f64,
    /// Spread of `T_t` over the sampled times; nonzero while the sub-packets
    /// exchange probability at the barrier midpoint.
    t_t_spread: f64,
    max_abs_overlap_re: f64,
    snapshots: Vec<String>,
    crank_nicolson: Option<CnComparison>,
}

pub fn cmd_evolve(ctx: &Context) -> CliResult<()> {
    let times = default_times(ctx)?;
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let evo = packet_evolution(ctx, t_max)?;
    let qgrid = evo.quadrature_grid(t_max)?;
    let (lo, hi) = evo.support_bounds(t_max);
    let n_field = ctx.config.run.field_points.unwrap_or(2001);
    let xs: Vec<f64> = (0..n_field)
        .map(|i| lo + (hi - lo) * i as f64 / (n_field - 1) as f64)
        .collect();
    let snap_dir = ctx.path("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut norms = Vec::with_capacity(times.len());
    let mut snapshots = Vec::with_capacity(times.len());
    let mut norm_rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let snap = evo.snapshot(t, &qgrid);
        let n = norms_and_overlap(&snap)?;
        let entry = TimedNorms {
            t,
            norms: n,
            center_exchange: evo.center_exchange(t),
            linearity_residual: snap.linearity_residual(),
        };
        norm_rows.push(vec![
            f(t),
            f(n.norm_full),
            f(n.t_t),
            f(n.r_t),
            f(n.overlap_re),
            f(n.overlap_im),
            f(entry.center_exchange),
            f(entry.linearity_residual),
        ]);
        norms.push(entry);
        let fields = evo.fields(t, &xs);
        let rows: Vec<Vec<String>> = xs
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let (a, b, c) = (fields.full[j], fields.tr[j], fields.refl[j]);
                vec![f(x), f(a.re), f(a.im), f(b.re), f(b.im), f(c.re), f(c.im)]
            })
            .collect();
        let name = format!("snapshot_{i:04}.csv");
        write_csv(
            &snap_dir.join(&name),
            &["x", "re_full", "im_full", "re_tr", "im_tr", "re_ref", "im_ref"],
            &rows,
        )?;
        snapshots.push(format!("snapshots/{name}"));
    }
    write_csv(
        &ctx.path("norms.csv"),
        &[
            "t",
            "norm_full",
            "t_t",
            "r_t",
            "overlap_re",
            "overlap_im",
            "center_exchange",
            "linearity_residual",
        ],
        &norm_rows,
    )?;
    let crank_nicolson = if ctx.oracle {
        Some(cn_comparison(ctx, &evo, &times, (lo, hi))?)
    } else {
        None
    };
    let tt: Vec<f64> = norms.iter().map(|n| n.norms.t_t).collect();
    let summary = EvolveSummary {
        metadata: ctx.meta("evolve")?,
        k_points: evo.packet().ks.len(),
        spectral_t: evo.spectral_t(),
        spectral_r: evo.spectral_r(),
        max_norm_drift: norms.iter().map(|n| (n.norms.norm_full - 1.0).abs()).fold(0.0, f64::max),
        t_t_spread: tt.iter().cloned().fold(f64::MIN, f64::max) - tt.iter().cloned().fold(f64::MAX, f64::min),
        max_abs_overlap_re: norms.iter().map(|n| n.norms.overlap_re.abs()).fold(0.0, f64::max),
        norms,
        snapshots,
        crank_nicolson,
    };
    write_json(&ctx.path("evolve.json"), &summary)?;
    let tol = ctx.tolerances;
    let mut failures = Vec::new();
    check(&mut failures, summary.max_norm_drift <= tol.norm, || {
        format!("norm drift {:e} > {:e}", summary.max_norm_drift, tol.norm)
    });
    if let Some(c) = &summary.crank_nicolson {
        check(&mut failures, c.max_l2 <= tol.crank_nicolson, || {
            format!("Crank-Nicolson L2 {:e} > {:e}", c.max_l2, tol.crank_nicolson)
        });
    }
    finish(failures)
}

fn cn_comparison(ctx: &Context, evo: &PacketEvolution, times: &[f64], (lo, hi): (f64, f64)) -> CliResult<CnComparison> {
    let h = ctx.config.run.cn_h.unwrap_or(0.05);
    let dt = ctx.config.run.cn_dt.unwrap_or(0.05);
    let grid = GridSpec::anchored(lo, hi, h, ctx.barrier.a())?;
    let fine = GridSpec { h: 0.5 * h, ..grid };
    let start = times[0];
    let psi0 = evo.synthesize(Component::Full, start, &fine.xs())?;
    let offsets: Vec<f64> = times.iter().map(|t| t - start).collect();
    let traj = propagate_extrapolated(&ctx.barrier, grid, dt, &psi0, &offsets)?;
    let xs = grid.xs();
    let l2 = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| Ok(l2_distance(h, s, &evo.synthesize(Component::Full, start + t, &xs)?)))
        .collect::<crate::Result<Vec<f64>>>()?;
    Ok(CnComparison {
        h,
        dt,
        start,
        max_l2: l2.iter().cloned().fold(0.0, f64::max),
        l2,
    })
}

#[derive(Serialize)]
struct TimesSummary<'a> {
    metadata: Metadata,
    #[serde(flatten)]
    report: &'a TimeReport,
}

pub fn cmd_times(ctx: &Context) -> CliResult<()> {
    let (packet, grid) = ctx.config.packet()?;
    let cache = SolutionCache::new(&ctx.barrier);
    let evo = PacketEvolution::new(&cache, make_packet(ctx, &packet, grid)?)?;
    let report = time_report(&evo)?;
    let rows: Vec<Vec<String>> = (0..report.ks.len())
        .map(|i| {
            vec![
                f(report.ks[i]),
                f(report.dwell_tr[i]),
                f(report.dwell_ref[i]),
                f(report.phase[i].delay),
                f(report.phase[i].traversal),
            ]
        })
        .collect();
    write_csv(
        &ctx.path("times_k.csv"),
        &["k", "tau_dwell_tr", "tau_dwell_ref", "phase_delay", "phase_traversal"],
        &rows,
    )?;
    write_json(
        &ctx.path("times.json"),
        &TimesSummary {
            metadata: ctx.meta("times")?,
            report: &report,
        },
    )?;
    let tol = ctx.tolerances.routes;
    let mut failures = Vec::new();
    let tr = report.tau_l_tr.residual_squared;
    check(&mut failures, tr <= tol, || format!("tau_L_tr route residual {tr:e} > {tol:e}"));
    if let Some(r) = &report.tau_l_ref {
        let v = r.residual_squared;
        check(&mut failures, v <= tol, || format!("tau_L_ref route residual {v:e} > {tol:e}"));
    }
    finish(failures)
}

fn make_packet(
    ctx: &Context,
    p: &crate::wavepacket::SpectralPacket,
    grid: crate::wavepacket::KGridSpec,
) -> CliResult<crate::wavepacket::SpectralPacket> {
    Ok(crate::wavepacket::make_gaussian_packet(&ctx.barrier, p.x0, p.sigma, p.k0, grid)?)
}

#[derive(Serialize)]
struct Comparison {
    tau_l_tr: f64,
    tau_l_ref: Option<f64>,
    phase_time_k0: PhaseTime,
    relative_difference_tr: f64,
    relative_difference_ref: Option<f64>,
    /// Clock and Larmor time agree within 5%.
    agreement_tr: bool,
    agreement_ref: Option<bool>,
}

#[derive(Serialize)]
struct LarmorSummary {
    metadata: Metadata,
    omega_ladder: Vec<f64>,
    #[serde(flatten)]
    clock: ClockTimes,
    comparison: Comparison,
    time_domain: Option<TimeDomainCheck>,
}

pub fn cmd_larmor(ctx: &Context) -> CliResult<()> {
    let (packet, grid) = ctx.config.packet()?;
    let ladder = ctx.config.run.omega_ladder.clone().unwrap_or(OMEGA_LADDER.to_vec());
    let clock = clock_times(&ctx.barrier, &packet, &ladder)?;
    let cache = SolutionCache::new(&ctx.barrier);
    let evo = PacketEvolution::new(&cache, make_packet(ctx, &packet, grid)?)?;
    let dwell_tr = dwell_table(&evo, SubProcess::Tr)?;
    let tau_l_tr = larmor_time_route_b(&evo, SubProcess::Tr, &dwell_tr)?.squared;
    let tau_l_ref = match &clock.tau_ref {
        Some(_) => {
            let dwell_ref = dwell_table(&evo, SubProcess::Ref)?;
            Some(larmor_time_route_b(&evo, SubProcess::Ref, &dwell_ref)?.squared)
        }
        None => None,
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let rel_tr = rel(clock.tau_tr.value, tau_l_tr);
    let rel_ref = tau_l_ref.zip(clock.tau_ref.as_ref()).map(|(l, c)| rel(c.value, l));
    let comparison = Comparison {
        tau_l_tr,
        tau_l_ref,
        phase_time_k0: phase_time(&ctx.barrier, packet.k0)?,
        relative_difference_tr: rel_tr,
        relative_difference_ref: rel_ref,
        agreement_tr: rel_tr <= 0.05,
        agreement_ref: rel_ref.map(|r| r <= 0.05),
    };
    let time_domain = if ctx.oracle {
        Some(clock_oracle(ctx, &evo)?)
    } else {
        None
    };
    let summary = LarmorSummary {
        metadata: ctx.meta("larmor")?,
        omega_ladder: clock.omegas.clone(),
        clock,
        comparison,
        time_domain,
    };
    write_json(&ctx.path("larmor.json"), &summary)?;
    let mut failures = Vec::new();
    if let Some(c) = &summary.time_domain {
        let tol = ctx.tolerances.clock_oracle;
        let d = rel(c.theta_t_time_domain, c.theta_t_spectral);
        check(&mut failures, d <= tol, || {
            format!("time-domain precession angle differs by {d:e} (relative) > {tol:e}")
        });
    }
    finish(failures)
}

/// Time-domain clock check at 20 times the largest ladder field, so the
/// angle is well above the propagator's error.
fn clock_oracle(ctx: &Context, evo: &PacketEvolution) -> CliResult<TimeDomainCheck> {
    let p = evo.packet();
    let ladder = ctx.config.run.omega_ladder.clone().unwrap_or(OMEGA_LADDER.to_vec());
    let omega = 20.0 * ladder[0] * p.energy();
    let arrival = (ctx.barrier.x_c() - p.x0) / p.k0;
    let (t0, t1) = (0.0, 2.0 * arrival);
    let (lo, hi) = evo.support_bounds(t1);
    let h = ctx.config.run.cn_h.unwrap_or(0.05);
    let dt = ctx.config.run.cn_dt.unwrap_or(0.05);
    let grid = GridSpec::anchored(lo, hi, h, ctx.barrier.a())?;
    Ok(time_domain_check(evo, omega, grid, dt, t0, t1)?)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let ctx = Context::new(config, &cli.out, cli.oracle, cli.tolerance_profile.into())?;
    match cli.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Decompose => cmd_decompose(&ctx),
        Command::Evolve => cmd_evolve(&ctx),
        Command::Times => cmd_times(&ctx),
        Command::Larmor => cmd_larmor(&ctx),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("qscatter: configuration error: --workers must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qscatter: internal error: {e}");
            return 4;
        }
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qscatter {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
