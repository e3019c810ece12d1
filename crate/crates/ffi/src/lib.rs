//! C ABI over `qscatter`.
//!
//! Every fallible function returns a [`QscStatus`]; on failure the message is
//! available from [`qsc_last_error`] on the same thread. Handles are opaque
//! and must be released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use qscatter::decomposition::{decompose, Branch, DEGENERATE_R};
use qscatter::potentials::{make_rectangular, make_symmetric, BarrierSpec};
use qscatter::stationary::{solve_shared, SolutionCache};
use qscatter::times::{dwell_table, larmor_time_route_b, phase_time, SubProcess};
use qscatter::wavepacket::{make_gaussian_packet, norms_and_overlap, Component, KGridSpec, PacketEvolution};
use qscatter::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Internal = 4,
    Panic = 5,
}

impl From<&Error> for QscStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidBarrier(_) | Error::CompletedScattering(_) | Error::Config(_) | Error::Domain(_) => {
                QscStatus::InvalidArgument
            }
            Error::Io(_) => QscStatus::Internal,
            _ => QscStatus::Numerical,
        }
    }
}

/// Opaque barrier handle.
pub struct QscBarrier(Arc<BarrierSpec>);

/// Opaque handle to a Gaussian packet and its precomputed spectral data.
pub struct QscEvolution(PacketEvolution);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QscAmplitudes {
    pub k: f64,
    pub a_t_re: f64,
    pub a_t_im: f64,
    pub a_r_re: f64,
    pub a_r_im: f64,
    pub t: f64,
    pub r: f64,
    pub unitarity_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QscDecomposition {
    pub k: f64,
    pub a_tr_in_re: f64,
    pub a_tr_in_im: f64,
    pub a_ref_in_re: f64,
    pub a_ref_in_im: f64,
    /// 1 for the odd branch, 0 for the even one.
    pub odd_branch: i32,
    /// Nonzero when `R` is below the degeneracy threshold.
    pub degenerate: i32,
    pub sum_residual: f64,
    pub modulus_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QscNorms {
    pub norm_full: f64,
    pub t_t: f64,
    pub r_t: f64,
    pub overlap_re: f64,
    pub overlap_im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QscTimes {
    pub tau_l_tr: f64,
    /// NaN when the packet has no reflected part.
    pub tau_l_ref: f64,
    pub phase_delay_k0: f64,
    pub phase_traversal_k0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QscComponent {
    Full = 0,
    Transmitted = 1,
    Reflected = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (QscStatus, String)>) -> QscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QscStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside qscatter".into());
            QscStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (QscStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(name: &str) -> (QscStatus, String) {
    (QscStatus::NullPointer, format!("{name} is null"))
}

/// Pointer to the last error message on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qsc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qsc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Rectangular barrier of height `v0` on `[a, b]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qsc_barrier_rectangular(a: f64, b: f64, v0: f64, out: *mut *mut QscBarrier) -> QscStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = make_rectangular(a, b, v0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(QscBarrier(Arc::new(spec))));
        Ok(())
    })
}

/// Symmetric staircase from its left half: `n` segments given by `widths`
/// and `heights`, mirrored about the barrier midpoint.
///
/// # Safety
/// `widths` and `heights` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsc_barrier_symmetric(
    a: f64,
    widths: *const f64,
    heights: *const f64,
    n: usize,
    out: *mut *mut QscBarrier,
) -> QscStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if widths.is_null() {
            return Err(null("widths"));
        }
        if heights.is_null() {
            return Err(null("heights"));
        }
        let w = std::slice::from_raw_parts(widths, n);
        let h = std::slice::from_raw_parts(heights, n);
        let half: Vec<(f64, f64)> = w.iter().copied().zip(h.iter().copied()).collect();
        let spec = make_symmetric(a, &half).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(QscBarrier(Arc::new(spec))));
        Ok(())
    })
}

/// # Safety
/// `barrier` must be null or a handle from a `qsc_barrier_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qsc_barrier_free(barrier: *mut QscBarrier) {
    if !barrier.is_null() {
        drop(Box::from_raw(barrier));
    }
}

/// Stationary amplitudes at wavenumber `k`.
///
/// # Safety
/// `barrier` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsc_solve(barrier: *const QscBarrier, k: f64, out: *mut QscAmplitudes) -> QscStatus {
    guard(|| {
        let b = barrier.as_ref().ok_or_else(|| null("barrier"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = solve_shared(Arc::clone(&b.0), k).map_err(lib_err)?;
        *out = QscAmplitudes {
            k: s.k,
            a_t_re: s.a_t.re,
            a_t_im: s.a_t.im,
            a_r_re: s.a_r.re,
            a_r_im: s.a_r.im,
            t: s.t_coef,
            r: s.r_coef,
            unitarity_residual: s.unitarity_residual(),
        };
        Ok(())
    })
}

/// Incoming sub-state amplitudes at wavenumber `k`.
///
/// # Safety
/// `barrier` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsc_decompose(barrier: *const QscBarrier, k: f64, out: *mut QscDecomposition) -> QscStatus {
    guard(|| {
        let b = barrier.as_ref().ok_or_else(|| null("barrier"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = solve_shared(Arc::clone(&b.0), k).map_err(lib_err)?;
        let d = decompose(&Arc::new(s)).map_err(lib_err)?;
        *out = QscDecomposition {
            k: d.k,
            a_tr_in_re: d.a_tr_in.re,
            a_tr_in_im: d.a_tr_in.im,
            a_ref_in_re: d.a_ref_in.re,
            a_ref_in_im: d.a_ref_in.im,
            odd_branch: (d.branch == Branch::Odd) as i32,
            degenerate: d.degenerate as i32,
            sum_residual: d.sum_residual(),
            modulus_residual: d.modulus_residual(),
        };
        Ok(())
    })
}

/// Gaussian packet centred at `x0` with width `sigma` and mean wavenumber
/// `k0`, on the default spectral grid.
///
/// # Safety
/// `barrier` must be a live handle and `out` writable. The evolution keeps
/// its own copy of the barrier.
#[no_mangle]
pub unsafe extern "C" fn qsc_evolution_new(
    barrier: *const QscBarrier,
    x0: f64,
    sigma: f64,
    k0: f64,
    out: *mut *mut QscEvolution,
) -> QscStatus {
    guard(|| {
        let b = barrier.as_ref().ok_or_else(|| null("barrier"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let packet = make_gaussian_packet(&b.0, x0, sigma, k0, KGridSpec::default()).map_err(lib_err)?;
        let cache = SolutionCache::new(&b.0);
        let evo = PacketEvolution::new(&cache, packet).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(QscEvolution(evo)));
        Ok(())
    })
}

/// # Safety
/// `evolution` must be null or a live handle from [`qsc_evolution_new`].
#[no_mangle]
pub unsafe extern "C" fn qsc_evolution_free(evolution: *mut QscEvolution) {
    if !evolution.is_null() {
        drop(Box::from_raw(evolution));
    }
}

/// Full norm, sub-packet norms and their overlap at time `t`.
///
/// # Safety
/// `evolution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsc_evolution_norms(evolution: *const QscEvolution, t: f64, out: *mut QscNorms) -> QscStatus {
    guard(|| {
        let evo = &evolution.as_ref().ok_or_else(|| null("evolution"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let grid = evo.quadrature_grid(t.abs()).map_err(lib_err)?;
        let n = norms_and_overlap(&evo.snapshot(t, &grid)).map_err(lib_err)?;
        *out = QscNorms {
            norm_full: n.norm_full,
            t_t: n.t_t,
            r_t: n.r_t,
            overlap_re: n.overlap_re,
            overlap_im: n.overlap_im,
        };
        Ok(())
    })
}

/// Samples one component of the packet at time `t` on `n` points.
///
/// # Safety
/// `xs`, `out_re` and `out_im` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qsc_evolution_field(
    evolution: *const QscEvolution,
    component: QscComponent,
    t: f64,
    xs: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> QscStatus {
    guard(|| {
        let evo = &evolution.as_ref().ok_or_else(|| null("evolution"))?.0;
        for (p, name) in [(xs as *const u8, "xs"), (out_re as _, "out_re"), (out_im as _, "out_im")] {
            if p.is_null() {
                return Err(null(name));
            }
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let which = match component {
            QscComponent::Full => Component::Full,
            QscComponent::Transmitted => Component::Tr,
            QscComponent::Reflected => Component::Ref,
        };
        let field = evo.synthesize(which, t, xs).map_err(lib_err)?;
        let re = std::slice::from_raw_parts_mut(out_re, n);
        let im = std::slice::from_raw_parts_mut(out_im, n);
        for (i, z) in field.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

/// Larmor times of both sub-processes and the phase time at `k0`.
///
/// # Safety
/// `evolution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsc_evolution_times(evolution: *const QscEvolution, out: *mut QscTimes) -> QscStatus {
    guard(|| {
        let evo = &evolution.as_ref().ok_or_else(|| null("evolution"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let dwell_tr = dwell_table(evo, SubProcess::Tr).map_err(lib_err)?;
        let tau_l_tr = larmor_time_route_b(evo, SubProcess::Tr, &dwell_tr).map_err(lib_err)?.squared;
        let tau_l_ref = if evo.spectral_r() > DEGENERATE_R {
            let dwell_ref = dwell_table(evo, SubProcess::Ref).map_err(lib_err)?;
            larmor_time_route_b(evo, SubProcess::Ref, &dwell_ref).map_err(lib_err)?.squared
        } else {
            f64::NAN
        };
        let phase = phase_time(evo.barrier(), evo.packet().k0).map_err(lib_err)?;
        *out = QscTimes {
            tau_l_tr,
            tau_l_ref,
            phase_delay_k0: phase.delay,
            phase_traversal_k0: phase.traversal,
        };
        Ok(())
    })
}
