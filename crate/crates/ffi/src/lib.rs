//! C interface to `measdiff`.
//!
//! Systems are opaque handles created by `md_system_*` and released with
//! `md_system_free`. Every call returns an [`MdStatus`]; on failure the
//! message is kept per thread and read back with `md_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::OnceLock;

use measdiff::config::parse_config;
use measdiff::dynamics::{evolve_coherent, evolve_measured_with, RunOptions};
use measdiff::kick::{kick_matrix, transition_matrix, TransitionMatrix};
use measdiff::model::{default_grid, mean_force_squared};
use measdiff::{
    Error, FreeHamiltonian, KickedSystem, MomentumDistribution, Potential, StateVector,
    SystemParams,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    BudgetExceeded = 4,
    InvariantViolated = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque handle to a validated kicked system.
pub struct MdSystem {
    system: KickedSystem,
    transition: OnceLock<TransitionMatrix>,
}

impl MdSystem {
    fn new(system: KickedSystem) -> Self {
        MdSystem {
            system,
            transition: OnceLock::new(),
        }
    }

    fn transition(&self) -> &TransitionMatrix {
        self.transition
            .get_or_init(|| transition_matrix(&kick_matrix(&self.system)))
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> MdStatus {
    match err {
        Error::Validation { .. } | Error::GridTooSmall { .. } | Error::BasisMismatch { .. } => {
            MdStatus::InvalidArgument
        }
        Error::BesselRange { .. } | Error::UnsupportedHamiltonian(_) => MdStatus::InvalidArgument,
        Error::Config(_) => MdStatus::Config,
        Error::BranchBudget { .. } | Error::LeakBudget { .. } => MdStatus::BudgetExceeded,
        Error::Invariant(_) | Error::Prerequisite(_) => MdStatus::InvariantViolated,
        _ => MdStatus::Internal,
    }
}

fn fail(status: MdStatus, msg: impl Into<String>) -> MdStatus {
    set_error(msg.into());
    status
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), MdStatus>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MdStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(MdStatus::Panic, "panic inside measdiff"),
    }
}

fn lift<T>(r: measdiff::Result<T>) -> Result<T, MdStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn handle<'a>(sys: *const MdSystem) -> Result<&'a MdSystem, MdStatus> {
    sys.as_ref()
        .ok_or_else(|| fail(MdStatus::NullPointer, "null system handle"))
}

unsafe fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, MdStatus> {
    out.as_mut()
        .ok_or_else(|| fail(MdStatus::NullPointer, "null output pointer"))
}

fn publish(system: KickedSystem, out: &mut *mut MdSystem) {
    *out = Box::into_raw(Box::new(MdSystem::new(system)));
}

/// Kicked rotator `H0 = p^2 / 2I`, `V = cos x`. `grid = 0` picks the default.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn md_system_rotator(
    inertia: f64,
    lambda: f64,
    period: f64,
    tau: f64,
    hbar: f64,
    basis_m: usize,
    grid: usize,
    out: *mut *mut MdSystem,
) -> MdStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        let params = SystemParams {
            h0: FreeHamiltonian::Rotator { inertia },
            potential: Potential::Cosine,
            lambda,
            period,
            tau,
            hbar,
            basis_m,
            grid: if grid == 0 { default_grid(basis_m) } else { grid },
        };
        publish(lift(KickedSystem::new(params))?, out);
        Ok(())
    })
}

/// Build a system from the `[system]` section of a TOML configuration.
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_system_from_toml(text: *const c_char, out: *mut *mut MdSystem) -> MdStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        if text.is_null() {
            return Err(fail(MdStatus::NullPointer, "null configuration text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| fail(MdStatus::Config, "configuration is not UTF-8"))?;
        let cfg = lift(parse_config(text))?;
        publish(lift(cfg.system.build())?, out);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `sys` must come from `md_system_*` and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn md_system_free(sys: *mut MdSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Angle average of the squared force, `<f^2>`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_mean_force_squared(sys: *const MdSystem, out: *mut f64) -> MdStatus {
    guard(|| {
        let s = &handle(sys)?.system;
        *out_ref(out)? = mean_force_squared(s.potential(), s.grid());
        Ok(())
    })
}

/// Quasilinear diffusion constant `lambda^2 <f^2> / T`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_quasilinear_diffusion(sys: *const MdSystem, out: *mut f64) -> MdStatus {
    guard(|| {
        *out_ref(out)? = handle(sys)?.system.quasilinear_diffusion();
        Ok(())
    })
}

/// Transition probability `W_nm`; zero for indices outside `[-M, M]`.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_transition_entry(sys: *const MdSystem, n: i64, m: i64, out: *mut f64) -> MdStatus {
    guard(|| {
        *out_ref(out)? = handle(sys)?.transition().entry(n, m);
        Ok(())
    })
}

/// Half-bandwidth of the stored transition matrix.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_transition_bandwidth(sys: *const MdSystem, out: *mut usize) -> MdStatus {
    guard(|| {
        *out_ref(out)? = handle(sys)?.transition().band();
        Ok(())
    })
}

fn check_buffer(out: *mut f64, len: usize, kicks: usize) -> Result<(), MdStatus> {
    if out.is_null() {
        return Err(fail(MdStatus::NullPointer, "null moment buffer"));
    }
    let need = kicks
        .checked_add(1)
        .and_then(|r| r.checked_mul(4))
        .ok_or_else(|| fail(MdStatus::InvalidArgument, "kick count overflows the buffer size"))?;
    if len < need {
        return Err(fail(
            MdStatus::BufferTooSmall,
            format!("moment buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(())
}

/// Records past a leak-budget stop are left untouched.
unsafe fn write_moments(moments: &[measdiff::observables::Moments], out: *mut f64) {
    let buf = std::slice::from_raw_parts_mut(out, moments.len() * 4);
    for (chunk, m) in buf.chunks_exact_mut(4).zip(moments) {
        chunk.copy_from_slice(&m.as_array());
    }
}

/// Measured evolution from `|initial_index>`. Writes `(kicks + 1) * 4` values
/// `<p>, <p^2>, <p^3>, <p^4>` per record into `out`.
///
/// # Safety
/// `sys` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_evolve_measured(
    sys: *const MdSystem,
    initial_index: i64,
    kicks: usize,
    leak_budget: f64,
    out: *mut f64,
    len: usize,
) -> MdStatus {
    guard(|| {
        let h = handle(sys)?;
        check_buffer(out, len, kicks)?;
        let p0 = lift(MomentumDistribution::delta(h.system.basis(), initial_index))?;
        let opts = RunOptions {
            leak_budget,
            record_states: false,
        };
        let run = lift(evolve_measured_with(
            &h.system,
            h.transition(),
            &p0,
            kicks,
            &opts,
        ))?;
        write_moments(&run.moments, out);
        lift(run.status.into_result(leak_budget))
    })
}

/// Coherent evolution from `|initial_index>`; same output layout as
/// `md_evolve_measured`.
///
/// # Safety
/// `sys` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_evolve_coherent(
    sys: *const MdSystem,
    initial_index: i64,
    kicks: usize,
    leak_budget: f64,
    out: *mut f64,
    len: usize,
) -> MdStatus {
    guard(|| {
        let h = handle(sys)?;
        check_buffer(out, len, kicks)?;
        let psi0 = lift(StateVector::delta(h.system.basis(), initial_index))?;
        let opts = RunOptions {
            leak_budget,
            record_states: false,
        };
        let run = lift(evolve_coherent(&h.system, &psi0, kicks, &opts))?;
        write_moments(&run.moments, out);
        lift(run.status.into_result(leak_budget))
    })
}

/// Bessel function of the first kind `J_order(x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_bessel_j(order: i64, x: f64, out: *mut f64) -> MdStatus {
    guard(|| {
        *out_ref(out)? = lift(measdiff::bessel::bessel_j(order, x))?;
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit). Returns the full message length in bytes, excluding the
/// terminator; pass a null `buf` to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn md_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
