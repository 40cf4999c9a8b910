//! C ABI over `fdqn`.
//!
//! Grids and networks cross the boundary as opaque handles that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`FdqnStatus`]; on failure, [`fdqn_last_error`] describes the problem.
//! Strings handed out by the library are released with [`fdqn_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fdqn::agent::{greedy_action, load_checkpoint, save_checkpoint, AlgoVariant, StateVector};
use fdqn::evaluation::map_similarity;
use fdqn::gridworld::{load_map, OccupancyGrid};
use fdqn::neural::{NetworkParams, NUM_ACTIONS, STATE_DIM};
use fdqn::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdqnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    DimensionMismatch = 4,
    ZeroMagnitude = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdqnAlgo {
    Dqn = 0,
    Ddqn = 1,
    DuelingDqn = 2,
    DuelingDdqn = 3,
}

impl From<FdqnAlgo> for AlgoVariant {
    fn from(a: FdqnAlgo) -> Self {
        match a {
            FdqnAlgo::Dqn => AlgoVariant::Dqn,
            FdqnAlgo::Ddqn => AlgoVariant::Ddqn,
            FdqnAlgo::DuelingDqn => AlgoVariant::DuelingDqn,
            FdqnAlgo::DuelingDdqn => AlgoVariant::DuelingDdqn,
        }
    }
}

impl From<AlgoVariant> for FdqnAlgo {
    fn from(a: AlgoVariant) -> Self {
        match a {
            AlgoVariant::Dqn => FdqnAlgo::Dqn,
            AlgoVariant::Ddqn => FdqnAlgo::Ddqn,
            AlgoVariant::DuelingDqn => FdqnAlgo::DuelingDqn,
            AlgoVariant::DuelingDdqn => FdqnAlgo::DuelingDdqn,
        }
    }
}

/// An occupancy grid.
pub struct FdqnGrid {
    grid: OccupancyGrid,
}

/// A Q-network together with the variant it was built for.
pub struct FdqnNetwork {
    variant: AlgoVariant,
    params: NetworkParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FdqnStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => FdqnStatus::DimensionMismatch,
        Error::ZeroMagnitude => FdqnStatus::ZeroMagnitude,
        Error::MalformedCharacter { .. }
        | Error::RaggedRows { .. }
        | Error::EmptyMap
        | Error::NoStart
        | Error::MultipleStarts
        | Error::Checkpoint(_)
        | Error::Pgm(_)
        | Error::Dataset { .. } => FdqnStatus::Parse,
        _ => FdqnStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FdqnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FdqnStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            FdqnStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FdqnStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn state_slice<'a>(state: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if state.is_null() {
        return Err(Failure::Null("state"));
    }
    if len != STATE_DIM {
        return Err(Error::LengthMismatch {
            left: len,
            right: STATE_DIM,
        }
        .into());
    }
    Ok(std::slice::from_raw_parts(state, len))
}

/// Message for the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn fdqn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fdqn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses map text (`#` wall, `.` free, `S` start).
#[no_mangle]
pub unsafe extern "C" fn fdqn_grid_from_map(map_text: *const c_char, out: *mut *mut FdqnGrid) -> FdqnStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (grid, _) = load_map(text(map_text, "map_text")?)?;
        *out = Box::into_raw(Box::new(FdqnGrid { grid }));
        Ok(())
    })
}

/// Parses a plain (`P2`) PGM image of a grid.
#[no_mangle]
pub unsafe extern "C" fn fdqn_grid_from_pgm(pgm_text: *const c_char, out: *mut *mut FdqnGrid) -> FdqnStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let grid = OccupancyGrid::from_pgm(text(pgm_text, "pgm_text")?)?;
        *out = Box::into_raw(Box::new(FdqnGrid { grid }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdqn_grid_free(grid: *mut FdqnGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fdqn_grid_dims(grid: *const FdqnGrid, width: *mut usize, height: *mut usize) -> FdqnStatus {
    guard(|| {
        let g = non_null(grid, "grid")?;
        let (w, h) = g.grid.dims();
        *out_ref(width, "width")? = w;
        *out_ref(height, "height")? = h;
        Ok(())
    })
}

/// Renders the grid as a PGM string; free it with [`fdqn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fdqn_grid_to_pgm(grid: *const FdqnGrid, out: *mut *mut c_char) -> FdqnStatus {
    guard(|| {
        let g = non_null(grid, "grid")?;
        let out = out_ref(out, "out")?;
        *out = CString::new(g.grid.to_pgm()).expect("pgm has no nul").into_raw();
        Ok(())
    })
}

/// Cosine similarity of pooled map features and whether it clears the gate.
#[no_mangle]
pub unsafe extern "C" fn fdqn_map_similarity(
    reference: *const FdqnGrid,
    candidate: *const FdqnGrid,
    score: *mut f64,
    pass: *mut bool,
) -> FdqnStatus {
    guard(|| {
        let r = non_null(reference, "reference")?;
        let c = non_null(candidate, "candidate")?;
        let score = out_ref(score, "score")?;
        let pass = out_ref(pass, "pass")?;
        let s = map_similarity(&r.grid, &c.grid)?;
        *score = s.score;
        *pass = s.pass;
        Ok(())
    })
}

/// A freshly initialized network for `algo`, seeded deterministically.
#[no_mangle]
pub unsafe extern "C" fn fdqn_network_init(algo: FdqnAlgo, seed: u64, out: *mut *mut FdqnNetwork) -> FdqnStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let variant = AlgoVariant::from(algo);
        let params = NetworkParams::init(variant.topology(), &mut ChaCha8Rng::seed_from_u64(seed));
        *out = Box::into_raw(Box::new(FdqnNetwork { variant, params }));
        Ok(())
    })
}

/// Loads a network from checkpoint text.
#[no_mangle]
pub unsafe extern "C" fn fdqn_network_load(checkpoint: *const c_char, out: *mut *mut FdqnNetwork) -> FdqnStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let (variant, params) = load_checkpoint(text(checkpoint, "checkpoint")?)?;
        *out = Box::into_raw(Box::new(FdqnNetwork { variant, params }));
        Ok(())
    })
}

/// Serializes a network as checkpoint text; free it with [`fdqn_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fdqn_network_save(net: *const FdqnNetwork, out: *mut *mut c_char) -> FdqnStatus {
    guard(|| {
        let n = non_null(net, "net")?;
        let out = out_ref(out, "out")?;
        *out = CString::new(save_checkpoint(&n.params, n.variant))
            .expect("checkpoint has no nul")
            .into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdqn_network_free(net: *mut FdqnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fdqn_network_algo(net: *const FdqnNetwork, algo: *mut FdqnAlgo) -> FdqnStatus {
    guard(|| {
        *out_ref(algo, "algo")? = non_null(net, "net")?.variant.into();
        Ok(())
    })
}

/// Q-values for a 36-element state; `q_out` must hold `q_len >= 10` values.
#[no_mangle]
pub unsafe extern "C" fn fdqn_network_forward(
    net: *const FdqnNetwork,
    state: *const f64,
    state_len: usize,
    q_out: *mut f64,
    q_len: usize,
) -> FdqnStatus {
    guard(|| {
        let n = non_null(net, "net")?;
        let s = state_slice(state, state_len)?;
        if q_out.is_null() {
            return Err(Failure::Null("q_out"));
        }
        if q_len < NUM_ACTIONS {
            return Err(Error::LengthMismatch {
                left: q_len,
                right: NUM_ACTIONS,
            }
            .into());
        }
        let q = n.params.q_values(s)?;
        std::slice::from_raw_parts_mut(q_out, NUM_ACTIONS).copy_from_slice(&q);
        Ok(())
    })
}

/// Greedy slot for a state, with zero-padded centroid slots masked by `penalty`.
#[no_mangle]
pub unsafe extern "C" fn fdqn_network_select_action(
    net: *const FdqnNetwork,
    state: *const f64,
    state_len: usize,
    penalty: f64,
    action: *mut usize,
) -> FdqnStatus {
    guard(|| {
        let n = non_null(net, "net")?;
        let s = StateVector::from_slice(state_slice(state, state_len)?)?;
        let action = out_ref(action, "action")?;
        *action = greedy_action(&n.params, &s, &s.record(), penalty)?;
        Ok(())
    })
}
