//! C ABI over `memaop`.
//!
//! Every function returns a [`MemaopStatus`]; on failure the message is
//! available from [`memaop_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new` functions and released with the
//! matching `*_free`. Matrices are row-major `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use memaop::approx_matmul::{approx_outer_matmul, exact_outer_matmul, PolicyKind, SelectionPolicy};
use memaop::mem_aop::{MemAopConfig, MemAopState, MemSgdState};
use memaop::{Error, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemaopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Selection = 4,
    NonFinite = 5,
    Data = 6,
    Diverged = 7,
    Io = 8,
    Panic = 9,
}

/// Values accepted by the `policy` parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemaopPolicy {
    TopK = 0,
    RandK = 1,
    WeightedK = 2,
}

pub struct MemaopMatrix(Matrix);

/// One layer's Mem-AOP memories, its configuration and selection RNG.
pub struct MemaopLayerState {
    state: MemAopState,
    config: MemAopConfig,
    rng: ChaCha8Rng,
}

pub struct MemaopMemSgd(MemSgdState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MemaopStatus {
    match err {
        Error::DimensionMismatch { .. } => MemaopStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::NoCachedInput => MemaopStatus::InvalidArgument,
        Error::Selection(_) => MemaopStatus::Selection,
        Error::NonFinite(_) => MemaopStatus::NonFinite,
        Error::Data { .. } | Error::Csv(_) => MemaopStatus::Data,
        Error::Diverged { .. } => MemaopStatus::Diverged,
        Error::Io(_) => MemaopStatus::Io,
    }
}

fn fail(status: MemaopStatus, msg: impl Into<String>) -> MemaopStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), MemaopStatus>) -> MemaopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MemaopStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(MemaopStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: memaop::Result<T>) -> Result<T, MemaopStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, MemaopStatus> {
    p.as_ref()
        .ok_or_else(|| fail(MemaopStatus::NullPointer, format!("{name} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, MemaopStatus> {
    p.as_mut()
        .ok_or_else(|| fail(MemaopStatus::NullPointer, format!("{name} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), MemaopStatus> {
    if out.is_null() {
        return Err(fail(MemaopStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn policy_kind(policy: u32) -> Result<PolicyKind, MemaopStatus> {
    match policy {
        0 => Ok(PolicyKind::TopK),
        1 => Ok(PolicyKind::RandK),
        2 => Ok(PolicyKind::WeightedK),
        other => Err(fail(MemaopStatus::InvalidArgument, format!("unknown policy {other}"))),
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn memaop_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `rows * cols` doubles from `data` into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut MemaopMatrix,
) -> MemaopStatus {
    guard(|| {
        if data.is_null() {
            return Err(fail(MemaopStatus::NullPointer, "data is null"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(MemaopStatus::InvalidArgument, "matrix size overflows"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        put(out, MemaopMatrix(lib(Matrix::new(rows, cols, values))?))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_zeros(rows: usize, cols: usize, out: *mut *mut MemaopMatrix) -> MemaopStatus {
    guard(|| {
        if rows == 0 || cols == 0 {
            return Err(fail(MemaopStatus::InvalidArgument, "matrix dimensions must be positive"));
        }
        put(out, MemaopMatrix(Matrix::zeros(rows, cols)))
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_free(m: *mut MemaopMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_shape(
    m: *const MemaopMatrix,
    rows: *mut usize,
    cols: *mut usize,
) -> MemaopStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        *borrow_mut(rows, "rows")? = m.0.rows();
        *borrow_mut(cols, "cols")? = m.0.cols();
        Ok(())
    })
}

/// Pointer to the row-major contents, valid while `m` is alive and
/// unmodified.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_data(m: *const MemaopMatrix) -> *const f64 {
    m.as_ref().map_or(ptr::null(), |m| m.0.as_slice().as_ptr())
}

/// Copies the contents into `buf`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live handle; `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn memaop_matrix_copy(m: *const MemaopMatrix, buf: *mut f64, len: usize) -> MemaopStatus {
    guard(|| {
        let m = borrow(m, "matrix")?;
        if buf.is_null() {
            return Err(fail(MemaopStatus::NullPointer, "buf is null"));
        }
        let src = m.0.as_slice();
        if len < src.len() {
            return Err(fail(
                MemaopStatus::InvalidArgument,
                format!("buffer holds {len} values, matrix has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// `A · B` as a sum of outer products.
///
/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_exact_matmul(
    a: *const MemaopMatrix,
    b: *const MemaopMatrix,
    out: *mut *mut MemaopMatrix,
) -> MemaopStatus {
    guard(|| {
        let c = lib(exact_outer_matmul(&borrow(a, "a")?.0, &borrow(b, "b")?.0))?;
        put(out, MemaopMatrix(c))
    })
}

/// Approximate `A · B` from `k` outer products chosen by `policy`
/// (a [`MemaopPolicy`] value). `selected`, if not NULL, receives the number
/// of distinct outer products evaluated.
///
/// # Safety
/// `a`, `b` must be live handles; `out` must be writable; `selected` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn memaop_approx_matmul(
    a: *const MemaopMatrix,
    b: *const MemaopMatrix,
    policy: u32,
    k: usize,
    with_replacement: bool,
    seed: u64,
    out: *mut *mut MemaopMatrix,
    selected: *mut usize,
) -> MemaopStatus {
    guard(|| {
        let policy = lib(SelectionPolicy::new(policy_kind(policy)?, k, with_replacement))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, set) = lib(approx_outer_matmul(&borrow(a, "a")?.0, &borrow(b, "b")?.0, &policy, &mut rng))?;
        if let Some(s) = selected.as_mut() {
            *s = set.len();
        }
        put(out, MemaopMatrix(c))
    })
}

/// Zeroed memories for a `input_dim -> output_dim` layer trained on
/// batches of `batch_size` rows.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_layer_state_new(
    batch_size: usize,
    input_dim: usize,
    output_dim: usize,
    policy: u32,
    k: usize,
    with_replacement: bool,
    learning_rate: f64,
    use_memory: bool,
    seed: u64,
    out: *mut *mut MemaopLayerState,
) -> MemaopStatus {
    guard(|| {
        if batch_size == 0 || input_dim == 0 || output_dim == 0 {
            return Err(fail(MemaopStatus::InvalidArgument, "dimensions must be positive"));
        }
        let policy = lib(SelectionPolicy::new(policy_kind(policy)?, k, with_replacement))?;
        lib(policy.validate_for(batch_size))?;
        let config = lib(MemAopConfig::new(policy, learning_rate, use_memory))?;
        put(
            out,
            MemaopLayerState {
                state: MemAopState::new(batch_size, input_dim, output_dim),
                config,
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
        )
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn memaop_layer_state_free(s: *mut MemaopLayerState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// One Mem-AOP update of `w` (`input_dim x output_dim`, modified in place)
/// from batch input `x` and output gradient `g`. `outer_products`, if not
/// NULL, receives the number evaluated.
///
/// # Safety
/// All handles must be live and distinct; `outer_products` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn memaop_layer_state_step(
    s: *mut MemaopLayerState,
    w: *mut MemaopMatrix,
    x: *const MemaopMatrix,
    g: *const MemaopMatrix,
    outer_products: *mut usize,
) -> MemaopStatus {
    guard(|| {
        let s = borrow_mut(s, "state")?;
        let w = borrow_mut(w, "w")?;
        let report = lib(s.state.step(&s.config, &mut w.0, &borrow(x, "x")?.0, &borrow(g, "g")?.0, &mut s.rng))?;
        if let Some(n) = outer_products.as_mut() {
            *n = report.outer_products;
        }
        Ok(())
    })
}

/// Copy of the input memory (`batch_size x input_dim`).
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_layer_state_mem_x(s: *const MemaopLayerState, out: *mut *mut MemaopMatrix) -> MemaopStatus {
    guard(|| put(out, MemaopMatrix(borrow(s, "state")?.state.mem_x().clone())))
}

/// Copy of the gradient memory (`batch_size x output_dim`).
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_layer_state_mem_g(s: *const MemaopLayerState, out: *mut *mut MemaopMatrix) -> MemaopStatus {
    guard(|| put(out, MemaopMatrix(borrow(s, "state")?.state.mem_g().clone())))
}

/// Top-`k` sparsification with error feedback over `rows x cols` gradients.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_memsgd_new(rows: usize, cols: usize, k: usize, out: *mut *mut MemaopMemSgd) -> MemaopStatus {
    guard(|| put(out, MemaopMemSgd(lib(MemSgdState::new(rows, cols, k))?)))
}

/// # Safety
/// `s` must be NULL or a handle from this library that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn memaop_memsgd_free(s: *mut MemaopMemSgd) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Feeds `grad`, returns the sparse update to apply in `out`.
///
/// # Safety
/// `s`, `grad` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_memsgd_step(
    s: *mut MemaopMemSgd,
    grad: *const MemaopMatrix,
    out: *mut *mut MemaopMatrix,
) -> MemaopStatus {
    guard(|| {
        let sparse = lib(borrow_mut(s, "state")?.0.step(&borrow(grad, "grad")?.0))?;
        put(out, MemaopMatrix(sparse))
    })
}

/// Copy of the residual memory.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn memaop_memsgd_memory(s: *const MemaopMemSgd, out: *mut *mut MemaopMatrix) -> MemaopStatus {
    guard(|| put(out, MemaopMatrix(borrow(s, "state")?.0.memory().clone())))
}
