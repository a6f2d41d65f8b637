//! C interface to the tracker.
//!
//! All functions return a [`DtStatus`]; on failure a description is kept per
//! thread and can be fetched with [`dt_last_error_message`]. Trackers are
//! opaque handles created by [`dt_tracker_new`] and released with
//! [`dt_tracker_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use droptrack::{
    compute_fdr, solve_assignment, BoundingBox, CostMatrix, FrameDetections, FrameUpdate,
    GateConfig, TrackError, Tracker,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SizeMismatch = 3,
    FrameOrder = 4,
    NotInitialized = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Detection box in pixels.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DtPoint {
    pub x: f64,
    pub y: f64,
}

/// Streaming tracker handle.
pub struct DtTracker {
    inner: Tracker,
    frame: FrameDetections,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn fail(status: DtStatus, message: impl Into<String>) -> DtStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> DtStatus) -> DtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(DtStatus::Internal, "internal panic"),
    }
}

fn track_status(e: &TrackError) -> DtStatus {
    match e {
        TrackError::NonMonotonicFrame { .. } => DtStatus::FrameOrder,
        TrackError::SizeMismatch { .. } => DtStatus::SizeMismatch,
        TrackError::NoAcceptedFrames | TrackError::EmptyInitialization => DtStatus::NotInitialized,
        _ => DtStatus::InvalidArgument,
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full length of
/// the message excluding the terminator. `buf` may be null when
/// `capacity` is 0.
///
/// # Safety
/// `buf` must point to at least `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dt_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dt_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(v) => v,
            Err(_) => panic!("version contains NUL"),
        };
    VERSION.as_ptr()
}

/// Creates a tracker expecting `expected_count` objects per frame.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_new(
    expected_count: usize,
    conf_threshold: f64,
    out: *mut *mut DtTracker,
) -> DtStatus {
    guard(|| {
        if out.is_null() {
            return fail(DtStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let config = match GateConfig::new(expected_count, conf_threshold) {
            Ok(c) => c,
            Err(e) => return fail(DtStatus::InvalidArgument, e.to_string()),
        };
        let inner = match Tracker::new(config) {
            Ok(t) => t,
            Err(e) => return fail(track_status(&e), e.to_string()),
        };
        let handle = DtTracker {
            inner,
            frame: FrameDetections::new(0, Vec::new()),
        };
        *out = Box::into_raw(Box::new(handle));
        DtStatus::Ok
    })
}

/// Releases a tracker. Null is ignored.
///
/// # Safety
/// `tracker` must come from [`dt_tracker_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_free(tracker: *mut DtTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Feeds one frame. `accepted` (optional) receives 1 if the frame passed the
/// gate and extended the tracks, 0 if it was rejected.
///
/// # Safety
/// `tracker` must be a live handle; `boxes` must point to `len` boxes (it
/// may be null when `len` is 0); `accepted` may be null.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_push_frame(
    tracker: *mut DtTracker,
    frame_index: u64,
    boxes: *const DtBox,
    len: usize,
    accepted: *mut i32,
) -> DtStatus {
    guard(|| {
        let Some(t) = tracker.as_mut() else {
            return fail(DtStatus::NullPointer, "tracker is null");
        };
        if boxes.is_null() && len > 0 {
            return fail(DtStatus::NullPointer, "boxes is null");
        }
        t.frame.frame_index = frame_index;
        t.frame.boxes.clear();
        if len > 0 {
            let src = std::slice::from_raw_parts(boxes, len);
            t.frame.boxes.extend(src.iter().map(|b| BoundingBox {
                cx: b.cx,
                cy: b.cy,
                w: b.w,
                h: b.h,
                conf: b.conf,
            }));
        }
        match t.inner.push(&t.frame) {
            Ok(update) => {
                if !accepted.is_null() {
                    *accepted = i32::from(!matches!(update, FrameUpdate::Rejected(_)));
                }
                DtStatus::Ok
            }
            Err(e) => fail(track_status(&e), e.to_string()),
        }
    })
}

/// Number of tracks; 0 before the first accepted frame or for a null handle.
///
/// # Safety
/// `tracker` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_track_count(tracker: *const DtTracker) -> usize {
    tracker.as_ref().map_or(0, |t| t.inner.tracks().len())
}

/// Writes the last accepted position of every track, in track-id order.
/// `written` receives the number of tracks even when the buffer is too small.
///
/// # Safety
/// `tracker` must be a live handle, `out` must have room for `capacity`
/// points, `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_positions(
    tracker: *const DtTracker,
    out: *mut DtPoint,
    capacity: usize,
    written: *mut usize,
) -> DtStatus {
    guard(|| {
        let Some(t) = tracker.as_ref() else {
            return fail(DtStatus::NullPointer, "tracker is null");
        };
        if written.is_null() {
            return fail(DtStatus::NullPointer, "written is null");
        }
        let tracks = t.inner.tracks();
        *written = tracks.len();
        if !t.inner.is_initialized() {
            return fail(DtStatus::NotInitialized, "no frame has been accepted yet");
        }
        if capacity < tracks.len() {
            return fail(
                DtStatus::BufferTooSmall,
                format!("need room for {} points", tracks.len()),
            );
        }
        if out.is_null() {
            return fail(DtStatus::NullPointer, "out is null");
        }
        let dst = std::slice::from_raw_parts_mut(out, tracks.len());
        for (d, tr) in dst.iter_mut().zip(tracks) {
            *d = DtPoint {
                x: tr.last_position.x,
                y: tr.last_position.y,
            };
        }
        DtStatus::Ok
    })
}

/// Frame counts and detection rate so far. Any output pointer may be null.
///
/// # Safety
/// `tracker` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dt_tracker_fdr(
    tracker: *const DtTracker,
    total_frames: *mut u64,
    accepted_frames: *mut u64,
    fdr: *mut f64,
) -> DtStatus {
    guard(|| {
        let Some(t) = tracker.as_ref() else {
            return fail(DtStatus::NullPointer, "tracker is null");
        };
        let r = t.inner.fdr_report();
        if !total_frames.is_null() {
            *total_frames = r.total_frames;
        }
        if !accepted_frames.is_null() {
            *accepted_frames = r.accepted_frames;
        }
        if fdr.is_null() {
            return DtStatus::Ok;
        }
        match compute_fdr(r.accepted_frames, r.total_frames) {
            Ok(v) => {
                *fdr = v;
                DtStatus::Ok
            }
            Err(e) => fail(DtStatus::NotInitialized, e.to_string()),
        }
    })
}

/// Minimum-cost assignment of an `n`×`n` row-major cost matrix.
/// `mapping[i]` receives the column assigned to row `i`.
///
/// # Safety
/// `costs` must hold `n*n` values and `mapping` room for `n` values;
/// `total_cost` may be null.
#[no_mangle]
pub unsafe extern "C" fn dt_solve_assignment(
    costs: *const f64,
    n: usize,
    mapping: *mut usize,
    total_cost: *mut f64,
) -> DtStatus {
    guard(|| {
        if costs.is_null() || mapping.is_null() {
            return fail(DtStatus::NullPointer, "costs or mapping is null");
        }
        let Some(len) = n.checked_mul(n) else {
            return fail(DtStatus::InvalidArgument, "matrix side overflows");
        };
        let entries = std::slice::from_raw_parts(costs, len).to_vec();
        let matrix = match CostMatrix::from_row_major(n, entries) {
            Ok(m) => m,
            Err(e) => return fail(DtStatus::InvalidArgument, e.to_string()),
        };
        let a = solve_assignment(&matrix);
        std::slice::from_raw_parts_mut(mapping, n).copy_from_slice(&a.mapping);
        if !total_cost.is_null() {
            *total_cost = a.total_cost;
        }
        DtStatus::Ok
    })
}

/// `accepted / total`, failing when `total` is 0 or smaller than `accepted`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dt_compute_fdr(accepted: u64, total: u64, out: *mut f64) -> DtStatus {
    guard(|| {
        if out.is_null() {
            return fail(DtStatus::NullPointer, "out is null");
        }
        match compute_fdr(accepted, total) {
            Ok(v) => {
                *out = v;
                DtStatus::Ok
            }
            Err(e) => fail(DtStatus::InvalidArgument, e.to_string()),
        }
    })
}
