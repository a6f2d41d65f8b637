#ifndef DROPTRACK_H
#define DROPTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtStatus {
  DT_STATUS_OK = 0,
  DT_STATUS_NULL_POINTER = 1,
  DT_STATUS_INVALID_ARGUMENT = 2,
  DT_STATUS_SIZE_MISMATCH = 3,
  DT_STATUS_FRAME_ORDER = 4,
  DT_STATUS_NOT_INITIALIZED = 5,
  DT_STATUS_BUFFER_TOO_SMALL = 6,
  DT_STATUS_INTERNAL = 7,
} DtStatus;

// Streaming tracker handle.
typedef struct DtTracker DtTracker;

// Detection box in pixels.
typedef struct DtBox {
  double cx;
  double cy;
  double w;
  double h;
  double conf;
} DtBox;

typedef struct DtPoint {
  double x;
  double y;
} DtPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating if needed. Returns the full length of
// the message excluding the terminator. `buf` may be null when
// `capacity` is 0.
//
// # Safety
// `buf` must point to at least `capacity` writable bytes.
size_t dt_last_error_message(char *buf, size_t capacity);

// Library version as a static NUL-terminated string.
const char *dt_version(void);

// Creates a tracker expecting `expected_count` objects per frame.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum DtStatus dt_tracker_new(size_t expected_count, double conf_threshold, struct DtTracker **out);

// Releases a tracker. Null is ignored.
//
// # Safety
// `tracker` must come from [`dt_tracker_new`] and not be used afterwards.
void dt_tracker_free(struct DtTracker *tracker);

// Feeds one frame. `accepted` (optional) receives 1 if the frame passed the
// gate and extended the tracks, 0 if it was rejected.
//
// # Safety
// `tracker` must be a live handle; `boxes` must point to `len` boxes (it
// may be null when `len` is 0); `accepted` may be null.
enum DtStatus dt_tracker_push_frame(struct DtTracker *tracker,
                                    uint64_t frame_index,
                                    const struct DtBox *boxes,
                                    size_t len,
                                    int32_t *accepted);

// Number of tracks; 0 before the first accepted frame or for a null handle.
//
// # Safety
// `tracker` must be null or a live handle.
size_t dt_tracker_track_count(const struct DtTracker *tracker);

// Writes the last accepted position of every track, in track-id order.
// `written` receives the number of tracks even when the buffer is too small.
//
// # Safety
// `tracker` must be a live handle, `out` must have room for `capacity`
// points, `written` must be writable.
enum DtStatus dt_tracker_positions(const struct DtTracker *tracker,
                                   struct DtPoint *out,
                                   size_t capacity,
                                   size_t *written);

// Frame counts and detection rate so far. Any output pointer may be null.
//
// # Safety
// `tracker` must be a live handle; non-null outputs must be writable.
enum DtStatus dt_tracker_fdr(const struct DtTracker *tracker,
                             uint64_t *total_frames,
                             uint64_t *accepted_frames,
                             double *fdr);

// Minimum-cost assignment of an `n`×`n` row-major cost matrix.
// `mapping[i]` receives the column assigned to row `i`.
//
// # Safety
// `costs` must hold `n*n` values and `mapping` room for `n` values;
// `total_cost` may be null.
enum DtStatus dt_solve_assignment(const double *costs,
                                  size_t n,
                                  size_t *mapping,
                                  double *total_cost);

// `accepted / total`, failing when `total` is 0 or smaller than `accepted`.
//
// # Safety
// `out` must be writable.
enum DtStatus dt_compute_fdr(uint64_t accepted, uint64_t total, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DROPTRACK_H */
