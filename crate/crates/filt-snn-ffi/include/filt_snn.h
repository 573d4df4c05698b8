#ifndef FILT_SNN_H
#define FILT_SNN_H

/* Generated by cbindgen from the filt-snn-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible call.
 */
typedef enum FiltSnnStatus {
  FILT_SNN_STATUS_OK = 0,
  FILT_SNN_STATUS_NULL_POINTER = 1,
  FILT_SNN_STATUS_INVALID_ARGUMENT = 2,
  FILT_SNN_STATUS_IO_ERROR = 3,
  FILT_SNN_STATUS_FORMAT_ERROR = 4,
  FILT_SNN_STATUS_INTERNAL_ERROR = 5,
} FiltSnnStatus;

/**
 * Opaque handle to a trained or freshly initialized network.
 */
typedef struct FiltSnnNetwork FiltSnnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *filt_snn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *filt_snn_version(void);

/**
 * Create a network with the given layer sizes (inputs first) and randomly
 * initialized weights derived from `seed`.
 *
 * # Safety
 * `layer_sizes` must point to `n_layers` readable u32 values and
 * `out_network` must be a valid destination pointer.
 */
enum FiltSnnStatus filt_snn_network_create(const uint32_t *layer_sizes,
                                           uintptr_t n_layers,
                                           uint64_t seed,
                                           struct FiltSnnNetwork **out_network);

/**
 * Load a network from a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_network` a valid
 * destination pointer.
 */
enum FiltSnnStatus filt_snn_network_load(const char *path, struct FiltSnnNetwork **out_network);

/**
 * Save a network to a checkpoint file.
 *
 * # Safety
 * `network` must come from this library and `path` must be a
 * NUL-terminated string.
 */
enum FiltSnnStatus filt_snn_network_save(const struct FiltSnnNetwork *network, const char *path);

/**
 * Number of input channels, or 0 when `network` is null.
 *
 * # Safety
 * `network` must be null or come from this library.
 */
uint32_t filt_snn_network_n_inputs(const struct FiltSnnNetwork *network);

/**
 * Number of output classes, or 0 when `network` is null.
 *
 * # Safety
 * `network` must be null or come from this library.
 */
uint32_t filt_snn_network_n_outputs(const struct FiltSnnNetwork *network);

/**
 * Classify one image given as bytes in [0, 255], one per input channel.
 * Writes the winning class index to `out_class`, or -1 when no output
 * neuron spikes. Uses the default encoder and a 10 ms window.
 *
 * # Safety
 * `pixels` must point to `n_pixels` readable bytes; `network` and
 * `out_class` must be valid pointers.
 */
enum FiltSnnStatus filt_snn_network_classify(const struct FiltSnnNetwork *network,
                                             const uint8_t *pixels,
                                             uintptr_t n_pixels,
                                             int32_t *out_class);

/**
 * Release a network handle. Null is a no-op.
 *
 * # Safety
 * `network` must be null or an unfreed handle from this library.
 */
void filt_snn_network_free(struct FiltSnnNetwork *network);

/**
 * Encode one normalized pixel in [0, 1] as a spike latency. Writes 1 to
 * `out_spiked` and the latency to `out_time` when the pixel crosses the
 * threshold, 0 otherwise.
 *
 * # Safety
 * `out_time` and `out_spiked` must be valid destination pointers.
 */
enum FiltSnnStatus filt_snn_encode_pixel(double pixel,
                                         double t_max,
                                         double sigma,
                                         double p_t,
                                         double *out_time,
                                         int32_t *out_spiked);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FILT_SNN_H */
