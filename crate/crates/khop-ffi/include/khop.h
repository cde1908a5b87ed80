/* C interface to the kernelized Hopfield memory library (khop).
 *
 * Conventions:
 *   - Objects cross the boundary as opaque pointers created by the
 *     constructors below and released by the matching *_free call; every
 *     other function borrows them. Handles are not thread-safe to mutate
 *     concurrently, but distinct handles may be used from distinct threads.
 *   - Fallible calls return a KhopStatus; KHOP_OK is zero. On any other
 *     status the output parameters are untouched and a description is
 *     available from khop_last_error until the next failure on the same
 *     thread.
 *   - Pattern and query buffers are column-major double arrays: pattern mu
 *     occupies data[mu*d] through data[mu*d + d - 1].
 *   - Panics inside the library are caught at the boundary and surface as
 *     KHOP_PANIC instead of crossing into the caller.
 */

#ifndef KHOP_H
#define KHOP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Stored patterns (opaque). */
typedef struct KhopPatternSet KhopPatternSet;

/* Linear feature map (opaque). */
typedef struct KhopFeatureMap KhopFeatureMap;

/* Result codes for every fallible entry point. */
typedef enum KhopStatus {
  KHOP_OK = 0,
  KHOP_NULL_POINTER = 1,
  KHOP_INVALID_ARGUMENT = 2,
  KHOP_NUMERIC_ERROR = 3,
  KHOP_IO_ERROR = 4,
  KHOP_PANIC = 5
} KhopStatus;

/* Normalization maps for the retrieval update. */
enum {
  KHOP_NORM_SOFTMAX = 0,
  KHOP_NORM_SPARSEMAX = 1,
  KHOP_NORM_ENTMAX15 = 2
};

/* Copy the most recent error message on this thread into buf. Returns the
 * message length in bytes (excluding the terminator). When cap is positive
 * the copy is truncated to cap - 1 bytes and always NUL-terminated; a null
 * buf or zero cap just reports the length. */
size_t khop_last_error(char *buf, size_t cap);

/* Library version as a static NUL-terminated string. */
const char *khop_version(void);

/* Generate m unit-norm patterns of dimension d from a seeded stream. */
KhopStatus khop_patterns_synthetic(size_t m, size_t d, uint64_t seed,
                                   KhopPatternSet **out);

/* Wrap caller-provided column-major data (d * m doubles) as a pattern set.
 * The data is copied; the caller keeps ownership of data. */
KhopStatus khop_patterns_from_columns(const double *data, size_t d, size_t m,
                                      KhopPatternSet **out);

/* Release a pattern set. Null is a no-op; double frees are undefined. */
void khop_patterns_free(KhopPatternSet *set);

/* Number of stored patterns / pattern dimension; 0 for a null handle. */
size_t khop_patterns_len(const KhopPatternSet *set);
size_t khop_patterns_dim(const KhopPatternSet *set);

/* The identity feature map on dimension d (plain retrieval dynamics). */
KhopStatus khop_feature_map_identity(size_t d, KhopFeatureMap **out);

/* A seeded random Gaussian map from dimension d to d_phi; normalize != 0
 * rescales every output to unit length. */
KhopStatus khop_feature_map_random(size_t d, size_t d_phi, uint64_t seed,
                                   int normalize, KhopFeatureMap **out);

/* Train a feature map of output dimension d_phi on set by projected
 * gradient descent on the separation objective (iters iterations, initial
 * step lr, temperature tau, seed for the initial weights). On success
 * writes the new map to out and, when final_loss is not null, the last
 * training loss. */
KhopStatus khop_feature_map_train(const KhopPatternSet *set, size_t d_phi,
                                  size_t iters, double lr, double tau,
                                  uint64_t seed, KhopFeatureMap **out,
                                  double *final_loss);

/* Release a feature map. Null is a no-op; double frees are undefined. */
void khop_feature_map_free(KhopFeatureMap *map);

/* Output dimension of a feature map; 0 for a null handle. */
size_t khop_feature_map_dim_out(const KhopFeatureMap *map);

/* Iterated memory retrieval from x0 (length d = khop_patterns_dim(set)).
 * map may be null for the plain model. Writes the final iterate to x_out
 * (length d) and, when the pointers are not null, the step count and
 * whether the iteration converged before max_iters. */
KhopStatus khop_retrieve(const KhopPatternSet *set, const KhopFeatureMap *map,
                         double beta, int norm, size_t max_iters, double tol,
                         const double *x0, double *x_out, size_t *steps,
                         int *converged);

/* Energy of state x (length d) under the model; map may be null for the
 * plain model. */
KhopStatus khop_energy(const KhopPatternSet *set, const KhopFeatureMap *map,
                       double beta, const double *x, double *out);

/* Worst-pair kernel separation (delta_min) and half minimal feature
 * distance (r_phi) of the mapped pattern set. Either output pointer may be
 * null to skip it. */
KhopStatus khop_separation_stats(const KhopPatternSet *set,
                                 const KhopFeatureMap *map, double *delta_min,
                                 double *r_phi);

/* Storage-capacity estimate for feature dimension d_phi, inverse
 * temperature beta, probability knob p, and separation radius r_phi. */
KhopStatus khop_capacity_bound(size_t d_phi, double beta, double p,
                               double r_phi, double *out);

/* Principal branch of the Lambert W function at x (requires x >= -1/e). */
KhopStatus khop_lambert_w0(double x, double *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KHOP_H */
