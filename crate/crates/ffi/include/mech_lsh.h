/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef MECH_LSH_H
#define MECH_LSH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MlshStatus {
  MLSH_STATUS_OK = 0,
  MLSH_STATUS_NULL_POINTER = 1,
  MLSH_STATUS_INVALID_ARGUMENT = 2,
  // A load or readout that cannot be normalized, or an undefined correlation.
  MLSH_STATUS_DEGENERATE = 3,
  MLSH_STATUS_GEOMETRY = 4,
  MLSH_STATUS_SOLVER = 5,
  MLSH_STATUS_IO = 6,
  MLSH_STATUS_CONFIG = 7,
  // The output buffer is shorter than the result; the needed length is
  // still written to the length out-pointer.
  MLSH_STATUS_BUFFER_TOO_SMALL = 8,
  MLSH_STATUS_INVALID_UTF8 = 9,
  MLSH_STATUS_PANIC = 10,
} MlshStatus;

// A simply supported (k = 2) or composite beam.
typedef struct MlshBeam MlshBeam;

// The labelled 400-load corpus.
typedef struct MlshCorpus MlshCorpus;

// A meshed and factorized 2-D elastic domain.
typedef struct MlshElastic MlshElastic;

// A sampled distributed load.
typedef struct MlshLoad MlshLoad;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mlsh_version(void);

// Copies the last error message of this thread into `buf` (truncated,
// always NUL-terminated when `cap > 0`) and returns its full length in bytes.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t mlsh_last_error_message(char *buf, size_t cap);

// A load from `n` samples on an even grid over `[0, length]`.
//
// # Safety
// `samples` must point to `n` readable doubles; `out_load` must be writable.
enum MlshStatus mlsh_load_new(const double *samples,
                              size_t n,
                              double length,
                              struct MlshLoad **out_load);

// Clamps positive samples to zero and scales the load to total `-1`.
//
// # Safety
// `load` must be a live handle; `out_load` must be writable.
enum MlshStatus mlsh_load_normalize(const struct MlshLoad *load, struct MlshLoad **out_load);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `load` must be null or a live handle.
size_t mlsh_load_len(const struct MlshLoad *load);

// Copies the samples into `buf`.
//
// # Safety
// `load` must be a live handle, `buf` must hold `cap` doubles and `out_len`
// must be writable.
enum MlshStatus mlsh_load_samples(const struct MlshLoad *load,
                                  double *buf,
                                  size_t cap,
                                  size_t *out_len);

// # Safety
// `load` must be null or a handle not yet freed.
void mlsh_load_free(struct MlshLoad *load);

// Generates the 20-class, 400-load corpus.
//
// # Safety
// `out_corpus` must be writable.
enum MlshStatus mlsh_corpus_generate(uint64_t master_seed,
                                     size_t n,
                                     double length,
                                     struct MlshCorpus **out_corpus);

// Number of loads, or 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t mlsh_corpus_len(const struct MlshCorpus *corpus);

// A copy of load `index` and its 1-based class label.
//
// # Safety
// `corpus` must be a live handle; `out_load` and `out_class` must be
// writable (`out_class` may be null).
enum MlshStatus mlsh_corpus_get(const struct MlshCorpus *corpus,
                                size_t index,
                                struct MlshLoad **out_load,
                                uint32_t *out_class);

// # Safety
// `corpus` must be null or a handle not yet freed.
void mlsh_corpus_free(struct MlshCorpus *corpus);

// A beam with supports at `positions[0..k]` (increasing, first at 0) and
// minimum gap fraction `m`.
//
// # Safety
// `positions` must point to `k` doubles; `out_beam` must be writable.
enum MlshStatus mlsh_beam_new(const double *positions,
                              size_t k,
                              double m,
                              double length,
                              struct MlshBeam **out_beam);

// A beam with `k` supports drawn uniformly subject to the minimum gap.
//
// # Safety
// `out_beam` must be writable.
enum MlshStatus mlsh_beam_sample(size_t k,
                                 double m,
                                 double length,
                                 uint64_t seed,
                                 struct MlshBeam **out_beam);

// Support positions of a beam.
//
// # Safety
// `beam` must be a live handle, `buf` must hold `cap` doubles and `out_len`
// must be writable.
enum MlshStatus mlsh_beam_supports(const struct MlshBeam *beam,
                                   double *buf,
                                   size_t cap,
                                   size_t *out_len);

// Support reactions of `load`, one per support, left to right.
//
// # Safety
// `beam` and `load` must be live handles, `buf` must hold `cap` doubles and
// `out_len` must be writable.
enum MlshStatus mlsh_beam_hash(const struct MlshBeam *beam,
                               const struct MlshLoad *load,
                               double *buf,
                               size_t cap,
                               size_t *out_len);

// # Safety
// `beam` must be null or a handle not yet freed.
void mlsh_beam_free(struct MlshBeam *beam);

// Meshes and factorizes an elastic domain given by a system id
// (`rect:depth:ns:fixity`, `lattice:g`, `custom:C1` or `custom:<file>`).
//
// # Safety
// `system_id` must be a NUL-terminated string; `out_domain` must be writable.
enum MlshStatus mlsh_elastic_new(const char *system_id,
                                 double mesh_h,
                                 struct MlshElastic **out_domain);

// Number of sensors, or 0 for a null handle.
//
// # Safety
// `domain` must be null or a live handle.
size_t mlsh_elastic_sensor_count(const struct MlshElastic *domain);

// Normalized sensor readouts (summing to one) for `load`.
//
// # Safety
// `domain` and `load` must be live handles, `buf` must hold `cap` doubles
// and `out_len` must be writable.
enum MlshStatus mlsh_elastic_hash(const struct MlshElastic *domain,
                                  const struct MlshLoad *load,
                                  double *buf,
                                  size_t cap,
                                  size_t *out_len);

// # Safety
// `domain` must be null or a handle not yet freed.
void mlsh_elastic_free(struct MlshElastic *domain);

// Whether two readouts agree component-wise to within `s` (strictly).
//
// # Safety
// `a` and `b` must point to `len` doubles; `out_collides` must be writable.
enum MlshStatus mlsh_is_collision(const double *a,
                                  const double *b,
                                  size_t len,
                                  double s,
                                  bool *out_collides);

// Spearman rank correlation of `x[0..n]` and `y[0..n]` (average ranks for ties).
//
// # Safety
// `x` and `y` must point to `n` doubles; `out_rho` must be writable.
enum MlshStatus mlsh_spearman_rho(const double *x, const double *y, size_t n, double *out_rho);

// Closed-form probability that a random 3-support composite beam misses a
// spike triplet on an `n`-point grid.
//
// # Safety
// `out_p` must be writable.
enum MlshStatus mlsh_p2_analytic(size_t n, double *out_p);

// Monte-Carlo estimate of the same probability with minimum gap fraction `m`.
//
// # Safety
// `out_p` and `out_stderr` must be writable (`out_stderr` may be null).
enum MlshStatus mlsh_p2_monte_carlo(size_t n,
                                    double m,
                                    uint64_t trials,
                                    uint64_t seed,
                                    double *out_p,
                                    double *out_stderr);

// Collision radius of the simply supported family (`ssc3 = false`) or the
// three-support composite family (`ssc3 = true`).
//
// # Safety
// `out_r` must be writable.
enum MlshStatus mlsh_collision_radius(bool ssc3, double m, double length, double s, double *out_r);

// Runs the experiment config at `config_path` and emits its CSV report.
// `workers = 0` uses every core. The number of failed systems goes to
// `out_failed`.
//
// # Safety
// `config_path` must be a NUL-terminated string; `out_failed` must be
// writable (it may be null).
enum MlshStatus mlsh_run_experiment(const char *config_path,
                                    bool resume,
                                    bool force,
                                    size_t workers,
                                    size_t *out_failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECH_LSH_H */
