#ifndef SCENERY_H
#define SCENERY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes of every fallible call.
typedef enum ScnStatus {
  SCN_STATUS_OK = 0,
  SCN_STATUS_NULL_POINTER = 1,
  SCN_STATUS_INVALID_UTF8 = 2,
  SCN_STATUS_INVALID_JSON = 3,
  SCN_STATUS_INVALID_ARGUMENT = 4,
  SCN_STATUS_UNSUPPORTED = 5,
  // A search or solve inside the library did not succeed.
  SCN_STATUS_FAILED = 6,
  SCN_STATUS_PANIC = 7,
} ScnStatus;

// Opaque scenery handle.
typedef struct ScnScenery ScnScenery;

// Opaque step-law handle.
typedef struct ScnStepLaw ScnStepLaw;

typedef struct ScnComplex {
  double re;
  double im;
} ScnComplex;

typedef struct ScnEstimate {
  double value;
  double stderr;
  uint64_t samples;
} ScnEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *scn_last_error(void);

// Library version as a static string.
const char *scn_version(void);

// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum ScnStatus scn_scenery_from_json(const char *json, struct ScnScenery **out);

// # Safety
// `s` must come from [`scn_scenery_from_json`] and not be freed twice.
void scn_scenery_free(struct ScnScenery *s);

// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum ScnStatus scn_step_law_from_json(const char *json, struct ScnStepLaw **out);

// # Safety
// `law` must come from [`scn_step_law_from_json`] and not be freed twice.
void scn_step_law_free(struct ScnStepLaw *law);

// Indicator `f(x)` at a point of `len` coordinates; wrapped first.
//
// # Safety
// `x` must point to `len` doubles.
enum ScnStatus scn_scenery_indicator(const struct ScnScenery *s,
                                     const double *x,
                                     size_t len,
                                     uint8_t *out);

// # Safety
// Pointers must be valid.
enum ScnStatus scn_scenery_measure(const struct ScnScenery *s, double *out);

// `S_n(y)` for a pointer tuple flattened to `len = n·d` reals.
//
// # Safety
// `y` must point to `len` doubles.
enum ScnStatus scn_spatial_correlation(const struct ScnScenery *s,
                                       const double *y,
                                       size_t len,
                                       double *out);

// `D̂_t(k)` for a frequency of `len = d` integers.
//
// # Safety
// `k` must point to `len` integers.
enum ScnStatus scn_d_hat(const struct ScnStepLaw *law,
                         double t,
                         const int64_t *k,
                         size_t len,
                         struct ScnComplex *out);

// `γ̂_t(k)`, the transform of the continuous part of the step law.
//
// # Safety
// `k` must point to `len` integers.
enum ScnStatus scn_gamma_hat(const struct ScnStepLaw *law,
                             double t,
                             const int64_t *k,
                             size_t len,
                             struct ScnComplex *out);

// Monte Carlo estimate of `T_n(t)` for `n` time gaps. A non-positive
// `gap` selects the default separation between blocks.
//
// # Safety
// `t` must point to `n` doubles.
enum ScnStatus scn_estimate_temporal(const struct ScnStepLaw *law,
                                     const struct ScnScenery *s,
                                     const double *t,
                                     size_t n,
                                     uint64_t samples,
                                     double gap,
                                     uint64_t seed,
                                     struct ScnEstimate *out);

// `min_θ μ((a + θ) Δ b)` over a grid of `resolution` shifts per axis.
//
// # Safety
// Pointers must be valid.
enum ScnStatus scn_aligned_distance(const struct ScnScenery *a,
                                    const struct ScnScenery *b,
                                    size_t resolution,
                                    bool allow_reflection,
                                    double *out);

// Runs the reconstruction chain on a JSON configuration and returns the
// JSON result in `out`, to be released with [`scn_string_free`]. Relative
// trace paths resolve against the working directory.
//
// # Safety
// `config_json` must be a nul-terminated string and `out` a valid pointer.
enum ScnStatus scn_reconstruct(const char *config_json, char **out);

// # Safety
// `s` must come from this library and not be freed twice.
void scn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCENERY_H */
