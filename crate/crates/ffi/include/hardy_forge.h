/* C interface for the hardy-forge Bell test constructor. */

#ifndef HARDY_FORGE_H
#define HARDY_FORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point. The numeric values
 * match the CLI exit codes for the same failure classes.
 */
typedef enum HfStatus {
  /**
   * The call succeeded.
   */
  HF_STATUS_OK = 0,
  /**
   * Malformed input: bad JSON, bad dimensions, a null pointer, or an
   * amplitude array of the wrong length.
   */
  HF_STATUS_INVALID_INPUT = 1,
  /**
   * The state is a product state; there is nothing to certify.
   */
  HF_STATUS_NOT_ENTANGLED = 2,
  /**
   * Construction or evaluation failed past input validation.
   */
  HF_STATUS_CONSTRUCTION_FAILED = 3,
  /**
   * A panic was caught at the boundary; the library state is unharmed.
   */
  HF_STATUS_INTERNAL = 4,
} HfStatus;

/**
 * Opaque handle over a finished certificate.
 */
typedef struct HfCertificate HfCertificate;

/**
 * Opaque handle over a pure multiparty state.
 */
typedef struct HfState HfState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying library, as a NUL-terminated static string.
 * The pointer stays valid for the life of the process; do not free it.
 */
const char *hf_version(void);

/**
 * Message describing the most recent failure on this thread, or null when
 * no failure has been recorded. The pointer is invalidated by the next
 * failing call on the same thread; do not free it.
 */
const char *hf_last_error(void);

/**
 * Parse a state from JSON of the form
 * `{"dims":[...],"amplitudes":[[re,im],...]}` (party one most significant).
 * On success writes a new handle to `out`; release it with
 * [`hf_state_free`].
 */
enum HfStatus hf_state_parse_json(const char *json, struct HfState **out);

/**
 * Build a state from raw arrays: `dims` has `n_parties` entries and `amps`
 * holds `amp_count` interleaved (re, im) pairs, so `2 * amp_count` doubles,
 * flattened with party one most significant. On success writes a new
 * handle to `out`; release it with [`hf_state_free`].
 */
enum HfStatus hf_state_new(const uintptr_t *dims,
                           uintptr_t n_parties,
                           const double *amps,
                           uintptr_t amp_count,
                           struct HfState **out);

/**
 * Release a state handle. Null is ignored.
 */
void hf_state_free(struct HfState *state);

/**
 * Run the full pipeline on `state`: closest product, frame, measurement
 * synthesis, exact evaluation, classical bound, certificate. `seed` drives
 * every randomized stage; `policy_search` additionally tries every leak
 * assignment for parties with local dimension above two. On success writes
 * a new handle to `out`; release it with [`hf_certificate_free`].
 */
enum HfStatus hf_certify(const struct HfState *state,
                         uint64_t seed,
                         bool policy_search,
                         struct HfCertificate **out);

/**
 * Serialize a certificate to JSON. On success writes a caller-owned string
 * to `out`; release it with [`hf_string_free`].
 */
enum HfStatus hf_certificate_to_json(const struct HfCertificate *cert, char **out);

/**
 * Certified value of the combination (quantum value, leakage included).
 * Returns NaN on a null handle.
 */
double hf_certificate_value(const struct HfCertificate *cert);

/**
 * Whether the certificate passed: value above the classical bound by the
 * margin, nondegenerate settings, and all consistency gates. Returns false
 * on a null handle.
 */
bool hf_certificate_passed(const struct HfCertificate *cert);

/**
 * Scenario the synthesis chose: `"bell"` (rotation tables) or `"hardy"`
 * (parametric tables). The pointer is static; do not free it.
 */
const char *hf_certificate_scenario(const struct HfCertificate *cert);

/**
 * Release a certificate handle. Null is ignored.
 */
void hf_certificate_free(struct HfCertificate *cert);

/**
 * Evaluate existing measurement settings against a state, both as JSON in
 * the CLI file formats. `policy_json` may be null for the default leak
 * assignment, or the literal string `"search"` to try every assignment and
 * keep the best. On success writes a caller-owned report JSON to `out`;
 * release it with [`hf_string_free`].
 */
enum HfStatus hf_evaluate_json(const char *state_json,
                               const char *settings_json,
                               const char *policy_json,
                               char **out);

/**
 * Exact classical maximum of the combination for `n` parties by exhaustive
 * enumeration, with the number of maximizing strategies. Out-pointers may
 * be null when the caller does not need that field.
 */
enum HfStatus hf_classical_max(uintptr_t n, int64_t *out_maximum, uint64_t *out_witness_count);

/**
 * Whether no deterministic assignment satisfies all paradox conditions at
 * once for `n` parties (the contextuality-style impossibility).
 */
enum HfStatus hf_contextual_impossibility(uintptr_t n, bool *out_impossible);

/**
 * Release a string produced by this library. Null is ignored.
 */
void hf_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARDY_FORGE_H */
