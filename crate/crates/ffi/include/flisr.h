#ifndef FLISR_H
#define FLISR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum FlisrStatus {
  FLISR_STATUS_OK = 0,
  FLISR_STATUS_NULL_POINTER = 1,
  FLISR_STATUS_INVALID_UTF8 = 2,
  FLISR_STATUS_INVALID_TOPOLOGY = 3,
  FLISR_STATUS_INVALID_SCENARIO = 4,
  FLISR_STATUS_INVALID_MESSAGE = 5,
  FLISR_STATUS_UNKNOWN_SITE = 6,
  FLISR_STATUS_RUN_FAILED = 7,
  FLISR_STATUS_PANIC = 99,
} FlisrStatus;

// Verb chosen by the per-switch rule.
typedef enum FlisrVerb {
  FLISR_VERB_NONE = 0,
  FLISR_VERB_OPEN = 1,
  FLISR_VERB_CLOSE = 2,
  FLISR_VERB_CLOSE_NORMALLY_OPEN = 3,
} FlisrVerb;

// Opaque simulation result.
typedef struct FlisrResult FlisrResult;

// Opaque grid topology.
typedef struct FlisrTopology FlisrTopology;

// Decoded point message. `value` is 1 for ON and 0 for OFF.
typedef struct FlisrPoint {
  uint32_t link_add;
  uint32_t asdu_ca;
  uint32_t type_id;
  uint32_t ioa;
  uint8_t value;
} FlisrPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *flisr_last_error(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void flisr_string_free(char *s);

// Parses a topology document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum FlisrStatus flisr_topology_from_json(const char *json, struct FlisrTopology **out);

// Loads one of the built-in sites by id.
//
// # Safety
// `site_id` must be a NUL-terminated string; `out` must be writable.
enum FlisrStatus flisr_topology_fixture(const char *site_id, struct FlisrTopology **out);

// Number of switches in the topology, 0 for NULL.
//
// # Safety
// `topology` must be NULL or a live handle.
size_t flisr_topology_switch_count(const struct FlisrTopology *topology);

// # Safety
// `topology` must be NULL or a handle not yet freed.
void flisr_topology_free(struct FlisrTopology *topology);

// Applies the per-switch rule to one set of indications.
enum FlisrVerb flisr_evaluate_rules(bool fpi, bool lvi, bool normally_open);

// Encodes a point message as compact JSON.
//
// # Safety
// `out` must be writable; free the string with [`flisr_string_free`].
enum FlisrStatus flisr_encode_message(struct FlisrPoint point, char **out);

// Decodes a JSON point message.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum FlisrStatus flisr_decode_message(const char *json, struct FlisrPoint *out);

// Runs a fault scenario (JSON, same shape as scenario files) on a topology
// with the default simulated engine.
//
// # Safety
// `topology` must be a live handle, `scenario_json` a NUL-terminated string
// and `out` writable.
enum FlisrStatus flisr_run_scenario(const struct FlisrTopology *topology,
                                    const char *scenario_json,
                                    struct FlisrResult **out);

// # Safety
// `result` must be NULL or a live handle.
uint32_t flisr_result_affected_pre(const struct FlisrResult *result);

// # Safety
// `result` must be NULL or a live handle.
uint32_t flisr_result_affected_post(const struct FlisrResult *result);

// # Safety
// `result` must be NULL or a live handle.
uint64_t flisr_result_cml_pre(const struct FlisrResult *result);

// # Safety
// `result` must be NULL or a live handle.
uint64_t flisr_result_cml_post(const struct FlisrResult *result);

// Simulated time from the first status to the last control, in ms.
//
// # Safety
// `result` must be NULL or a live handle.
double flisr_result_elapsed_ms(const struct FlisrResult *result);

// Rendered operation list, borrowed from the handle.
//
// # Safety
// `result` must be NULL or a live handle; the pointer dies with it.
const char *flisr_result_operations(const struct FlisrResult *result);

// Full result as JSON.
//
// # Safety
// `result` must be a live handle; free the string with [`flisr_string_free`].
enum FlisrStatus flisr_result_to_json(const struct FlisrResult *result, char **out);

// # Safety
// `result` must be NULL or a handle not yet freed.
void flisr_result_free(struct FlisrResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLISR_H */
