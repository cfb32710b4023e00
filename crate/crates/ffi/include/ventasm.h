#ifndef VENTASM_H
#define VENTASM_H

/* Generated by cbindgen at build time; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Model configuration to bind for bundled levels.
 */
typedef enum VentasmConfig {
  VENTASM_CONFIG_DEFAULT = 0,
  VENTASM_CONFIG_TEST = 1,
} VentasmConfig;

typedef enum VentasmStatus {
  VENTASM_STATUS_OK = 0,
  VENTASM_STATUS_NULL_POINTER = 1,
  VENTASM_STATUS_INVALID_UTF8 = 2,
  VENTASM_STATUS_PARSE_ERROR = 3,
  VENTASM_STATUS_UNKNOWN_NAME = 4,
  VENTASM_STATUS_BAD_VALUE = 5,
  VENTASM_STATUS_STEP_ERROR = 6,
  VENTASM_STATUS_VERIFY_ERROR = 7,
  VENTASM_STATUS_SESSION_ERROR = 8,
  VENTASM_STATUS_BUFFER_TOO_SMALL = 9,
  VENTASM_STATUS_PANIC = 10,
} VentasmStatus;

/**
 * A machine and its current state plus inputs for the next step.
 */
typedef struct VentasmMachine VentasmMachine;

/**
 * A closed-loop session with the lung simulator.
 */
typedef struct VentasmSession VentasmSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next call.
 */
const char *ventasm_last_error(void);

/**
 * Loads bundled level 0-3.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum VentasmStatus ventasm_machine_load(uint8_t level,
                                        enum VentasmConfig config,
                                        struct VentasmMachine **out);

/**
 * Parses a model from source text.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VentasmStatus ventasm_machine_parse(const char *source, struct VentasmMachine **out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards; null is ignored.
 */
void ventasm_machine_free(struct VentasmMachine *m);

/**
 * Back to the initial state with default inputs.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum VentasmStatus ventasm_machine_reset(struct VentasmMachine *m);

/**
 * Sets a monitored input for the next step, e.g. `("startupEnded", "true")`.
 * Inputs keep their value across steps.
 *
 * # Safety
 * `m` must be a live handle and the strings NUL-terminated.
 */
enum VentasmStatus ventasm_machine_set_input(struct VentasmMachine *m,
                                             const char *name,
                                             const char *value);

/**
 * Runs one step. Unless the clock input was set since the last step, it
 * advances by `clock_step_ms`.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum VentasmStatus ventasm_machine_step(struct VentasmMachine *m, uint64_t clock_step_ms);

/**
 * Current value of a location (`"state"`, `"start(timerRm)"`) in model syntax.
 *
 * # Safety
 * `m` must be a live handle, `name` NUL-terminated, `buf` at least `cap`
 * bytes, and `out_len` null or valid.
 */
enum VentasmStatus ventasm_machine_get(const struct VentasmMachine *m,
                                       const char *name,
                                       char *buf,
                                       size_t cap,
                                       size_t *out_len);

/**
 * Checks an invariant property (`g(...)`, `not f(...)`) with the default
 * abstraction; `verified` receives the verdict.
 *
 * # Safety
 * `m` must be a live handle, `property` NUL-terminated and `verified` valid.
 */
enum VentasmStatus ventasm_check_property(const struct VentasmMachine *m,
                                          const char *property,
                                          bool *verified);

/**
 * Starts a paused closed-loop session. `spec_json` may be null for the
 * defaults or a JSON session spec (level, config, patient, circuit,
 * tickMs, lungDtMs).
 *
 * # Safety
 * `spec_json` must be null or NUL-terminated, and `out` valid.
 */
enum VentasmStatus ventasm_session_new(const char *spec_json, struct VentasmSession **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards; null is ignored.
 */
void ventasm_session_free(struct VentasmSession *s);

/**
 * Queues an operator command such as `{"command":"startupEnded"}`.
 *
 * # Safety
 * `s` must be a live handle and `command_json` NUL-terminated.
 */
enum VentasmStatus ventasm_session_command(struct VentasmSession *s, const char *command_json);

/**
 * Advances the session by `count` controller ticks.
 *
 * # Safety
 * `s` must be a live handle.
 */
enum VentasmStatus ventasm_session_step(struct VentasmSession *s, uint64_t count);

/**
 * Latest sample as JSON.
 *
 * # Safety
 * `s` must be a live handle, `buf` at least `cap` bytes, `out_len` null or valid.
 */
enum VentasmStatus ventasm_session_snapshot(const struct VentasmSession *s,
                                            char *buf,
                                            size_t cap,
                                            size_t *out_len);

/**
 * Whole run log as JSON lines.
 *
 * # Safety
 * As for [`ventasm_session_snapshot`].
 */
enum VentasmStatus ventasm_session_log(const struct VentasmSession *s,
                                       char *buf,
                                       size_t cap,
                                       size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VENTASM_H */
