#ifndef QFTSIM_H
#define QFTSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QftCompileMode {
  QFT_COMPILE_MODE_EXACT = 0,
  QFT_COMPILE_MODE_INPUT_AWARE = 1,
  QFT_COMPILE_MODE_PUBLISHED = 2,
} QftCompileMode;

typedef enum QftSimulationMode {
  QFT_SIMULATION_MODE_UNITARY = 0,
  QFT_SIMULATION_MODE_RELAXING = 1,
} QftSimulationMode;

typedef enum QftStatus {
  QFT_STATUS_OK = 0,
  QFT_STATUS_NULL_POINTER = 1,
  QFT_STATUS_INVALID_ARGUMENT = 2,
  QFT_STATUS_PARSE = 3,
  QFT_STATUS_NUMERICAL = 4,
  QFT_STATUS_PANIC = 5,
} QftStatus;

/**
 * Deviation density matrix handle.
 */
typedef struct QftDensity QftDensity;

/**
 * Pulse program handle.
 */
typedef struct QftProgram QftProgram;

/**
 * Spin system handle.
 */
typedef struct QftSystem QftSystem;

typedef struct QftFidelityReport {
  double fidelity;
  double attenuation;
  double fidelity_aligned;
} QftFidelityReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library on the same thread.
 */
const char *qft_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not be freed yet.
 */
void qft_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum QftStatus qft_system_alanine(struct QftSystem **out);

/**
 * # Safety
 * `json` must be a nul-terminated string, `out` a valid pointer.
 */
enum QftStatus qft_system_from_json(const char *json, struct QftSystem **out);

/**
 * # Safety
 * `sys` must come from this library and not be freed yet.
 */
void qft_system_free(struct QftSystem *sys);

/**
 * Number of spins, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t qft_system_spin_count(const struct QftSystem *sys);

/**
 * Parses pulse-program text against `sys`.
 *
 * # Safety
 * Pointers must be valid; `text` nul-terminated.
 */
enum QftStatus qft_program_parse(const char *text,
                                 const struct QftSystem *sys,
                                 struct QftProgram **out);

/**
 * QFT program for every spin of `sys`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_program_compile(const struct QftSystem *sys,
                                   enum QftCompileMode mode,
                                   struct QftProgram **out);

/**
 * # Safety
 * `p` must come from this library and not be freed yet.
 */
void qft_program_free(struct QftProgram *p);

/**
 * Number of events, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t qft_program_len(const struct QftProgram *p);

/**
 * Canonical text of the program; release with [`qft_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_program_to_text(const struct QftProgram *p, char **out);

/**
 * Thermal deviation `Σ I_z` of `sys`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_density_thermal(const struct QftSystem *sys, struct QftDensity **out);

/**
 * Builds a deviation matrix from row-major real and imaginary parts of
 * length `dim·dim`. Must be Hermitian and traceless.
 *
 * # Safety
 * `re` and `im` must each point to `dim·dim` readable doubles.
 */
enum QftStatus qft_density_from_parts(size_t dim,
                                      const double *re,
                                      const double *im,
                                      struct QftDensity **out);

/**
 * # Safety
 * `rho` must come from this library and not be freed yet.
 */
void qft_density_free(struct QftDensity *rho);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `rho` must be null or a live handle.
 */
size_t qft_density_dim(const struct QftDensity *rho);

/**
 * Copies the row-major parts into `re` and `im`, each of length `len`,
 * which must equal `dim·dim`.
 *
 * # Safety
 * `re` and `im` must each point to `len` writable doubles.
 */
enum QftStatus qft_density_copy_parts(const struct QftDensity *rho,
                                      double *re,
                                      double *im,
                                      size_t len);

/**
 * Evolves `rho0` through `program`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_simulate(const struct QftProgram *program,
                            const struct QftSystem *sys,
                            const struct QftDensity *rho0,
                            enum QftSimulationMode mode,
                            struct QftDensity **out);

/**
 * `U ρ U†` with `U` the QFT followed by bit reversal, the action the
 * compiled programs implement.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_density_apply_qft(const struct QftDensity *rho, struct QftDensity **out);

/**
 * Fidelity, attenuation and frame-aligned fidelity of `exp` against
 * `theory`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum QftStatus qft_fidelity_report(const struct QftDensity *theory,
                                   const struct QftDensity *exp,
                                   struct QftFidelityReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFTSIM_H */
