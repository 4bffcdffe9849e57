#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qdefrag/core.hpp"
#include "qdefrag/defrag.hpp"
#include "qdefrag/model.hpp"
#include "qdefrag/protocol.hpp"

namespace qdefrag {

/// Invalid or unwritable configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ChainSpec chain;
  int n_sites = 0;
  int controlled_site = 0;
  double step_time = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
  double rank_rel_tol = kDefaultRankRelTol;
  double gram_tol = 1e-10;
  int oracle_steps = 6;
  std::string output;
};

/// Parses the single-document JSON config. Unknown fields are rejected;
/// every error message names the offending field.
RunConfig parse_config_text(const std::string& json_text);
RunConfig load_config(const std::string& path);

SystemPartition partition_from(const RunConfig& config);

// --- naive growing-memory oracle -------------------------------------------
//
// The reference protocol without defragmentation: each step appends a fresh
// qubit in |0>, evolves V for time t, and swaps C with the fresh qubit. The
// joint space grows by one qubit per step; guarded at n_sites <= 3 and
// steps <= 12 (dim <= 2^15).

struct NaiveState {
  HilbertSpace space;  ///< V (x) f1 .. fl
  Vector amp;
  int step = 0;
};

struct NaiveTrace {
  int step = 0;
  double residual_weight = 0.0;  ///< weight of this state outside |0>_V
  Index total_dim = 0;
};

std::pair<NaiveState, std::vector<NaiveTrace>> naive_download(const ChainSpec& spec,
                                                              const SystemPartition& partition,
                                                              double step_time, int steps,
                                                              const StateVector& psi);

/// Basis-image variant of the naive protocol, mirroring BasisImageMap in the
/// growing space; feeds the xi-Gram and reduced-state comparisons.
struct NaiveRun {
  SystemPartition partition;
  Operator propagator;  ///< exp(-i H t) on V
  BasisImageMap images;
  std::vector<AppliedOp> applied_ops;
};

NaiveRun init_naive_images(const ChainSpec& spec, const SystemPartition& partition,
                           double step_time);
void naive_images_step(NaiveRun& run);

/// Roundtrip through the naive protocol with a logical gate applied through
/// the naive Phi map. Returns the fidelity of the reduced V state against
/// logical_gate * psi.
double naive_roundtrip_fidelity(const ChainSpec& spec, const SystemPartition& partition,
                                double step_time, int steps, const StateVector& psi,
                                const Matrix& logical_gate);

// --- experiment drivers ------------------------------------------------------

struct OracleStepReport {
  int step = 0;
  double rho_diff = 0.0;   ///< max entrywise diff of reduced V density matrices
  double gram_diff = 0.0;  ///< max entrywise diff of xi-family Gram matrices
  double m1_leak = 0.0;
};

struct OracleReport {
  std::vector<OracleStepReport> steps;
  double max_rho_diff = 0.0;
  double max_gram_diff = 0.0;
  double max_m1_leak = 0.0;
  bool pass = false;
};

/// Lockstep comparison of the defragmented protocol against the naive oracle
/// at every step l <= oracle_steps: reduced-V density matrices per basis
/// input and xi-family Gram matrices must agree within 1e-9, and the M1
/// reset contract must hold. skip_defrag_for_debug propagates to the
/// defragmented side.
OracleReport compare_with_oracle(const RunConfig& config, bool skip_defrag_for_debug = false);

struct ExperimentSummary {
  int steps = 0;
  double final_residual = 1.0;
  Index max_memory_rank = 0;
  double max_gram_error = 0.0;
  double max_m1_leakage = 0.0;
  Index dim_m0 = 0;
  Index dim_m = 0;  ///< dim M0 * dim M1, constant during the run
};

/// Runs the downloading stage for config.steps steps and writes the CSV
/// trace to config.output. One row per step:
/// step,residual_weight,memory_rank,gram_error,m1_leakage,wall_time_s with
/// floats rendered to 17 significant digits. Deterministic apart from the
/// wall_time_s column.
ExperimentSummary run_experiment(const RunConfig& config);

/// 17-significant-digit, locale-independent float rendering used in the CSV.
std::string format_float(double value);

}  // namespace qdefrag
