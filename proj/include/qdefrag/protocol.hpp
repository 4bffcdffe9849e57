#pragma once

#include <string>
#include <vector>

#include "qdefrag/core.hpp"
#include "qdefrag/model.hpp"

namespace qdefrag {

/// Packed images of the computational basis of V under the accumulated
/// protocol unitary: column k holds W_l (|k>_V (x) |0>_memory). The leading
/// factors of `space` form V (their dims multiply to dim_v); the trailing
/// factors are the memory. Columns stay mutually orthonormal.
struct BasisImageMap {
  HilbertSpace space;
  Index dim_v = 0;
  Matrix columns;  ///< total_dim x dim_v
  int step_index = 0;

  Index dim_m() const { return space.total_dim() / dim_v; }
};

/// One logged unitary: the operator plus the factor labels it acted on.
/// Replaying the log from the initial embedding reproduces the images;
/// applying adjoints in reverse order inverts the protocol exactly.
struct AppliedOp {
  Operator op;
  std::vector<std::string> targets;
};

struct StepTrace {
  int step = 0;
  double residual_weight = 0.0;  ///< worst-case weight left in V, in [0, 1]
  Index memory_rank = 0;         ///< rank of the xi-family span, <= (dim V)^2
  double gram_error = 0.0;       ///< max |Gram before - Gram after| for the step
  double m1_leakage = 0.0;       ///< max column weight on M1 != |0> components
  double wall_time_s = 0.0;
};

struct ProtocolState {
  ChainSpec chain;
  SystemPartition partition;
  MemoryLayout layout;
  Operator hamiltonian;  ///< on V
  AppliedOp step_op;     ///< precomputed step unitary on V (x) M1
  BasisImageMap images;
  std::vector<AppliedOp> applied_ops;
  double step_time = 0.0;
  double rank_rel_tol = kDefaultRankRelTol;
};

/// Fresh protocol at step 0: images column k = |k>_V (x) |0>_M0 (x) |0>_M1.
ProtocolState init_protocol(const ChainSpec& spec, const SystemPartition& partition,
                            const MemoryLayout& layout, double step_time,
                            double rank_rel_tol = kDefaultRankRelTol);

/// One downloading step on the full space V (x) M0 (x) M1:
/// S = SWAP(C, M1) . (exp(-i H t) (x) I_M). Acts as identity on M0.
/// Accepts t = 0 (pure embedded swap).
Operator step_unitary(const ChainSpec& spec, const SystemPartition& partition,
                      const MemoryLayout& layout, double step_time);

/// Applies the step unitary to every image column, then builds and applies
/// the defragmentation unitary for the current xi-family. After the step
/// every column's M1 factor is |0> (residual weight <= 1e-9, enforced).
/// Both unitaries are appended to applied_ops.
///
/// skip_defrag_for_debug leaves the defrag unitary out (and unlogged); the
/// step's Gram is unaffected but the M1 reset contract breaks. Debug only.
StepTrace download_step(ProtocolState& state, bool skip_defrag_for_debug = false);

/// Worst case over normalized inputs of the weight remaining in V: squared
/// largest singular value of P_perp . columns, with P_perp projecting onto
/// the V-component orthogonal to |0>_V.
double residual_weight(const BasisImageMap& images);

/// Max over columns of the weight on components whose trailing factor
/// (M1 for protocol images) is not |0>.
double m1_leakage(const BasisImageMap& images);

/// Max-entry deviation of columns^dagger columns from the identity.
double orthonormality_error(const BasisImageMap& images);

/// The linear map Phi of the downloading stage: column k is the memory
/// component of image column k with V-factor |0>_V. Shape dim_m x dim_v.
Matrix extract_phi_map(const ProtocolState& state);

/// Runs `steps` downloading steps; returns one trace per step.
std::vector<StepTrace> run_download(ProtocolState& state, int steps);

/// Replays applied_ops on psi (x) |0>_M0 (x) |0>_M1; the downloaded joint
/// state for this input at the current step.
StateVector download_state(const ProtocolState& state, const StateVector& psi);

struct RoundtripResult {
  double fidelity = 0.0;
  std::vector<StepTrace> traces;
};

/// Download for `steps` steps starting from psi (x) |0>_M, apply memory_gate
/// on M if given (identity otherwise), then apply the exact inverses of all
/// logged unitaries in reverse order. Returns the fidelity of the reduced V
/// state against `logical_target` (psi itself when no gate is given; when a
/// gate is supplied the caller must pass the intended target explicitly).
RoundtripResult run_roundtrip(const ChainSpec& spec, const SystemPartition& partition,
                              const MemoryLayout& layout, double step_time, int steps,
                              const StateVector& psi, const Operator* memory_gate = nullptr,
                              const StateVector* logical_target = nullptr,
                              double rank_rel_tol = kDefaultRankRelTol);

/// Unitary on the memory acting as the logical gate inside the stored-code
/// subspace: Q G Q^dagger + (I - Q Q^dagger), with Q the polar isometry of
/// phi. Approximates phi(psi) -> phi(G psi) up to the download residual.
Matrix memory_gate_from_logical(const Matrix& phi, const Matrix& logical);

}  // namespace qdefrag
