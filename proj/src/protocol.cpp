#include "qdefrag/protocol.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "qdefrag/defrag.hpp"

namespace qdefrag {

namespace {

// Step unitary on the compact space V (x) M1: SWAP(C, M1) . (exp(-iHt) (x) I).
Operator make_compact_step(const Operator& u_v, const SystemPartition& partition) {
  const HilbertSpace m1({{"m1", 2}});
  const HilbertSpace vm1 = tensor(partition.space_v, m1);
  Matrix u = embed_operator(u_v, partition.site_labels(), vm1).mat;
  const Operator swap_op(HilbertSpace({{"a", 2}, {"b", 2}}), swap_gate(), OpKind::unitary);
  Matrix sw = embed_operator(swap_op, {partition.site_label(partition.controlled_site), "m1"}, vm1).mat;
  return Operator(vm1, sw * u, OpKind::unitary);
}

std::vector<std::string> compact_step_targets(const SystemPartition& partition) {
  std::vector<std::string> t = partition.site_labels();
  t.push_back("m1");
  return t;
}

void check_layout(const SystemPartition& partition, const MemoryLayout& layout) {
  if (layout.dim_m0() != partition.dim_v() * partition.dim_v())
    throw std::invalid_argument("protocol: layout M0 dim is not (dim V)^2");
  if (layout.dim_m1() != 2)
    throw std::invalid_argument("protocol: layout M1 dim is not 2");
}

}  // namespace

ProtocolState init_protocol(const ChainSpec& spec, const SystemPartition& partition,
                            const MemoryLayout& layout, double step_time, double rank_rel_tol) {
  if (!(step_time > 0.0)) throw std::invalid_argument("init_protocol: step_time must be > 0");
  check_layout(partition, layout);

  Operator h = build_chain_hamiltonian(spec, partition);
  Operator u_v = hermitian_propagator(h, step_time);
  AppliedOp step{make_compact_step(u_v, partition), compact_step_targets(partition)};

  const HilbertSpace full = tensor(partition.space_v, layout.space_m);
  const Index dv = partition.dim_v();
  const Index dm = layout.dim_m();
  Matrix columns = Matrix::Zero(full.total_dim(), dv);
  for (Index k = 0; k < dv; ++k) columns(k * dm, k) = 1.0;

  ProtocolState state{spec,
                      partition,
                      layout,
                      std::move(h),
                      std::move(step),
                      BasisImageMap{full, dv, std::move(columns), 0},
                      {},
                      step_time,
                      rank_rel_tol};
  return state;
}

Operator step_unitary(const ChainSpec& spec, const SystemPartition& partition,
                      const MemoryLayout& layout, double step_time) {
  if (step_time < 0.0) throw std::invalid_argument("step_unitary: negative step_time");
  check_layout(partition, layout);
  const Operator u_v = hermitian_propagator(build_chain_hamiltonian(spec, partition), step_time);
  const Operator compact = make_compact_step(u_v, partition);
  const HilbertSpace full = tensor(partition.space_v, layout.space_m);
  return embed_operator(compact, compact_step_targets(partition), full);
}

double residual_weight(const BasisImageMap& images) {
  const Index dm = images.dim_m();
  const auto block = images.columns.bottomRows(images.columns.rows() - dm);
  const Matrix g = block.adjoint() * block;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double r = es.eigenvalues().maxCoeff();
  return std::clamp(r, 0.0, 1.0);
}

double m1_leakage(const BasisImageMap& images) {
  const Index d_last = images.space.factor(images.space.num_factors() - 1).dim;
  double worst = 0.0;
  for (Index c = 0; c < images.columns.cols(); ++c) {
    double w = 0.0;
    for (Index i = 0; i < images.columns.rows(); ++i)
      if (i % d_last != 0) w += std::norm(images.columns(i, c));
    worst = std::max(worst, w);
  }
  return worst;
}

double orthonormality_error(const BasisImageMap& images) {
  return unitarity_error(images.columns);
}

StepTrace download_step(ProtocolState& state, bool skip_defrag_for_debug) {
  const auto t0 = std::chrono::steady_clock::now();
  BasisImageMap& images = state.images;

  apply_embedded_columns(state.step_op.op, state.step_op.targets, images.space, images.columns);
  state.applied_ops.push_back(state.step_op);

  const XiFamily family = extract_xi_family(images);
  const GramMatrix gram_before = gram(family);
  const DefragResult defrag = build_defrag_unitary(family, state.layout, state.rank_rel_tol);

  if (!skip_defrag_for_debug) {
    apply_embedded_columns(defrag.unitary, {"m0", "m1"}, images.space, images.columns);
    state.applied_ops.push_back({defrag.unitary, {"m0", "m1"}});
  }
  images.step_index += 1;

  const GramMatrix gram_after = gram(extract_xi_family(images));

  StepTrace trace;
  trace.step = images.step_index;
  trace.memory_rank = defrag.rank;
  trace.gram_error = verify_gram_preserved(gram_before, gram_after, 0.0).max_abs_diff;
  trace.m1_leakage = m1_leakage(images);
  trace.residual_weight = residual_weight(images);
  trace.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!skip_defrag_for_debug && trace.m1_leakage > 1e-9)
    throw std::runtime_error("download_step: M1 reset contract violated");
  return trace;
}

Matrix extract_phi_map(const ProtocolState& state) {
  return state.images.columns.topRows(state.images.dim_m());
}

std::vector<StepTrace> run_download(ProtocolState& state, int steps) {
  if (steps < 0) throw std::invalid_argument("run_download: negative step count");
  std::vector<StepTrace> traces;
  traces.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) traces.push_back(download_step(state));
  return traces;
}

StateVector download_state(const ProtocolState& state, const StateVector& psi) {
  if (!(psi.space == state.partition.space_v))
    throw std::invalid_argument("download_state: psi must live on V");
  StateVector joint = tensor(psi, basis_state(state.layout.space_m, 0));
  for (const AppliedOp& entry : state.applied_ops)
    joint = apply_embedded(entry.op, entry.targets, joint);
  return joint;
}

RoundtripResult run_roundtrip(const ChainSpec& spec, const SystemPartition& partition,
                              const MemoryLayout& layout, double step_time, int steps,
                              const StateVector& psi, const Operator* memory_gate,
                              const StateVector* logical_target, double rank_rel_tol) {
  if (!psi.is_normalized()) throw std::invalid_argument("run_roundtrip: psi not normalized");
  if (memory_gate != nullptr) {
    if (!(memory_gate->space == layout.space_m))
      throw std::invalid_argument("run_roundtrip: memory_gate must live on M");
    if (unitarity_error(memory_gate->mat) > kUnitaryTol)
      throw std::invalid_argument("run_roundtrip: memory_gate not unitary");
    if (logical_target == nullptr)
      throw std::invalid_argument("run_roundtrip: a memory gate needs an explicit logical target");
  }

  ProtocolState state = init_protocol(spec, partition, layout, step_time, rank_rel_tol);
  RoundtripResult result;
  result.traces = run_download(state, steps);

  StateVector joint = download_state(state, psi);
  if (memory_gate != nullptr)
    joint = apply_embedded(*memory_gate, {"m0", "m1"}, joint);
  for (auto it = state.applied_ops.rbegin(); it != state.applied_ops.rend(); ++it)
    joint = apply_embedded(it->op.adjoint(), it->targets, joint);

  const Operator rho_v = partial_trace(joint, partition.site_labels());
  const StateVector& target = (logical_target != nullptr) ? *logical_target : psi;
  result.fidelity = fidelity(target, rho_v);
  return result;
}

Matrix memory_gate_from_logical(const Matrix& phi, const Matrix& logical) {
  if (phi.cols() != logical.rows() || logical.rows() != logical.cols())
    throw std::invalid_argument("memory_gate_from_logical: shape mismatch");
  if (unitarity_error(logical) > kUnitaryTol)
    throw std::invalid_argument("memory_gate_from_logical: logical gate not unitary");
  Eigen::JacobiSVD<Matrix> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix q = svd.matrixU() * svd.matrixV().adjoint();  // polar isometry of phi
  const Index dm = phi.rows();
  return q * logical * q.adjoint() + Matrix::Identity(dm, dm) - q * q.adjoint();
}

}  // namespace qdefrag
