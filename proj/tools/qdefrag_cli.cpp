// Command-line driver for the bounded-memory state-download simulator.
//
// Subcommands:
//   run           download run from a JSON config, CSV trace to config.output
//   oracle-check  lockstep comparison against the naive growing-memory protocol
//   roundtrip     download / (optional memory gate) / exact upload, fidelity
//   gram-selftest randomized property suite for the memory compression step
//
// Exit codes: 0 pass, 1 invariant failure, 2 config error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qdefrag/harness.hpp"

namespace {

using namespace qdefrag;

constexpr int kExitPass = 0;
constexpr int kExitInvariantFailure = 1;
constexpr int kExitConfigError = 2;

Matrix kron_power(const Matrix& g, int n) {
  Matrix out = g;
  for (int i = 1; i < n; ++i) {
    Matrix next(out.rows() * g.rows(), out.cols() * g.cols());
    for (Index r = 0; r < out.rows(); ++r)
      for (Index c = 0; c < out.cols(); ++c)
        next.block(r * g.rows(), c * g.cols(), g.rows(), g.cols()) = out(r, c) * g;
    out = std::move(next);
  }
  return out;
}

Matrix random_isometry_columns(const HilbertSpace& space, Index cols, std::uint64_t seed) {
  Matrix a(space.total_dim(), cols);
  for (Index c = 0; c < cols; ++c)
    a.col(c) = random_state(space, seed * 7919 + static_cast<std::uint64_t>(c)).amp;
  Eigen::HouseholderQR<Matrix> qr(a);
  return Matrix(qr.householderQ()) * Matrix::Identity(space.total_dim(), cols);
}

int cmd_run(const std::string& config_path) {
  const RunConfig config = load_config(config_path);
  const ExperimentSummary s = run_experiment(config);
  std::cout << "steps=" << s.steps << "\n"
            << "final_residual_weight=" << format_float(s.final_residual) << "\n"
            << "max_memory_rank=" << s.max_memory_rank << "\n"
            << "max_gram_error=" << format_float(s.max_gram_error) << "\n"
            << "max_m1_leakage=" << format_float(s.max_m1_leakage) << "\n"
            << "dim_m0=" << s.dim_m0 << "\n"
            << "dim_m=" << s.dim_m << "\n"
            << "trace=" << config.output << "\n";
  return kExitPass;
}

int cmd_oracle_check(const std::string& config_path) {
  const RunConfig config = load_config(config_path);
  const OracleReport report = compare_with_oracle(config);
  std::cout << "step,rho_diff,gram_diff,m1_leakage\n";
  for (const auto& row : report.steps)
    std::cout << row.step << ',' << format_float(row.rho_diff) << ','
              << format_float(row.gram_diff) << ',' << format_float(row.m1_leak) << "\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << " max_rho_diff="
            << format_float(report.max_rho_diff)
            << " max_gram_diff=" << format_float(report.max_gram_diff)
            << " max_m1_leakage=" << format_float(report.max_m1_leak) << "\n";
  return report.pass ? kExitPass : kExitInvariantFailure;
}

int cmd_roundtrip(const std::string& config_path, std::uint64_t seed, const std::string& gate) {
  const RunConfig config = load_config(config_path);
  const SystemPartition partition = partition_from(config);
  const MemoryLayout layout = make_layout(partition);
  const StateVector psi = random_state(partition.space_v, seed);

  if (gate == "none") {
    const RoundtripResult rr = run_roundtrip(config.chain, partition, layout, config.step_time,
                                             config.steps, psi, nullptr, nullptr,
                                             config.rank_rel_tol);
    const bool pass = rr.fidelity >= 1.0 - 1e-9;
    std::cout << "gate=none steps=" << config.steps
              << " fidelity=" << format_float(rr.fidelity) << (pass ? " PASS" : " FAIL") << "\n";
    return pass ? kExitPass : kExitInvariantFailure;
  }

  const Matrix logical =
      kron_power(gate == "x" ? pauli_x() : pauli_z(), partition.n_sites);

  // the gate acts through the Phi map of the fully downloaded protocol
  ProtocolState state =
      init_protocol(config.chain, partition, layout, config.step_time, config.rank_rel_tol);
  const auto traces = run_download(state, config.steps);
  const Matrix memory_gate = memory_gate_from_logical(extract_phi_map(state), logical);
  const Operator gate_op(layout.space_m, memory_gate, OpKind::unitary);
  const StateVector target(partition.space_v, logical * psi.amp);

  const RoundtripResult rr =
      run_roundtrip(config.chain, partition, layout, config.step_time, config.steps, psi,
                    &gate_op, &target, config.rank_rel_tol);
  const double residual = traces.empty() ? 1.0 : traces.back().residual_weight;
  std::cout << "gate=" << gate << " steps=" << config.steps
            << " fidelity=" << format_float(rr.fidelity)
            << " residual_weight=" << format_float(residual) << "\n";
  return kExitPass;
}

int cmd_gram_selftest() {
  int failures = 0;
  double worst_gram = 0.0, worst_unitarity = 0.0, worst_purity = 0.0;
  int trials_total = 0;

  for (int n : {2, 3}) {
    const SystemPartition partition = make_partition(n, 0);
    const MemoryLayout layout = make_layout(partition);
    const HilbertSpace full = tensor(partition.space_v, layout.space_m);
    const int trials = n == 2 ? 120 : 80;
    for (int trial = 0; trial < trials; ++trial) {
      ++trials_total;
      const std::uint64_t seed = static_cast<std::uint64_t>(n) * 100000 + trial;
      BasisImageMap images{full, partition.dim_v(),
                           random_isometry_columns(full, partition.dim_v(), seed), 0};
      const XiFamily family = extract_xi_family(images);
      const GramMatrix before = gram(family);
      const DefragResult defrag = build_defrag_unitary(family, layout, kDefaultRankRelTol);

      const Matrix after_vectors = defrag.unitary.mat * family.vectors;
      const GramMatrix after = gram_of_columns(after_vectors);
      const double gram_dev = verify_gram_preserved(before, after, 1e-10).max_abs_diff;
      const double unit_dev = unitarity_error(defrag.unitary.mat);

      double purity = 0.0;
      for (Index c = 0; c < after_vectors.cols(); ++c) {
        double w = 0.0;
        for (Index i = 0; i < after_vectors.rows(); ++i)
          if (i % layout.dim_m1() != 0) w += std::norm(after_vectors(i, c));
        purity = std::max(purity, w);
      }

      worst_gram = std::max(worst_gram, gram_dev);
      worst_unitarity = std::max(worst_unitarity, unit_dev);
      worst_purity = std::max(worst_purity, purity);
      if (gram_dev > 1e-10 || unit_dev > 1e-10 || purity > 1e-10 ||
          defrag.rank > layout.dim_m0())
        ++failures;
    }
  }

  std::cout << "trials=" << trials_total << " failures=" << failures
            << " max_gram_deviation=" << format_float(worst_gram)
            << " max_unitarity_error=" << format_float(worst_unitarity)
            << " max_m1_weight=" << format_float(worst_purity) << "\n"
            << (failures == 0 ? "PASS" : "FAIL") << "\n";
  return failures == 0 ? kExitPass : kExitInvariantFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded-memory quantum state-download simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string rt_config_path;
  std::string gate = "none";
  std::uint64_t seed = 0;
  bool seed_given = false;

  CLI::App* run = app.add_subcommand("run", "download run, CSV trace to config output");
  run->add_option("--config", config_path, "JSON config path")->required();

  CLI::App* oracle = app.add_subcommand("oracle-check", "compare against the naive protocol");
  oracle->add_option("--config", config_path, "JSON config path")->required();

  CLI::App* roundtrip = app.add_subcommand("roundtrip", "download, optional gate, exact upload");
  roundtrip->add_option("--config", rt_config_path, "JSON config path")->required();
  roundtrip->add_option("--seed", seed, "seed for the random input state")
      ->each([&seed_given](const std::string&) { seed_given = true; });
  roundtrip->add_option("--gate", gate, "logical gate applied in memory: x, z or none")
      ->check(CLI::IsMember({"x", "z", "none"}));

  CLI::App* selftest = app.add_subcommand("gram-selftest", "randomized compression property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (oracle->parsed()) return cmd_oracle_check(config_path);
    if (roundtrip->parsed()) {
      if (!seed_given) seed = load_config(rt_config_path).seed;
      return cmd_roundtrip(rt_config_path, seed, gate);
    }
    if (selftest->parsed()) return cmd_gram_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariantFailure;
  }
  return kExitConfigError;
}
