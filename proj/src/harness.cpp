#include "qdefrag/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qdefrag {

namespace {

using nlohmann::json;

constexpr int kOracleMaxSites = 3;
constexpr int kOracleMaxSteps = 12;
constexpr int kMaxSites = 4;  // total dim 2^(3N+1); N = 4 is already 8192

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

const json& require_field(const json& j, const char* name) {
  if (!j.contains(name)) config_fail(std::string("missing required field '") + name + "'");
  return j.at(name);
}

double as_number(const json& v, const char* name) {
  if (!v.is_number()) config_fail(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

int as_int(const json& v, const char* name) {
  if (!v.is_number_integer()) config_fail(std::string("field '") + name + "' must be an integer");
  return v.get<int>();
}

std::vector<double> as_double_array(const json& v, const char* name) {
  if (!v.is_array()) config_fail(std::string("field '") + name + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) config_fail(std::string("field '") + name + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_fail(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) config_fail("top level must be a JSON object");

  static const std::vector<std::string> known = {
      "model",   "n_sites", "couplings",    "fields",   "controlled_site", "step_time",
      "steps",   "seed",    "rank_rel_tol", "gram_tol", "oracle_steps",    "output"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      config_fail("unknown field '" + item.key() + "'");
  }

  RunConfig c;

  const json& model = require_field(j, "model");
  if (!model.is_string()) config_fail("field 'model' must be a string");
  std::string m = model.get<std::string>();
  std::transform(m.begin(), m.end(), m.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (m == "xx") {
    c.chain.model = ChainModel::xx;
  } else if (m == "heisenberg") {
    c.chain.model = ChainModel::heisenberg;
  } else {
    config_fail("field 'model' must be \"xx\" or \"heisenberg\"");
  }

  c.n_sites = as_int(require_field(j, "n_sites"), "n_sites");
  if (c.n_sites < 2 || c.n_sites > kMaxSites)
    config_fail("field 'n_sites' must be in [2, " + std::to_string(kMaxSites) + "]");

  c.chain.couplings = j.contains("couplings")
                          ? as_double_array(j.at("couplings"), "couplings")
                          : std::vector<double>(static_cast<std::size_t>(c.n_sites - 1), 1.0);
  if (static_cast<int>(c.chain.couplings.size()) != c.n_sites - 1)
    config_fail("field 'couplings' must have length n_sites - 1");
  for (double v : c.chain.couplings)
    if (v == 0.0) config_fail("field 'couplings' must not contain zeros");

  c.chain.fields = j.contains("fields") ? as_double_array(j.at("fields"), "fields")
                                        : std::vector<double>(static_cast<std::size_t>(c.n_sites), 0.0);
  if (static_cast<int>(c.chain.fields.size()) != c.n_sites)
    config_fail("field 'fields' must have length n_sites");

  c.controlled_site = j.contains("controlled_site")
                          ? as_int(j.at("controlled_site"), "controlled_site")
                          : 0;
  if (c.controlled_site < 0 || c.controlled_site >= c.n_sites)
    config_fail("field 'controlled_site' out of range");

  c.step_time = as_number(require_field(j, "step_time"), "step_time");
  if (!(c.step_time > 0.0)) config_fail("field 'step_time' must be > 0");

  c.steps = as_int(require_field(j, "steps"), "steps");
  if (c.steps < 0) config_fail("field 'steps' must be >= 0");

  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0)
      config_fail("field 'seed' must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }

  if (j.contains("rank_rel_tol")) c.rank_rel_tol = as_number(j.at("rank_rel_tol"), "rank_rel_tol");
  if (!(c.rank_rel_tol > 0.0 && c.rank_rel_tol < 1.0))
    config_fail("field 'rank_rel_tol' must lie in (0, 1)");

  if (j.contains("gram_tol")) c.gram_tol = as_number(j.at("gram_tol"), "gram_tol");
  if (!(c.gram_tol > 0.0)) config_fail("field 'gram_tol' must be > 0");

  if (j.contains("oracle_steps")) c.oracle_steps = as_int(j.at("oracle_steps"), "oracle_steps");
  if (c.oracle_steps < 0 || c.oracle_steps > kOracleMaxSteps)
    config_fail("field 'oracle_steps' must be in [0, " + std::to_string(kOracleMaxSteps) + "]");

  const json& out = require_field(j, "output");
  if (!out.is_string() || out.get<std::string>().empty())
    config_fail("field 'output' must be a non-empty string");
  c.output = out.get<std::string>();

  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) config_fail("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

SystemPartition partition_from(const RunConfig& config) {
  return make_partition(config.n_sites, config.controlled_site);
}

namespace {

void check_naive_guard(const SystemPartition& partition, int steps) {
  if (partition.n_sites > kOracleMaxSites || steps > kOracleMaxSteps)
    throw std::invalid_argument(
        "naive oracle guard: requires n_sites <= 3 and steps <= 12 (memory grows as 2^steps)");
}

std::string fresh_label(int step) { return "f" + std::to_string(step); }

double naive_state_residual(const Vector& amp, Index dim_mem) {
  // components with V-index != 0 occupy the tail rows (V is the slowest block)
  return amp.tail(amp.size() - dim_mem).squaredNorm();
}

}  // namespace

NaiveRun init_naive_images(const ChainSpec& spec, const SystemPartition& partition,
                           double step_time) {
  if (!(step_time > 0.0)) throw std::invalid_argument("init_naive_images: step_time must be > 0");
  Operator u_v = hermitian_propagator(build_chain_hamiltonian(spec, partition), step_time);
  const Index dv = partition.dim_v();
  NaiveRun run{partition,
               std::move(u_v),
               BasisImageMap{partition.space_v, dv, Matrix::Identity(dv, dv), 0},
               {}};
  return run;
}

void naive_images_step(NaiveRun& run) {
  check_naive_guard(run.partition, run.images.step_index + 1);
  const std::string fresh = fresh_label(run.images.step_index + 1);

  // append the fresh qubit in |0>
  const HilbertSpace grown = tensor(run.images.space, HilbertSpace({{fresh, 2}}));
  Matrix cols = Matrix::Zero(grown.total_dim(), run.images.dim_v);
  for (Index r = 0; r < run.images.columns.rows(); ++r) cols.row(2 * r) = run.images.columns.row(r);
  run.images.space = grown;
  run.images.columns = std::move(cols);

  apply_embedded_columns(run.propagator, run.partition.site_labels(), run.images.space,
                         run.images.columns);
  run.applied_ops.push_back({run.propagator, run.partition.site_labels()});

  const Operator swap_op(HilbertSpace({{"a", 2}, {"b", 2}}), swap_gate(), OpKind::unitary);
  const std::vector<std::string> swap_targets = {
      run.partition.site_label(run.partition.controlled_site), fresh};
  apply_embedded_columns(swap_op, swap_targets, run.images.space, run.images.columns);
  run.applied_ops.push_back({swap_op, swap_targets});

  run.images.step_index += 1;
}

std::pair<NaiveState, std::vector<NaiveTrace>> naive_download(const ChainSpec& spec,
                                                              const SystemPartition& partition,
                                                              double step_time, int steps,
                                                              const StateVector& psi) {
  check_naive_guard(partition, steps);
  if (!(psi.space == partition.space_v))
    throw std::invalid_argument("naive_download: psi must live on V");

  NaiveRun run = init_naive_images(spec, partition, step_time);
  std::vector<NaiveTrace> traces;
  for (int l = 1; l <= steps; ++l) {
    naive_images_step(run);
    // psi's joint state is the linear image of its coefficient vector
    const Vector joint = run.images.columns * psi.amp;
    traces.push_back({l, naive_state_residual(joint, run.images.dim_m()), joint.size()});
  }
  NaiveState state{run.images.space, run.images.columns * psi.amp, steps};
  return {std::move(state), std::move(traces)};
}

double naive_roundtrip_fidelity(const ChainSpec& spec, const SystemPartition& partition,
                                double step_time, int steps, const StateVector& psi,
                                const Matrix& logical_gate) {
  check_naive_guard(partition, steps);
  if (!psi.is_normalized()) throw std::invalid_argument("naive_roundtrip: psi not normalized");

  NaiveRun run = init_naive_images(spec, partition, step_time);
  for (int l = 0; l < steps; ++l) naive_images_step(run);

  const Index dim_mem = run.images.dim_m();
  const Matrix phi = run.images.columns.topRows(dim_mem);
  const Matrix gate = memory_gate_from_logical(phi, logical_gate);

  std::vector<std::string> mem_labels;
  std::vector<Factor> mem_factors;
  for (int l = 1; l <= steps; ++l) {
    mem_labels.push_back(fresh_label(l));
    mem_factors.push_back({fresh_label(l), 2});
  }
  const Operator gate_op(HilbertSpace(mem_factors), gate, OpKind::unitary);

  StateVector joint(run.images.space, run.images.columns * psi.amp);
  if (steps > 0) joint = apply_embedded(gate_op, mem_labels, joint);
  for (auto it = run.applied_ops.rbegin(); it != run.applied_ops.rend(); ++it)
    joint = apply_embedded(it->op.adjoint(), it->targets, joint);

  const Operator rho_v = partial_trace(joint, partition.site_labels());
  const StateVector target(partition.space_v, logical_gate * psi.amp);
  return fidelity(target, rho_v);
}

OracleReport compare_with_oracle(const RunConfig& config, bool skip_defrag_for_debug) {
  if (config.n_sites > kOracleMaxSites)
    config_fail("field 'n_sites' must be <= 3 for oracle runs");

  const SystemPartition partition = partition_from(config);
  const MemoryLayout layout = make_layout(partition);
  ProtocolState defrag_state =
      init_protocol(config.chain, partition, layout, config.step_time, config.rank_rel_tol);
  NaiveRun naive = init_naive_images(config.chain, partition, config.step_time);

  const auto v_labels = partition.site_labels();
  OracleReport report;

  auto compare_now = [&](int step) {
    OracleStepReport row;
    row.step = step;
    row.gram_diff = max_abs(gram(extract_xi_family(defrag_state.images)) -
                            gram(extract_xi_family(naive.images)));
    for (Index k = 0; k < partition.dim_v(); ++k) {
      const StateVector d_col(defrag_state.images.space, defrag_state.images.columns.col(k));
      const StateVector n_col(naive.images.space, naive.images.columns.col(k));
      const Matrix diff =
          partial_trace(d_col, v_labels).mat - partial_trace(n_col, v_labels).mat;
      row.rho_diff = std::max(row.rho_diff, max_abs(diff));
    }
    row.m1_leak = m1_leakage(defrag_state.images);
    report.steps.push_back(row);
    report.max_rho_diff = std::max(report.max_rho_diff, row.rho_diff);
    report.max_gram_diff = std::max(report.max_gram_diff, row.gram_diff);
    report.max_m1_leak = std::max(report.max_m1_leak, row.m1_leak);
  };

  compare_now(0);
  for (int l = 1; l <= config.oracle_steps; ++l) {
    download_step(defrag_state, skip_defrag_for_debug);
    naive_images_step(naive);
    compare_now(l);
  }

  report.pass = report.max_rho_diff <= 1e-9 && report.max_gram_diff <= 1e-9 &&
                report.max_m1_leak <= 1e-9;
  return report;
}

std::string format_float(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

ExperimentSummary run_experiment(const RunConfig& config) {
  const SystemPartition partition = partition_from(config);
  const MemoryLayout layout = make_layout(partition);

  std::ofstream out(config.output, std::ios::binary | std::ios::trunc);
  if (!out) config_fail("field 'output': cannot write '" + config.output + "'");

  ProtocolState state =
      init_protocol(config.chain, partition, layout, config.step_time, config.rank_rel_tol);

  ExperimentSummary summary;
  summary.steps = config.steps;
  summary.dim_m0 = layout.dim_m0();
  summary.dim_m = layout.dim_m();

  out << "step,residual_weight,memory_rank,gram_error,m1_leakage,wall_time_s\n";
  for (int l = 1; l <= config.steps; ++l) {
    const StepTrace trace = download_step(state);
    out << trace.step << ',' << format_float(trace.residual_weight) << ',' << trace.memory_rank
        << ',' << format_float(trace.gram_error) << ',' << format_float(trace.m1_leakage) << ','
        << format_float(trace.wall_time_s) << '\n';
    summary.final_residual = trace.residual_weight;
    summary.max_memory_rank = std::max(summary.max_memory_rank, trace.memory_rank);
    summary.max_gram_error = std::max(summary.max_gram_error, trace.gram_error);
    summary.max_m1_leakage = std::max(summary.max_m1_leakage, trace.m1_leakage);
  }
  if (config.steps == 0) summary.final_residual = residual_weight(state.images);
  out.flush();
  if (!out) config_fail("field 'output': write failed for '" + config.output + "'");
  return summary;
}

}  // namespace qdefrag
