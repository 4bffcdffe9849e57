#include "qdefrag/model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qdefrag {

std::vector<std::string> SystemPartition::site_labels() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n_sites));
  for (int i = 0; i < n_sites; ++i) out.push_back(site_label(i));
  return out;
}

SystemPartition make_partition(int n_sites, int controlled_site) {
  if (n_sites < 2) throw std::invalid_argument("make_partition: n_sites must be >= 2");
  if (controlled_site < 0 || controlled_site >= n_sites)
    throw std::invalid_argument("make_partition: controlled_site out of range");
  std::vector<Factor> fs;
  for (int i = 0; i < n_sites; ++i) fs.push_back({"v" + std::to_string(i), 2});
  return SystemPartition{n_sites, controlled_site, HilbertSpace(std::move(fs))};
}

MemoryLayout make_layout(const SystemPartition& partition) {
  const Index dv = partition.dim_v();
  MemoryLayout layout;
  layout.space_m0 = HilbertSpace({{"m0", dv * dv}});
  layout.space_m1 = HilbertSpace({{"m1", 2}});
  layout.space_m = tensor(layout.space_m0, layout.space_m1);
  return layout;
}

Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix pauli_y() {
  Matrix m(2, 2);
  m << 0, Complex(0, -1), Complex(0, 1), 0;
  return m;
}

Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix swap_gate() {
  Matrix m = Matrix::Zero(4, 4);
  m(0, 0) = 1;
  m(1, 2) = 1;
  m(2, 1) = 1;
  m(3, 3) = 1;
  return m;
}

Operator build_chain_hamiltonian(const ChainSpec& spec, const SystemPartition& partition) {
  const int n = partition.n_sites;
  if (static_cast<int>(spec.couplings.size()) != n - 1)
    throw std::invalid_argument("build_chain_hamiltonian: couplings length must be n_sites - 1");
  if (static_cast<int>(spec.fields.size()) != n)
    throw std::invalid_argument("build_chain_hamiltonian: fields length must be n_sites");
  for (double j : spec.couplings) {
    if (j == 0.0)
      throw std::invalid_argument("build_chain_hamiltonian: zero coupling disconnects the chain");
  }

  const HilbertSpace& space = partition.space_v;
  Matrix h = Matrix::Zero(space.total_dim(), space.total_dim());

  const HilbertSpace pair({{"a", 2}, {"b", 2}});
  Matrix xx_yy(4, 4);
  {
    Matrix x = pauli_x(), y = pauli_y();
    Matrix kron(4, 4);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j)
        kron.block(2 * i, 2 * j, 2, 2) = x(i, j) * x;
    xx_yy = kron;
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j)
        kron.block(2 * i, 2 * j, 2, 2) = y(i, j) * y;
    xx_yy += kron;
  }
  Matrix zz = Matrix::Zero(4, 4);
  zz.diagonal() << 1, -1, -1, 1;

  for (int i = 0; i + 1 < n; ++i) {
    Matrix term = 0.5 * spec.couplings[static_cast<std::size_t>(i)] * xx_yy;
    if (spec.model == ChainModel::heisenberg)
      term += 0.5 * spec.couplings[static_cast<std::size_t>(i)] * zz;
    const Operator op(pair, std::move(term), OpKind::hermitian);
    h += embed_operator(op, {partition.site_label(i), partition.site_label(i + 1)}, space).mat;
  }
  const HilbertSpace site({{"a", 2}});
  for (int i = 0; i < n; ++i) {
    const double hi = spec.fields[static_cast<std::size_t>(i)];
    if (hi == 0.0) continue;
    const Operator op(site, hi * pauli_z(), OpKind::hermitian);
    h += embed_operator(op, {partition.site_label(i)}, space).mat;
  }
  return Operator(space, std::move(h), OpKind::hermitian);
}

StateVector random_state(const HilbertSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // explicit Box-Muller over the standardized mt19937_64 stream keeps the
  // output independent of the stdlib's distribution implementation
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Vector amp(space.total_dim());
  for (Index i = 0; i < amp.size(); ++i) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    amp[i] = Complex(r * std::cos(theta), r * std::sin(theta));
  }
  amp /= amp.norm();
  return StateVector(space, std::move(amp));
}

}  // namespace qdefrag
