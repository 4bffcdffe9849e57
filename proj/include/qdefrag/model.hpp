#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdefrag/core.hpp"

namespace qdefrag {

enum class ChainModel { xx, heisenberg };

/// Chain Hamiltonian family. Couplings are in units of J1 = 1; step times are
/// dimensionless in those units.
struct ChainSpec {
  ChainModel model = ChainModel::xx;
  std::vector<double> couplings;  ///< J_i, length n_sites - 1, all nonzero
  std::vector<double> fields;     ///< h_i, length n_sites
};

/// Qubit chain V with one controlled site C.
struct SystemPartition {
  int n_sites = 0;
  int controlled_site = 0;
  HilbertSpace space_v;  ///< factors "v0" .. "v{n-1}", each dim 2

  Index dim_v() const { return space_v.total_dim(); }
  std::string site_label(int i) const { return "v" + std::to_string(i); }
  std::vector<std::string> site_labels() const;
};

SystemPartition make_partition(int n_sites, int controlled_site);

/// Memory split M = M0 (x) M1 with dim M0 = (dim V)^2 and dim M1 = dim C = 2.
struct MemoryLayout {
  HilbertSpace space_m0;  ///< single factor "m0"
  HilbertSpace space_m1;  ///< single factor "m1"
  HilbertSpace space_m;   ///< m0 (x) m1

  Index dim_m0() const { return space_m0.total_dim(); }
  Index dim_m1() const { return space_m1.total_dim(); }
  Index dim_m() const { return space_m.total_dim(); }
};

MemoryLayout make_layout(const SystemPartition& partition);

/// XX: H = sum_i (J_i/2)(X_i X_{i+1} + Y_i Y_{i+1}) + sum_i h_i Z_i.
/// Heisenberg adds (J_i/2) Z_i Z_{i+1}.
Operator build_chain_hamiltonian(const ChainSpec& spec, const SystemPartition& partition);

/// Haar-distributed pure state: i.i.d. standard complex Gaussian amplitudes,
/// normalized. Identical seed gives identical output.
StateVector random_state(const HilbertSpace& space, std::uint64_t seed);

Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();
Matrix swap_gate();

}  // namespace qdefrag
