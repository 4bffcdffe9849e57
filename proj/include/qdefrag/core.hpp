#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qdefrag {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kUnitaryTol = 1e-10;
inline constexpr double kStateNormTol = 1e-9;
inline constexpr double kDefaultRankRelTol = 1e-12;
inline constexpr double kCompletionPivotTol = 1e-12;

/// One tensor factor of a composite space.
struct Factor {
  std::string label;
  Index dim = 0;
};

/// Ordered list of tensor factors defining a composite Hilbert space.
///
/// Basis index convention is row-major with the first factor slowest:
/// |i0 i1 ... im> maps to the flat index ((i0*d1 + i1)*d2 + i2)*... .
/// Every index computation in the library depends on this one convention.
class HilbertSpace {
 public:
  /// Empty space: zero factors, total dimension 1 (scalar).
  HilbertSpace() = default;

  /// Throws std::invalid_argument on a factor dim < 2 or a duplicate label.
  explicit HilbertSpace(std::vector<Factor> factors);

  Index total_dim() const { return total_dim_; }
  Index num_factors() const { return static_cast<Index>(factors_.size()); }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& factor(Index pos) const { return factors_[static_cast<std::size_t>(pos)]; }

  /// Stride of factor `pos`: product of the dims of all later factors.
  Index stride(Index pos) const { return strides_[static_cast<std::size_t>(pos)]; }

  bool has_label(std::string_view label) const;
  /// Position of the factor with the given label; throws if unknown.
  Index position(std::string_view label) const;
  std::vector<std::string> labels() const;

  friend bool operator==(const HilbertSpace& a, const HilbertSpace& b);

 private:
  std::vector<Factor> factors_;
  std::vector<Index> strides_;
  Index total_dim_ = 1;
};

/// Tensor concatenation of two spaces; rejects label collisions.
HilbertSpace tensor(const HilbertSpace& a, const HilbertSpace& b);

/// Dense complex state vector on a composite space.
struct StateVector {
  HilbertSpace space;
  Vector amp;

  StateVector(HilbertSpace s, Vector a);
  double norm() const { return amp.norm(); }
  bool is_normalized(double tol = kStateNormTol) const;
};

/// Computational basis state |k> on the given space.
StateVector basis_state(const HilbertSpace& space, Index k);

enum class OpKind { general, hermitian, unitary };

/// Dense complex square matrix on a composite space. Constructing with kind
/// hermitian or unitary validates the corresponding residual (max-entry norm,
/// tolerance 1e-10) and throws on violation.
struct Operator {
  HilbertSpace space;
  Matrix mat;
  OpKind kind = OpKind::general;

  Operator(HilbertSpace s, Matrix m, OpKind k = OpKind::general);
  Operator adjoint() const;
};

double max_abs(const Matrix& m);
double hermiticity_error(const Matrix& m);
double unitarity_error(const Matrix& m);

/// Kronecker product of states: amplitudes follow the row-major convention
/// (first operand slowest).
StateVector tensor(const StateVector& a, const StateVector& b);

/// Kronecker product of operators. Kind flags combine: equal kinds survive
/// (unitary x unitary = unitary), mixed kinds degrade to general.
Operator tensor(const Operator& a, const Operator& b);

/// Applies `op`, defined on the sub-factors named by `targets` (in order), to
/// `state`, acting as identity on all other factors. Only the dims of the
/// named factors must match op's factors; labels need not.
StateVector apply_embedded(const Operator& op,
                           const std::vector<std::string>& targets,
                           const StateVector& state);

/// Same embedding applied to every column of `columns` (each column a state
/// on `space`), in place.
void apply_embedded_columns(const Operator& op,
                            const std::vector<std::string>& targets,
                            const HilbertSpace& space, Matrix& columns);

/// Materializes the embedded operator (op padded with identity, with index
/// permutation) as a dense matrix on `space`.
Operator embed_operator(const Operator& op,
                        const std::vector<std::string>& targets,
                        const HilbertSpace& space);

/// Reduced density matrix Tr_discard(|state><state|) on the kept factors.
/// The result space lists the kept factors in the order given by `keep`.
/// Hermitian by construction; unit trace for a normalized input.
Operator partial_trace(const StateVector& state,
                       const std::vector<std::string>& keep);

/// exp(-i H t) via full Hermitian eigendecomposition
/// (U = Q diag(e^{-i lambda t}) Q^dagger). Throws on non-Hermitian input.
Operator hermitian_propagator(const Operator& hamiltonian, double time);

/// Orthonormal basis of the span of a vector family.
struct SpanBasis {
  Matrix basis;   ///< d x rank, orthonormal columns
  Index rank = 0; ///< number of singular values > rel_tol * largest
  Matrix coeffs;  ///< rank x n; input column i == basis * coeffs.col(i)
};

/// SVD-based span computation. `vectors` holds the family as columns.
/// rel_tol must lie in (0, 1); an empty family is rejected.
SpanBasis orthonormal_basis_of_span(const Matrix& vectors, double rel_tol);
SpanBasis orthonormal_basis_of_span(const std::vector<StateVector>& vectors,
                                    double rel_tol);

/// Extends orthonormal columns to a full unitary. The first columns of the
/// result are exactly the inputs; the remaining ones come from deterministic
/// pivoted Gram-Schmidt against the canonical basis (lowest canonical index
/// with projection residual > 1e-12 first, ascending).
Matrix complete_to_unitary(const Matrix& columns);
Operator complete_to_unitary(const std::vector<StateVector>& columns);

/// <psi|rho|psi>, clamped to [0, 1]. Throws if the imaginary residue exceeds
/// 1e-12 or the spaces do not match.
double fidelity(const StateVector& psi, const Operator& rho);

}  // namespace qdefrag
