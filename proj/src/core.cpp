#include "qdefrag/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace qdefrag {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

HilbertSpace::HilbertSpace(std::vector<Factor> factors) : factors_(std::move(factors)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : factors_) {
    if (f.dim < 2) fail("HilbertSpace: factor '" + f.label + "' has dim < 2");
    if (!seen.insert(f.label).second) fail("HilbertSpace: duplicate label '" + f.label + "'");
  }
  strides_.assign(factors_.size(), 1);
  total_dim_ = 1;
  for (std::size_t i = factors_.size(); i-- > 0;) {
    strides_[i] = total_dim_;
    total_dim_ *= factors_[i].dim;
  }
}

bool HilbertSpace::has_label(std::string_view label) const {
  return std::any_of(factors_.begin(), factors_.end(),
                     [&](const Factor& f) { return f.label == label; });
}

Index HilbertSpace::position(std::string_view label) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].label == label) return static_cast<Index>(i);
  }
  fail("HilbertSpace: unknown factor label '" + std::string(label) + "'");
}

std::vector<std::string> HilbertSpace::labels() const {
  std::vector<std::string> out;
  out.reserve(factors_.size());
  for (const auto& f : factors_) out.push_back(f.label);
  return out;
}

bool operator==(const HilbertSpace& a, const HilbertSpace& b) {
  if (a.factors_.size() != b.factors_.size()) return false;
  for (std::size_t i = 0; i < a.factors_.size(); ++i) {
    if (a.factors_[i].label != b.factors_[i].label) return false;
    if (a.factors_[i].dim != b.factors_[i].dim) return false;
  }
  return true;
}

HilbertSpace tensor(const HilbertSpace& a, const HilbertSpace& b) {
  std::vector<Factor> fs = a.factors();
  for (const auto& f : b.factors()) {
    if (a.has_label(f.label)) fail("tensor: label collision '" + f.label + "'");
    fs.push_back(f);
  }
  return HilbertSpace(std::move(fs));
}

StateVector::StateVector(HilbertSpace s, Vector a) : space(std::move(s)), amp(std::move(a)) {
  if (amp.size() != space.total_dim()) fail("StateVector: amplitude length does not match space dim");
}

bool StateVector::is_normalized(double tol) const { return std::abs(norm() - 1.0) <= tol; }

StateVector basis_state(const HilbertSpace& space, Index k) {
  if (k < 0 || k >= space.total_dim()) fail("basis_state: index out of range");
  Vector v = Vector::Zero(space.total_dim());
  v[k] = 1.0;
  return StateVector(space, std::move(v));
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermiticity_error(const Matrix& m) { return max_abs(m - m.adjoint().eval()); }

double unitarity_error(const Matrix& m) {
  return max_abs((m.adjoint() * m - Matrix::Identity(m.cols(), m.cols())).eval());
}

Operator::Operator(HilbertSpace s, Matrix m, OpKind k)
    : space(std::move(s)), mat(std::move(m)), kind(k) {
  if (mat.rows() != space.total_dim() || mat.cols() != space.total_dim())
    fail("Operator: matrix shape does not match space dim");
  if (kind == OpKind::hermitian && hermiticity_error(mat) > kHermitianTol)
    fail("Operator: hermiticity residual exceeds tolerance");
  if (kind == OpKind::unitary && unitarity_error(mat) > kUnitaryTol)
    fail("Operator: unitarity residual exceeds tolerance");
}

Operator Operator::adjoint() const { return Operator(space, mat.adjoint(), kind); }

StateVector tensor(const StateVector& a, const StateVector& b) {
  HilbertSpace joint = tensor(a.space, b.space);
  const Index db = b.amp.size();
  Vector out(joint.total_dim());
  for (Index i = 0; i < a.amp.size(); ++i)
    out.segment(i * db, db) = a.amp[i] * b.amp;
  return StateVector(std::move(joint), std::move(out));
}

Operator tensor(const Operator& a, const Operator& b) {
  HilbertSpace joint = tensor(a.space, b.space);
  const Index da = a.mat.rows();
  const Index db = b.mat.rows();
  Matrix out(da * db, da * db);
  for (Index i = 0; i < da; ++i)
    for (Index j = 0; j < da; ++j)
      out.block(i * db, j * db, db, db) = a.mat(i, j) * b.mat;
  OpKind kind = (a.kind == b.kind) ? a.kind : OpKind::general;
  return Operator(std::move(joint), std::move(out), kind);
}

namespace {

// Flat-index decomposition for embedding an operator on a factor subset.
// Because factors contribute independent digits, every full index splits as
// sub_offsets[s] + env_offsets[e].
struct EmbedMap {
  std::vector<Index> sub_offsets;
  std::vector<Index> env_offsets;
  Index sub_dim = 1;
};

std::vector<Index> expand_offsets(const HilbertSpace& space, const std::vector<Index>& positions) {
  std::vector<Index> offsets{0};
  for (Index pos : positions) {
    const Index dim = space.factor(pos).dim;
    const Index stride = space.stride(pos);
    std::vector<Index> next;
    next.reserve(offsets.size() * static_cast<std::size_t>(dim));
    for (Index base : offsets)
      for (Index digit = 0; digit < dim; ++digit) next.push_back(base + digit * stride);
    offsets = std::move(next);
  }
  return offsets;
}

EmbedMap make_embed_map(const HilbertSpace& space, const std::vector<std::string>& targets,
                        const HilbertSpace& op_space) {
  if (static_cast<Index>(targets.size()) != op_space.num_factors())
    fail("apply_embedded: target count does not match operator factor count");
  std::vector<Index> target_pos;
  std::unordered_set<std::string> used;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!used.insert(targets[i]).second) fail("apply_embedded: duplicate target '" + targets[i] + "'");
    const Index pos = space.position(targets[i]);
    if (space.factor(pos).dim != op_space.factor(static_cast<Index>(i)).dim)
      fail("apply_embedded: dim mismatch on factor '" + targets[i] + "'");
    target_pos.push_back(pos);
  }
  std::vector<Index> env_pos;
  for (Index p = 0; p < space.num_factors(); ++p) {
    if (std::find(target_pos.begin(), target_pos.end(), p) == target_pos.end()) env_pos.push_back(p);
  }
  EmbedMap map;
  map.sub_offsets = expand_offsets(space, target_pos);
  map.env_offsets = expand_offsets(space, env_pos);
  map.sub_dim = op_space.total_dim();
  return map;
}

}  // namespace

void apply_embedded_columns(const Operator& op, const std::vector<std::string>& targets,
                            const HilbertSpace& space, Matrix& columns) {
  if (columns.rows() != space.total_dim()) fail("apply_embedded: column length does not match space");
  const EmbedMap map = make_embed_map(space, targets, op.space);
  const Index ds = map.sub_dim;
  const Index nc = columns.cols();
  Matrix block(ds, nc);
  for (Index env : map.env_offsets) {
    for (Index s = 0; s < ds; ++s) block.row(s) = columns.row(map.sub_offsets[s] + env);
    block = (op.mat * block).eval();
    for (Index s = 0; s < ds; ++s) columns.row(map.sub_offsets[s] + env) = block.row(s);
  }
}

StateVector apply_embedded(const Operator& op, const std::vector<std::string>& targets,
                           const StateVector& state) {
  Matrix col = state.amp;
  apply_embedded_columns(op, targets, state.space, col);
  return StateVector(state.space, col.col(0));
}

Operator embed_operator(const Operator& op, const std::vector<std::string>& targets,
                        const HilbertSpace& space) {
  const EmbedMap map = make_embed_map(space, targets, op.space);
  const Index ds = map.sub_dim;
  Matrix out = Matrix::Zero(space.total_dim(), space.total_dim());
  for (Index env : map.env_offsets)
    for (Index s = 0; s < ds; ++s)
      for (Index sp = 0; sp < ds; ++sp)
        out(map.sub_offsets[s] + env, map.sub_offsets[sp] + env) = op.mat(s, sp);
  return Operator(space, std::move(out), op.kind);
}

Operator partial_trace(const StateVector& state, const std::vector<std::string>& keep) {
  if (keep.empty()) fail("partial_trace: empty keep list");
  std::vector<Factor> kept;
  std::vector<Index> keep_pos;
  std::unordered_set<std::string> used;
  for (const auto& label : keep) {
    if (!used.insert(label).second) fail("partial_trace: duplicate keep label '" + label + "'");
    const Index pos = state.space.position(label);
    keep_pos.push_back(pos);
    kept.push_back(state.space.factor(pos));
  }
  std::vector<Index> env_pos;
  for (Index p = 0; p < state.space.num_factors(); ++p)
    if (std::find(keep_pos.begin(), keep_pos.end(), p) == keep_pos.end()) env_pos.push_back(p);

  const std::vector<Index> keep_off = expand_offsets(state.space, keep_pos);
  const std::vector<Index> env_off = expand_offsets(state.space, env_pos);
  const Index dk = static_cast<Index>(keep_off.size());

  Matrix rho = Matrix::Zero(dk, dk);
  for (Index i = 0; i < dk; ++i) {
    for (Index j = 0; j <= i; ++j) {
      Complex acc = 0.0;
      for (Index env : env_off)
        acc += state.amp[keep_off[i] + env] * std::conj(state.amp[keep_off[j] + env]);
      rho(i, j) = acc;
      rho(j, i) = std::conj(acc);
    }
  }
  return Operator(HilbertSpace(std::move(kept)), std::move(rho), OpKind::hermitian);
}

Operator hermitian_propagator(const Operator& hamiltonian, double time) {
  if (hermiticity_error(hamiltonian.mat) > kHermitianTol)
    fail("hermitian_propagator: non-Hermitian input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(hamiltonian.mat);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("hermitian_propagator: eigendecomposition failed");
  const Eigen::VectorXd& lambda = es.eigenvalues();
  Vector phases(lambda.size());
  for (Index i = 0; i < lambda.size(); ++i)
    phases[i] = std::exp(Complex(0.0, -lambda[i] * time));
  Matrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return Operator(hamiltonian.space, std::move(u), OpKind::unitary);
}

SpanBasis orthonormal_basis_of_span(const Matrix& vectors, double rel_tol) {
  if (vectors.cols() == 0) fail("orthonormal_basis_of_span: empty input");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) fail("orthonormal_basis_of_span: rel_tol outside (0,1)");
  Eigen::JacobiSVD<Matrix> svd(vectors, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = sigma.size() > 0 ? rel_tol * sigma[0] : 0.0;
  Index rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;
  SpanBasis out;
  out.rank = rank;
  out.basis = svd.matrixU().leftCols(rank);
  out.coeffs = sigma.head(rank).asDiagonal() * svd.matrixV().leftCols(rank).adjoint();
  return out;
}

SpanBasis orthonormal_basis_of_span(const std::vector<StateVector>& vectors, double rel_tol) {
  if (vectors.empty()) fail("orthonormal_basis_of_span: empty input");
  const HilbertSpace& space = vectors.front().space;
  Matrix m(space.total_dim(), static_cast<Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!(vectors[i].space == space)) fail("orthonormal_basis_of_span: vectors on different spaces");
    m.col(static_cast<Index>(i)) = vectors[i].amp;
  }
  return orthonormal_basis_of_span(m, rel_tol);
}

Matrix complete_to_unitary(const Matrix& columns) {
  const Index d = columns.rows();
  const Index k = columns.cols();
  if (k > d) fail("complete_to_unitary: more columns than dimensions");
  if (k > 0 && unitarity_error(columns) > kUnitaryTol)
    fail("complete_to_unitary: input columns not orthonormal");

  Matrix u(d, d);
  u.leftCols(k) = columns;
  Index filled = k;
  for (Index j = 0; j < d && filled < d; ++j) {
    Vector r = Vector::Zero(d);
    r[j] = 1.0;
    r -= u.leftCols(filled) * (u.leftCols(filled).adjoint() * r).eval();
    if (r.norm() <= kCompletionPivotTol) continue;
    // second projection pass for orthogonality at round-off level
    r -= u.leftCols(filled) * (u.leftCols(filled).adjoint() * r).eval();
    u.col(filled) = r / r.norm();
    ++filled;
  }
  if (filled != d) throw std::runtime_error("complete_to_unitary: completion failed");
  return u;
}

Operator complete_to_unitary(const std::vector<StateVector>& columns) {
  if (columns.empty()) fail("complete_to_unitary: empty input");
  const HilbertSpace& space = columns.front().space;
  Matrix m(space.total_dim(), static_cast<Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!(columns[i].space == space)) fail("complete_to_unitary: columns on different spaces");
    m.col(static_cast<Index>(i)) = columns[i].amp;
  }
  return Operator(space, complete_to_unitary(m), OpKind::unitary);
}

double fidelity(const StateVector& psi, const Operator& rho) {
  if (!(psi.space == rho.space)) fail("fidelity: dim mismatch");
  const Complex v = (psi.amp.adjoint() * rho.mat * psi.amp)(0);
  if (std::abs(v.imag()) > 1e-12)
    throw std::runtime_error("fidelity: imaginary residue exceeds 1e-12");
  return std::clamp(v.real(), 0.0, 1.0);
}

}  // namespace qdefrag
