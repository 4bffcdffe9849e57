#include "qdefrag/defrag.hpp"

#include <stdexcept>

namespace qdefrag {

XiFamily extract_xi_family(const BasisImageMap& images) {
  const Index dv = images.dim_v;
  const Index dm = images.dim_m();

  // the V block is the leading factor run whose dims multiply to dim_v
  Index prod = 1;
  Index split = 0;
  while (split < images.space.num_factors() && prod < dv) {
    prod *= images.space.factor(split).dim;
    ++split;
  }
  if (prod != dv)
    throw std::invalid_argument("extract_xi_family: leading factors do not multiply to dim_v");
  std::vector<Factor> mem_factors(images.space.factors().begin() + split,
                                  images.space.factors().end());

  XiFamily family;
  family.dim_v = dv;
  family.memory_space = HilbertSpace(std::move(mem_factors));
  family.step = images.step_index;
  family.vectors.resize(dm, dv * dv);
  for (Index k = 0; k < dv; ++k)
    for (Index kp = 0; kp < dv; ++kp)
      family.vectors.col(k * dv + kp) = images.columns.col(k).segment(kp * dm, dm);
  return family;
}

GramMatrix gram_of_columns(const Matrix& columns) { return columns.adjoint() * columns; }

GramMatrix gram(const XiFamily& family) { return gram_of_columns(family.vectors); }

DefragResult build_defrag_unitary(const Matrix& family_columns, const MemoryLayout& layout,
                                  double rel_tol) {
  if (family_columns.rows() != layout.dim_m())
    throw std::invalid_argument("build_defrag_unitary: family does not live on M");

  const SpanBasis span = orthonormal_basis_of_span(family_columns, rel_tol);
  if (span.rank > layout.dim_m0())
    throw std::runtime_error("build_defrag_unitary: rank bound violated");

  const Matrix u_b = complete_to_unitary(span.basis);

  // target i = e_i^{M0} (x) |0>_M1, flat index i * dim_m1
  Matrix targets = Matrix::Zero(layout.dim_m(), span.rank);
  for (Index i = 0; i < span.rank; ++i) targets(i * layout.dim_m1(), i) = 1.0;
  const Matrix u_t = complete_to_unitary(targets);

  Matrix d = u_t * u_b.adjoint();
  return DefragResult{Operator(layout.space_m, std::move(d), OpKind::unitary), span.rank};
}

DefragResult build_defrag_unitary(const XiFamily& family, const MemoryLayout& layout,
                                  double rel_tol) {
  return build_defrag_unitary(family.vectors, layout, rel_tol);
}

GramReport verify_gram_preserved(const GramMatrix& before, const GramMatrix& after, double tol) {
  if (before.rows() != after.rows() || before.cols() != after.cols())
    throw std::invalid_argument("verify_gram_preserved: size mismatch");
  GramReport report;
  report.max_abs_diff = max_abs(before - after);
  report.pass = report.max_abs_diff <= tol;
  return report;
}

}  // namespace qdefrag
