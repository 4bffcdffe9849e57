#pragma once

#include "qdefrag/core.hpp"
#include "qdefrag/model.hpp"
#include "qdefrag/protocol.hpp"

namespace qdefrag {

/// The (dim V)^2 unnormalized memory vectors v_{kk'} of the step-l image
/// decomposition: image column k = sum_{k'} |k'>_V (x) v_{kk'}. Column
/// (k, k') of `vectors` sits at flat index k * dim_v + k'. For unitary
/// images, sum_{k'} ||v_{kk'}||^2 = 1 for every k.
struct XiFamily {
  Index dim_v = 0;
  HilbertSpace memory_space;  ///< trailing factors of the image space
  Matrix vectors;             ///< dim_m x dim_v^2
  int step = 0;
};

/// All pairwise inner products <v_{k''k'''}, v_{kk'}>; Hermitian and PSD.
using GramMatrix = Matrix;

/// Reads the memory blocks out of the image columns. Reassembling
/// sum_{k'} |k'> (x) v_{kk'} reproduces column k exactly.
XiFamily extract_xi_family(const BasisImageMap& images);

GramMatrix gram(const XiFamily& family);
GramMatrix gram_of_columns(const Matrix& columns);

struct DefragResult {
  Operator unitary;  ///< on M = M0 (x) M1
  Index rank = 0;    ///< rank of the family span
};

/// The Gram-preserving compression: a unitary D on M mapping every family
/// vector into M0 (x) |0>_M1 with all mutual scalar products preserved.
///
/// Construction: (i) orthonormal basis B of span{v_{kk'}}; (ii) targets
/// T_i = e_i^{M0} (x) |0>_M1 for the first rank canonical indices;
/// (iii) D = U_T U_B^dagger with U_B, U_T the deterministic completions of
/// B and T to full unitaries. Throws "rank bound violated" if the span rank
/// exceeds dim M0 (impossible unless the family indexing is broken).
DefragResult build_defrag_unitary(const XiFamily& family, const MemoryLayout& layout,
                                  double rel_tol);
DefragResult build_defrag_unitary(const Matrix& family_columns, const MemoryLayout& layout,
                                  double rel_tol);

struct GramReport {
  double max_abs_diff = 0.0;
  bool pass = false;  ///< max_abs_diff <= tol (inclusive)
};

GramReport verify_gram_preserved(const GramMatrix& before, const GramMatrix& after, double tol);

}  // namespace qdefrag
