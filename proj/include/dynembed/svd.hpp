#pragma once

#include "dynembed/linalg.hpp"

namespace dynembed::svd {

// Truncated factorization U diag(S) V^T tracking a target matrix.
struct SvdState {
  Matrix u;  // n x d, orthonormal columns
  Vector s;  // d singular values, non-increasing
  Matrix v;  // n x d, orthonormal columns
  // The matrix the factorization currently approximates.
  Matrix target;
  double error_at_last_rerun = 0.0;
  int steps_since_rerun = 0;
  int rerun_count = 0;

  int rank() const { return static_cast<int>(s.size()); }
  Matrix reconstruction() const;
};

// Full decomposition B = U diag(S) V^T by one-sided (Hestenes) Jacobi
// rotations, singular values sorted non-increasing. For small matrices.
struct FullSvd {
  Matrix u;
  Vector s;
  Matrix v;
};
FullSvd jacobi_svd(const Matrix& b);

// Frobenius norm of a - U S V^T.
double reconstruction_error(const SvdState& state, const Matrix& a);

// Best rank-d approximation of a square matrix.
SvdState optimal_svd(const Matrix& a, int d);

inline constexpr int kMaxDeltaRank = 64;

// Low-rank factors with delta = P Q^T.
struct LowRankDelta {
  Matrix p;
  Matrix q;
  int rank() const { return static_cast<int>(p.cols()); }
};

// Factors of after - before. Changed entries are grouped by a greedy vertex
// cover of the rows/columns they touch; factors wider than max_rank are
// replaced by the best rank-max_rank approximation of the delta.
LowRankDelta delta_factors(const Matrix& before, const Matrix& after, int max_rank = kMaxDeltaRank);

// Additive update of the factorization by P Q^T: the column spaces are
// extended with the orthogonal parts of P and Q, the small core is
// re-diagonalized and the result truncated back to the current rank.
// Throws ArgumentError when the factors are wider than kMaxDeltaRank.
SvdState inc_svd_update(const SvdState& state, const Matrix& p, const Matrix& q);
// Update towards a new target matrix.
SvdState inc_svd_update(const SvdState& state, const Matrix& new_target);

// Incremental update towards a_t, recomputing the optimal factorization when
// the error exceeds (1 + theta) times the error recorded at the last
// recomputation. theta may be infinite.
SvdState rerun_svd_step(const SvdState& state, const Matrix& a_t, double theta);

// U diag(S) V^T symmetrized, with a zero diagonal.
Matrix svd_scores(const SvdState& state);

}  // namespace dynembed::svd
