#include "dynembed/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "dynembed/errors.hpp"

namespace dynembed::svd {

namespace {

using ColMatrix = Eigen::MatrixXd;

// Indices ordering `values` non-increasing, ties by index.
std::vector<Eigen::Index> descending_order(const Vector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  return order;
}

// Fills columns of `u` whose mask entry is false with unit vectors
// orthogonalized against every other column.
void complete_basis(ColMatrix& u, const std::vector<bool>& valid) {
  const Eigen::Index m = u.rows();
  Eigen::Index candidate = 0;
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    if (valid[k]) continue;
    while (true) {
      if (candidate >= m) throw std::logic_error("cannot complete orthonormal basis");
      Eigen::VectorXd e = Eigen::VectorXd::Unit(m, candidate++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
          if (j == k || (!valid[j] && j > k)) continue;
          e -= u.col(j).dot(e) * u.col(j);
        }
      }
      const double norm = e.norm();
      if (norm > 1e-6) {
        u.col(k) = e / norm;
        break;
      }
    }
  }
}

FullSvd jacobi_tall(ColMatrix w) {
  const Eigen::Index n = w.cols();
  ColMatrix v = ColMatrix::Identity(n, n);
  constexpr double kTol = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double alpha = w.col(i).squaredNorm();
        const double beta = w.col(j).squaredNorm();
        const double gamma = w.col(i).dot(w.col(j));
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (ColMatrix* m : {&w, &v}) {
          Eigen::VectorXd ci = m->col(i);
          m->col(i) = c * ci - s * m->col(j);
          m->col(j) = s * ci + c * m->col(j);
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (Eigen::Index k = 0; k < n; ++k) sigma(k) = w.col(k).norm();
  const auto order = descending_order(sigma);
  const double cutoff = (n > 0 ? sigma.maxCoeff() : 0.0) * static_cast<double>(std::max(w.rows(), n)) *
                        std::numeric_limits<double>::epsilon();
  ColMatrix u(w.rows(), n);
  ColMatrix v_sorted(n, n);
  Vector s(n);
  std::vector<bool> valid(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[k];
    s(k) = sigma(src);
    v_sorted.col(k) = v.col(src);
    valid[k] = s(k) > cutoff && s(k) > 0.0;
    if (valid[k]) {
      u.col(k) = w.col(src) / s(k);
    } else {
      u.col(k).setZero();
      s(k) = 0.0;
    }
  }
  complete_basis(u, valid);
  return {u, s, v_sorted};
}

// Orthonormal basis of the column space of x (assumed already orthogonal to
// some existing basis) and coefficients r with x = basis * r.
struct Orthogonalized {
  ColMatrix basis;
  ColMatrix coeff;
};

Orthogonalized orthogonalize(const ColMatrix& x) {
  Eigen::ColPivHouseholderQR<ColMatrix> qr(x);
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  qr.setThreshold(1e-12 * scale);
  const Eigen::Index rank = qr.rank();
  ColMatrix q = qr.householderQ() * ColMatrix::Identity(x.rows(), rank);
  ColMatrix r = qr.matrixR().topRows(rank).triangularView<Eigen::Upper>();
  ColMatrix coeff = r * qr.colsPermutation().transpose();
  return {std::move(q), std::move(coeff)};
}

}  // namespace

Matrix SvdState::reconstruction() const { return (u * s.asDiagonal()) * v.transpose(); }

FullSvd jacobi_svd(const Matrix& b) {
  if (b.rows() >= b.cols()) {
    FullSvd r = jacobi_tall(ColMatrix(b));
    return r;
  }
  FullSvd t = jacobi_tall(ColMatrix(b.transpose()));
  return {t.v, t.s, t.u};
}

double reconstruction_error(const SvdState& state, const Matrix& a) {
  Matrix residual = a;
  residual.noalias() -= (state.u * state.s.asDiagonal()) * state.v.transpose();
  return residual.norm();
}

SvdState optimal_svd(const Matrix& a, int d) {
  if (a.rows() != a.cols()) throw DimensionError("optimal_svd needs a square matrix");
  if (d < 1 || d > a.rows()) {
    throw ArgumentError("rank d=" + std::to_string(d) + " must lie in [1, " + std::to_string(a.rows()) + "]");
  }
  const Eigen::Index n = a.rows();
  SvdState state;
  state.u.resize(n, d);
  state.v.resize(n, d);
  state.s.resize(d);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0) {
    // Symmetric: singular triplets come from the eigenpairs, sigma = |lambda|.
    Eigen::SelfAdjointEigenSolver<ColMatrix> es(ColMatrix(a), Eigen::ComputeEigenvectors);
    const Vector magnitude = es.eigenvalues().cwiseAbs();
    const auto order = descending_order(magnitude);
    for (int k = 0; k < d; ++k) {
      const Eigen::Index src = order[k];
      state.s(k) = magnitude(src);
      state.u.col(k) = es.eigenvectors().col(src);
      state.v.col(k) = es.eigenvalues()(src) < 0 ? Eigen::VectorXd(-es.eigenvectors().col(src))
                                                 : Eigen::VectorXd(es.eigenvectors().col(src));
    }
  } else {
    Eigen::BDCSVD<ColMatrix> full(ColMatrix(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
    state.s = full.singularValues().head(d);
    state.u = full.matrixU().leftCols(d);
    state.v = full.matrixV().leftCols(d);
  }
  state.target = a;
  state.error_at_last_rerun = reconstruction_error(state, a);
  return state;
}

LowRankDelta delta_factors(const Matrix& before, const Matrix& after, int max_rank) {
  if (before.rows() != after.rows() || before.cols() != after.cols() || before.rows() != before.cols()) {
    throw DimensionError("delta_factors needs two square matrices of equal size");
  }
  if (max_rank < 1) throw ArgumentError("max_rank must be positive");
  const Eigen::Index n = before.rows();
  const Matrix delta = after - before;

  // Changed entries per vertex (row or column endpoint).
  std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> touching(static_cast<std::size_t>(n));
  std::size_t changed = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (delta(i, j) == 0.0) continue;
      ++changed;
      touching[i].emplace_back(i, j);
      if (j != i) touching[j].emplace_back(i, j);
    }
  }
  if (changed == 0) return {Matrix(n, 0), Matrix(n, 0)};

  // Greedy vertex cover: repeatedly take the vertex touching the most
  // uncovered entries.
  std::vector<char> in_cover(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> degree(static_cast<std::size_t>(n));
  for (Eigen::Index v = 0; v < n; ++v) degree[v] = touching[v].size();
  std::vector<Eigen::Index> cover;
  while (true) {
    const auto best = std::max_element(degree.begin(), degree.end());
    if (*best == 0) break;
    const auto v = static_cast<Eigen::Index>(best - degree.begin());
    in_cover[v] = 1;
    cover.push_back(v);
    for (auto [i, j] : touching[v]) {
      const Eigen::Index other = i == v ? j : i;
      if (other != v && !in_cover[other] && degree[other] > 0) --degree[other];
    }
    degree[v] = 0;
  }
  std::sort(cover.begin(), cover.end());

  // delta = E_S delta[S,:] + (delta[:,S] - E_S delta[S,S]) E_S^T
  const auto k = static_cast<Eigen::Index>(cover.size());
  Matrix p = Matrix::Zero(n, 2 * k);
  Matrix q = Matrix::Zero(n, 2 * k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index s = cover[c];
    p(s, c) = 1.0;
    q.col(c) = delta.row(s).transpose();
    p.col(k + c) = delta.col(s);
    for (Eigen::Index s2 : cover) p(s2, k + c) = 0.0;
    q(s, k + c) = 1.0;
  }
  if (2 * k <= max_rank) return {std::move(p), std::move(q)};

  const Orthogonalized op = orthogonalize(ColMatrix(p));
  const Orthogonalized oq = orthogonalize(ColMatrix(q));
  const FullSvd core = jacobi_svd(Matrix(op.coeff * oq.coeff.transpose()));
  const Eigen::Index keep = std::min<Eigen::Index>(max_rank, core.s.size());
  LowRankDelta out;
  out.p = op.basis * core.u.leftCols(keep) * core.s.head(keep).asDiagonal();
  out.q = oq.basis * core.v.leftCols(keep);
  return out;
}

SvdState inc_svd_update(const SvdState& state, const Matrix& p, const Matrix& q) {
  const Eigen::Index n = state.u.rows();
  if (p.rows() != n || q.rows() != n || p.cols() != q.cols()) {
    throw DimensionError("delta factors must both be " + std::to_string(n) + " x r");
  }
  if (p.cols() > kMaxDeltaRank) {
    throw ArgumentError("delta rank " + std::to_string(p.cols()) + " exceeds the cap of " +
                        std::to_string(kMaxDeltaRank));
  }
  if (p.cols() == 0) return state;

  const int d = state.rank();
  const ColMatrix u = state.u;
  const ColMatrix v = state.v;
  auto split = [](const ColMatrix& basis, const ColMatrix& x) {
    ColMatrix inside = basis.transpose() * x;
    ColMatrix rest = x - basis * inside;
    const ColMatrix again = basis.transpose() * rest;  // second Gram-Schmidt pass
    rest -= basis * again;
    inside += again;
    return std::pair{inside, orthogonalize(rest)};
  };
  auto [m, pa] = split(u, ColMatrix(p));
  auto [nq, qa] = split(v, ColMatrix(q));

  const Eigen::Index ra = pa.basis.cols(), rb = qa.basis.cols();
  ColMatrix left(d + ra, p.cols());
  left << m, pa.coeff;
  ColMatrix right(d + rb, q.cols());
  right << nq, qa.coeff;
  ColMatrix core = left * right.transpose();
  core.topLeftCorner(d, d).diagonal() += state.s;

  const FullSvd k = jacobi_svd(Matrix(core));
  ColMatrix ubasis(n, d + ra);
  ubasis << u, pa.basis;
  ColMatrix vbasis(n, d + rb);
  vbasis << v, qa.basis;

  SvdState next = state;
  next.u = ubasis * k.u.leftCols(d);
  next.v = vbasis * k.v.leftCols(d);
  next.s = k.s.head(d);
  next.target.noalias() += p * q.transpose();
  return next;
}

SvdState inc_svd_update(const SvdState& state, const Matrix& new_target) {
  if (new_target.rows() != state.target.rows() || new_target.cols() != state.target.cols()) {
    throw DimensionError("new target shape differs from the tracked matrix");
  }
  const LowRankDelta delta = delta_factors(state.target, new_target);
  SvdState next = inc_svd_update(state, delta.p, delta.q);
  next.target = new_target;
  return next;
}

SvdState rerun_svd_step(const SvdState& state, const Matrix& a_t, double theta) {
  if (!(theta >= 0.0)) throw ArgumentError("theta must be non-negative");
  SvdState next = inc_svd_update(state, a_t);
  const double error = reconstruction_error(next, a_t);
  if (error > (1.0 + theta) * state.error_at_last_rerun) {
    SvdState fresh = optimal_svd(a_t, state.rank());
    fresh.rerun_count = state.rerun_count + 1;
    return fresh;
  }
  ++next.steps_since_rerun;
  return next;
}

Matrix svd_scores(const SvdState& state) {
  const Matrix r = state.reconstruction();
  Matrix scores = 0.5 * (r + r.transpose());
  scores.diagonal().setZero();
  return scores;
}

}  // namespace dynembed::svd
