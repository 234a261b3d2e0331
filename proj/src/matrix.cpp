#include "wishart_ldp/matrix.hpp"

#include "wishart_ldp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wldp {

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    fail(ErrorCode::InvalidArgument,
         "SymMatrix requires a non-empty square matrix, got " + std::to_string(m.rows()) + "x" +
             std::to_string(m.cols()));
  }
  if (!m.allFinite()) fail(ErrorCode::InvalidArgument, "SymMatrix entries must be finite");
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix::SymMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != n) {
      fail(ErrorCode::InvalidArgument, "SymMatrix initializer rows must all have length " +
                                           std::to_string(n));
    }
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  *this = SymMatrix(m);
}

SymMatrix SymMatrix::zero(int dim) { return SymMatrix(Eigen::MatrixXd::Zero(dim, dim)); }

SymMatrix SymMatrix::identity(int dim) { return SymMatrix(Eigen::MatrixXd::Identity(dim, dim)); }

SymMatrix SymMatrix::scaled_identity(int dim, double s) {
  return SymMatrix(s * Eigen::MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& d) {
  return SymMatrix(Eigen::MatrixXd(d.asDiagonal()));
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  if (o.dim() != dim()) fail(ErrorCode::InvalidArgument, "SymMatrix dimension mismatch in +");
  m_ += o.m_;
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  if (o.dim() != dim()) fail(ErrorCode::InvalidArgument, "SymMatrix dimension mismatch in -");
  m_ -= o.m_;
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  m_ *= s;
  return *this;
}

SymEigen eigen_decompose(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.matrix());
  if (es.info() != Eigen::Success) {
    fail(ErrorCode::DomainError, "symmetric eigendecomposition did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

SymMatrix spectral_apply(const SymEigen& e, const Eigen::VectorXd& mapped) {
  return SymMatrix(e.vectors * mapped.asDiagonal() * e.vectors.transpose());
}

double SpdTolerance::for_matrix(const SymMatrix& m) const { return for_norm(norms(m).op); }

const char* to_string(SpdClass cls) noexcept {
  switch (cls) {
    case SpdClass::PositiveDefinite: return "POSITIVE_DEFINITE";
    case SpdClass::PositiveSemidefinite: return "POSITIVE_SEMIDEFINITE";
    case SpdClass::Indefinite: return "INDEFINITE";
  }
  return "UNKNOWN";
}

SpdCone classify_spd(const SymMatrix& m, double tol) {
  if (tol < 0) fail(ErrorCode::InvalidArgument, "classify_spd: tolerance must be non-negative");
  const double lmin = min_eigenvalue(m);
  if (lmin > tol) return {SpdClass::PositiveDefinite, lmin};
  if (std::abs(lmin) <= tol) return {SpdClass::PositiveSemidefinite, lmin};
  return {SpdClass::Indefinite, lmin};
}

bool is_psd(const SymMatrix& m, SpdTolerance tol) {
  const SymEigen e = eigen_decompose(m);
  const double op = std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
  return e.values(0) >= -tol.for_norm(op);
}

bool is_pd(const SymMatrix& m, SpdTolerance tol) {
  const SymEigen e = eigen_decompose(m);
  const double op = std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
  return e.values(0) > tol.for_norm(op);
}

SymMatrix sqrt_spd(const SymMatrix& m, SpdTolerance tol) {
  const SymEigen e = eigen_decompose(m);
  const double op = std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
  if (e.values(0) < -tol.for_norm(op)) {
    fail(ErrorCode::IndefiniteInput,
         "sqrt_spd: minimum eigenvalue " + std::to_string(e.values(0)) + " below tolerance");
  }
  return spectral_apply(e, e.values.cwiseMax(0.0).cwiseSqrt());
}

SymMatrix solve_sylvester(const SymMatrix& a, const SymMatrix& b, SpdTolerance tol) {
  if (a.dim() != b.dim()) fail(ErrorCode::InvalidArgument, "solve_sylvester: dimension mismatch");
  const SymEigen e = eigen_decompose(a);
  const Eigen::VectorXd& d = e.values;
  const double threshold = tol.for_norm(std::max(std::abs(d(0)), std::abs(d(d.size() - 1))));
  // d is ascending, so the smallest pairwise sum is 2 d_0.
  if (2.0 * d(0) <= threshold) {
    fail(ErrorCode::SingularPencil, "solve_sylvester: A is not strictly positive definite (lambda_min = " +
                                        std::to_string(d(0)) + ")");
  }
  const Eigen::MatrixXd& v = e.vectors;
  Eigen::MatrixXd bt = v.transpose() * b.matrix() * v;
  const Eigen::Index n = bt.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) bt(i, j) /= d(i) + d(j);
  }
  return SymMatrix(v * bt * v.transpose());
}

MatrixNorms norms(const SymMatrix& m) {
  const Eigen::VectorXd abs_vals = eigen_decompose(m).values.cwiseAbs();
  return {abs_vals.sum(), abs_vals.norm(), abs_vals.maxCoeff()};
}

double min_eigenvalue(const SymMatrix& m) { return eigen_decompose(m).values(0); }

double max_eigenvalue(const SymMatrix& m) {
  const SymEigen e = eigen_decompose(m);
  return e.values(e.values.size() - 1);
}

double log_det_pd(const SymMatrix& m) {
  const SymEigen e = eigen_decompose(m);
  if (e.values(0) <= 0.0) {
    fail(ErrorCode::DomainError, "log-determinant requires a positive definite matrix (lambda_min = " +
                                     std::to_string(e.values(0)) + ")");
  }
  return e.values.array().log().sum();
}

SymMatrix inverse_pd(const SymMatrix& m) {
  const SymEigen e = eigen_decompose(m);
  if (e.values(0) <= 0.0) {
    fail(ErrorCode::DomainError, "inverse requires a positive definite matrix");
  }
  return spectral_apply(e, e.values.cwiseInverse());
}

SymMatrix conjugate(const SymMatrix& m, const Eigen::MatrixXd& q) {
  return SymMatrix(q * m.matrix() * q.transpose());
}

SymMatrix symmetric_part(const Eigen::MatrixXd& m) { return SymMatrix(m); }

}  // namespace wldp
