#pragma once

// Dense symmetric-matrix kernels. Every spectral quantity in the library
// (square roots, norms, the Sylvester solve) goes through one symmetric
// eigendecomposition; dimensions are small, so robustness wins over speed.

#include <Eigen/Dense>

#include <initializer_list>

namespace wldp {

// Real symmetric m x m matrix. Construction symmetrizes via (M + M^T)/2, so
// the stored entries are exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() : m_(Eigen::MatrixXd::Zero(1, 1)) {}
  explicit SymMatrix(const Eigen::MatrixXd& m);
  SymMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static SymMatrix zero(int dim);
  static SymMatrix identity(int dim);
  static SymMatrix scaled_identity(int dim, double s);
  static SymMatrix diagonal(const Eigen::VectorXd& d);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  double trace() const { return m_.trace(); }

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s);

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator-(SymMatrix a) { return a *= -1.0; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  Eigen::MatrixXd m_;
};

// Eigenvalues ascending, eigenvectors as columns: M = V diag(values) V^T.
struct SymEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

SymEigen eigen_decompose(const SymMatrix& m);

// Rebuilds V f(D) V^T from a decomposition.
SymMatrix spectral_apply(const SymEigen& e, const Eigen::VectorXd& mapped);

// Positive-definiteness threshold: abs + rel * ||M||_op.
struct SpdTolerance {
  double abs = 1e-12;
  double rel = 1e-10;

  double for_matrix(const SymMatrix& m) const;
  double for_norm(double op_norm) const { return abs + rel * op_norm; }
};

enum class SpdClass { PositiveDefinite, PositiveSemidefinite, Indefinite };

struct SpdCone {
  SpdClass cls;
  double min_eigenvalue;
};

const char* to_string(SpdClass cls) noexcept;

// PD iff lambda_min > tol, PSD iff |lambda_min| <= tol, otherwise indefinite.
SpdCone classify_spd(const SymMatrix& m, double tol);

bool is_psd(const SymMatrix& m, SpdTolerance tol = {});
bool is_pd(const SymMatrix& m, SpdTolerance tol = {});

// Principal square root. Negative eigenvalues within tolerance are clamped to
// zero here and only here; anything below -tol is IndefiniteInput.
SymMatrix sqrt_spd(const SymMatrix& m, SpdTolerance tol = {});

// Unique symmetric X with A X + X A = B for A strictly positive definite.
// Throws SingularPencil when some d_i + d_j <= tol.
SymMatrix solve_sylvester(const SymMatrix& a, const SymMatrix& b, SpdTolerance tol = {});

struct MatrixNorms {
  double trace_norm;  // sum |lambda_i|
  double frobenius;   // (sum lambda_i^2)^(1/2)
  double op;          // max |lambda_i|
};

MatrixNorms norms(const SymMatrix& m);

double min_eigenvalue(const SymMatrix& m);
double max_eigenvalue(const SymMatrix& m);

// ln det for positive definite input; DomainError otherwise.
double log_det_pd(const SymMatrix& m);
SymMatrix inverse_pd(const SymMatrix& m);

// Q M Q^T.
SymMatrix conjugate(const SymMatrix& m, const Eigen::MatrixXd& q);

// Symmetric part of an arbitrary square matrix (used for products such as
// k * phi * k whose exact symmetry is lost to rounding).
SymMatrix symmetric_part(const Eigen::MatrixXd& m);

}  // namespace wldp
