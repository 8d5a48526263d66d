#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace qopt {

// Dense symmetric matrix. Construction symmetrizes, so entries(i,j) ==
// entries(j,i) holds exactly afterwards.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& a);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& mat() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }

 private:
  Eigen::MatrixXd entries_;
};

// Upper triangle of a symmetric matrix written row-major as a vector of
// length d(d+1)/2: (p11, ..., p1d, p22, ..., p2d, ..., pdd).
struct PackedSym {
  int dim = 0;
  Eigen::VectorXd data;
};

PackedSym phi(const SymMatrix& p);
SymMatrix phi_inv(const PackedSym& v);

inline std::int64_t packed_len(int d) {
  return static_cast<std::int64_t>(d) * (d + 1) / 2;
}

// max |eigenvalue|, by full symmetric eigendecomposition
double spectral_norm(const SymMatrix& p);
double spectral_norm(const Eigen::MatrixXd& p);

double frobenius_norm(const SymMatrix& p);

struct SymQuantResult {
  SymMatrix value;
  std::int64_t payload_bits = 0;
};

// Quantize through the packed representation: phi_inv(Q(phi(p), phi(p_ref),
// y_packed, eps_packed)). The packed l2 error bound eps_packed gives a
// spectral-norm error of at most sqrt(2)*eps_packed on the reconstruction.
SymQuantResult quantize_sym(const SymMatrix& p, const SymMatrix& p_ref,
                            double y_packed, double eps_packed,
                            bool check_contract = true);

}  // namespace qopt
