#include "qopt/sym_codec.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qopt/errors.hpp"
#include "qopt/quantizer.hpp"

namespace qopt {

SymMatrix::SymMatrix(const Eigen::MatrixXd& a) {
  require_input(a.rows() == a.cols(), "SymMatrix: matrix must be square");
  entries_ = 0.5 * (a + a.transpose());
}

PackedSym phi(const SymMatrix& p) {
  int d = p.dim();
  PackedSym out;
  out.dim = d;
  out.data.resize(packed_len(d));
  std::int64_t pos = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      out.data[pos++] = p(i, j);
    }
  }
  return out;
}

SymMatrix phi_inv(const PackedSym& v) {
  require_input(v.dim >= 1, "phi_inv: dimension must be >= 1");
  require_input(v.data.size() == packed_len(v.dim),
                "phi_inv: packed length does not match dimension");
  Eigen::MatrixXd a(v.dim, v.dim);
  std::int64_t pos = 0;
  for (int i = 0; i < v.dim; ++i) {
    for (int j = i; j < v.dim; ++j) {
      a(i, j) = v.data[pos];
      a(j, i) = v.data[pos];
      ++pos;
    }
  }
  return SymMatrix(a);
}

double spectral_norm(const Eigen::MatrixXd& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p,
                                                    Eigen::EigenvaluesOnly);
  require_input(es.info() == Eigen::Success,
                "spectral_norm: eigendecomposition failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const SymMatrix& p) { return spectral_norm(p.mat()); }

double frobenius_norm(const SymMatrix& p) { return p.mat().norm(); }

SymQuantResult quantize_sym(const SymMatrix& p, const SymMatrix& p_ref,
                            double y_packed, double eps_packed,
                            bool check_contract) {
  require_input(p.dim() == p_ref.dim(), "quantize_sym: dimension mismatch");
  PackedSym vp = phi(p);
  PackedSym vr = phi(p_ref);
  QuantResult q =
      quantize(vp.data, vr.data, y_packed, eps_packed, check_contract);
  PackedSym out;
  out.dim = p.dim();
  out.data = std::move(q.value);
  return SymQuantResult{phi_inv(out), q.payload_bits};
}

}  // namespace qopt
