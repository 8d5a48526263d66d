#include "qopt/quantizer.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "qopt/errors.hpp"

namespace qopt {

namespace {

constexpr std::int64_t kMaxModulus = std::int64_t{1} << 62;

// round-half-to-even; relies on the default FE_TONEAREST mode, which this
// library never changes
double round_even(double v) { return std::nearbyint(v); }

}  // namespace

QuantSpec make_spec(int d, double y, double eps) {
  require_input(d >= 1, "make_spec: dimension must be >= 1");
  require_input(std::isfinite(eps) && eps > 0.0,
                "make_spec: eps must be positive and finite");
  require_input(std::isfinite(y) && y >= 0.0,
                "make_spec: y must be nonnegative and finite");

  QuantSpec spec;
  spec.d = d;
  spec.y = y;
  spec.eps = eps;
  spec.cell = 2.0 * eps / std::sqrt(static_cast<double>(d));
  if (y <= eps) {
    spec.modulus = 1;
    spec.bits_per_coord = 0;
    return spec;
  }
  double q = std::floor(std::sqrt(static_cast<double>(d)) * (y + eps) / eps);
  require_input(q < static_cast<double>(kMaxModulus),
                "make_spec: y/eps ratio too large to represent");
  spec.modulus = static_cast<std::int64_t>(q) + 1;
  spec.bits_per_coord = static_cast<int>(
      std::bit_width(static_cast<std::uint64_t>(spec.modulus - 1)));
  return spec;
}

std::vector<std::uint8_t> EncodedBlob::pack() const {
  std::int64_t nbits = payload_bits();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>((nbits + 7) / 8), 0);
  std::int64_t pos = 0;
  for (std::int64_t c : colors) {
    for (int b = 0; b < spec.bits_per_coord; ++b, ++pos) {
      if ((c >> b) & 1) {
        bytes[static_cast<std::size_t>(pos >> 3)] |=
            static_cast<std::uint8_t>(1u << (pos & 7));
      }
    }
  }
  return bytes;
}

EncodedBlob EncodedBlob::unpack(const std::vector<std::uint8_t>& bytes,
                                const QuantSpec& spec) {
  EncodedBlob blob;
  blob.spec = spec;
  if (spec.zero_rate()) return blob;
  std::int64_t nbits =
      static_cast<std::int64_t>(spec.d) * spec.bits_per_coord;
  require_input(static_cast<std::int64_t>(bytes.size()) == (nbits + 7) / 8,
                "unpack: byte length does not match spec");
  blob.colors.resize(static_cast<std::size_t>(spec.d));
  std::int64_t pos = 0;
  for (int j = 0; j < spec.d; ++j) {
    std::int64_t c = 0;
    for (int b = 0; b < spec.bits_per_coord; ++b, ++pos) {
      if ((bytes[static_cast<std::size_t>(pos >> 3)] >> (pos & 7)) & 1) {
        c |= std::int64_t{1} << b;
      }
    }
    require_input(c < spec.modulus, "unpack: color out of range");
    blob.colors[static_cast<std::size_t>(j)] = c;
  }
  return blob;
}

EncodedBlob encode(const Eigen::VectorXd& x, const QuantSpec& spec) {
  require_input(x.size() == spec.d, "encode: dimension mismatch");
  EncodedBlob blob;
  blob.spec = spec;
  if (spec.zero_rate()) return blob;
  blob.colors.resize(static_cast<std::size_t>(spec.d));
  for (int j = 0; j < spec.d; ++j) {
    double scaled = x[j] / spec.cell;
    require_input(std::abs(scaled) < 9.0e15,
                  "encode: coordinate too large for the lattice scale");
    auto k = static_cast<std::int64_t>(round_even(scaled));
    std::int64_t c = k % spec.modulus;
    if (c < 0) c += spec.modulus;
    blob.colors[static_cast<std::size_t>(j)] = c;
  }
  return blob;
}

Eigen::VectorXd decode(const EncodedBlob& blob, const Eigen::VectorXd& x_ref) {
  const QuantSpec& spec = blob.spec;
  require_input(x_ref.size() == spec.d, "decode: dimension mismatch");
  if (spec.zero_rate()) return x_ref;
  require_input(static_cast<int>(blob.colors.size()) == spec.d,
                "decode: malformed blob");
  Eigen::VectorXd out(spec.d);
  const double m = static_cast<double>(spec.modulus);
  for (int j = 0; j < spec.d; ++j) {
    std::int64_t color = blob.colors[static_cast<std::size_t>(j)];
    // candidates are color + p*modulus; the minimizer is adjacent to the
    // real-valued solution, scan a small window in increasing order so that
    // ties resolve toward the smaller integer
    double p_real = (x_ref[j] / spec.cell - static_cast<double>(color)) / m;
    auto p0 = static_cast<std::int64_t>(std::floor(p_real));
    std::int64_t best_k = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::int64_t p = p0 - 1; p <= p0 + 2; ++p) {
      std::int64_t k = color + p * spec.modulus;
      double dist = std::abs(static_cast<double>(k) * spec.cell - x_ref[j]);
      if (dist < best_dist) {
        best_dist = dist;
        best_k = k;
      }
    }
    out[j] = static_cast<double>(best_k) * spec.cell;
  }
  return out;
}

QuantResult quantize(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                     double y, double eps, bool check_contract) {
  require_input(x.size() == x_ref.size(), "quantize: dimension mismatch");
  if (check_contract) {
    double dist = (x - x_ref).norm();
    require(dist <= y, "quantize: input distance ||x - x_ref|| = " +
                           std::to_string(dist) +
                           " exceeds bound y = " + std::to_string(y));
  }
  QuantSpec spec = make_spec(static_cast<int>(x.size()), y, eps);
  EncodedBlob blob = encode(x, spec);
  return QuantResult{decode(blob, x_ref), blob.payload_bits()};
}

}  // namespace qopt
