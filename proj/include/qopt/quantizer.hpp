#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace qopt {

// Geometry of one quantization call on d-dimensional vectors. The code is a
// cubic lattice with spacing cell = 2*eps/sqrt(d), so a nearest-point round
// costs at most eps in l2, and a mod-`modulus` coloring of the integer grid
// per coordinate. `modulus` is the smallest integer that makes decoding
// unambiguous inside the ball of radius y + eps around any reference point.
struct QuantSpec {
  int d = 0;
  double y = 0.0;    // bound on ||x - x_ref||_2 accepted by decode
  double eps = 0.0;  // bound on ||decoded - x||_2 guaranteed by decode
  double cell = 0.0;
  std::int64_t modulus = 1;
  int bits_per_coord = 0;

  // y <= eps: nothing is transmitted, the decoder answers with its reference.
  bool zero_rate() const { return bits_per_coord == 0; }
};

QuantSpec make_spec(int d, double y, double eps);

// One encoded vector: the per-coordinate lattice colors. Colors pack
// little-endian at bits_per_coord bits each, coordinate 0 first, no header.
struct EncodedBlob {
  QuantSpec spec;
  std::vector<std::int64_t> colors;

  std::int64_t payload_bits() const {
    return static_cast<std::int64_t>(spec.d) * spec.bits_per_coord;
  }
  std::vector<std::uint8_t> pack() const;
  static EncodedBlob unpack(const std::vector<std::uint8_t>& bytes,
                            const QuantSpec& spec);
};

// Pure and deterministic; round-half-to-even on the scaled coordinates.
EncodedBlob encode(const Eigen::VectorXd& x, const QuantSpec& spec);

// Returns the lattice point congruent to the colors that lies closest to
// x_ref (ties toward the smaller integer). Exact recovery of the encoder's
// lattice point whenever ||x - x_ref|| <= y held at encode time.
Eigen::VectorXd decode(const EncodedBlob& blob, const Eigen::VectorXd& x_ref);

struct QuantResult {
  Eigen::VectorXd value;
  std::int64_t payload_bits = 0;
};

// Q(x, x_ref, y, eps) = decode(encode(x), x_ref). With check_contract set,
// throws invariant_violation when ||x - x_ref||_2 > y instead of silently
// returning a wrong lattice point.
QuantResult quantize(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                     double y, double eps, bool check_contract = true);

}  // namespace qopt
