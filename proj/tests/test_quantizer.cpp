#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qopt/errors.hpp"
#include "qopt/quantizer.hpp"
#include "qopt/rng.hpp"

using namespace qopt;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

// Independent decoder: exhaustive scan over congruent integers in a wide
// window around the reference. The implementation must match this exactly.
Eigen::VectorXd brute_force_decode(const EncodedBlob& blob,
                                   const Eigen::VectorXd& x_ref) {
  const QuantSpec& spec = blob.spec;
  if (spec.zero_rate()) return x_ref;
  Eigen::VectorXd out(spec.d);
  for (int j = 0; j < spec.d; ++j) {
    std::int64_t best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    auto center = static_cast<std::int64_t>(
        std::floor(x_ref[j] / (spec.cell * static_cast<double>(spec.modulus))));
    for (std::int64_t p = center - 4; p <= center + 4; ++p) {
      std::int64_t k = blob.colors[static_cast<std::size_t>(j)] +
                       p * spec.modulus;
      double dist = std::abs(static_cast<double>(k) * spec.cell - x_ref[j]);
      if (dist < best) {
        best = dist;
        best_k = k;
      }
    }
    out[j] = static_cast<double>(best_k) * spec.cell;
  }
  return out;
}

}  // namespace

TEST_SUITE("quantizer") {

TEST_CASE("make_spec worked examples") {
  QuantSpec s = make_spec(1, 4.0, 0.5);
  CHECK(s.cell == 1.0);
  CHECK(s.modulus == 10);  // floor(1*4.5/0.5)+1
  CHECK(s.bits_per_coord == 4);

  QuantSpec z = make_spec(1, 0.25, 0.5);
  CHECK(z.bits_per_coord == 0);
  CHECK(z.modulus == 1);
  CHECK(z.zero_rate());

  QuantSpec q = make_spec(4, 2.0, 1.0);
  CHECK(q.cell == 1.0);   // 2*1/sqrt(4)
  CHECK(q.modulus == 7);  // floor(2*3/1)+1
  CHECK(q.bits_per_coord == 3);
}

TEST_CASE("make_spec rejects bad input") {
  CHECK_THROWS_AS(make_spec(0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(3, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(3, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_spec(3, -0.5, 1.0), std::invalid_argument);
}

TEST_CASE("spec invariants on random draws") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    int d = 1 + static_cast<int>(rng.below(64));
    double eps = std::exp(rng.gaussian());
    double y = eps * std::exp(std::abs(rng.gaussian()) * 3.0);
    QuantSpec s = make_spec(d, y, eps);
    CHECK(s.cell == 2.0 * eps / std::sqrt(static_cast<double>(d)));
    if (y > eps) {
      // decoding-uniqueness margin
      CHECK(static_cast<double>(s.modulus) * s.cell > 2.0 * (y + eps));
      CHECK((std::int64_t{1} << s.bits_per_coord) >= s.modulus);
      if (s.bits_per_coord > 0) {
        CHECK((std::int64_t{1} << (s.bits_per_coord - 1)) < s.modulus);
      }
    }
  }
}

TEST_CASE("encode worked examples") {
  QuantSpec s = make_spec(1, 4.0, 0.5);
  CHECK(encode(vec({1.3}), s).colors == std::vector<std::int64_t>{1});
  CHECK(encode(vec({-9.0}), s).colors == std::vector<std::int64_t>{1});

  QuantSpec q = make_spec(4, 2.0, 1.0);
  CHECK(encode(vec({0, 0, 0, 0}), q).colors ==
        std::vector<std::int64_t>({0, 0, 0, 0}));
}

TEST_CASE("encode rounds half to even") {
  QuantSpec s = make_spec(1, 100.0, 0.5);  // cell = 1
  CHECK(encode(vec({1.5}), s).colors[0] == encode(vec({2.0}), s).colors[0]);
  CHECK(encode(vec({2.5}), s).colors[0] == encode(vec({2.0}), s).colors[0]);
  CHECK(encode(vec({-1.5}), s).colors[0] == encode(vec({-2.0}), s).colors[0]);
}

TEST_CASE("encode is deterministic") {
  Rng rng(5);
  Eigen::VectorXd x(8);
  for (int j = 0; j < 8; ++j) x[j] = rng.gaussian() * 10;
  QuantSpec s = make_spec(8, 50.0, 0.25);
  EncodedBlob a = encode(x, s);
  EncodedBlob b = encode(x, s);
  CHECK(a.colors == b.colors);
}

TEST_CASE("decode worked examples") {
  QuantSpec s = make_spec(1, 4.0, 0.5);
  EncodedBlob blob = encode(vec({1.3}), s);
  Eigen::VectorXd out = decode(blob, vec({0.0}));
  CHECK(out[0] == 1.0);
  CHECK(std::abs(out[0] - 1.3) <= 0.5);

  // lattice points recover exactly against themselves
  Eigen::VectorXd lattice = vec({3.0, -2.0, 0.0, 7.0});
  QuantSpec q = make_spec(4, 2.0, 1.0);  // cell = 1
  CHECK(same(decode(encode(lattice, q), lattice), lattice));

  // per-coordinate worked example, l2 error sqrt(0.61)
  Eigen::VectorXd x = vec({0.4, -0.6, 1.5, 2.2});
  Eigen::VectorXd ref = vec({0.0, 0.0, 0.0, 0.0});
  Eigen::VectorXd dec = decode(encode(x, q), ref);
  CHECK(same(dec, vec({0.0, -1.0, 2.0, 2.0})));
  CHECK((dec - x).squaredNorm() == doctest::Approx(0.61).epsilon(1e-12));
  CHECK((dec - x).norm() <= 1.0);
}

TEST_CASE("decode matches the exhaustive oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    int d = 1 + static_cast<int>(rng.below(6));
    double eps = 0.05 + rng.uniform();
    double y = eps * (1.1 + 30.0 * rng.uniform());
    QuantSpec s = make_spec(d, y, eps);
    Eigen::VectorXd ref(d);
    for (int j = 0; j < d; ++j) ref[j] = 20.0 * rng.gaussian();
    Eigen::VectorXd x = ref;
    double scale = rng.uniform() * y;
    Eigen::VectorXd dir(d);
    for (int j = 0; j < d; ++j) dir[j] = rng.gaussian();
    if (dir.norm() > 0) x += dir / dir.norm() * scale;
    EncodedBlob blob = encode(x, s);
    Eigen::VectorXd got = decode(blob, ref);
    Eigen::VectorXd want = brute_force_decode(blob, ref);
    CHECK(same(got, want));
  }
}

TEST_CASE("quantization contract on random draws") {
  Rng rng(23);
  for (int d : {1, 2, 8, 64}) {
    for (int trial = 0; trial < 500; ++trial) {
      double eps = std::exp(rng.gaussian() * 0.8);
      double y = eps * std::exp(rng.uniform() * 6.0);
      Eigen::VectorXd ref(d);
      for (int j = 0; j < d; ++j) ref[j] = 30.0 * rng.gaussian();
      Eigen::VectorXd dir(d);
      for (int j = 0; j < d; ++j) dir[j] = rng.gaussian();
      Eigen::VectorXd x = ref;
      if (dir.norm() > 0) x += dir / dir.norm() * (rng.uniform() * y);
      QuantResult q = quantize(x, ref, y, eps);
      CHECK((q.value - x).norm() <= eps);
    }
  }
}

TEST_CASE("decode-uniqueness over small exhaustive grids") {
  for (int d : {1, 2}) {
    for (double y : {1.5, 3.0, 7.25}) {
      double eps = 0.5;
      QuantSpec s = make_spec(d, y, eps);
      Eigen::VectorXd ref(d);
      for (int j = 0; j < d; ++j) ref[j] = j == 0 ? 0.3 : -1.7;
      // every lattice point within the inf-norm ball of radius y + eps
      auto reach = static_cast<std::int64_t>(std::floor((y + eps) / s.cell));
      std::vector<std::int64_t> ks(static_cast<std::size_t>(d), -reach);
      bool done = false;
      while (!done) {
        Eigen::VectorXd q(d);
        for (int j = 0; j < d; ++j) {
          auto base =
              static_cast<std::int64_t>(std::nearbyint(ref[j] / s.cell));
          q[j] = static_cast<double>(base + ks[static_cast<std::size_t>(j)]) *
                 s.cell;
        }
        Eigen::VectorXd dec = decode(encode(q, s), ref);
        CHECK(same(dec, q));
        int j = 0;
        while (j < d && ++ks[static_cast<std::size_t>(j)] > reach) {
          ks[static_cast<std::size_t>(j)] = -reach;
          ++j;
        }
        done = j == d;
      }
    }
  }
}

TEST_CASE("payload bit formula and monotonicity") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    int d = 1 + static_cast<int>(rng.below(32));
    double eps = 0.01 + rng.uniform();
    double y = eps * (1.0 + 40.0 * rng.uniform());
    if (y <= eps) continue;
    QuantSpec s = make_spec(d, y, eps);
    double m =
        std::floor(std::sqrt(static_cast<double>(d)) * (y + eps) / eps) + 1;
    std::int64_t per_coord = 0;
    while ((std::int64_t{1} << per_coord) < static_cast<std::int64_t>(m)) {
      ++per_coord;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    CHECK(encode(x, s).payload_bits() == d * per_coord);
    // nondecreasing in y at fixed eps
    QuantSpec wider = make_spec(d, 2.0 * y, eps);
    CHECK(wider.bits_per_coord >= s.bits_per_coord);
  }
}

TEST_CASE("pack layout is little-endian per coordinate") {
  QuantSpec s = make_spec(4, 2.0, 1.0);  // 3 bits per coordinate
  EncodedBlob blob;
  blob.spec = s;
  blob.colors = {0, 6, 2, 2};
  // bit stream: 000 011 010 010 (LSB first per color) -> bytes 0xB0, 0x04
  std::vector<std::uint8_t> bytes = blob.pack();
  CHECK(bytes == std::vector<std::uint8_t>({0xB0, 0x04}));
  CHECK(blob.payload_bits() == 12);

  EncodedBlob back = EncodedBlob::unpack(bytes, s);
  CHECK(back.colors == blob.colors);
}

TEST_CASE("pack/unpack round-trips") {
  Rng rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    int d = 1 + static_cast<int>(rng.below(20));
    double eps = 0.1 + rng.uniform();
    double y = eps * (1.5 + 100.0 * rng.uniform());
    QuantSpec s = make_spec(d, y, eps);
    EncodedBlob blob;
    blob.spec = s;
    blob.colors.resize(static_cast<std::size_t>(d));
    for (auto& c : blob.colors) {
      c = static_cast<std::int64_t>(
          rng.below(static_cast<std::uint64_t>(s.modulus)));
    }
    std::vector<std::uint8_t> bytes = blob.pack();
    CHECK(static_cast<std::int64_t>(bytes.size()) ==
          (blob.payload_bits() + 7) / 8);
    CHECK(EncodedBlob::unpack(bytes, s).colors == blob.colors);
  }
}

TEST_CASE("quantize convenience paths") {
  // reference equals input: error within eps for any y, eps
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = 5.0 * rng.gaussian();
    QuantResult q = quantize(x, x, 2.0, 0.3);
    CHECK((q.value - x).norm() <= 0.3);
  }

  QuantResult q = quantize(vec({1.3}), vec({0.0}), 4.0, 0.5);
  CHECK(q.value[0] == 1.0);
  CHECK(q.payload_bits == 4);

  // y <= eps: zero bits, decoder answers with the reference
  QuantResult z = quantize(vec({0.1, 0.2}), vec({0.0, 0.0}), 0.25, 0.5);
  CHECK(z.payload_bits == 0);
  CHECK(same(z.value, vec({0.0, 0.0})));
}

TEST_CASE("contract violation is reported when checked") {
  CHECK_THROWS_AS(quantize(vec({10.0}), vec({0.0}), 1.0, 0.5, true),
                  invariant_violation);
  // unchecked call silently returns some lattice point
  CHECK_NOTHROW(quantize(vec({10.0}), vec({0.0}), 1.0, 0.5, false));
}

}  // TEST_SUITE
