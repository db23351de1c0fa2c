#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tineuvox/encoding.hpp"
#include "tineuvox/model.hpp"

using namespace tnv;

TEST_CASE("pe spec dimension arithmetic") {
  CHECK(PeSpec{0, true}.block_dim() == 1);
  CHECK(PeSpec{2, true}.block_dim() == 5);
  CHECK(PeSpec{2, false}.block_dim() == 4);
  CHECK(PeSpec{10, true}.out_dim(3) == 63);
  CHECK(PeSpec{4, true}.out_dim(3) == 27);
  CHECK(PeSpec{8, true}.out_dim(1) == 17);
}

TEST_CASE("encoded voxel feature dim matches the published sizes") {
  CHECK(encoded_voxel_feature_dim(4, 2) == 20);
  CHECK(encoded_voxel_feature_dim(6, 2) == 30);
}

TEST_CASE("frequency encoding of a scalar against frozen values") {
  MatX<double> in(1, 1);
  in(0, 0) = 0.5;
  const MatX<double> out = positional_encode<double>(in, PeSpec{2, true});
  REQUIRE(out.rows() == 5);
  REQUIRE(out.cols() == 1);
  CHECK(out(0, 0) == 0.5);
  CHECK(out(1, 0) == doctest::Approx(0.479425538604203).epsilon(1e-15));    // sin(0.5)
  CHECK(out(2, 0) == doctest::Approx(0.8775825618903728).epsilon(1e-15));   // cos(0.5)
  CHECK(out(3, 0) == doctest::Approx(0.8414709848078965).epsilon(1e-15));   // sin(1.0)
  CHECK(out(4, 0) == doctest::Approx(0.5403023058681398).epsilon(1e-15));   // cos(1.0)
}

TEST_CASE("channel blocks are concatenated in input order") {
  MatX<double> in(2, 3);
  in << 0.1, 0.2, 0.3, 1.1, 1.2, 1.3;
  const PeSpec spec{3, true};
  const MatX<double> out = positional_encode<double>(in, spec);
  REQUIRE(out.rows() == 14);
  for (int col = 0; col < 3; ++col) {
    for (int c = 0; c < 2; ++c) {
      const double x = in(c, col);
      const int base = c * spec.block_dim();
      CHECK(out(base, col) == x);
      double freq = 1;
      for (int k = 0; k < spec.num_freqs; ++k) {
        CHECK(out(base + 1 + 2 * k, col) == doctest::Approx(std::sin(freq * x)).epsilon(1e-15));
        CHECK(out(base + 2 + 2 * k, col) == doctest::Approx(std::cos(freq * x)).epsilon(1e-15));
        freq *= 2;
      }
    }
  }
}

TEST_CASE("include_input=false drops the raw channel") {
  MatX<double> in(1, 2);
  in << 0.3, -0.7;
  const MatX<double> out = positional_encode<double>(in, PeSpec{1, false});
  REQUIRE(out.rows() == 2);
  CHECK(out(0, 0) == doctest::Approx(std::sin(0.3)).epsilon(1e-15));
  CHECK(out(1, 1) == doctest::Approx(std::cos(-0.7)).epsilon(1e-15));
}

TEST_CASE("zero frequencies with include_input is the identity") {
  MatX<double> in(3, 4);
  Rng rng(11);
  for (int i = 0; i < in.size(); ++i) in.data()[i] = rng.uniform(-2, 2);
  const MatX<double> out = positional_encode<double>(in, PeSpec{0, true});
  CHECK(out == in);
}

TEST_CASE("non-finite input is rejected") {
  MatX<double> in(1, 1);
  in(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input,
                            [&] { positional_encode<double>(in, PeSpec{1, true}); }));
  in(0, 0) = std::numeric_limits<double>::infinity();
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input,
                            [&] { positional_encode<double>(in, PeSpec{1, true}); }));
}

TEST_CASE("encoding backward matches central finite differences") {
  Rng rng(3);
  const PeSpec spec{3, true};
  MatX<double> in(2, 5), dout(14, 5);
  for (int i = 0; i < in.size(); ++i) in.data()[i] = rng.uniform(-1.5, 1.5);
  for (int i = 0; i < dout.size(); ++i) dout.data()[i] = rng.uniform(-1, 1);

  const MatX<double> fwd = positional_encode<double>(in, spec);
  MatX<double> din = MatX<double>::Zero(in.rows(), in.cols());
  positional_encode_backward<double>(fwd, spec, dout, din);

  for (int r = 0; r < in.rows(); ++r) {
    for (int c = 0; c < in.cols(); ++c) {
      const double fd = oracle::fd_derivative(
          [&](double x) {
            MatX<double> shifted = in;
            shifted(r, c) = x;
            const MatX<double> o = positional_encode<double>(shifted, spec);
            return (o.array() * dout.array()).sum();
          },
          in(r, c));
      CHECK(din(r, c) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("backward accumulates into existing gradients") {
  const PeSpec spec{1, true};
  MatX<double> in(1, 1);
  in(0, 0) = 0.4;
  const MatX<double> fwd = positional_encode<double>(in, spec);
  MatX<double> dout = MatX<double>::Ones(3, 1);
  MatX<double> din(1, 1);
  din(0, 0) = 10.0;
  positional_encode_backward<double>(fwd, spec, dout, din);
  const double expect = 10.0 + 1.0 + std::cos(0.4) - std::sin(0.4);
  CHECK(din(0, 0) == doctest::Approx(expect).epsilon(1e-14));
}
