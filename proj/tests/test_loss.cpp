#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tineuvox/loss.hpp"

using namespace tnv;

namespace {

/// Workspace with just the fields the loss consumes.
RayWorkspace<double> synthetic_ws() {
  RayWorkspace<double> ws;
  ws.n = 3;
  ws.weight.resize(3);
  ws.weight << 0.5, 0.2, 0.05;
  ws.color.resize(3, 3);
  ws.color << 0.9, 0.1, 0.0, 0.2, 0.8, 0.0, 0.1, 0.3, 0.0;
  ws.color_cols = {0, 1};  // sample 2 was filtered: no color produced
  ws.c_hat = Vec3<double>(0.52, 0.26, 0.11);
  ws.t_last = 0.25;
  return ws;
}

}  // namespace

TEST_CASE("photometric loss is the mean channel-mean squared error") {
  MatX<double> pred(3, 2), target(3, 2);
  pred.setConstant(0.6);
  target.setConstant(0.5);
  CHECK(photometric_loss(pred, target) == doctest::Approx(0.01).epsilon(1e-12));

  pred(0, 0) = 1.5;  // one channel off by 1 in one ray
  target(0, 0) = 0.5;
  CHECK(photometric_loss(pred, target) ==
        doctest::Approx(0.5 * ((1.0 + 2 * 0.01) / 3.0 + 0.01)).epsilon(1e-12));

  MatX<double> bad(2, 2);
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input, [&] { photometric_loss(bad, bad); }));
  MatX<double> empty(3, 0);
  CHECK(oracle::throws_kind(TnvError::Kind::invalid_input,
                            [&] { photometric_loss(empty, empty); }));
}

TEST_CASE("background entropy values and clamping") {
  CHECK(std::abs(bg_entropy(0.5) - 0.6931471805599453) < 1e-15);
  CHECK(bg_entropy(0.9) == doctest::Approx(0.3250829733914482).epsilon(1e-14));
  CHECK(bg_entropy(0.3) == doctest::Approx(0.6108643020548935).epsilon(1e-14));
  CHECK(bg_entropy(0.3) == bg_entropy(0.7));  // symmetric

  // Clamped endpoints stay finite and match the clamp value.
  CHECK(bg_entropy(0.0) == bg_entropy(1e-6));
  CHECK(bg_entropy(1.0) == bg_entropy(1.0 - 1e-6));
  CHECK(std::isfinite(bg_entropy(0.0)));
}

TEST_CASE("background entropy derivative") {
  CHECK(d_bg_entropy(0.3) == doctest::Approx(0.8472978603872037).epsilon(1e-14));
  CHECK(d_bg_entropy(0.5) == 0.0);
  CHECK(d_bg_entropy(0.0) == 0.0);
  CHECK(d_bg_entropy(1.0) == 0.0);
  for (double t : {0.1, 0.35, 0.62, 0.9}) {
    CHECK(d_bg_entropy(t) ==
          doctest::Approx(oracle::fd_derivative([](double v) { return bg_entropy(v); }, t))
              .epsilon(1e-8));
  }
}

TEST_CASE("ray loss terms against a hand computation") {
  const RayWorkspace<double> ws = synthetic_ws();
  const Vec3<double> target(0.5, 0.3, 0.1);
  const Vec3<double> background(1, 1, 1);
  const double lambda_all = 0.01, lambda_bg = 0.001, inv_rays = 0.125;

  RayLoss<double> out;
  compute_ray_loss(ws, target, background, lambda_all, lambda_bg, inv_rays, out);

  const Vec3<double> pred = ws.c_hat + ws.t_last * background;
  const Vec3<double> diff = pred - target;
  CHECK(out.photo == doctest::Approx(diff.squaredNorm() / 3.0).epsilon(1e-14));
  CHECK(out.bg == doctest::Approx(bg_entropy(0.25)).epsilon(1e-14));

  double all_expect = 0;
  for (int i : {0, 1})
    all_expect += ws.weight[i] * (ws.color.col(i) - target).squaredNorm() / 3.0;
  CHECK(out.all_pts == doctest::Approx(all_expect).epsilon(1e-14));

  // Gradient of the photo term.
  const Vec3<double> d_c_expect = (2.0 * inv_rays / 3.0) * diff;
  CHECK((out.d_c_hat - d_c_expect).norm() < 1e-15);
  const double d_t_expect = (2.0 * inv_rays / 3.0) * diff.dot(background) +
                            lambda_bg * inv_rays * d_bg_entropy(0.25);
  CHECK(out.d_t_last == doctest::Approx(d_t_expect).epsilon(1e-14));

  // Per-sample terms: filtered sample 2 contributes nothing.
  REQUIRE(out.d_weight.size() == 3);
  CHECK(out.d_weight[2] == 0.0);
  CHECK(out.d_color.col(2).isZero(0.0));
  for (int i : {0, 1}) {
    const Vec3<double> cdiff = ws.color.col(i) - target;
    CHECK(out.d_weight[i] ==
          doctest::Approx(lambda_all * inv_rays * cdiff.squaredNorm() / 3.0).epsilon(1e-14));
    const Vec3<double> dc_expect = (lambda_all * inv_rays * 2.0 / 3.0) * ws.weight[i] * cdiff;
    CHECK((out.d_color.col(i) - dc_expect).norm() < 1e-15);
  }
}

TEST_CASE("loss gradients match finite differences") {
  const Vec3<double> target(0.4, 0.5, 0.6);
  const Vec3<double> background(0, 0, 0);
  const double lambda_all = 0.02, lambda_bg = 0.01, inv_rays = 0.5;

  const auto total = [&](const RayWorkspace<double>& w) {
    RayLoss<double> o;
    compute_ray_loss(w, target, background, lambda_all, lambda_bg, inv_rays, o);
    return inv_rays * (o.photo + lambda_all * o.all_pts + lambda_bg * o.bg);
  };

  RayWorkspace<double> ws = synthetic_ws();
  RayLoss<double> out;
  compute_ray_loss(ws, target, background, lambda_all, lambda_bg, inv_rays, out);

  for (int k = 0; k < 3; ++k) {
    const double fd = oracle::fd_derivative(
        [&](double v) {
          RayWorkspace<double> w = ws;
          w.c_hat[k] = v;
          return total(w);
        },
        ws.c_hat[k]);
    CHECK(out.d_c_hat[k] == doctest::Approx(fd).epsilon(1e-8));
  }
  {
    const double fd = oracle::fd_derivative(
        [&](double v) {
          RayWorkspace<double> w = ws;
          w.t_last = v;
          return total(w);
        },
        ws.t_last);
    CHECK(out.d_t_last == doctest::Approx(fd).epsilon(1e-8));
  }
  for (int i : {0, 1}) {
    const double fd_w = oracle::fd_derivative(
        [&](double v) {
          RayWorkspace<double> w = ws;
          w.weight[i] = v;
          return total(w);
        },
        ws.weight[i]);
    CHECK(out.d_weight[i] == doctest::Approx(fd_w).epsilon(1e-8));
    for (int k = 0; k < 3; ++k) {
      const double fd_c = oracle::fd_derivative(
          [&](double v) {
            RayWorkspace<double> w = ws;
            w.color(k, i) = v;
            return total(w);
          },
          ws.color(k, i));
      CHECK(out.d_color(k, i) == doctest::Approx(fd_c).epsilon(1e-8));
    }
  }
}

TEST_CASE("zero loss weights disable only their own terms") {
  const RayWorkspace<double> ws = synthetic_ws();
  const Vec3<double> target(0.5, 0.3, 0.1);
  const Vec3<double> background(0, 0, 0);

  RayLoss<double> with, without;
  compute_ray_loss(ws, target, background, 0.01, 0.001, 1.0, with);
  compute_ray_loss(ws, target, background, 0.0, 0.0, 1.0, without);

  CHECK(without.photo == with.photo);  // photo term untouched
  CHECK(without.bg == with.bg);        // entropy is reported regardless
  CHECK(without.all_pts == 0.0);
  CHECK(without.d_weight.size() == 0);
  CHECK(without.d_color.cols() == 0);
  CHECK(with.d_weight.size() == 3);

  // d_t_last loses exactly the entropy contribution.
  const double entropy_part = 0.001 * d_bg_entropy(ws.t_last);
  CHECK(with.d_t_last - without.d_t_last == doctest::Approx(entropy_part).epsilon(1e-12));
}

TEST_CASE("loss breakdown accumulates fieldwise") {
  LossBreakdown a, b;
  a.photo = 1;
  a.all_pts = 2;
  a.bg_entropy = 3;
  a.total = 4;
  b = a;
  b += a;
  CHECK(b.photo == 2);
  CHECK(b.all_pts == 4);
  CHECK(b.bg_entropy == 6);
  CHECK(b.total == 8);
}
