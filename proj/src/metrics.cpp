#include "tineuvox/metrics.hpp"

#include <cmath>

namespace tnv {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  const int half = kWindow / 2;
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - half;
    k[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::vector<double> to_gray(const Image& img) {
  std::vector<double> g(static_cast<std::size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      g[static_cast<std::size_t>(r) * img.width + c] =
          (img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2)) / 3.0;
  return g;
}

/// Separable Gaussian filter; only the fully-covered interior is used.
std::vector<double> blur(const std::vector<double>& src, int width, int height,
                         const std::vector<double>& kernel) {
  const int half = kWindow / 2;
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int r = 0; r < height; ++r)
    for (int c = half; c < width - half; ++c) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i) s += kernel[i] * src[static_cast<std::size_t>(r) * width + c - half + i];
      tmp[static_cast<std::size_t>(r) * width + c] = s;
    }
  for (int r = half; r < height - half; ++r)
    for (int c = half; c < width - half; ++c) {
      double s = 0;
      for (int i = 0; i < kWindow; ++i)
        s += kernel[i] * tmp[static_cast<std::size_t>(r - half + i) * width + c];
      out[static_cast<std::size_t>(r) * width + c] = s;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw invalid_input("psnr: image shape mismatch");
  if (a.rgb.empty()) throw invalid_input("psnr: empty image");
  double mse = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.rgb.size());
  const double db = 10.0 * std::log10(1.0 / mse);  // mse = 0 gives +inf
  return std::min(db, 99.0);
}

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw invalid_input("ssim: image shape mismatch");
  if (a.width < kWindow || a.height < kWindow)
    throw invalid_input("ssim: image smaller than the 11x11 window");

  const auto kernel = gaussian_kernel();
  const auto ga = to_gray(a);
  const auto gb = to_gray(b);
  const std::size_t n = ga.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = ga[i] * ga[i];
    bb[i] = gb[i] * gb[i];
    ab[i] = ga[i] * gb[i];
  }
  const int w = a.width, h = a.height;
  const auto mu_a = blur(ga, w, h, kernel);
  const auto mu_b = blur(gb, w, h, kernel);
  const auto e_aa = blur(aa, w, h, kernel);
  const auto e_bb = blur(bb, w, h, kernel);
  const auto e_ab = blur(ab, w, h, kernel);

  const int half = kWindow / 2;
  double sum = 0;
  std::size_t count = 0;
  for (int r = half; r < h - half; ++r)
    for (int c = half; c < w - half; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
      sum += num / den;
      ++count;
    }
  return sum / static_cast<double>(count);
}

void MetricReport::finalize() {
  mean_psnr = 0;
  mean_ssim = 0;
  if (psnr.empty()) return;
  for (std::size_t i = 0; i < psnr.size(); ++i) {
    mean_psnr += psnr[i];
    mean_ssim += ssim[i];
  }
  mean_psnr /= static_cast<double>(psnr.size());
  mean_ssim /= static_cast<double>(ssim.size());
}

}  // namespace tnv
