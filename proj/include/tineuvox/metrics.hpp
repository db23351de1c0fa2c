#pragma once

#include <vector>

#include "tineuvox/image.hpp"

namespace tnv {

/// 10*log10(1/MSE) over all pixels and channels of [0,1] images; capped
/// at 99 dB for (near-)identical inputs.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM: grayscale = channel mean, 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1. The map is
/// averaged over pixels whose window lies fully inside the image.
double ssim(const Image& a, const Image& b);

struct MetricReport {
  std::vector<double> psnr, ssim;  // per frame
  double mean_psnr = 0, mean_ssim = 0;

  void add(double p, double s) {
    psnr.push_back(p);
    ssim.push_back(s);
  }
  void finalize();
};

}  // namespace tnv
