#include "seu/scale_space.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seu {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

// Probabilists' Hermite polynomial He_n, n <= 4.
double hermite(int n, double u) {
  switch (n) {
    case 0: return 1.0;
    case 1: return u;
    case 2: return u * u - 1.0;
    case 3: return u * (u * u - 3.0);
    case 4: return u * u * (u * u - 6.0) + 3.0;
    default:
      throw std::domain_error("gaussian_1d: derivative order must be in 0..4, got " +
                              std::to_string(n));
  }
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0))
    throw std::domain_error("sigma must be positive, got " + std::to_string(sigma));
}

}  // namespace

double gaussian_1d(int x, double sigma, int order) {
  check_sigma(sigma);
  const double u = x / sigma;
  const double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  const double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return sign * hermite(order, u) * phi / std::pow(sigma, order + 1);
}

double gaussian_1d_dsigma(int x, double sigma, int order) {
  check_sigma(sigma);
  const double u = x / sigma;
  const double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  const double sign = (order % 2 == 0) ? 1.0 : -1.0;
  const double n = order;
  double v = (u * u - n - 1.0) * hermite(order, u);
  if (order > 0) v -= n * u * hermite(order - 1, u);
  return sign * v * phi / std::pow(sigma, order + 2);
}

int filter_size(double sigma) {
  check_sigma(sigma);
  return 2 * static_cast<int>(std::ceil(2.0 * sigma)) + 1;
}

GaussianBasis build_basis(double sigma, int order) {
  check_sigma(sigma);
  if (order < 0 || order > 4)
    throw std::domain_error("build_basis: order must be in 0..4, got " +
                            std::to_string(order));
  GaussianBasis basis;
  basis.sigma = sigma;
  basis.order = order;
  basis.size = filter_size(sigma);
  const int half = (basis.size - 1) / 2;

  // 1D factors and their sigma derivatives per order, indexed by offset.
  std::vector<std::vector<double>> g(order + 1), dg(order + 1);
  for (int n = 0; n <= order; ++n) {
    g[n].resize(basis.size);
    dg[n].resize(basis.size);
    for (int x = -half; x <= half; ++x) {
      g[n][x + half] = gaussian_1d(x, sigma, n);
      dg[n][x + half] = gaussian_1d_dsigma(x, sigma, n);
    }
  }

  // Derivative kernels carry the scale-normalized amplitude sigma^(i+j).
  // Under image rescaling the raw derivative G^(i,j)(sigma) transports with an
  // extra s^-(i+j) amplitude; the sigma^(i+j) factor cancels it, which is what
  // makes the sigma-remapped network scale-equivariant beyond order 0.
  for (int i = 0; i <= order; ++i)
    for (int j = 0; i + j <= order; ++j) {
      const int m = i + j;
      const double amp = std::pow(sigma, m);
      const double damp = m > 0 ? m * std::pow(sigma, m - 1) : 0.0;
      std::vector<double> k(static_cast<size_t>(basis.size) * basis.size);
      std::vector<double> dk(k.size());
      for (int y = 0; y < basis.size; ++y)
        for (int x = 0; x < basis.size; ++x) {
          const double v = g[i][x] * g[j][y];
          const double dv = dg[i][x] * g[j][y] + g[i][x] * dg[j][y];
          k[static_cast<size_t>(y) * basis.size + x] = amp * v;
          dk[static_cast<size_t>(y) * basis.size + x] = damp * v + amp * dv;
        }
      basis.kernels.emplace(std::make_pair(i, j), std::move(k));
      basis.dkernels_dsigma.emplace(std::make_pair(i, j), std::move(dk));
    }
  return basis;
}

}  // namespace seu
