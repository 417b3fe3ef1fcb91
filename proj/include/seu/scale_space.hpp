#pragma once

// Sampled 2D Gaussian derivative kernels at continuous sigma, together with
// the analytic derivative of every kernel value with respect to sigma and
// the sigma -> filter-size rule. Pure functions, 64-bit throughout.

#include <map>
#include <utility>
#include <vector>

namespace seu {

// d^order/dx^order of the unit-integral 1D Gaussian at integer offset x.
// Supports order 0..4.
double gaussian_1d(int x, double sigma, int order);

// Partial derivative with respect to sigma of gaussian_1d.
double gaussian_1d_dsigma(int x, double sigma, int order);

// tau = 2*ceil(2*sigma) + 1; always odd, always >= 3 for sigma > 0.
int filter_size(double sigma);

struct GaussianBasis {
  double sigma = 0.0;
  int order = 0;   // maximum total derivative order N
  int size = 0;    // odd side length tau
  // (i, j) with i + j <= order, each a size x size grid stored row-major
  // as [y * size + x]; i differentiates along x (columns), j along y (rows).
  std::map<std::pair<int, int>, std::vector<double>> kernels;
  std::map<std::pair<int, int>, std::vector<double>> dkernels_dsigma;
};

// Samples all derivative kernels of total order <= order (0..4) on the
// grid given by filter_size(sigma). Kernels are outer products of 1D
// factors; no renormalization of truncated mass.
GaussianBasis build_basis(double sigma, int order);

// Number of (i,j) pairs with i+j <= order: (N+1)(N+2)/2.
inline int basis_count(int order) { return (order + 1) * (order + 2) / 2; }

}  // namespace seu
