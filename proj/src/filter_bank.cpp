#include "seu/filter_bank.hpp"

#include <cmath>
#include <stdexcept>

#include "seu/ops.hpp"

namespace seu {

SigmaMode sigma_mode_from_string(const std::string& s) {
  if (s == "constrained") return SigmaMode::kConstrained;
  if (s == "fixed") return SigmaMode::kFixed;
  if (s == "free") return SigmaMode::kFree;
  throw std::invalid_argument("unknown sigma mode: " + s);
}

std::string to_string(SigmaMode m) {
  switch (m) {
    case SigmaMode::kConstrained: return "constrained";
    case SigmaMode::kFixed: return "fixed";
    default: return "free";
  }
}

SigmaParam::SigmaParam(double lower, double upper, SigmaMode mode)
    : lower_(lower), upper_(upper), mode_(mode) {
  if (!(upper > lower) || lower < 0.0)
    throw std::invalid_argument("SigmaParam: need upper > lower >= 0, got (" +
                                std::to_string(lower) + ", " +
                                std::to_string(upper) + ")");
  raw_ = Tensor::scalar(0.0, /*requires_grad=*/true);
}

double SigmaParam::value() const {
  switch (mode_) {
    case SigmaMode::kConstrained:
      return 0.5 * (upper_ - lower_) * std::tanh(raw_.item()) +
             0.5 * (upper_ + lower_);
    case SigmaMode::kFixed:
      return 0.5 * (upper_ + lower_);
    default: {
      // softplus with a 0.3 floor
      const double x = raw_.item();
      const double sp = x > 30.0 ? x : std::log1p(std::exp(x));
      return sp + 0.3;
    }
  }
}

double SigmaParam::dvalue_draw() const {
  switch (mode_) {
    case SigmaMode::kConstrained: {
      const double t = std::tanh(raw_.item());
      return 0.5 * (upper_ - lower_) * (1.0 - t * t);
    }
    case SigmaMode::kFixed:
      return 0.0;
    default: {
      const double x = raw_.item();
      return x > 30.0 ? 1.0 : 1.0 / (1.0 + std::exp(-x));
    }
  }
}

ScaleFilterBank::ScaleFilterBank(int gamma, int in_channels,
                                 int out_channels_per_group, int order,
                                 const std::vector<SigmaInterval>& intervals,
                                 SigmaMode mode, bool first_layer,
                                 std::mt19937& rng)
    : gamma_(gamma),
      in_channels_(in_channels),
      out_pg_(out_channels_per_group),
      order_(order),
      first_layer_(first_layer) {
  if (gamma < 1) throw std::invalid_argument("ScaleFilterBank: gamma must be >= 1");
  if (static_cast<int>(intervals.size()) != gamma)
    throw std::invalid_argument("ScaleFilterBank: expected " +
                                std::to_string(gamma) + " sigma intervals, got " +
                                std::to_string(intervals.size()));
  if (mode == SigmaMode::kConstrained) {
    for (int k = 0; k + 1 < gamma; ++k)
      if (intervals[static_cast<size_t>(k)].upper >
          intervals[static_cast<size_t>(k + 1)].lower)
        throw std::invalid_argument(
            "ScaleFilterBank: constrained sigma intervals must be disjoint and "
            "ordered");
  }
  for (int k = 0; k < gamma; ++k)
    sigmas_.emplace_back(intervals[static_cast<size_t>(k)].lower,
                         intervals[static_cast<size_t>(k)].upper, mode);

  const int nb = basis_count(order);
  alpha_ = Tensor::zeros({nb, out_pg_, in_channels_}, /*requires_grad=*/true);
  // He-style init adjusted for the basis: each kernel's L2 norm is well below
  // one (a sampled Gaussian shrinks like 1/sigma), so the coefficient scale
  // must divide it out or activations vanish with depth. Norms are averaged
  // over the groups' initial sigmas because alpha is shared across groups.
  std::vector<double> inv_norm(static_cast<size_t>(nb), 0.0);
  for (const SigmaParam& sp : sigmas_) {
    const GaussianBasis basis = build_basis(sp.value(), order);
    int b = 0;
    for (const auto& [ij, kern] : basis.kernels) {
      double n2 = 0.0;
      for (double v : kern) n2 += v * v;
      inv_norm[static_cast<size_t>(b++)] += std::sqrt(n2);
    }
  }
  for (double& n : inv_norm) n = static_cast<double>(gamma) / n;
  for (int b = 0; b < nb; ++b) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(in_channels_) * nb)) *
                         inv_norm[static_cast<size_t>(b)];
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int o = 0; o < out_pg_; ++o)
      for (int c = 0; c < in_channels_; ++c)
        alpha_[(b * out_pg_ + o) * in_channels_ + c] = dist(rng);
  }
}

int ScaleFilterBank::parameter_count() const {
  return alpha_.size() + gamma_;
}

std::vector<Tensor> ScaleFilterBank::realize_filters(Tape* tape,
                                                     double sigma_scale) const {
  const int nb = basis_count(order_);
  std::vector<Tensor> stacks;
  stacks.reserve(static_cast<size_t>(gamma_));
  for (int k = 0; k < gamma_; ++k) {
    const SigmaParam& sp = sigmas_[static_cast<size_t>(k)];
    // The scale-matched evaluation path (sigma_scale != 1) can push sigma
    // below the point where the sampled basis degenerates (only the centre
    // tap survives and kernel values diverge as 1/sigma). Floor it at 0.3,
    // the same lower bound the free parameterization uses; training paths
    // always sit above it.
    const double sig = std::max(sp.value() * sigma_scale, 0.3);
    auto basis = std::make_shared<GaussianBasis>(build_basis(sig, order_));
    const int tau = basis->size;
    const int area = tau * tau;

    Tensor filt = Tensor::zeros({out_pg_, in_channels_, tau, tau});
    int b = 0;
    for (const auto& [ij, kern] : basis->kernels) {
      for (int o = 0; o < out_pg_; ++o)
        for (int c = 0; c < in_channels_; ++c) {
          const double a = alpha_[(b * out_pg_ + o) * in_channels_ + c];
          double* f = filt.data() + (o * in_channels_ + c) * area;
          for (int p = 0; p < area; ++p) f[p] += a * kern[static_cast<size_t>(p)];
        }
      ++b;
    }

    if (tape && (alpha_.requires_grad() || sp.raw().requires_grad())) {
      filt.set_requires_grad();
      Tensor al = alpha_, raw = sp.raw(), ft = filt;
      const double dsig_draw = sp.dvalue_draw() * sigma_scale;
      const int opg = out_pg_, cin = in_channels_;
      tape->record([al, raw, ft, basis, dsig_draw, opg, cin, area, nb]() mutable {
        const double* gf = ft.grad();
        // d loss / d alpha: contract the upstream filter gradient with each
        // basis kernel; d loss / d raw: chain through dkernel/dsigma and the
        // reparameterization derivative.
        double gsigma = 0.0;
        int b = 0;
        for (const auto& [ij, kern] : basis->kernels) {
          const std::vector<double>& dkern = basis->dkernels_dsigma.at(ij);
          for (int o = 0; o < opg; ++o)
            for (int c = 0; c < cin; ++c) {
              const double* g = gf + (o * cin + c) * area;
              double acc = 0.0, dacc = 0.0;
              for (int p = 0; p < area; ++p) {
                acc += g[p] * kern[static_cast<size_t>(p)];
                dacc += g[p] * dkern[static_cast<size_t>(p)];
              }
              if (al.requires_grad())
                al.grad()[(b * opg + o) * cin + c] += acc;
              gsigma += dacc * al[(b * opg + o) * cin + c];
            }
          ++b;
        }
        if (raw.requires_grad()) raw.grad()[0] += gsigma * dsig_draw;
      });
    }
    stacks.push_back(std::move(filt));
  }
  return stacks;
}

std::vector<Tensor> ScaleFilterBank::forward(Tape* tape,
                                             const std::vector<Tensor>& input,
                                             double sigma_scale) const {
  std::vector<Tensor> filters = realize_filters(tape, sigma_scale);
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(gamma_));
  if (first_layer_) {
    if (input.size() != 1)
      throw std::invalid_argument(
          "ScaleFilterBank: first layer expects a single input tensor, got " +
          std::to_string(input.size()));
    for (int k = 0; k < gamma_; ++k)
      out.push_back(conv2d(tape, input[0], filters[static_cast<size_t>(k)]));
  } else {
    if (static_cast<int>(input.size()) != gamma_)
      throw std::invalid_argument("ScaleFilterBank: expected " +
                                  std::to_string(gamma_) + " input groups, got " +
                                  std::to_string(input.size()));
    for (int k = 0; k < gamma_; ++k)
      out.push_back(conv2d(tape, input[static_cast<size_t>(k)],
                           filters[static_cast<size_t>(k)]));
  }
  return out;
}

}  // namespace seu
