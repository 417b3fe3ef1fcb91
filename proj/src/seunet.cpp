#include "seu/seunet.hpp"

#include <cmath>
#include <stdexcept>

namespace seu {

namespace {

Tensor make_conv_weight(int cout, int cin, int k, std::mt19937& rng) {
  Tensor w = Tensor::zeros({cout, cin, k, k}, /*requires_grad=*/true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int i = 0; i < w.size(); ++i) w[i] = dist(rng);
  return w;
}

}  // namespace

std::vector<int> layer_depth_factors(int depth) {
  std::vector<int> f;
  for (int i = 0; i < depth; ++i) {
    f.push_back(i);
    f.push_back(i);
  }
  f.push_back(depth);
  f.push_back(depth);
  for (int i = depth - 1; i >= 0; --i) {
    f.push_back(i);
    f.push_back(i);
  }
  return f;
}

std::vector<std::vector<SigmaInterval>> default_sigma_schedule(int depth,
                                                               int gamma) {
  std::vector<std::vector<SigmaInterval>> sched;
  for (int d : layer_depth_factors(depth)) {
    std::vector<SigmaInterval> lay;
    const double m = std::pow(2.0, d / 3.0);
    for (int k = 0; k < gamma; ++k) {
      const double c = (0.4 + 0.5 * k) * m;
      lay.push_back({c - 0.2, c + 0.2});
    }
    sched.push_back(std::move(lay));
  }
  return sched;
}

Tensor eta_tilde(Tape* tape, const Tensor& eta_raw) {
  const int g = eta_raw.size();
  Tensor out = Tensor::zeros(eta_raw.shape());
  std::vector<double> p(static_cast<size_t>(g));
  double m = eta_raw[0];
  for (int i = 1; i < g; ++i) m = std::max(m, eta_raw[i]);
  double z = 0.0;
  for (int i = 0; i < g; ++i) {
    p[static_cast<size_t>(i)] = std::exp(eta_raw[i] - m);
    z += p[static_cast<size_t>(i)];
  }
  for (int i = 0; i < g; ++i) {
    p[static_cast<size_t>(i)] /= z;
    // sum_j (eta_j + 1/gamma) = 2 because softmax already sums to 1
    out[i] = 0.5 * (p[static_cast<size_t>(i)] + 1.0 / g);
  }
  if (tape && eta_raw.requires_grad()) {
    out.set_requires_grad();
    Tensor rin = eta_raw, ot = out;
    tape->record([rin, ot, p, g]() mutable {
      const double* go = ot.grad();
      double dot = 0.0;
      for (int i = 0; i < g; ++i) dot += 0.5 * go[i] * p[static_cast<size_t>(i)];
      for (int i = 0; i < g; ++i)
        rin.grad()[i] += p[static_cast<size_t>(i)] * (0.5 * go[i] - dot);
    });
  }
  return out;
}

SEUNet::SEUNet(const SEUNetConfig& config, std::mt19937& rng) : cfg_(config) {
  const int depth = cfg_.depth();
  if (depth < 1)
    throw std::invalid_argument("SEUNet: channel plan needs at least two levels");
  for (int c : cfg_.channels)
    if (c % cfg_.gamma != 0)
      throw std::invalid_argument("SEUNet: channel count " + std::to_string(c) +
                                  " is not divisible by gamma=" +
                                  std::to_string(cfg_.gamma));
  if (cfg_.layer_intervals.empty())
    cfg_.layer_intervals = default_sigma_schedule(depth, cfg_.gamma);
  if (static_cast<int>(cfg_.layer_intervals.size()) != cfg_.conv_layer_count())
    throw std::invalid_argument(
        "SEUNet: expected sigma intervals for " +
        std::to_string(cfg_.conv_layer_count()) + " layers, got " +
        std::to_string(cfg_.layer_intervals.size()));

  auto pg = [&](int level) { return cfg_.channels[static_cast<size_t>(level)] / cfg_.gamma; };
  int layer = 0;
  auto add_bank = [&](int in, int out, bool first) {
    banks_.emplace_back(cfg_.gamma, in, out, cfg_.order,
                        cfg_.layer_intervals[static_cast<size_t>(layer++)],
                        cfg_.sigma_mode, first, rng);
  };
  for (int i = 0; i < depth; ++i) {
    add_bank(i == 0 ? cfg_.in_channels : pg(i - 1), pg(i), i == 0);
    add_bank(pg(i), pg(i), false);
  }
  add_bank(pg(depth - 1), pg(depth), false);
  add_bank(pg(depth), pg(depth), false);
  for (int i = depth - 1; i >= 0; --i) {
    add_bank(pg(i + 1) + pg(i), pg(i), false);
    add_bank(pg(i), pg(i), false);
  }

  for (int k = 0; k < cfg_.gamma; ++k)
    heads_.push_back(make_conv_weight(cfg_.classes, pg(0), 1, rng));
  eta_raw_ = Tensor::zeros({cfg_.gamma}, /*requires_grad=*/true);
}

SEUNetOutput SEUNet::forward(Tape* tape, const Tensor& image,
                             double sigma_scale) const {
  if (image.ndim() != 3 || image.dim(0) != cfg_.in_channels)
    throw std::invalid_argument("SEUNet::forward: expected [" +
                                std::to_string(cfg_.in_channels) +
                                ",H,W] image");
  const int depth = cfg_.depth();
  const int div = 1 << depth;
  if (image.dim(1) % div || image.dim(2) % div)
    throw std::invalid_argument(
        "SEUNet::forward: spatial dims " + std::to_string(image.dim(1)) + "x" +
        std::to_string(image.dim(2)) + " must be divisible by 2^depth = " +
        std::to_string(div));

  auto block = [&](std::vector<Tensor> x, size_t bank0) {
    x = banks_[bank0].forward(tape, x, sigma_scale);
    for (Tensor& t : x) t = relu(tape, t);
    x = banks_[bank0 + 1].forward(tape, x, sigma_scale);
    for (Tensor& t : x) t = relu(tape, t);
    return x;
  };

  std::vector<std::vector<Tensor>> skips;
  std::vector<Tensor> cur = {image};
  size_t b = 0;
  for (int i = 0; i < depth; ++i) {
    cur = block(std::move(cur), b);
    b += 2;
    skips.push_back(cur);
    for (Tensor& t : cur) t = maxpool2x2(tape, t);
  }
  cur = block(std::move(cur), b);
  b += 2;
  for (int i = depth - 1; i >= 0; --i) {
    for (Tensor& t : cur) t = upsample2x(tape, t);
    for (int k = 0; k < cfg_.gamma; ++k)
      cur[static_cast<size_t>(k)] = concat_channels(
          tape, {cur[static_cast<size_t>(k)],
                 skips[static_cast<size_t>(i)][static_cast<size_t>(k)]});
    cur = block(std::move(cur), b);
    b += 2;
  }

  SEUNetOutput out;
  out.trunk = cur;
  for (int k = 0; k < cfg_.gamma; ++k) {
    Tensor logits = conv2d(tape, cur[static_cast<size_t>(k)],
                           heads_[static_cast<size_t>(k)]);
    out.probs.push_back(softmax_channels(tape, logits));
  }
  return out;
}

Tensor SEUNet::combined_loss(Tape* tape, const std::vector<Tensor>& probs,
                             const Tensor& target) const {
  if (static_cast<int>(probs.size()) != cfg_.gamma)
    throw std::invalid_argument("combined_loss: expected gamma probability maps");
  std::vector<Tensor> losses;
  for (const Tensor& p : probs) losses.push_back(cross_entropy(tape, p, target));
  Tensor w = eta_tilde(tape, eta_raw_);
  return weighted_sum(tape, w, losses);
}

std::vector<std::pair<std::string, Tensor>> SEUNet::parameters() {
  std::vector<std::pair<std::string, Tensor>> ps;
  for (size_t l = 0; l < banks_.size(); ++l) {
    ps.emplace_back("bank" + std::to_string(l) + ".alpha", banks_[l].alpha());
    for (size_t k = 0; k < banks_[l].sigmas().size(); ++k)
      ps.emplace_back("bank" + std::to_string(l) + ".sigma" + std::to_string(k),
                      banks_[l].sigmas()[k].raw());
  }
  for (size_t k = 0; k < heads_.size(); ++k)
    ps.emplace_back("head" + std::to_string(k), heads_[k]);
  ps.emplace_back("eta_raw", eta_raw_);
  return ps;
}

std::vector<std::vector<double>> SEUNet::sigma_values() const {
  std::vector<std::vector<double>> v;
  for (const ScaleFilterBank& bank : banks_) {
    std::vector<double> lay;
    for (const SigmaParam& s : bank.sigmas()) lay.push_back(s.value());
    v.push_back(std::move(lay));
  }
  return v;
}

int SEUNet::parameter_count() const {
  int n = 0;
  for (const ScaleFilterBank& bank : banks_) n += bank.parameter_count();
  for (const Tensor& h : heads_) n += h.size();
  n += eta_raw_.size();
  return n;
}

PlainUNet::PlainUNet(const PlainUNetConfig& config, std::mt19937& rng)
    : cfg_(config) {
  const int depth = cfg_.depth();
  if (depth < 1)
    throw std::invalid_argument("PlainUNet: channel plan needs at least two levels");
  auto ch = [&](int level) { return cfg_.channels[static_cast<size_t>(level)]; };
  for (int i = 0; i < depth; ++i) {
    weights_.push_back(make_conv_weight(ch(i), i == 0 ? cfg_.in_channels : ch(i - 1),
                                        cfg_.kernel, rng));
    weights_.push_back(make_conv_weight(ch(i), ch(i), cfg_.kernel, rng));
  }
  weights_.push_back(make_conv_weight(ch(depth), ch(depth - 1), cfg_.kernel, rng));
  weights_.push_back(make_conv_weight(ch(depth), ch(depth), cfg_.kernel, rng));
  for (int i = depth - 1; i >= 0; --i) {
    weights_.push_back(make_conv_weight(ch(i), ch(i + 1) + ch(i), cfg_.kernel, rng));
    weights_.push_back(make_conv_weight(ch(i), ch(i), cfg_.kernel, rng));
  }
  head_ = make_conv_weight(cfg_.classes, ch(0), 1, rng);
}

PlainUNet::Output PlainUNet::forward(Tape* tape, const Tensor& image) const {
  const int depth = cfg_.depth();
  const int div = 1 << depth;
  if (image.ndim() != 3 || image.dim(1) % div || image.dim(2) % div)
    throw std::invalid_argument(
        "PlainUNet::forward: spatial dims must be divisible by 2^depth = " +
        std::to_string(div));

  auto block = [&](Tensor x, size_t w0) {
    x = relu(tape, conv2d(tape, x, weights_[w0]));
    x = relu(tape, conv2d(tape, x, weights_[w0 + 1]));
    return x;
  };

  std::vector<Tensor> skips;
  Tensor cur = image;
  size_t w = 0;
  for (int i = 0; i < depth; ++i) {
    cur = block(cur, w);
    w += 2;
    skips.push_back(cur);
    cur = maxpool2x2(tape, cur);
  }
  cur = block(cur, w);
  w += 2;
  for (int i = depth - 1; i >= 0; --i) {
    cur = upsample2x(tape, cur);
    cur = concat_channels(tape, {cur, skips[static_cast<size_t>(i)]});
    cur = block(cur, w);
    w += 2;
  }
  Output out;
  out.trunk = cur;
  out.probs = softmax_channels(tape, conv2d(tape, cur, head_));
  return out;
}

Tensor PlainUNet::loss(Tape* tape, const Tensor& probs, const Tensor& target) const {
  return cross_entropy(tape, probs, target);
}

std::vector<std::pair<std::string, Tensor>> PlainUNet::parameters() {
  std::vector<std::pair<std::string, Tensor>> ps;
  for (size_t i = 0; i < weights_.size(); ++i)
    ps.emplace_back("conv" + std::to_string(i), weights_[i]);
  ps.emplace_back("head", head_);
  return ps;
}

int PlainUNet::parameter_count() const {
  int n = head_.size();
  for (const Tensor& w : weights_) n += w.size();
  return n;
}

}  // namespace seu
