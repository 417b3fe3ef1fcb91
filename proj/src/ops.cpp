#include "seu/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace seu {

namespace {

constexpr double kLogFloor = 1e-12;

bool track(Tape* tape, std::initializer_list<const Tensor*> ins) {
  if (!tape) return false;
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

void check_chw(const Tensor& t, const char* who) {
  if (t.ndim() != 3)
    throw std::invalid_argument(std::string(who) + ": expected a [C,H,W] tensor, got " +
                                std::to_string(t.ndim()) + " dims");
}

// out[y,x] += k * in[y+dy, x+dx] over the valid overlap of two HxW planes.
void shifted_axpy(double k, const double* in, double* out, int h, int w, int dy,
                  int dx) {
  const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
  if (x1 <= x0) return;
  const int n = x1 - x0;
  for (int y = y0; y < y1; ++y) {
    const double* src = in + (y + dy) * w + (x0 + dx);
    double* dst = out + y * w + x0;
    for (int i = 0; i < n; ++i) dst[i] += k * src[i];
  }
}

// accum += sum over overlap of a[y,x] * b[y+dy, x+dx].
double shifted_dot(const double* a, const double* b, int h, int w, int dy,
                   int dx) {
  const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
  double acc = 0.0;
  for (int y = y0; y < y1; ++y) {
    const double* pa = a + y * w + x0;
    const double* pb = b + (y + dy) * w + (x0 + dx);
    const int n = x1 - x0;
    for (int i = 0; i < n; ++i) acc += pa[i] * pb[i];
  }
  return acc;
}

}  // namespace

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight) {
  check_chw(input, "conv2d");
  if (weight.ndim() != 4)
    throw std::invalid_argument("conv2d: weight must be [C_out,C_in,tau,tau]");
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), tau = weight.dim(2);
  if (weight.dim(1) != cin)
    throw std::invalid_argument("conv2d: weight expects " +
                                std::to_string(weight.dim(1)) +
                                " input channels, input has " +
                                std::to_string(cin));
  if (weight.dim(3) != tau || tau % 2 == 0)
    throw std::invalid_argument("conv2d: kernel must be square with odd side, got " +
                                std::to_string(tau) + "x" +
                                std::to_string(weight.dim(3)));
  const int pad = (tau - 1) / 2;
  const int plane = h * w;

  Tensor out = Tensor::zeros({cout, h, w});
  for (int o = 0; o < cout; ++o) {
    double* op = out.data() + o * plane;
    for (int c = 0; c < cin; ++c) {
      const double* ip = input.data() + c * plane;
      const double* wp = weight.data() + (o * cin + c) * tau * tau;
      for (int ky = 0; ky < tau; ++ky)
        for (int kx = 0; kx < tau; ++kx) {
          const double k = wp[ky * tau + kx];
          if (k != 0.0) shifted_axpy(k, ip, op, h, w, ky - pad, kx - pad);
        }
    }
  }

  if (track(tape, {&input, &weight})) {
    out.set_requires_grad();
    Tensor in = input, wt = weight, ot = out;
    tape->record([in, wt, ot, cin, cout, h, w, tau, pad, plane]() mutable {
      const double* go = ot.grad();
      if (wt.requires_grad()) {
        double* gw = wt.grad();
        for (int o = 0; o < cout; ++o)
          for (int c = 0; c < cin; ++c) {
            const double* ip = in.data() + c * plane;
            double* gwp = gw + (o * cin + c) * tau * tau;
            for (int ky = 0; ky < tau; ++ky)
              for (int kx = 0; kx < tau; ++kx)
                gwp[ky * tau + kx] +=
                    shifted_dot(go + o * plane, ip, h, w, ky - pad, kx - pad);
          }
      }
      if (in.requires_grad()) {
        double* gi = in.grad();
        for (int o = 0; o < cout; ++o)
          for (int c = 0; c < cin; ++c) {
            const double* wp = wt.data() + (o * cin + c) * tau * tau;
            for (int ky = 0; ky < tau; ++ky)
              for (int kx = 0; kx < tau; ++kx) {
                const double k = wp[ky * tau + kx];
                if (k != 0.0)
                  shifted_axpy(k, go + o * plane, gi + c * plane, h, w,
                               pad - ky, pad - kx);
              }
          }
      }
    });
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const int n = x.size();
  for (int i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (track(tape, {&x})) {
    out.set_requires_grad();
    Tensor xin = x, ot = out;
    tape->record([xin, ot, n]() mutable {
      double* gx = xin.grad();
      const double* go = ot.grad();
      // subgradient at 0 is 0
      for (int i = 0; i < n; ++i)
        if (xin[i] > 0.0) gx[i] += go[i];
    });
  }
  return out;
}

Tensor maxpool2x2(Tape* tape, const Tensor& x) {
  check_chw(x, "maxpool2x2");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2)
    throw std::invalid_argument("maxpool2x2: spatial dims must be even, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  const int oh = h / 2, ow = w / 2;
  Tensor out = Tensor::zeros({c, oh, ow});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<size_t>(c * oh * ow));
  for (int ch = 0; ch < c; ++ch) {
    const double* ip = x.data() + ch * h * w;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        int best = (2 * y) * w + 2 * xx;
        const int cand[4] = {best, best + 1, best + w, best + w + 1};
        for (int i = 1; i < 4; ++i)
          if (ip[cand[i]] > ip[best]) best = cand[i];
        out[ch * oh * ow + y * ow + xx] = ip[best];
        (*argmax)[static_cast<size_t>(ch * oh * ow + y * ow + xx)] = ch * h * w + best;
      }
  }
  if (track(tape, {&x})) {
    out.set_requires_grad();
    Tensor xin = x, ot = out;
    tape->record([xin, ot, argmax]() mutable {
      double* gx = xin.grad();
      const double* go = ot.grad();
      for (int i = 0; i < ot.size(); ++i) gx[(*argmax)[static_cast<size_t>(i)]] += go[i];
    });
  }
  return out;
}

Tensor upsample2x(Tape* tape, const Tensor& x) {
  check_chw(x, "upsample2x");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out = Tensor::zeros({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    const double* ip = x.data() + ch * h * w;
    double* op = out.data() + ch * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int xx = 0; xx < 2 * w; ++xx)
        op[y * 2 * w + xx] = ip[(y / 2) * w + xx / 2];
  }
  if (track(tape, {&x})) {
    out.set_requires_grad();
    Tensor xin = x, ot = out;
    tape->record([xin, ot, c, h, w]() mutable {
      double* gx = xin.grad();
      const double* go = ot.grad();
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < 2 * h; ++y)
          for (int xx = 0; xx < 2 * w; ++xx)
            gx[ch * h * w + (y / 2) * w + xx / 2] +=
                go[ch * 4 * h * w + y * 2 * w + xx];
    });
  }
  return out;
}

Tensor concat_channels(Tape* tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int h = xs[0].dim(1), w = xs[0].dim(2);
  int ctot = 0;
  for (const Tensor& t : xs) {
    check_chw(t, "concat_channels");
    if (t.dim(1) != h || t.dim(2) != w)
      throw std::invalid_argument("concat_channels: spatial dims differ");
    ctot += t.dim(0);
  }
  Tensor out = Tensor::zeros({ctot, h, w});
  int off = 0;
  for (const Tensor& t : xs) {
    std::memcpy(out.data() + off, t.data(), sizeof(double) * static_cast<size_t>(t.size()));
    off += t.size();
  }
  bool any = false;
  for (const Tensor& t : xs) any = any || t.requires_grad();
  if (tape && any) {
    out.set_requires_grad();
    Tensor ot = out;
    std::vector<Tensor> ins = xs;
    tape->record([ins, ot]() mutable {
      const double* go = ot.grad();
      int off = 0;
      for (Tensor& t : ins) {
        if (t.requires_grad()) {
          double* g = t.grad();
          for (int i = 0; i < t.size(); ++i) g[i] += go[off + i];
        }
        off += t.size();
      }
    });
  }
  return out;
}

Tensor softmax_channels(Tape* tape, const Tensor& logits) {
  check_chw(logits, "softmax_channels");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const int plane = h * w;
  Tensor out = Tensor::zeros(logits.shape());
  for (int p = 0; p < plane; ++p) {
    double m = logits[p];
    for (int ch = 1; ch < c; ++ch) m = std::max(m, logits[ch * plane + p]);
    double z = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double e = std::exp(logits[ch * plane + p] - m);
      out[ch * plane + p] = e;
      z += e;
    }
    for (int ch = 0; ch < c; ++ch) out[ch * plane + p] /= z;
  }
  if (track(tape, {&logits})) {
    out.set_requires_grad();
    Tensor xin = logits, ot = out;
    tape->record([xin, ot, c, plane]() mutable {
      double* gx = xin.grad();
      const double* go = ot.grad();
      const double* p = ot.data();
      for (int px = 0; px < plane; ++px) {
        double dot = 0.0;
        for (int ch = 0; ch < c; ++ch) dot += go[ch * plane + px] * p[ch * plane + px];
        for (int ch = 0; ch < c; ++ch)
          gx[ch * plane + px] += p[ch * plane + px] * (go[ch * plane + px] - dot);
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape* tape, const Tensor& probs, const Tensor& target) {
  check_chw(probs, "cross_entropy");
  if (target.shape() != probs.shape())
    throw std::invalid_argument("cross_entropy: target shape mismatch");
  const int c = probs.dim(0), plane = probs.dim(1) * probs.dim(2);
  for (int p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double y = target[ch * plane + p];
      if (y != 0.0 && y != 1.0)
        throw std::invalid_argument("cross_entropy: target is not one-hot");
      s += y;
    }
    if (s != 1.0)
      throw std::invalid_argument("cross_entropy: target pixel does not sum to 1");
  }
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i)
    if (target[i] == 1.0) acc -= std::log(std::max(probs[i], kLogFloor));
  Tensor out = Tensor::scalar(acc / plane);
  if (track(tape, {&probs})) {
    out.set_requires_grad();
    Tensor pin = probs, tin = target, ot = out;
    tape->record([pin, tin, ot, plane]() mutable {
      const double g = ot.grad()[0];
      double* gp = pin.grad();
      for (int i = 0; i < pin.size(); ++i)
        if (tin[i] == 1.0 && pin[i] > kLogFloor) gp[i] -= g / (pin[i] * plane);
    });
  }
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (track(tape, {&a, &b})) {
    out.set_requires_grad();
    Tensor ai = a, bi = b, ot = out;
    tape->record([ai, bi, ot]() mutable {
      const double* go = ot.grad();
      if (ai.requires_grad())
        for (int i = 0; i < ai.size(); ++i) ai.grad()[i] += go[i];
      if (bi.requires_grad())
        for (int i = 0; i < bi.size(); ++i) bi.grad()[i] += go[i];
    });
  }
  return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (track(tape, {&a, &b})) {
    out.set_requires_grad();
    Tensor ai = a, bi = b, ot = out;
    tape->record([ai, bi, ot]() mutable {
      const double* go = ot.grad();
      if (ai.requires_grad())
        for (int i = 0; i < ai.size(); ++i) ai.grad()[i] += go[i] * bi[i];
      if (bi.requires_grad())
        for (int i = 0; i < bi.size(); ++i) bi.grad()[i] += go[i] * ai[i];
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& x, double k) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out[i] = k * x[i];
  if (track(tape, {&x})) {
    out.set_requires_grad();
    Tensor xin = x, ot = out;
    tape->record([xin, ot, k]() mutable {
      const double* go = ot.grad();
      for (int i = 0; i < xin.size(); ++i) xin.grad()[i] += k * go[i];
    });
  }
  return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) acc += x[i];
  Tensor out = Tensor::scalar(acc);
  if (track(tape, {&x})) {
    out.set_requires_grad();
    Tensor xin = x, ot = out;
    tape->record([xin, ot]() mutable {
      const double g = ot.grad()[0];
      for (int i = 0; i < xin.size(); ++i) xin.grad()[i] += g;
    });
  }
  return out;
}

Tensor weighted_sum(Tape* tape, const Tensor& weights,
                    const std::vector<Tensor>& scalars) {
  if (weights.size() != static_cast<int>(scalars.size()))
    throw std::invalid_argument("weighted_sum: weight/scalar count mismatch");
  double acc = 0.0;
  for (size_t k = 0; k < scalars.size(); ++k) {
    if (scalars[k].size() != 1)
      throw std::invalid_argument("weighted_sum: operands must be scalars");
    acc += weights[static_cast<int>(k)] * scalars[k].item();
  }
  Tensor out = Tensor::scalar(acc);
  bool any = weights.requires_grad();
  for (const Tensor& s : scalars) any = any || s.requires_grad();
  if (tape && any) {
    out.set_requires_grad();
    Tensor wt = weights, ot = out;
    std::vector<Tensor> ss = scalars;
    tape->record([wt, ss, ot]() mutable {
      const double g = ot.grad()[0];
      for (size_t k = 0; k < ss.size(); ++k) {
        if (wt.requires_grad()) wt.grad()[static_cast<int>(k)] += g * ss[k].item();
        if (ss[k].requires_grad()) ss[k].grad()[0] += g * wt[static_cast<int>(k)];
      }
    });
  }
  return out;
}

}  // namespace seu
