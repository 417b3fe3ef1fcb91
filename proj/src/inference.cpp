#include "seu/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace seu {

namespace {

void check_maps(const std::vector<Tensor>& maps, int min_classes) {
  if (maps.empty()) throw std::invalid_argument("fuse: no probability maps");
  const Tensor& m0 = maps[0];
  if (m0.ndim() != 3) throw std::invalid_argument("fuse: maps must be [C,H,W]");
  if (m0.dim(0) < min_classes)
    throw std::invalid_argument("fuse: needs at least " +
                                std::to_string(min_classes) +
                                " classes, got " + std::to_string(m0.dim(0)));
  for (const Tensor& m : maps)
    if (m.shape() != m0.shape())
      throw std::invalid_argument("fuse: probability map shapes differ");
}

// top1 - top2 margin of one pixel's channel vector (input left unmodified).
double margin(const Tensor& m, int c, int plane, int p) {
  double m1 = -std::numeric_limits<double>::infinity(), m2 = m1;
  for (int ch = 0; ch < c; ++ch) {
    const double v = m[ch * plane + p];
    if (v > m1) {
      m2 = m1;
      m1 = v;
    } else if (v > m2) {
      m2 = v;
    }
  }
  return m1 - m2;
}

int argmax_channel(const double* v, int c, int stride) {
  int best = 0;
  for (int ch = 1; ch < c; ++ch)
    if (v[ch * stride] > v[best * stride]) best = ch;
  return best;
}

}  // namespace

FuseStrategy fuse_strategy_from_string(const std::string& s) {
  if (s == "arithm") return FuseStrategy::kArithm;
  if (s == "p_dist") return FuseStrategy::kPDist;
  if (s == "p_ens") return FuseStrategy::kPEns;
  throw std::invalid_argument("unknown fusion strategy: " + s);
}

LabelMap fuse_arithm(const std::vector<Tensor>& maps) {
  check_maps(maps, 1);
  const int c = maps[0].dim(0), h = maps[0].dim(1), w = maps[0].dim(2);
  const int plane = h * w;
  LabelMap out{h, w, std::vector<int>(static_cast<size_t>(plane))};
  std::vector<double> acc(static_cast<size_t>(c));
  for (int p = 0; p < plane; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (const Tensor& m : maps) s += m[ch * plane + p];
      acc[static_cast<size_t>(ch)] = s;
    }
    out.labels[static_cast<size_t>(p)] = argmax_channel(acc.data(), c, 1);
  }
  return out;
}

LabelMap fuse_pdist(const std::vector<Tensor>& maps) {
  check_maps(maps, 2);
  const int c = maps[0].dim(0), h = maps[0].dim(1), w = maps[0].dim(2);
  const int plane = h * w;
  const int gamma = static_cast<int>(maps.size());
  LabelMap out{h, w, std::vector<int>(static_cast<size_t>(plane))};
  for (int p = 0; p < plane; ++p) {
    int kstar = 0;
    double best = -1.0;
    for (int k = 0; k < gamma; ++k) {
      const double d = margin(maps[static_cast<size_t>(k)], c, plane, p);
      if (d > best) {
        best = d;
        kstar = k;
      }
    }
    out.labels[static_cast<size_t>(p)] =
        argmax_channel(maps[static_cast<size_t>(kstar)].data() + p, c, plane);
  }
  return out;
}

LabelMap fuse_pens(const std::vector<Tensor>& maps) {
  check_maps(maps, 2);
  const int c = maps[0].dim(0), h = maps[0].dim(1), w = maps[0].dim(2);
  const int plane = h * w;
  const int gamma = static_cast<int>(maps.size());
  LabelMap out{h, w, std::vector<int>(static_cast<size_t>(plane))};
  std::vector<double> wk(static_cast<size_t>(gamma));
  std::vector<double> acc(static_cast<size_t>(c));
  for (int p = 0; p < plane; ++p) {
    double z = 0.0;
    for (int k = 0; k < gamma; ++k) {
      wk[static_cast<size_t>(k)] =
          std::exp(margin(maps[static_cast<size_t>(k)], c, plane, p));
      z += wk[static_cast<size_t>(k)];
    }
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int k = 0; k < gamma; ++k)
        s += wk[static_cast<size_t>(k)] * maps[static_cast<size_t>(k)][ch * plane + p];
      acc[static_cast<size_t>(ch)] = s / z;
    }
    out.labels[static_cast<size_t>(p)] = argmax_channel(acc.data(), c, 1);
  }
  return out;
}

LabelMap fuse(const std::vector<Tensor>& maps, FuseStrategy strategy) {
  switch (strategy) {
    case FuseStrategy::kArithm: return fuse_arithm(maps);
    case FuseStrategy::kPDist: return fuse_pdist(maps);
    default: return fuse_pens(maps);
  }
}

LabelMap head_labels(const Tensor& map) {
  return fuse_arithm({map});
}

IoUResult miou(const LabelMap& pred, const LabelMap& truth, int num_classes) {
  if (pred.h != truth.h || pred.w != truth.w)
    throw std::invalid_argument("miou: label map sizes differ");
  std::vector<long long> inter(static_cast<size_t>(num_classes), 0);
  std::vector<long long> uni(static_cast<size_t>(num_classes), 0);
  for (size_t i = 0; i < pred.labels.size(); ++i) {
    const int p = pred.labels[i], t = truth.labels[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
      throw std::invalid_argument("miou: label out of range [0, " +
                                  std::to_string(num_classes) + ")");
    if (p == t) {
      ++inter[static_cast<size_t>(p)];
      ++uni[static_cast<size_t>(p)];
    } else {
      ++uni[static_cast<size_t>(p)];
      ++uni[static_cast<size_t>(t)];
    }
  }
  IoUResult r;
  r.per_class.assign(static_cast<size_t>(num_classes),
                     std::numeric_limits<double>::quiet_NaN());
  r.present.assign(static_cast<size_t>(num_classes), false);
  double acc = 0.0;
  int n = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    if (uni[static_cast<size_t>(cls)] == 0) continue;  // absent from both
    r.present[static_cast<size_t>(cls)] = true;
    r.per_class[static_cast<size_t>(cls)] =
        static_cast<double>(inter[static_cast<size_t>(cls)]) /
        static_cast<double>(uni[static_cast<size_t>(cls)]);
    acc += r.per_class[static_cast<size_t>(cls)];
    ++n;
  }
  r.mean = n > 0 ? acc / n : 0.0;
  return r;
}

}  // namespace seu
