#include "seu/data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "seu/config.hpp"

namespace seu {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Narrow-band texture whose class identity is the pattern *type*
// (orientation / structure), not its absolute frequency. Each Voronoi cell
// draws its own wavelength, so one image contains the same pattern at many
// characteristic sizes, and a rescaled image stays classifiable: rescaling
// changes the apparent wavelength but never the orientation or structure.
struct Texture {
  int kind;            // 0 horiz, 1 vert, 2 diag, 3 anti-diag, 4 checker
  double k;            // angular frequency 2*pi/wavelength
  double p1, p2;       // random phases

  Texture(int cls, double wl, std::mt19937& rng)
      : kind(cls % 5), k(2.0 * kPi / wl) {
    std::uniform_real_distribution<double> uang(0.0, 2.0 * kPi);
    p1 = uang(rng);
    p2 = uang(rng);
  }

  double at(double x, double y) const {
    constexpr double r = 0.70710678118654752440;  // 1/sqrt(2)
    switch (kind) {
      case 0: return std::cos(k * y + p1);
      case 1: return std::cos(k * x + p1);
      case 2: return std::cos(k * (x + y) * r + p1);
      case 3: return std::cos(k * (x - y) * r + p1);
      default: return std::cos(k * x + p1) * std::cos(k * y + p2);
    }
  }
};

SyntheticSample make_blobs(int size, std::mt19937& rng) {
  SyntheticSample s;
  s.h = s.w = size;
  s.mask.assign(static_cast<size_t>(size) * size, 0);
  s.image = Tensor::zeros({1, size, size});

  std::uniform_real_distribution<double> upos(0.0, size);
  std::uniform_real_distribution<double> urad(2.0, 0.14 * size);

  // Resample until the foreground fraction lands in [0.1, 0.5]; blob count
  // and radii are tuned so the first draw almost always does.
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::vector<double> field(static_cast<size_t>(size) * size, 0.0);
    const int nblobs = 5 + static_cast<int>(rng() % 6);
    for (int b = 0; b < nblobs; ++b) {
      const double cx = upos(rng), cy = upos(rng), r = urad(rng);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          field[static_cast<size_t>(y) * size + x] =
              std::max(field[static_cast<size_t>(y) * size + x],
                       std::exp(-d2 / (2.0 * r * r)));
        }
    }
    int fg = 0;
    for (size_t i = 0; i < field.size(); ++i) {
      s.mask[i] = field[i] > 0.5 ? 1 : 0;
      fg += s.mask[i];
    }
    const double frac = static_cast<double>(fg) / static_cast<double>(field.size());
    if (frac < 0.1 || frac > 0.5) continue;
    for (size_t i = 0; i < field.size(); ++i)
      s.image[static_cast<int>(i)] = std::clamp(0.15 + 0.7 * field[i], 0.0, 1.0);
    return s;
  }
  throw NumericError("blobs generator failed to hit the foreground-fraction band");
}

SyntheticSample make_regions(int size, int classes, std::mt19937& rng) {
  SyntheticSample s;
  s.h = s.w = size;
  s.mask.assign(static_cast<size_t>(size) * size, 0);

  // Voronoi layout; the first `classes` seeds carry one class each so every
  // class has a cell with probability ~1.
  std::uniform_real_distribution<double> upos(0.0, size);
  const int nseeds = classes + 5;
  std::vector<double> sx, sy;
  std::vector<int> scls;
  for (int i = 0; i < nseeds; ++i) {
    sx.push_back(upos(rng));
    sy.push_back(upos(rng));
    scls.push_back(i < classes ? i : static_cast<int>(rng() % classes));
  }
  std::vector<int> cells(static_cast<size_t>(size) * size, 0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      int best = 0;
      double bd = 1e30;
      for (int i = 0; i < nseeds; ++i) {
        const double d = (x - sx[static_cast<size_t>(i)]) * (x - sx[static_cast<size_t>(i)]) +
                         (y - sy[static_cast<size_t>(i)]) * (y - sy[static_cast<size_t>(i)]);
        if (d < bd) {
          bd = d;
          best = i;
        }
      }
      cells[static_cast<size_t>(y) * size + x] = best;
      s.mask[static_cast<size_t>(y) * size + x] = scls[static_cast<size_t>(best)];
    }

  // One texture per cell: the cell's class fixes the pattern type while the
  // wavelength is drawn per cell from [4, 12] px, so scale structure exists
  // within every image. The lower bound keeps the pattern band-limited after
  // a 0.5x test-time rescale.
  std::uniform_real_distribution<double> uwl(4.0, 12.0);
  std::vector<Texture> tex;
  for (int i = 0; i < nseeds; ++i)
    tex.emplace_back(scls[static_cast<size_t>(i)], uwl(rng), rng);
  s.image = Tensor::zeros({1, size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const int cell = cells[static_cast<size_t>(y) * size + x];
      const double v = 0.5 + 0.4 * tex[static_cast<size_t>(cell)].at(x, y);
      s.image[y * size + x] = std::clamp(v, 0.0, 1.0);
    }
  return s;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec, unsigned seed) {
  Dataset ds;
  std::mt19937 rng(seed);
  auto make = [&]() {
    if (spec.generator == "blobs") return make_blobs(spec.image_size, rng);
    if (spec.generator == "regions")
      return make_regions(spec.image_size, spec.classes, rng);
    throw ConfigError("unknown dataset generator: " + spec.generator);
  };
  ds.classes = spec.generator == "blobs" ? 2 : spec.classes;
  for (int i = 0; i < spec.train_samples; ++i) ds.train.push_back(make());
  for (int i = 0; i < spec.test_samples; ++i) ds.test.push_back(make());
  return ds;
}

Tensor one_hot(const std::vector<int>& mask, int h, int w, int classes) {
  Tensor t = Tensor::zeros({classes, h, w});
  const int plane = h * w;
  for (int p = 0; p < plane; ++p) {
    const int c = mask[static_cast<size_t>(p)];
    if (c < 0 || c >= classes)
      throw std::invalid_argument("one_hot: label " + std::to_string(c) +
                                  " out of range");
    t[c * plane + p] = 1.0;
  }
  return t;
}

}  // namespace seu
