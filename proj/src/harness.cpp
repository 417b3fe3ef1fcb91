#include "seu/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "seu/checkpoint.hpp"

namespace seu {

namespace {

using json = nlohmann::json;

struct AdamState {
  std::vector<double> m, v;
};

bool decays(const std::string& name) {
  // sigma latents and the loss-weight logits are excluded from weight decay
  return name.find("sigma") == std::string::npos && name != "eta_raw";
}

std::string norm_dump(const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ostringstream os;
  for (const auto& [name, t] : params) {
    double n2 = 0.0;
    for (int i = 0; i < t.size(); ++i) n2 += t[i] * t[i];
    os << "  " << name << " |.|=" << std::sqrt(n2) << "\n";
  }
  return os.str();
}

Tensor crop(const Tensor& t, int h, int w) {
  if (t.dim(1) == h && t.dim(2) == w) return t;
  const int c = t.dim(0);
  Tensor out = Tensor::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[(ch * h + y) * w + x] = t[(ch * t.dim(1) + y) * t.dim(2) + x];
  return out;
}

std::vector<std::vector<SigmaInterval>> resolve_schedule(const ExperimentConfig& cfg) {
  auto sched = default_sigma_schedule(cfg.depth(), cfg.gamma);
  for (const auto& [layer, iv] : cfg.sigma_bounds) {
    if (layer < 0 || layer >= static_cast<int>(sched.size()))
      throw ConfigError("config: sigma_bounds layer index " +
                        std::to_string(layer) + " out of range (have " +
                        std::to_string(sched.size()) + " conv layers)");
    sched[static_cast<size_t>(layer)] = iv;
  }
  return sched;
}

}  // namespace

int thread_cap() {
  const char* env = std::getenv("SE_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

std::vector<std::pair<std::string, Tensor>> Model::parameters() const {
  if (seunet) return seunet->parameters();
  return cnn->parameters();
}

Model build_model(const ExperimentConfig& cfg) {
  cfg.validate();
  Model m;
  m.config = cfg;
  std::mt19937 rng(cfg.seed);
  if (cfg.model == "seunet") {
    SEUNetConfig sc;
    sc.gamma = cfg.gamma;
    sc.order = cfg.order;
    sc.in_channels = cfg.in_channels;
    sc.classes = cfg.classes;
    sc.channels = cfg.channels;
    sc.sigma_mode = sigma_mode_from_string(cfg.sigma_mode);
    sc.layer_intervals = resolve_schedule(cfg);
    m.seunet = std::make_shared<SEUNet>(sc, rng);
  } else {
    PlainUNetConfig pc;
    pc.in_channels = cfg.in_channels;
    pc.classes = cfg.classes;
    pc.channels = cfg.channels;
    m.cnn = std::make_shared<PlainUNet>(pc, rng);
  }
  return m;
}

TrainLog train_model(Model& model, const Dataset& data) {
  auto params = model.parameters();
  std::vector<AdamState> state(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    state[i].m.assign(static_cast<size_t>(params[i].second.size()), 0.0);
    state[i].v.assign(static_cast<size_t>(params[i].second.size()), 0.0);
  }
  const ExperimentConfig& cfg = model.config;
  const int lr_drop_epoch = std::max(1, (cfg.epochs * 4) / 5);
  std::mt19937 shuffle_rng(cfg.seed + 0x9e3779b9u);
  std::vector<size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  TrainLog log;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch >= lr_drop_epoch ? cfg.lr * 0.1 : cfg.lr;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      for (auto& [name, t] : params) t.zero_grad();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const SyntheticSample& s = data.train[order[i]];
        Tensor target = one_hot(s.mask, s.h, s.w, data.classes);
        Tape tape;
        Tensor loss;
        if (model.is_seunet()) {
          SEUNetOutput out = model.seunet->forward(&tape, s.image);
          loss = model.seunet->combined_loss(&tape, out.probs, target);
        } else {
          PlainUNet::Output out = model.cnn->forward(&tape, s.image);
          loss = model.cnn->loss(&tape, out.probs, target);
        }
        if (!std::isfinite(loss.item()))
          throw NumericError("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + "\n" + norm_dump(params));
        batch_loss += loss.item();
        tape.backward(loss);
      }
      const double inv_n = 1.0 / static_cast<double>(end - start);
      ++step;
      for (size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p].second;
        const bool wd = decays(params[p].first);
        for (int i = 0; i < t.size(); ++i) {
          double g = t.grad()[i] * inv_n;
          if (wd) g += cfg.weight_decay * t[i];
          state[p].m[static_cast<size_t>(i)] =
              cfg.beta1 * state[p].m[static_cast<size_t>(i)] + (1.0 - cfg.beta1) * g;
          state[p].v[static_cast<size_t>(i)] =
              cfg.beta2 * state[p].v[static_cast<size_t>(i)] + (1.0 - cfg.beta2) * g * g;
          const double mhat = state[p].m[static_cast<size_t>(i)] /
                              (1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
          const double vhat = state[p].v[static_cast<size_t>(i)] /
                              (1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
          t[i] -= lr * mhat / (std::sqrt(vhat) + 1e-8);
        }
      }
      epoch_loss += batch_loss * inv_n;
      ++batches;
    }
    log.epoch_loss.push_back(epoch_loss / std::max(1, batches));

    if (model.is_seunet()) {
      Tensor w = eta_tilde(nullptr, model.seunet->eta_raw());
      log.epoch_eta.emplace_back(w.data(), w.data() + w.size());
      auto sig = model.seunet->sigma_values();
      if (model.seunet->config().sigma_mode == SigmaMode::kConstrained) {
        const auto& banks = model.seunet->banks();
        for (size_t l = 0; l < banks.size(); ++l)
          for (size_t k = 0; k < sig[l].size(); ++k) {
            const SigmaParam& sp = banks[l].sigmas()[k];
            if (!(sig[l][k] > sp.lower() && sig[l][k] < sp.upper()))
              throw NumericError("sigma left its interval at epoch " +
                                 std::to_string(epoch) + ", layer " +
                                 std::to_string(l));
          }
      }
      log.epoch_sigma.push_back(std::move(sig));
    }
  }
  return log;
}

void save_model(const Model& model, const std::string& path) {
  json meta;
  meta["format_version"] = 1;
  meta["config"] = config_to_text(model.config);
  if (model.is_seunet()) {
    meta["sigma"] = model.seunet->sigma_values();
    Tensor w = eta_tilde(nullptr, model.seunet->eta_raw());
    meta["eta_tilde"] = std::vector<double>(w.data(), w.data() + w.size());
    meta["equiv_protocol"] = "trunk features; scale-matched variant uses per-layer sigma*s";
  }
  save_checkpoint(path, meta.dump(), const_cast<Model&>(model).parameters());
}

Model load_model(const std::string& path) {
  Checkpoint ckpt = read_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.metadata_json);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata JSON: ") + e.what());
  }
  if (!meta.contains("config"))
    throw FormatError("checkpoint: metadata lacks config echo");
  Model model = build_model(parse_config_text(meta["config"].get<std::string>()));
  load_into(ckpt, model.parameters());
  return model;
}

Tensor pad_to_multiple(const Tensor& image, int divisor) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int ph = (h + divisor - 1) / divisor * divisor;
  const int pw = (w + divisor - 1) / divisor * divisor;
  if (ph == h && pw == w) return image;
  Tensor out = Tensor::zeros({c, ph, pw});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        out[(ch * ph + y) * pw + x] =
            image[(ch * h + std::min(y, h - 1)) * w + std::min(x, w - 1)];
  return out;
}

std::vector<Tensor> predict_probability_maps(const Model& model,
                                             const Tensor& image) {
  const int div = 1 << model.config.depth();
  const int h = image.dim(1), w = image.dim(2);
  Tensor padded = pad_to_multiple(image, div);
  std::vector<Tensor> probs;
  if (model.is_seunet()) {
    SEUNetOutput out = model.seunet->forward(nullptr, padded);
    for (Tensor& p : out.probs) probs.push_back(crop(p, h, w));
  } else {
    probs.push_back(crop(model.cnn->forward(nullptr, padded).probs, h, w));
  }
  return probs;
}

std::vector<ScaleMetrics> evaluate_multiscale(
    const Model& model, const std::vector<SyntheticSample>& test,
    const std::vector<double>& scales, int classes) {
  std::vector<ScaleMetrics> table(scales.size());
  auto eval_scale = [&](size_t si) {
    const double s = scales[si];
    ScaleMetrics row;
    row.scale = s;
    row.per_head.assign(static_cast<size_t>(model.head_count()), 0.0);
    for (const SyntheticSample& sample : test) {
      Tensor img = s == 1.0 ? sample.image : rescale(sample.image, s);
      LabelMap truth;
      if (s == 1.0) {
        truth = {sample.h, sample.w, sample.mask};
      } else {
        truth.labels = rescale_labels(sample.mask, sample.h, sample.w, s,
                                      &truth.h, &truth.w);
      }
      std::vector<Tensor> probs = predict_probability_maps(model, img);
      for (size_t k = 0; k < probs.size(); ++k)
        row.per_head[k] += miou(head_labels(probs[k]), truth, classes).mean;
      row.arithm += miou(fuse_arithm(probs), truth, classes).mean;
      row.pdist += miou(fuse_pdist(probs), truth, classes).mean;
      row.pens += miou(fuse_pens(probs), truth, classes).mean;
    }
    const double inv = 1.0 / static_cast<double>(test.size());
    for (double& v : row.per_head) v *= inv;
    row.arithm *= inv;
    row.pdist *= inv;
    row.pens *= inv;
    table[si] = std::move(row);
  };

  const int workers = std::min<int>(thread_cap(), static_cast<int>(scales.size()));
  if (workers <= 1) {
    for (size_t si = 0; si < scales.size(); ++si) eval_scale(si);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&]() {
        for (size_t si = next.fetch_add(1); si < scales.size();
             si = next.fetch_add(1))
          eval_scale(si);
      });
    for (std::thread& t : pool) t.join();
  }
  return table;
}

EquivarianceReport model_equivariance(const Model& model,
                                      const std::vector<SyntheticSample>& images,
                                      const std::vector<double>& scales) {
  const int div = 1 << model.config.depth();
  auto trunk = [&](const Tensor& img, double sigma_scale) {
    const int h = img.dim(1), w = img.dim(2);
    Tensor padded = pad_to_multiple(img, div);
    Tensor feats;
    if (model.is_seunet()) {
      SEUNetOutput out = model.seunet->forward(nullptr, padded, sigma_scale);
      feats = concat_channels(nullptr, out.trunk);
    } else {
      feats = model.cnn->forward(nullptr, padded).trunk;
    }
    return crop(feats, h, w);
  };

  std::vector<Tensor> imgs;
  for (const SyntheticSample& s : images) imgs.push_back(s.image);

  EquivarianceReport report;
  for (double s : scales) {
    FeatureExtractor phi = [&](const Tensor& f) { return trunk(f, 1.0); };
    FeatureExtractor phi_scaled = [&, s](const Tensor& f) {
      return trunk(f, model.is_seunet() ? s : 1.0);
    };
    report.scale_factors.push_back(s);
    report.per_scale_error.push_back(equivariance_error(phi, phi_scaled, imgs, s));
  }
  return report;
}

}  // namespace seu
