// Command-line front end: train / eval / equiv / filters / gen-data.
// Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seu/harness.hpp"
#include "seu/scale_space.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace seu;

namespace {

std::vector<double> parse_csv_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number in list: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

// Binary PGM. Labels are written raw (maxval = classes-1 when > 1);
// float images are quantized onto 0..255.
void write_pgm(const std::string& path, const std::vector<int>& values, int h,
               int w, int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "P5\n" << w << " " << h << "\n" << maxval << "\n";
  for (int v : values) out.put(static_cast<char>(std::min(v, 255)));
}

void write_image_pgm(const std::string& path, const Tensor& image) {
  const int h = image.dim(1), w = image.dim(2);
  std::vector<int> px(static_cast<size_t>(h) * w);
  for (int i = 0; i < h * w; ++i)
    px[static_cast<size_t>(i)] =
        static_cast<int>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  write_pgm(path, px, h, w, 255);
}

void write_labels_pgm(const std::string& path, const LabelMap& map, int classes) {
  write_pgm(path, map.labels, map.h, map.w, std::max(1, classes - 1));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string scale_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", s);
  std::string t(buf);
  for (char& c : t)
    if (c == '.') c = 'p';
  return t;
}

int run_train(const std::string& config_path) {
  ExperimentConfig cfg = load_config(config_path);
  std::cout << "training " << cfg.model << " on " << cfg.dataset.generator
            << " (seed " << cfg.seed << ")\n";
  Dataset data = generate_dataset(cfg.dataset, cfg.seed);
  Model model = build_model(cfg);
  TrainLog log = train_model(model, data);
  for (size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::cout << "epoch " << e << " loss " << log.epoch_loss[e] << "\n";
  save_model(model, cfg.checkpoint_out);
  std::cout << "checkpoint written to " << cfg.checkpoint_out << "\n";

  // CSV series for external plotting
  std::ostringstream train_csv;
  train_csv << "epoch,loss";
  const size_t heads = log.epoch_eta.empty() ? 0 : log.epoch_eta[0].size();
  for (size_t k = 0; k < heads; ++k) train_csv << ",eta_" << k;
  train_csv << "\n";
  for (size_t e = 0; e < log.epoch_loss.size(); ++e) {
    train_csv << e << "," << log.epoch_loss[e];
    for (size_t k = 0; k < heads; ++k) train_csv << "," << log.epoch_eta[e][k];
    train_csv << "\n";
  }
  write_text(cfg.checkpoint_out + ".train.csv", train_csv.str());

  if (!log.epoch_sigma.empty()) {
    std::ostringstream sig_csv;
    sig_csv << "epoch,layer,group,sigma\n";
    for (size_t e = 0; e < log.epoch_sigma.size(); ++e)
      for (size_t l = 0; l < log.epoch_sigma[e].size(); ++l)
        for (size_t k = 0; k < log.epoch_sigma[e][l].size(); ++k)
          sig_csv << e << "," << l << "," << k << ","
                  << log.epoch_sigma[e][l][k] << "\n";
    write_text(cfg.checkpoint_out + ".sigma.csv", sig_csv.str());
  }
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& fuse_arg,
             const std::string& scales_csv, const std::string& out_dir) {
  Model model = load_model(ckpt_path);
  const ExperimentConfig& cfg = model.config;
  Dataset data = generate_dataset(cfg.dataset, cfg.seed);
  std::vector<double> scales = !scales_csv.empty() ? parse_csv_doubles(scales_csv)
                               : !cfg.test_scales.empty() ? cfg.test_scales
                                                          : default_test_scales();
  for (double s : scales)
    if (!(s > 0.0)) throw ConfigError("test scales must be positive");

  int head_index = -1;
  FuseStrategy strategy = FuseStrategy::kArithm;
  if (fuse_arg.rfind("head:", 0) == 0) {
    try {
      head_index = std::stoi(fuse_arg.substr(5));
    } catch (const std::exception&) {
      throw ConfigError("bad head index in --fuse " + fuse_arg);
    }
    if (head_index < 0 || head_index >= model.head_count())
      throw ConfigError("--fuse head index out of range [0, " +
                        std::to_string(model.head_count()) + ")");
  } else {
    try {
      strategy = fuse_strategy_from_string(fuse_arg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  fs::create_directories(out_dir);
  std::vector<ScaleMetrics> table =
      evaluate_multiscale(model, data.test, scales, data.classes);

  // label maps for the selected strategy
  for (double s : scales) {
    for (size_t i = 0; i < data.test.size(); ++i) {
      const SyntheticSample& sample = data.test[i];
      Tensor img = s == 1.0 ? sample.image : rescale(sample.image, s);
      std::vector<Tensor> probs = predict_probability_maps(model, img);
      LabelMap lm = head_index >= 0
                        ? head_labels(probs[static_cast<size_t>(head_index)])
                        : fuse(probs, strategy);
      write_labels_pgm(out_dir + "/labels_s" + scale_tag(s) + "_" +
                           std::to_string(i) + ".pgm",
                       lm, data.classes);
    }
  }

  json doc;
  doc["schema_version"] = 1;
  doc["checkpoint"] = ckpt_path;
  doc["fuse"] = fuse_arg;
  doc["classes"] = data.classes;
  double mean_arithm = 0, mean_pdist = 0, mean_pens = 0;
  for (const ScaleMetrics& row : table) {
    json r;
    r["scale"] = row.scale;
    r["per_head"] = row.per_head;
    r["arithm"] = row.arithm;
    r["p_dist"] = row.pdist;
    r["p_ens"] = row.pens;
    doc["scales"].push_back(r);
    mean_arithm += row.arithm;
    mean_pdist += row.pdist;
    mean_pens += row.pens;
  }
  const double inv = 1.0 / static_cast<double>(table.size());
  doc["mean_over_scales"] = {{"arithm", mean_arithm * inv},
                             {"p_dist", mean_pdist * inv},
                             {"p_ens", mean_pens * inv}};
  // soft ordering report, not an assertion
  doc["fusion_ordering_pens_ge_pdist_ge_arithm"] =
      mean_pens * inv >= mean_pdist * inv && mean_pdist * inv >= mean_arithm * inv;
  write_text(out_dir + "/metrics.json", doc.dump(2) + "\n");
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int run_equiv(const std::string& ckpt_path, const std::string& scales_csv,
              const std::string& out_dir) {
  Model model = load_model(ckpt_path);
  const ExperimentConfig& cfg = model.config;
  Dataset data = generate_dataset(cfg.dataset, cfg.seed);
  std::vector<double> scales = !scales_csv.empty() ? parse_csv_doubles(scales_csv)
                               : !cfg.test_scales.empty() ? cfg.test_scales
                                                          : default_test_scales();
  const size_t probe_count = std::min<size_t>(data.test.size(), 10);
  std::vector<SyntheticSample> probe(data.test.begin(),
                                     data.test.begin() + probe_count);
  fs::create_directories(out_dir);

  EquivarianceReport report = model_equivariance(model, probe, scales);

  json doc;
  doc["schema_version"] = 1;
  doc["checkpoint"] = ckpt_path;
  doc["scale_factors"] = report.scale_factors;
  for (const ScaleError& e : report.per_scale_error) {
    doc["delta"].push_back(e.error);
    doc["skipped"].push_back(e.skipped);
  }

  if (model.is_seunet()) {
    // first-layer filter pair matrices, one per scale
    std::vector<Tensor> filters = model.seunet->banks()[0].realize_filters(nullptr);
    std::vector<Tensor> images;
    for (const SyntheticSample& s : probe) images.push_back(s.image);
    for (double s : scales) {
      PairMatrix m = pair_error_matrix(filters, images, s);
      json jm;
      jm["scale"] = s;
      jm["errors"] = m.errors;
      jm["argmin"] = {m.argmin_k, m.argmin_kp};
      doc["pair_matrices"].push_back(jm);
      std::ostringstream csv;
      for (int k = 0; k < m.gamma; ++k) {
        for (int kp = 0; kp < m.gamma; ++kp)
          csv << (kp ? "," : "") << m.at(k, kp);
        csv << "\n";
      }
      write_text(out_dir + "/pair_matrix_s" + scale_tag(s) + ".csv", csv.str());
    }
  }
  write_text(out_dir + "/equivariance.json", doc.dump(2) + "\n");
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int run_filters(const std::string& sigmas_csv, int order,
                const std::string& out_dir) {
  const std::vector<double> sigmas = parse_csv_doubles(sigmas_csv);
  if (order < 0 || order > 4) throw ConfigError("--order must be in 0..4");
  for (double s : sigmas)
    if (!(s > 0.0)) throw ConfigError("--sigma values must be positive");
  fs::create_directories(out_dir);
  for (double s : sigmas) {
    GaussianBasis basis = build_basis(s, order);
    for (const auto& [ij, kern] : basis.kernels) {
      std::ostringstream csv;
      for (int y = 0; y < basis.size; ++y) {
        for (int x = 0; x < basis.size; ++x)
          csv << (x ? "," : "")
              << kern[static_cast<size_t>(y * basis.size + x)];
        csv << "\n";
      }
      write_text(out_dir + "/kernel_s" + scale_tag(s) + "_d" +
                     std::to_string(ij.first) + std::to_string(ij.second) +
                     ".csv",
                 csv.str());
    }
  }
  std::cout << "wrote kernel grids for " << sigmas.size() << " sigma value(s) to "
            << out_dir << "\n";
  return 0;
}

int run_gen_data(const std::string& spec_name, unsigned seed, int size,
                 int train_n, int test_n, int classes,
                 const std::string& out_dir) {
  DatasetSpec spec;
  spec.generator = spec_name;
  spec.image_size = size;
  spec.train_samples = train_n;
  spec.test_samples = test_n;
  spec.classes = classes;
  Dataset data = generate_dataset(spec, seed);
  fs::create_directories(out_dir + "/train");
  fs::create_directories(out_dir + "/test");
  auto dump = [&](const std::vector<SyntheticSample>& set, const std::string& d) {
    for (size_t i = 0; i < set.size(); ++i) {
      write_image_pgm(d + "/image_" + std::to_string(i) + ".pgm", set[i].image);
      write_pgm(d + "/mask_" + std::to_string(i) + ".pgm", set[i].mask,
                set[i].h, set[i].w, std::max(1, data.classes - 1));
    }
  };
  dump(data.train, out_dir + "/train");
  dump(data.test, out_dir + "/test");
  std::cout << "wrote " << data.train.size() << " train and " << data.test.size()
            << " test samples to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scale-equivariant segmentation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* train = app.add_subcommand("train", "train a model from a config");
  train->add_option("--config", config_path, "config file path")->required();

  std::string ckpt_path, fuse_arg = "p_ens", scales_csv, eval_out = "eval_out";
  CLI::App* eval = app.add_subcommand("eval", "multi-scale evaluation");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  eval->add_option("--fuse", fuse_arg, "arithm|p_dist|p_ens|head:<k>");
  eval->add_option("--scales", scales_csv, "comma-separated test scales");
  eval->add_option("--out", eval_out, "output directory");

  std::string eq_ckpt, eq_scales, eq_out = "equiv_out";
  CLI::App* equiv = app.add_subcommand("equiv", "equivariance-error report");
  equiv->add_option("--checkpoint", eq_ckpt, "checkpoint path")->required();
  equiv->add_option("--scales", eq_scales, "comma-separated scales");
  equiv->add_option("--out", eq_out, "output directory");

  std::string f_sigmas, f_out = "filters_out";
  int f_order = 1;
  CLI::App* filters = app.add_subcommand("filters", "dump derivative kernels as CSV");
  filters->add_option("--sigma", f_sigmas, "comma-separated sigma values")->required();
  filters->add_option("--order", f_order, "max derivative order (0..4)");
  filters->add_option("--out", f_out, "output directory");

  std::string g_spec = "regions", g_out = "data_out";
  unsigned g_seed = 0;
  int g_size = 64, g_train = 200, g_test = 50, g_classes = 5;
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset as PGM");
  gen->add_option("--spec", g_spec, "generator: blobs|regions")->required();
  gen->add_option("--seed", g_seed, "random seed")->required();
  gen->add_option("--out", g_out, "output directory")->required();
  gen->add_option("--size", g_size, "image side length");
  gen->add_option("--train", g_train, "training sample count");
  gen->add_option("--test", g_test, "test sample count");
  gen->add_option("--classes", g_classes, "class count (regions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return run_train(config_path);
    if (*eval) return run_eval(ckpt_path, fuse_arg, scales_csv, eval_out);
    if (*equiv) return run_equiv(eq_ckpt, eq_scales, eq_out);
    if (*filters) return run_filters(f_sigmas, f_order, f_out);
    if (*gen) return run_gen_data(g_spec, g_seed, g_size, g_train, g_test,
                                  g_classes, g_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
