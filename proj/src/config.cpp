#include "seu/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace seu {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

std::vector<double> default_test_scales() {
  std::vector<double> s;
  for (int k = 0; k <= 16; ++k) s.push_back(0.25 * std::pow(2.0, k / 4.0));
  return s;
}

void ExperimentConfig::validate() const {
  if (model != "seunet" && model != "cnn")
    throw ConfigError("config: model must be 'seunet' or 'cnn', got '" + model + "'");
  if (gamma < 1) throw ConfigError("config: gamma must be >= 1");
  if (order < 0 || order > 4) throw ConfigError("config: order must be in 0..4");
  if (channels.size() < 2) throw ConfigError("config: channels needs >= 2 levels");
  if (model == "seunet")
    for (int c : channels)
      if (c % gamma != 0)
        throw ConfigError("config: channel count " + std::to_string(c) +
                          " not divisible by gamma=" + std::to_string(gamma));
  if (classes < 2) throw ConfigError("config: classes must be >= 2");
  if (dataset.image_size % (1 << depth()) != 0)
    throw ConfigError("config: image_size " + std::to_string(dataset.image_size) +
                      " must be divisible by 2^depth = " +
                      std::to_string(1 << depth()));
  if (epochs < 1 || batch_size < 1)
    throw ConfigError("config: epochs and batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
  sigma_mode_from_string(sigma_mode);  // throws on bad value
  for (double s : test_scales)
    if (!(s > 0.0)) throw ConfigError("config: test scales must be positive");
  for (const auto& [layer, iv] : sigma_bounds) {
    if (static_cast<int>(iv.size()) != gamma)
      throw ConfigError("config: sigma_bounds." + std::to_string(layer) +
                        " must list gamma intervals");
    for (size_t k = 0; k < iv.size(); ++k) {
      if (!(iv[k].upper > iv[k].lower) || iv[k].lower < 0.0)
        throw ConfigError("config: sigma bounds need upper > lower >= 0");
      if (sigma_mode == "constrained" && k + 1 < iv.size() &&
          iv[k].upper > iv[k + 1].lower)
        throw ConfigError("config: constrained sigma intervals must be disjoint");
    }
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "seed") cfg.seed = static_cast<unsigned>(to_int(key, val));
    else if (key == "model") cfg.model = val;
    else if (key == "gamma") cfg.gamma = to_int(key, val);
    else if (key == "order") cfg.order = to_int(key, val);
    else if (key == "sigma_mode") cfg.sigma_mode = val;
    else if (key == "classes") cfg.classes = to_int(key, val);
    else if (key == "in_channels") cfg.in_channels = to_int(key, val);
    else if (key == "channels") {
      cfg.channels.clear();
      for (const std::string& c : split(val, ',')) cfg.channels.push_back(to_int(key, c));
    } else if (key == "generator") cfg.dataset.generator = val;
    else if (key == "image_size") cfg.dataset.image_size = to_int(key, val);
    else if (key == "train_samples") cfg.dataset.train_samples = to_int(key, val);
    else if (key == "test_samples") cfg.dataset.test_samples = to_int(key, val);
    else if (key == "epochs") cfg.epochs = to_int(key, val);
    else if (key == "batch_size") cfg.batch_size = to_int(key, val);
    else if (key == "lr") cfg.lr = to_double(key, val);
    else if (key == "beta1") cfg.beta1 = to_double(key, val);
    else if (key == "beta2") cfg.beta2 = to_double(key, val);
    else if (key == "weight_decay") cfg.weight_decay = to_double(key, val);
    else if (key == "checkpoint_out") cfg.checkpoint_out = val;
    else if (key == "test_scales") {
      cfg.test_scales.clear();
      for (const std::string& s : split(val, ',')) cfg.test_scales.push_back(to_double(key, s));
    } else if (key.rfind("sigma_bounds.", 0) == 0) {
      const int layer = to_int(key, key.substr(13));
      std::vector<SigmaInterval> iv;
      for (const std::string& pair : split(val, ',')) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos)
          throw ConfigError("config: sigma bounds entry '" + pair +
                            "' must be lower:upper");
        iv.push_back({to_double(key, trim(pair.substr(0, colon))),
                      to_double(key, trim(pair.substr(colon + 1)))});
      }
      cfg.sigma_bounds[layer] = std::move(iv);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  cfg.dataset.classes = cfg.classes;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << cfg.seed << "\n";
  os << "model = " << cfg.model << "\n";
  os << "gamma = " << cfg.gamma << "\n";
  os << "order = " << cfg.order << "\n";
  os << "sigma_mode = " << cfg.sigma_mode << "\n";
  os << "channels = ";
  for (size_t i = 0; i < cfg.channels.size(); ++i)
    os << (i ? "," : "") << cfg.channels[i];
  os << "\n";
  os << "classes = " << cfg.classes << "\n";
  os << "in_channels = " << cfg.in_channels << "\n";
  os << "generator = " << cfg.dataset.generator << "\n";
  os << "image_size = " << cfg.dataset.image_size << "\n";
  os << "train_samples = " << cfg.dataset.train_samples << "\n";
  os << "test_samples = " << cfg.dataset.test_samples << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "lr = " << cfg.lr << "\n";
  os << "beta1 = " << cfg.beta1 << "\n";
  os << "beta2 = " << cfg.beta2 << "\n";
  os << "weight_decay = " << cfg.weight_decay << "\n";
  os << "checkpoint_out = " << cfg.checkpoint_out << "\n";
  if (!cfg.test_scales.empty()) {
    os << "test_scales = ";
    for (size_t i = 0; i < cfg.test_scales.size(); ++i)
      os << (i ? "," : "") << cfg.test_scales[i];
    os << "\n";
  }
  for (const auto& [layer, iv] : cfg.sigma_bounds) {
    os << "sigma_bounds." << layer << " = ";
    for (size_t k = 0; k < iv.size(); ++k)
      os << (k ? "," : "") << iv[k].lower << ":" << iv[k].upper;
    os << "\n";
  }
  return os.str();
}

}  // namespace seu
