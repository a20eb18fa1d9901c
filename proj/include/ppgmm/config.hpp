#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/em.hpp"
#include "ppgmm/ga.hpp"
#include "ppgmm/negentropy.hpp"

namespace ppgmm {

/// Flat `key = value` settings. Lines starting with '#' are comments,
/// `[section]` headers are ignored, string values may be double-quoted.
using Settings = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline Settings parse_settings(std::istream& in, const std::string& source = "<config>") {
  Settings out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string::npos) throw UsageError(source + ":" + std::to_string(line_no) + ": unterminated string");
      value = value.substr(1, close - 1);
    } else if (const auto hash = value.find('#'); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    if (key.empty()) throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  return parse_settings(in, path);
}

/// Every recognised setting with a one-line description.
inline const std::vector<std::pair<std::string, std::string>>& setting_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"input", "input CSV path"},
      {"has_header", "input CSV has a header row (true/false)"},
      {"label_column", "name of a label column to carry for display"},
      {"preprocess", "center or center_scale"},
      {"d", "projection dimension"},
      {"estimator", "UT, VAR, SOTE or MC"},
      {"mc_samples", "Monte Carlo sample size"},
      {"mc_seed", "Monte Carlo seed"},
      {"g_min", "smallest number of mixture components"},
      {"g_max", "largest number of mixture components"},
      {"models", "comma-separated covariance models (EII,VII,EEI,VVI,EEE,VVV)"},
      {"em_max_iter", "EM iteration cap"},
      {"em_tol", "EM relative log-likelihood tolerance"},
      {"em_restarts", "EM restarts per (G, model)"},
      {"pop_size", "GA population size"},
      {"p_crossover", "GA crossover probability"},
      {"p_mutation", "GA per-gene mutation probability"},
      {"p_local_search", "GA local search probability"},
      {"elitism", "GA elite count"},
      {"max_iter", "GA generation cap"},
      {"run_stall", "GA generations without improvement before stopping"},
      {"scaling_factor", "GA linear fitness scaling factor"},
      {"pca_start", "seed the GA population with the PCA basis (true/false)"},
      {"out_dir", "output directory"},
      {"seed", "random seed"},
      {"threads", "worker threads"},
  };
  return keys;
}

struct RunConfig {
  std::string input;
  bool has_header = true;
  std::optional<std::string> label_column;
  PreprocessMode preprocess = PreprocessMode::center_scale;
  int d = 2;
  EstimatorKind estimator{};
  Eigen::Index g_min = 1;
  Eigen::Index g_max = 9;
  std::vector<CovarianceModel> models{kAllCovarianceModels.begin(), kAllCovarianceModels.end()};
  EmOptions em{};
  GAConfig ga{};
  bool pca_start = false;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 1;
  std::uint64_t hash = 0;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("setting '" + key + "': '" + text + "' is not a valid number");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("setting '" + key + "': expected true or false");
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Builds the effective configuration. The hash covers every setting except
/// out_dir and threads, which do not influence results.
inline RunConfig make_run_config(const Settings& settings) {
  RunConfig c;
  std::string canonical;
  for (const auto& [key, value] : settings) {
    bool known = false;
    for (const auto& entry : setting_keys()) known = known || entry.first == key;
    if (!known) throw UsageError("unknown setting '" + key + "'");
    if (key != "out_dir" && key != "threads") canonical += key + "=" + value + "\n";
  }
  c.hash = detail::fnv1a64(canonical);
  auto get = [&](const char* key) -> const std::string* {
    const auto it = settings.find(key);
    return it == settings.end() ? nullptr : &it->second;
  };
  using detail::parse_bool;
  using detail::parse_number;
  if (auto v = get("input")) c.input = *v;
  if (auto v = get("has_header")) c.has_header = parse_bool("has_header", *v);
  if (auto v = get("label_column"); v && !v->empty()) c.label_column = *v;
  if (auto v = get("preprocess")) c.preprocess = parse_preprocess_mode(*v);
  if (auto v = get("d")) c.d = parse_number<int>("d", *v);
  if (auto v = get("estimator")) c.estimator.kind = parse_estimator(*v);
  if (auto v = get("mc_samples")) c.estimator.mc_samples = parse_number<long long>("mc_samples", *v);
  if (auto v = get("mc_seed")) c.estimator.mc_seed = parse_number<std::uint64_t>("mc_seed", *v);
  if (auto v = get("g_min")) c.g_min = parse_number<Eigen::Index>("g_min", *v);
  if (auto v = get("g_max")) c.g_max = parse_number<Eigen::Index>("g_max", *v);
  if (auto v = get("models")) {
    c.models.clear();
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) c.models.push_back(parse_covariance_model(item));
    }
    if (c.models.empty()) throw UsageError("setting 'models' is empty");
  }
  if (auto v = get("em_max_iter")) c.em.max_iter = parse_number<int>("em_max_iter", *v);
  if (auto v = get("em_tol")) c.em.tol = parse_number<double>("em_tol", *v);
  if (auto v = get("em_restarts")) c.em.init.restarts = parse_number<int>("em_restarts", *v);
  if (auto v = get("pop_size")) c.ga.pop_size = parse_number<int>("pop_size", *v);
  if (auto v = get("p_crossover")) c.ga.p_crossover = parse_number<double>("p_crossover", *v);
  if (auto v = get("p_mutation")) c.ga.p_mutation = parse_number<double>("p_mutation", *v);
  if (auto v = get("p_local_search")) c.ga.p_local_search = parse_number<double>("p_local_search", *v);
  if (auto v = get("elitism")) c.ga.elitism = parse_number<int>("elitism", *v);
  if (auto v = get("max_iter")) c.ga.max_iter = parse_number<int>("max_iter", *v);
  if (auto v = get("run_stall")) c.ga.run_stall = parse_number<int>("run_stall", *v);
  if (auto v = get("scaling_factor")) c.ga.scaling_factor = parse_number<double>("scaling_factor", *v);
  if (auto v = get("pca_start")) c.pca_start = parse_bool("pca_start", *v);
  if (auto v = get("out_dir")) c.out_dir = *v;
  if (auto v = get("seed")) {
    c.seed = parse_number<std::uint64_t>("seed", *v);
    c.seed_given = true;
  }
  if (auto v = get("threads")) c.threads = parse_number<unsigned>("threads", *v);
  if (c.threads < 1) c.threads = 1;
  c.ga.seed = c.seed;
  c.ga.threads = c.threads;
  if (!get("mc_seed")) c.estimator.mc_seed = c.seed;
  c.ga.validate();
  if (c.d < 1) throw UsageError("d must be at least 1");
  if (c.g_min < 1 || c.g_max < c.g_min) throw UsageError("invalid G range");
  return c;
}

}  // namespace ppgmm
