#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppgmm/data.hpp"
#include "ppgmm/em.hpp"
#include "ppgmm/ga.hpp"
#include "ppgmm/gmm.hpp"
#include "ppgmm/metrics.hpp"
#include "ppgmm/projection.hpp"

namespace ppgmm {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// nlohmann/json prints doubles with the shortest representation that parses
// back to the same value, so numeric payloads round-trip bit-exactly.

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(what + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

/// Rows as nested arrays; NaN entries become null.
inline json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        row.push_back(nullptr);
      } else {
        row.push_back(m(i, j));
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model document

struct ModelDocument {
  GaussianMixture model;
  std::optional<Preprocessor> preprocessing;
  std::vector<std::string> feature_names;
};

inline json model_to_json(const GaussianMixture& model, const std::optional<Preprocessor>& pre = std::nullopt,
                          const std::vector<std::string>& feature_names = {}) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "gaussian_mixture";
  doc["covariance_model"] = to_string(model.model());
  doc["dimension"] = model.dimension();
  doc["components"] = model.components();
  doc["weights"] = vector_to_json(model.weights());
  json means = json::array();
  json covs = json::array();
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    means.push_back(vector_to_json(model.mean(g)));
    json flat = json::array();  // row-major
    const Matrix& s = model.covariance(g);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index j = 0; j < s.cols(); ++j) flat.push_back(s(i, j));
    }
    covs.push_back(std::move(flat));
  }
  doc["means"] = std::move(means);
  doc["covariances"] = std::move(covs);
  if (pre) {
    doc["preprocessing"] = {{"mode", to_string(pre->mode)},
                            {"mean", vector_to_json(pre->mean)},
                            {"scale", vector_to_json(pre->scale)}};
  }
  if (!feature_names.empty()) doc["feature_names"] = feature_names;
  return doc;
}

inline ModelDocument model_from_json(const json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != kSchemaVersion) throw DataError("model: unsupported schema_version");
    if (doc.at("kind").get<std::string>() != "gaussian_mixture") throw DataError("model: not a gaussian_mixture document");
    const auto p = doc.at("dimension").get<Eigen::Index>();
    const auto G = doc.at("components").get<Eigen::Index>();
    const Vector weights = vector_from_json(doc.at("weights"), "weights");
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (Eigen::Index g = 0; g < G; ++g) {
      means.push_back(vector_from_json(doc.at("means").at(static_cast<std::size_t>(g)), "means"));
      const Vector flat = vector_from_json(doc.at("covariances").at(static_cast<std::size_t>(g)), "covariances");
      if (flat.size() != p * p) throw DataError("model: covariance has the wrong number of entries");
      Matrix s(p, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) s(i, j) = flat(i * p + j);
      }
      covs.push_back(std::move(s));
    }
    if (weights.size() != G) throw DataError("model: weights length does not match components");
    ModelDocument out{GaussianMixture(weights, std::move(means), std::move(covs),
                                      parse_covariance_model(doc.at("covariance_model").get<std::string>())),
                      std::nullopt,
                      {}};
    if (doc.contains("preprocessing")) {
      const auto& pj = doc["preprocessing"];
      Preprocessor pre;
      pre.mode = parse_preprocess_mode(pj.at("mode").get<std::string>());
      pre.mean = vector_from_json(pj.at("mean"), "preprocessing.mean");
      pre.scale = vector_from_json(pj.at("scale"), "preprocessing.scale");
      if (pre.mean.size() != p || pre.scale.size() != p) throw DataError("model: preprocessing has the wrong length");
      out.preprocessing = std::move(pre);
    }
    if (doc.contains("feature_names")) out.feature_names = doc["feature_names"].get<std::vector<std::string>>();
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline void write_json_file(const std::string& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Basis and genome CSV

/// p rows of d comma-separated values, 17 significant digits.
inline std::string basis_to_csv(const Basis& basis) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < basis.p(); ++i) {
    for (Eigen::Index j = 0; j < basis.d(); ++j) {
      if (j) out << ',';
      out << format_real(basis.matrix(i, j));
    }
    out << '\n';
  }
  return out.str();
}

inline Basis basis_from_csv(std::istream& in, const std::string& source = "<basis>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    for (const auto& cell : detail::split_csv_line(line)) {
      const auto v = detail::parse_real(cell);
      if (!v) throw DataError(source + ": '" + cell + "' is not a finite number");
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError(source + ": ragged basis rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": empty basis file");
  Matrix b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  const bool orthonormal = orthonormality_error(b) <= 1e-10;
  return {std::move(b), orthonormal ? BasisOrigin::orthonormalized : BasisOrigin::external};
}

inline Basis load_basis_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return basis_from_csv(in, path);
}

/// "# p=<p> d=<d>" followed by one line of d(p-1) angles.
inline std::string genome_to_csv(const AngleGenome& genome) {
  std::ostringstream out;
  out << "# p=" << genome.p << " d=" << genome.d << '\n';
  for (std::size_t i = 0; i < genome.angles.size(); ++i) {
    if (i) out << ',';
    out << format_real(genome.angles[i]);
  }
  out << '\n';
  return out.str();
}

inline AngleGenome genome_from_csv(std::istream& in) {
  std::string header;
  std::getline(in, header);
  int p = 0;
  int d = 0;
  if (std::sscanf(header.c_str(), "# p=%d d=%d", &p, &d) != 2) throw DataError("genome: missing '# p=<p> d=<d>' header");
  std::vector<double> angles;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    for (const auto& cell : detail::split_csv_line(line)) {
      const auto v = detail::parse_real(cell);
      if (!v) throw DataError("genome: '" + cell + "' is not a finite number");
      angles.push_back(*v);
    }
  }
  return AngleGenome(std::move(angles), p, d);
}

/// generation,best,mean
inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "generation,best,mean\n";
  for (const auto& row : trace) out << row.generation << ',' << format_real(row.best) << ',' << format_real(row.mean) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Reports

inline json provenance_json(std::uint64_t config_hash, std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash));
  return {{"config_hash", std::string("fnv1a64:") + buf}, {"seed", seed}};
}

inline json fit_report_to_json(const ModelSelection& sel, Eigen::Index n) {
  const auto& best = sel.best;
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "fit_report";
  doc["n"] = n;
  doc["best"] = {{"G", best.model.components()},
                 {"covariance_model", to_string(best.model.model())},
                 {"loglik", best.loglik},
                 {"n_params", best.n_params},
                 {"bic", best.bic},
                 {"iterations", best.iterations},
                 {"converged", best.converged},
                 {"loglik_trace", best.loglik_trace}};
  json table = json::array();
  for (const auto& e : sel.table) {
    json row = {{"G", e.G}, {"covariance_model", to_string(e.model)}, {"n_params", e.n_params}};
    row["loglik"] = e.loglik ? json(*e.loglik) : json(nullptr);
    row["bic"] = e.bic ? json(*e.bic) : json(nullptr);
    row["error"] = e.error.empty() ? json(nullptr) : json(e.error);
    table.push_back(std::move(row));
  }
  doc["bic_table"] = std::move(table);
  return doc;
}

inline json pp_result_to_json(const PPResult& res) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "pp_result";
  doc["estimator"] = to_string(res.estimator.kind);
  doc["p"] = res.best_genome.p;
  doc["d"] = res.best_genome.d;
  doc["best_fitness"] = res.best_fitness;
  doc["best_genome"] = res.best_genome.angles;
  doc["best_basis"] = matrix_to_json(res.best_basis.matrix);
  doc["generations_run"] = res.generations_run;
  json trace = json::array();
  for (const auto& row : res.fitness_trace) trace.push_back({row.generation, row.best, row.mean});
  doc["fitness_trace"] = std::move(trace);
  doc["warnings"] = res.warnings;
  return doc;
}

inline json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

/// Table-shaped report: one entry per estimator in every row array, plus the
/// symmetric angle matrix in degrees.
inline json comparison_to_json(const ComparisonReport& report) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "comparison_report";
  doc["d"] = report.d;
  json labels = json::array();
  json neg = json::array();
  json mc = json::array();
  json se = json::array();
  json rel = json::array();
  json errors = json::array();
  json bases = json::object();
  for (const auto& col : report.columns) {
    labels.push_back(col.label);
    neg.push_back(optional_number(col.negentropy));
    mc.push_back(optional_number(col.mc_negentropy));
    se.push_back(optional_number(col.mc_std_error));
    rel.push_back(optional_number(col.relative));
    errors.push_back(col.error.empty() ? json(nullptr) : json(col.error));
    if (col.basis) bases[col.label] = matrix_to_json(col.basis->matrix);
  }
  doc["estimators"] = std::move(labels);
  doc["negentropy"] = std::move(neg);
  doc["mc_negentropy"] = std::move(mc);
  doc["mc_std_error"] = std::move(se);
  doc["relative_accuracy"] = std::move(rel);
  doc["angles_degrees"] = matrix_to_json(report.angles);
  doc["errors"] = std::move(errors);
  doc["bases"] = std::move(bases);
  return doc;
}

/// Checks a comparison report against the documented schema; returns the list
/// of violations (empty when valid).
inline std::vector<std::string> validate_comparison_json(const json& doc) {
  std::vector<std::string> problems;
  auto need = [&](const char* key, auto predicate, const char* what) {
    if (!doc.contains(key)) {
      problems.push_back(std::string("missing '") + key + "'");
      return false;
    }
    if (!predicate(doc[key])) {
      problems.push_back(std::string("'") + key + "' must be " + what);
      return false;
    }
    return true;
  };
  need("schema_version", [](const json& j) { return j.is_number_integer() && j.get<int>() == kSchemaVersion; }, "1");
  need("kind", [](const json& j) { return j.is_string() && j.get<std::string>() == "comparison_report"; },
       "\"comparison_report\"");
  need("d", [](const json& j) { return j.is_number_integer() && j.get<int>() >= 1; }, "a positive integer");
  if (!need("estimators", [](const json& j) { return j.is_array() && !j.empty(); }, "a non-empty array")) return problems;
  const std::size_t m = doc["estimators"].size();
  for (const auto& e : doc["estimators"]) {
    if (!e.is_string()) problems.push_back("'estimators' entries must be strings");
  }
  auto number_or_null_row = [m](const json& j) {
    if (!j.is_array() || j.size() != m) return false;
    for (const auto& v : j) {
      if (!v.is_null() && !v.is_number()) return false;
    }
    return true;
  };
  for (const char* key : {"negentropy", "mc_negentropy", "mc_std_error", "relative_accuracy"}) {
    need(key, number_or_null_row, "an array of numbers or nulls, one per estimator");
  }
  need("errors", [m](const json& j) {
    if (!j.is_array() || j.size() != m) return false;
    for (const auto& v : j) if (!v.is_null() && !v.is_string()) return false;
    return true;
  }, "an array of strings or nulls, one per estimator");
  if (need("angles_degrees", [&](const json& j) {
        if (!j.is_array() || j.size() != m) return false;
        for (const auto& row : j) if (!number_or_null_row(row)) return false;
        return true;
      }, "an m x m array of numbers or nulls")) {
    const auto& a = doc["angles_degrees"];
    for (std::size_t i = 0; i < m; ++i) {
      if (!a[i][i].is_null() && a[i][i].get<double>() != 0.0) problems.push_back("angle matrix diagonal must be 0");
      for (std::size_t j = 0; j < m; ++j) {
        if (a[i][j].is_null()) continue;
        const double v = a[i][j].get<double>();
        if (v < 0.0 || v > 90.0) problems.push_back("angles must lie in [0, 90]");
        if (a[j][i].is_null() || a[j][i].get<double>() != v) problems.push_back("angle matrix must be symmetric");
      }
    }
  }
  need("bases", [](const json& j) { return j.is_object(); }, "an object");
  if (doc.contains("provenance")) {
    const auto& pv = doc["provenance"];
    if (!pv.is_object() || !pv.contains("config_hash") || !pv.contains("seed")) {
      problems.push_back("'provenance' must hold config_hash and seed");
    }
  }
  return problems;
}

}  // namespace ppgmm
