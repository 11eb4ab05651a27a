#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "hlab/core/error.hpp"

namespace hlab::cli {

using json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct ParamSpec {
  std::string name;
  json def;
  std::string doc;
};

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value is compared with threshold
};

struct Report {
  json results = json::object();
  std::vector<Check> checks;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void check(std::string name, double value, const std::string& relation, double threshold) {
    bool ok = false;
    if (relation == "<=") ok = value <= threshold;
    else if (relation == "<") ok = value < threshold;
    else if (relation == ">=") ok = value >= threshold;
    else if (relation == ">") ok = value > threshold;
    else if (relation == "==") ok = value == threshold;
    else throw ConfigError("unknown check relation " + relation);
    checks.push_back({std::move(name), ok, value, threshold, relation});
  }
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

struct RunContext {
  json params;      // resolved, defaults filled in
  json tolerances;  // resolved
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct Experiment {
  std::string name;
  std::string summary;
  std::vector<ParamSpec> params;
  std::vector<ParamSpec> tolerances;
  std::function<void(const RunContext&, Report&)> run;  // fills the report in place so partial results survive errors
};

/// Shortest round-trip text for a double; "nan"/"inf" spelled out.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
inline std::string num(std::size_t v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

/// JSON numbers for finite values, null otherwise.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string head = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw NumericalError("sha1: context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw NumericalError("sha1: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest(const std::string& word, const std::vector<std::string>& options) {
  std::string best;
  std::size_t d = SIZE_MAX;
  for (const auto& o : options) {
    const std::size_t e = edit_distance(word, o);
    if (e < d) {
      d = e;
      best = o;
    }
  }
  return best;
}

namespace detail {

inline bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return true;
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

inline json resolve_table(const std::vector<ParamSpec>& specs, const json& given, const std::string& what) {
  if (!given.is_null() && !given.is_object()) throw ConfigError(what + " must be an object");
  json out = json::object();
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  if (given.is_object())
    for (auto it = given.begin(); it != given.end(); ++it)
      if (std::find(names.begin(), names.end(), it.key()) == names.end()) {
        std::string msg = "unknown " + what + " key '" + it.key() + "'";
        if (!names.empty()) msg += "; did you mean '" + nearest(it.key(), names) + "'?";
        throw ConfigError(msg);
      }
  for (const auto& s : specs) {
    json v = s.def;
    if (given.is_object() && given.contains(s.name)) {
      v = given.at(s.name);
      if (!same_kind(s.def, v)) throw ConfigError(what + " '" + s.name + "' has the wrong type (default is " + s.def.dump() + ")");
      if (s.def.is_number_integer() && v.is_number_float()) v = static_cast<std::int64_t>(v.get<double>());
    }
    out[s.name] = v;
  }
  return out;
}

}  // namespace detail

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output_dir;
  json parameters = json::object();
  json tolerances = json::object();
};

/// Strict reading of a config document. Allowed top-level keys: experiment,
/// seed, threads, output_dir, parameters, tolerances.
inline RunConfig parse_config(const json& doc, unsigned default_threads) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> keys{"experiment", "seed", "threads", "output_dir", "parameters", "tolerances"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError("unknown config key '" + it.key() + "'; did you mean '" + nearest(it.key(), keys) + "'?");
  RunConfig c;
  c.threads = default_threads;
  if (doc.contains("experiment")) {
    if (!doc["experiment"].is_string()) throw ConfigError("'experiment' must be a string");
    c.experiment = doc["experiment"].get<std::string>();
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("threads")) {
    if (!doc["threads"].is_number_unsigned() || doc["threads"].get<std::uint64_t>() == 0)
      throw ConfigError("'threads' must be a positive integer");
    c.threads = static_cast<unsigned>(doc["threads"].get<std::uint64_t>());
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("'output_dir' must be a string");
    c.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("parameters")) c.parameters = doc["parameters"];
  if (doc.contains("tolerances")) c.tolerances = doc["tolerances"];
  return c;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in, nullptr, true, false);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

/// Reads a command-line value as JSON when it parses, else as a string.
inline json parse_cli_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

struct Artifacts {
  std::string json_text;
  std::string csv_text;
  std::string input_hash;
};

/// Config echo. Thread count and output directory are left out: they do not
/// change results.
inline json config_echo(const Experiment& e, const RunContext& ctx) {
  json c = json::object();
  c["experiment"] = e.name;
  c["seed"] = ctx.seed;
  c["parameters"] = ctx.params;
  c["tolerances"] = ctx.tolerances;
  return c;
}

inline Artifacts render(const Experiment& e, const RunContext& ctx, const Report* rep, const std::string& status,
                        const std::string& message) {
  Artifacts a;
  const json echo = config_echo(e, ctx);
  a.input_hash = git_blob_sha1(echo.dump());
  json out = json::object();
  out["schema"] = "hlab." + e.name + "/1";
  out["config"] = echo;
  out["input_sha1"] = a.input_hash;
  out["status"] = status;
  if (!message.empty()) out["message"] = message;
  json checks = json::array();
  if (rep)
    for (const auto& c : rep->checks)
      checks.push_back({{"name", c.name}, {"passed", c.passed}, {"value", jnum(c.value)}, {"relation", c.relation},
                        {"threshold", jnum(c.threshold)}});
  out["checks"] = checks;
  out["passed"] = rep != nullptr && status == "ok" && rep->passed();
  out["results"] = rep ? rep->results : json::object();
  a.json_text = out.dump(2) + "\n";
  std::ostringstream csv;
  csv << "# schema: hlab." << e.name << ".csv/1\n";
  csv << "# config: " << echo.dump() << "\n";
  csv << "# input_sha1: " << a.input_hash << "\n";
  if (rep) {
    for (std::size_t i = 0; i < rep->columns.size(); ++i) csv << (i ? "," : "") << rep->columns[i];
    csv << "\n";
    for (const auto& row : rep->rows) {
      for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
      csv << "\n";
    }
  }
  a.csv_text = csv.str();
  return a;
}

inline void write_artifacts(const std::string& dir, const std::string& stem, const Artifacts& a) {
  std::filesystem::create_directories(dir);
  std::ofstream(std::filesystem::path(dir) / (stem + ".json"), std::ios::binary) << a.json_text;
  std::ofstream(std::filesystem::path(dir) / (stem + ".csv"), std::ios::binary) << a.csv_text;
}

}  // namespace hlab::cli
