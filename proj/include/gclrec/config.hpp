#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gclrec/dataset.hpp"
#include "gclrec/rng.hpp"
#include "gclrec/trainer.hpp"

namespace gclrec {

/// Flat `key = value` settings. Precedence: --set flag > config file >
/// built-in default.
struct RunSettings {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  double get_double(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("config: bad number for " + key + ": " + it->second);
    return v;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("config: bad integer for " + key + ": " + it->second);
    return v;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + it->second);
  }
};

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

inline RunSettings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_settings: cannot open " + path);
  RunSettings settings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("load_settings: missing '=' at line " +
                               std::to_string(line_no) + " of " + path);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("load_settings: empty key at line " +
                               std::to_string(line_no) + " of " + path);
    settings.values[key] = value;
  }
  return settings;
}

/// Applies a `key=value` override (from a --set flag).
inline void apply_override(RunSettings& settings, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects key=value, got: " + kv);
  settings.values[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
}

struct DataSettings {
  std::int64_t min_interactions = 15;
  SplitRatios ratios;
  SplitMode split_mode = SplitMode::kPerUser;
};

/// Materializes every knob from settings; unknown keys are rejected so a
/// typo cannot silently fall back to a default.
inline void check_known_keys(const RunSettings& s) {
  static const char* known[] = {
      "model",          "embedding_dim", "layers",       "batch_size",
      "lr",             "t_lr",          "lambda_ssl",   "lambda_reg",
      "lambda_t",       "tau",           "tau_g",        "p_add",
      "p_drop",         "patience",      "max_epochs",   "seed",
      "epsilon",        "operator_enabled", "warm_start", "aug_count_degrees",
      "threads",        "min_interactions", "split_train", "split_valid",
      "split_test",     "split_mode",    "deterministic"};
  for (const auto& [key, value] : s.values) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) throw std::invalid_argument("config: unknown key " + key);
  }
}

inline TrainConfig make_train_config(const RunSettings& s) {
  check_known_keys(s);
  TrainConfig c;
  c.model = model_from_name(s.get("model", "lightgcn"));
  c.embedding_dim = s.get_int("embedding_dim", 64);
  c.layers = s.get_int("layers", 3);
  c.batch_size = s.get_int("batch_size", 4096);
  c.lr = s.get_double("lr", 1e-3);
  c.t_lr = s.get_double("t_lr", -1.0);
  c.lambda_ssl = s.get_double("lambda_ssl", 0.1);
  c.lambda_reg = s.get_double("lambda_reg", 1e-4);
  c.lambda_t = s.get_double("lambda_t", 0.2);
  c.tau = s.get_double("tau", 0.2);
  c.tau_g = s.get_double("tau_g", 1.0);
  c.p_add = s.get_double("p_add", 0.0);
  c.p_drop = s.get_double("p_drop", 0.0);
  c.patience = s.get_int("patience", 10);
  c.max_epochs = s.get_int("max_epochs", 200);
  c.seed = static_cast<std::uint64_t>(s.get_int("seed", 42));
  c.epsilon = s.get_double("epsilon", 1e-8);
  c.operator_enabled = s.get_bool("operator_enabled", true);
  c.warm_start = s.get_bool("warm_start", false);
  c.aug_count_degrees = s.get_bool("aug_count_degrees", false);
  c.threads = static_cast<int>(s.get_int("threads", 0));
  c.validate();
  return c;
}

inline DataSettings make_data_settings(const RunSettings& s) {
  DataSettings d;
  d.min_interactions = s.get_int("min_interactions", 15);
  d.ratios.train = s.get_double("split_train", 0.8);
  d.ratios.valid = s.get_double("split_valid", 0.1);
  d.ratios.test = s.get_double("split_test", 0.1);
  const std::string mode = s.get("split_mode", "per_user");
  if (mode == "per_user")
    d.split_mode = SplitMode::kPerUser;
  else if (mode == "global")
    d.split_mode = SplitMode::kGlobal;
  else
    throw std::invalid_argument("config: split_mode must be per_user or global");
  return d;
}

/// Settings with every default materialized, for the manifest.
inline std::map<std::string, std::string> resolved_settings(const RunSettings& s) {
  const TrainConfig c = make_train_config(s);
  const DataSettings d = make_data_settings(s);
  char buf[64];
  const auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> out;
  out["model"] = model_name(c.model);
  out["embedding_dim"] = std::to_string(c.embedding_dim);
  out["layers"] = std::to_string(c.layers);
  out["batch_size"] = std::to_string(c.batch_size);
  out["lr"] = fmt(c.lr);
  out["t_lr"] = fmt(c.effective_t_lr());
  out["lambda_ssl"] = fmt(c.lambda_ssl);
  out["lambda_reg"] = fmt(c.lambda_reg);
  out["lambda_t"] = fmt(c.lambda_t);
  out["tau"] = fmt(c.tau);
  out["tau_g"] = fmt(c.tau_g);
  out["p_add"] = fmt(c.p_add);
  out["p_drop"] = fmt(c.p_drop);
  out["patience"] = std::to_string(c.patience);
  out["max_epochs"] = std::to_string(c.max_epochs);
  out["seed"] = std::to_string(c.seed);
  out["epsilon"] = fmt(c.epsilon);
  out["operator_enabled"] = c.operator_enabled ? "true" : "false";
  out["warm_start"] = c.warm_start ? "true" : "false";
  out["aug_count_degrees"] = c.aug_count_degrees ? "true" : "false";
  out["threads"] = std::to_string(c.threads);
  out["min_interactions"] = std::to_string(d.min_interactions);
  out["split_train"] = fmt(d.ratios.train);
  out["split_valid"] = fmt(d.ratios.valid);
  out["split_test"] = fmt(d.ratios.test);
  out["split_mode"] = d.split_mode == SplitMode::kPerUser ? "per_user" : "global";
  out["deterministic"] = s.get("deterministic", "true");
  return out;
}

/// FNV-1a digest of a file's bytes, as fixed-width hex.
inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_digest: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize k = 0; k < n; ++k) {
      h ^= static_cast<std::uint8_t>(buf[k]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

/// Everything needed to reproduce a run: resolved settings, data
/// fingerprint, seed, artifact paths, wall-clock timings.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> settings;
  std::string data_path;
  std::string data_digest;
  std::int64_t n_records = 0;
  std::int64_t n_users = 0;
  std::int64_t n_items = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, double> timings_sec;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["settings"] = settings;
    j["data"] = {{"path", data_path},
                 {"digest", data_digest},
                 {"n_records", n_records},
                 {"n_users", n_users},
                 {"n_items", n_items}};
    j["seed"] = seed;
    j["artifacts"] = artifacts;
    j["timings_sec"] = timings_sec;
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("RunManifest: cannot write " + path);
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace gclrec
