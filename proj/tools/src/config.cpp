#include "config.hpp"

#include <cctype>
#include <cinttypes>
#include <climits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "rank1/channels.hpp"

namespace rank1::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::islower(static_cast<unsigned char>(c)) &&
        !std::isdigit(static_cast<unsigned char>(c)) && c != '_') {
      return false;
    }
  }
  return true;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Canonical spelling for one JSON scalar, matching what the INI parser
// would have stored for the equivalent file.
std::string json_scalar(const nlohmann::json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return format_number(v.get<double>());
  throw ConfigError("config field '" + field + "': expected a scalar or array of scalars");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             const std::string& origin) {
  ExperimentConfig cfg;
  cfg.origin_ = origin;

  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
      throw ConfigError(origin + ": " + err.what());
    }
    for (const auto& [section, body] : root.items()) {
      if (!valid_name(section)) {
        throw ConfigError(origin + ": bad section name '" + section + "'");
      }
      if (!body.is_object()) {
        throw ConfigError(origin + ": section '" + section +
                          "' must be an object of keys");
      }
      for (const auto& [key, value] : body.items()) {
        std::string full = section + "." + key;
        if (!valid_name(key)) throw ConfigError(origin + ": bad key name '" + full + "'");
        if (value.is_array()) {
          std::string joined;
          for (const auto& item : value) {
            if (!joined.empty()) joined += ",";
            joined += json_scalar(item, full);
          }
          cfg.entries_[full] = joined;
        } else {
          cfg.entries_[full] = json_scalar(value, full);
        }
      }
    }
    return cfg;
  }

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_name(section)) {
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": bad section name '" + section + "'");
      }
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key '" + key +
                        "' appears before any [section]");
    }
    if (!valid_name(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad key name '" +
                        key + "'");
    }
    std::string full = section + "." + key;
    if (cfg.entries_.count(full)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                        full + "'");
    }
    cfg.entries_[full] = value;
    cfg.lines_[full] = lineno;
  }
  return cfg;
}

bool ExperimentConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

int ExperimentConfig::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

void ExperimentConfig::fail(const std::string& key, const std::string& what) const {
  std::string where = origin_;
  if (int ln = line_of(key); ln > 0) where += ":" + std::to_string(ln);
  throw ConfigError(where + ": field '" + key + "' " + what);
}

std::string ExperimentConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(key, "is required but missing");
  return it->second;
}

std::string ExperimentConfig::get_string(const std::string& key,
                                         const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t pos = 0;
    double x = std::stod(raw, &pos);
    if (pos != raw.size()) fail(key, "has trailing characters in '" + raw + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "is not a number: '" + raw + "'");
  }
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int ExperimentConfig::get_int(const std::string& key) const {
  const std::string raw = get_string(key);
  try {
    std::size_t pos = 0;
    long x = std::stol(raw, &pos);
    if (pos != raw.size()) fail(key, "has trailing characters in '" + raw + "'");
    if (x < INT_MIN || x > INT_MAX) fail(key, "is out of range: '" + raw + "'");
    return static_cast<int>(x);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "is not an integer: '" + raw + "'");
  }
}

int ExperimentConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key,
                                        std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string raw = get_string(key);
  try {
    std::size_t pos = 0;
    std::uint64_t x = std::stoull(raw, &pos);
    if (pos != raw.size()) fail(key, "has trailing characters in '" + raw + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "is not an unsigned integer: '" + raw + "'");
  }
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string raw = get_string(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  fail(key, "is not a boolean: '" + raw + "'");
}

std::vector<double> ExperimentConfig::get_list(const std::string& key) const {
  std::string raw = get_string(key);
  for (char& c : raw) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(raw);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(key, "has a non-numeric list entry: '" + tok + "'");
    }
  }
  if (out.empty()) fail(key, "is an empty list");
  return out;
}

DiscretePrior ExperimentConfig::prior() const {
  std::string preset = get_string("prior.preset", has("prior.support") ? "custom" : "");
  if (preset.empty()) fail("prior.preset", "is required but missing");
  if (preset == "bernoulli") {
    double rho = get_double("prior.rho");
    if (rho <= 0.0 || rho >= 1.0) fail("prior.rho", "must lie in (0, 1)");
    return make_prior({0.0, 1.0}, {1.0 - rho, rho});
  }
  if (preset == "rademacher") {
    return make_prior({-1.0, 1.0}, {0.5, 0.5});
  }
  if (preset == "community") {
    double rho = get_double("prior.rho");
    if (rho <= 0.0 || rho >= 1.0) fail("prior.rho", "must lie in (0, 1)");
    return community_detection_prior(rho);
  }
  if (preset == "dirac") {
    return make_prior({get_double("prior.value", 1.0)}, {1.0});
  }
  if (preset == "custom") {
    std::vector<double> support = get_list("prior.support");
    std::vector<double> weights = get_list("prior.weights");
    if (support.size() != weights.size()) {
      fail("prior.weights", "must have the same length as prior.support");
    }
    return make_prior(std::move(support), std::move(weights));
  }
  fail("prior.preset", "has unknown value '" + preset +
                           "' (expected bernoulli, rademacher, community, dirac, custom)");
}

std::string ExperimentConfig::prior_label() const {
  std::string preset = get_string("prior.preset", has("prior.support") ? "custom" : "?");
  if (preset == "bernoulli" || preset == "community") {
    return preset + "(rho=" + get_string("prior.rho", "?") + ")";
  }
  if (preset == "dirac") return "dirac(" + get_string("prior.value", "1") + ")";
  if (preset == "custom") {
    return "custom(k=" + std::to_string(get_list("prior.support").size()) + ")";
  }
  return preset;
}

std::string ExperimentConfig::serialize() const {
  // entries_ is sorted by full key, so sections come out grouped.
  std::ostringstream out;
  std::string section;
  for (const auto& [full, value] : entries_) {
    std::size_t dot = full.find('.');
    std::string sec = full.substr(0, dot);
    std::string key = full.substr(dot + 1);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << key << " = " << value << "\n";
  }
  return out.str();
}

std::string ExperimentConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(serialize()));
  return buf;
}

}  // namespace rank1::cli
