#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rank1/prior.hpp"

namespace rank1::cli {

// Raised for malformed files and missing or untypeable keys; the message
// carries the origin (path), the line for INI sources, and the field name.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key-value store addressed as "section.key".  Two on-disk formats load
// into the same map: an INI dialect (sections in brackets, full-line comments
// with '#' or ';') and a JSON object of objects.  Serialization is canonical
// (sorted, one normalized spelling per value), so the config hash does not
// depend on which format the user wrote.
class ExperimentConfig {
 public:
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma or whitespace separated numbers.
  std::vector<double> get_list(const std::string& key) const;

  // Resolves the [prior] section.  Presets: bernoulli (rho), rademacher,
  // community (rho), dirac (value), custom (support + weights lists).
  DiscretePrior prior() const;
  // One-line description of the [prior] section for output metadata.
  std::string prior_label() const;

  // Canonical INI text; from_text(serialize()) reproduces the same entries.
  std::string serialize() const;
  // FNV-1a 64 over the canonical serialization, as 16 hex digits.
  std::string hash() const;

  const std::string& origin() const { return origin_; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  int line_of(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;  // INI sources only; 0 when unknown
  std::string origin_;
};

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace rank1::cli
