#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "expe/error.hpp"

namespace expe {

// Every violation found while reading a config, each prefixed with its key
// path (e.g. "encoding.l: ...").
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> errors)
      : ConfigError(join(errors)), errors_(std::move(errors)) {}

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "invalid config:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
  }
  std::vector<std::string> errors_;
};

// Reads fields of one JSON object, collecting type errors and unknown keys
// instead of stopping at the first problem.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& object, std::string path, std::vector<std::string>& errors)
      : object_(object), path_(std::move(path)), errors_(errors) {
    if (!object_.is_null() && !object_.is_object()) error("", "must be an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void error(const std::string& key, const std::string& message) const {
    const auto p = key.empty() ? path_ : key_path(key);
    errors_.push_back((p.empty() ? std::string("<root>") : p) + ": " + message);
  }

  bool has(const std::string& key) const {
    return object_.is_object() && object_.contains(key) && !object_.at(key).is_null();
  }

  bool is_null(const std::string& key) const {
    return object_.is_object() && object_.contains(key) && object_.at(key).is_null();
  }

  template <typename V>
  void get(const std::string& key, V& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = object_.at(key).get<V>();
    } catch (const nlohmann::json::exception&) {
      error(key, "has the wrong type (" + std::string(object_.at(key).type_name()) + ")");
    }
  }

  template <typename V>
  void get(const std::string& key, std::optional<V>& out) {
    seen_.insert(key);
    if (!has(key)) return;
    V value{};
    get(key, value);
    out = value;
  }

  // Non-negative integer field; negative or fractional values are rejected.
  void get_count(const std::string& key, std::size_t& out) {
    seen_.insert(key);
    if (!has(key)) return;
    const auto& v = object_.at(key);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)) {
      out = v.get<std::size_t>();
    } else {
      error(key, "must be a non-negative integer");
    }
  }

  void get_count(const std::string& key, std::optional<std::size_t>& out) {
    seen_.insert(key);
    if (!has(key)) return;
    std::size_t value = 0;
    const auto before = errors_.size();
    get_count(key, value);
    if (errors_.size() == before) out = value;
  }

  FieldReader child(const std::string& key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return FieldReader(has(key) ? object_.at(key) : empty, key_path(key), errors_);
  }

  // Flags keys that no get()/child() call asked for.
  void reject_unknown() const {
    if (!object_.is_object()) return;
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) error(key, "unknown key");
    }
  }

 private:
  const nlohmann::json& object_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

}  // namespace expe
