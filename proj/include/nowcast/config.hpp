#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nowcast {

/// Flat key-value configuration with dotted namespaces
/// ("training.lr = 0.001"). Keys are kept sorted, so serialization is
/// canonical and the hash is stable across runs.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::string& path);
  void save(const std::string& path) const;

  static KeyValueConfig parse(const std::string& text);
  std::string serialize() const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set_bool(const std::string& key, bool value);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  std::int64_t get(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::optional<std::string> find(const std::string& key) const;

  /// Later entries win.
  void overlay(const KeyValueConfig& other);

  /// FNV-1a of the canonical serialization.
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 14695981039346656037ULL);

std::string hex64(std::uint64_t v);

}  // namespace nowcast
