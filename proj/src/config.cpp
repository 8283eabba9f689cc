#include "nowcast/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nowcast {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {
std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    cfg.entries_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
  return out.str();
}

void KeyValueConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize();
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

void KeyValueConfig::set(const std::string& key, double value) {
  std::ostringstream ss;
  ss.precision(17);
  ss << value;
  entries_[key] = ss.str();
}

void KeyValueConfig::set(const std::string& key, std::int64_t value) {
  entries_[key] = std::to_string(value);
}

void KeyValueConfig::set_bool(const std::string& key, bool value) {
  entries_[key] = value ? "true" : "false";
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get(const std::string& key,
                                const std::string& fallback) const {
  auto v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  try {
    return std::stod(*v);
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + *v);
  }
}

std::int64_t KeyValueConfig::get(const std::string& key,
                                 std::int64_t fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  try {
    return std::stoll(*v);
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + *v);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + *v);
}

void KeyValueConfig::overlay(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::uint64_t KeyValueConfig::hash() const {
  std::string s = serialize();
  return fnv1a(s.data(), s.size());
}

}  // namespace nowcast
