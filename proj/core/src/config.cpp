#include "dtsg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dtsg/error.hpp"

namespace dtsg {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

std::pair<std::string, std::string> split_assignment(std::string_view line, std::string_view origin) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config", std::string(origin) + ": expected key = value, got '" + std::string(line) + "'");
  }
  std::string key(trim(line.substr(0, eq)));
  if (key.empty()) throw ConfigError("config", std::string(origin) + ": empty key");
  return {key, unquote(trim(line.substr(eq + 1)))};
}

}  // namespace

FlatConfig FlatConfig::parse(std::string_view text, std::string_view origin) {
  FlatConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view view = line;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (view[i] == '"') quoted = !quoted;
      if (view[i] == '#' && !quoted) {
        view = view.substr(0, i);
        break;
      }
    }
    view = trim(view);
    if (view.empty() || view.front() == '[') continue;
    auto [k, v] = split_assignment(view, std::string(origin) + ":" + std::to_string(n));
    cfg.values_[k] = v;
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void FlatConfig::apply_override(std::string_view assignment) {
  auto [k, v] = split_assignment(trim(assignment), "--set");
  values_[k] = v;
}

void FlatConfig::set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

void FlatConfig::merge(const FlatConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

bool FlatConfig::contains(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> FlatConfig::raw(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  read_.insert(std::string(key));
  return it->second;
}

std::string FlatConfig::get_string(std::string_view key, std::string fallback) const {
  auto v = raw(key);
  return v ? *v : std::move(fallback);
}

double FlatConfig::get_double(std::string_view key, double fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config", "key " + std::string(key) + " expects a number, got '" + *v + "'");
  }
}

long long FlatConfig::get_int(std::string_view key, long long fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError("config", "key " + std::string(key) + " expects an integer, got '" + *v + "'");
  }
  return out;
}

bool FlatConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = raw(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("config", "key " + std::string(key) + " expects a boolean, got '" + *v + "'");
}

std::vector<std::string> FlatConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (read_.find(k) == read_.end()) out.push_back(k);
  }
  return out;
}

std::string FlatConfig::dump() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  return out.str();
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dtsg
