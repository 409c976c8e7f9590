#include "rwmp/kvfile.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rwmp/format.hpp"

namespace rwmp {
namespace {

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

std::vector<double> parse_row(const std::string& s, const std::string& ctx) {
  std::vector<double> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw std::runtime_error("kvfile: bad number '" + tok + "' in " + ctx);
    out.push_back(v);
  }
  return out;
}

}  // namespace

KvFile KvFile::parse(const std::string& text) {
  KvFile kv;
  std::istringstream in(text);
  std::string raw;
  std::string pending_key;
  while (std::getline(in, raw)) {
    std::string line = strip_comment(raw);
    if (blank(line)) continue;
    const bool indented = std::isspace(static_cast<unsigned char>(line[0]));
    if (indented) {
      if (pending_key.empty())
        throw std::runtime_error("kvfile: indented row without a key: " + raw);
      kv.entries_[pending_key].rows.push_back(parse_row(line, pending_key));
      continue;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest;
    std::getline(ls, rest);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front())))
      rest.erase(rest.begin());
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back())))
      rest.pop_back();
    if (kv.entries_.count(key))
      throw std::runtime_error("kvfile: duplicate key '" + key + "'");
    Entry e;
    if (rest.empty()) {
      e.is_matrix = true;
      pending_key = key;
    } else {
      e.scalar = rest;
      pending_key.clear();
    }
    kv.order_.push_back(key);
    kv.entries_[key] = std::move(e);
  }
  return kv;
}

KvFile KvFile::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("kvfile: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool KvFile::has(const std::string& key) const { return entries_.count(key) != 0; }

const KvFile::Entry& KvFile::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw std::runtime_error("kvfile: missing key '" + key + "'");
  return it->second;
}

std::string KvFile::get_string(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.is_matrix) throw std::runtime_error("kvfile: '" + key + "' is a matrix");
  return e.scalar;
}

std::optional<std::string> KvFile::get_string_opt(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_string(key);
}

double KvFile::get_double(const std::string& key) const {
  auto v = get_vector(key);
  if (v.size() != 1)
    throw std::runtime_error("kvfile: '" + key + "' is not a scalar");
  return v[0];
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long KvFile::get_int(const std::string& key) const {
  double v = get_double(key);
  long n = static_cast<long>(v);
  if (static_cast<double>(n) != v)
    throw std::runtime_error("kvfile: '" + key + "' is not an integer");
  return n;
}

long KvFile::get_int_or(const std::string& key, long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> KvFile::get_vector(const std::string& key) const {
  const Entry& e = entry(key);
  if (e.is_matrix) {
    if (e.rows.size() == 1) return e.rows[0];
    throw std::runtime_error("kvfile: '" + key + "' is not a vector");
  }
  return parse_row(e.scalar, key);
}

std::vector<std::vector<double>> KvFile::get_matrix(const std::string& key) const {
  const Entry& e = entry(key);
  if (!e.is_matrix) return {get_vector(key)};
  return e.rows;
}

void KvFile::set_string(const std::string& key, const std::string& value) {
  if (!entries_.count(key)) order_.push_back(key);
  Entry e;
  e.scalar = value;
  entries_[key] = std::move(e);
}

void KvFile::set_double(const std::string& key, double value) {
  set_string(key, format_double(value));
}

void KvFile::set_int(const std::string& key, long value) {
  set_string(key, std::to_string(value));
}

void KvFile::set_vector(const std::string& key, const std::vector<double>& value) {
  set_string(key, join_doubles(value));
}

void KvFile::set_matrix(const std::string& key,
                        const std::vector<std::vector<double>>& value) {
  if (!entries_.count(key)) order_.push_back(key);
  Entry e;
  e.is_matrix = true;
  e.rows = value;
  entries_[key] = std::move(e);
}

std::string KvFile::serialize() const {
  std::string out;
  for (const auto& key : order_) {
    const Entry& e = entries_.at(key);
    if (e.is_matrix) {
      out += key + "\n";
      for (const auto& row : e.rows) out += "  " + join_doubles(row) + "\n";
    } else {
      out += key + " " + e.scalar + "\n";
    }
  }
  return out;
}

void KvFile::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("kvfile: cannot write " + path);
  f << serialize();
}

}  // namespace rwmp
