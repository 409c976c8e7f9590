#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rwmp {

// Line-oriented structured text used for Hamiltonian specs, configs, models,
// densities and potentials. Grammar:
//
//   key value ...          scalar / vector / word entry on one line
//   key                    followed by indented rows -> matrix entry
//     1.0 2.0
//     3.0 4.0
//   # comment
//
// Keys are unique; all reals are 64-bit decimal text.
class KvFile {
 public:
  KvFile() = default;

  static KvFile parse(const std::string& text);
  static KvFile load(const std::string& path);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::optional<std::string> get_string_opt(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int_or(const std::string& key, long fallback) const;
  std::vector<double> get_vector(const std::string& key) const;
  std::vector<std::vector<double>> get_matrix(const std::string& key) const;

  void set_string(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long value);
  void set_vector(const std::string& key, const std::vector<double>& value);
  void set_matrix(const std::string& key,
                  const std::vector<std::vector<double>>& value);

  // Entries serialize in insertion order.
  std::string serialize() const;
  void save(const std::string& path) const;

 private:
  struct Entry {
    std::string scalar;                     // raw text for one-line entries
    std::vector<std::vector<double>> rows;  // for matrix entries
    bool is_matrix = false;
  };
  const Entry& entry(const std::string& key) const;

  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

}  // namespace rwmp
