#include "rwmp/format.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace rwmp {

std::string format_double(double x) {
  if (x == 0.0) return "0";  // normalize -0
  char buf[40];
  // Try increasing precision until the text parses back exactly.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) return buf;
  }
  return buf;
}

std::string format_complex(std::complex<double> z) {
  return format_double(z.real()) + (z.imag() < 0 ? "-" : "+") +
         format_double(std::abs(z.imag())) + "i";
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

std::string csv_row_numeric(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  return csv_row(cells);
}

std::string join_doubles(const std::vector<double>& values, char sep) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += format_double(values[i]);
  }
  return out;
}

}  // namespace rwmp
