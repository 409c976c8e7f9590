#pragma once

#include <complex>
#include <string>
#include <vector>

namespace rwmp {

// Shortest decimal text that round-trips a 64-bit double. All file and CSV
// output goes through this so that identical runs produce identical bytes.
std::string format_double(double x);

std::string format_complex(std::complex<double> z);

// Comma-joined row, doubles formatted with format_double.
std::string csv_row(const std::vector<std::string>& cells);
std::string csv_row_numeric(const std::vector<double>& values);

std::string join_doubles(const std::vector<double>& values, char sep = ' ');

}  // namespace rwmp
