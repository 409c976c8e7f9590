#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "rwmp/linalg.hpp"

namespace rwmp {

// Weighted tensor product of single-qubit Paulis, one letter per qubit.
// Qubit 0 is the leftmost letter and the least significant bit of a basis
// index (little-endian).
struct PauliString {
  Complex coefficient{1.0, 0.0};
  std::string letters;  // over {I, X, Y, Z}

  int n_qubits() const { return static_cast<int>(letters.size()); }
  bool is_identity() const;
  int weight() const;  // number of non-identity letters

  // Bit masks used by the fast statevector kernels.
  std::uint64_t x_mask() const;  // X or Y
  std::uint64_t zy_mask() const;  // Z or Y
  int y_count() const;

  void validate() const;
};

PauliString multiply(const PauliString& a, const PauliString& b);

// Sum like terms, drop tiny coefficients, order terms lexicographically.
void collect_terms(std::vector<PauliString>& terms, double drop_tol = 1e-12);

// Dense 2^n matrix; intended for small n only.
ComplexMatrix pauli_matrix(const PauliString& p);
ComplexMatrix pauli_sum_matrix(const std::vector<PauliString>& terms, int n_qubits);

}  // namespace rwmp
