#include "rwmp/pauli.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace rwmp {
namespace {

int letter_index(char c) {
  switch (c) {
    case 'I': return 0;
    case 'X': return 1;
    case 'Y': return 2;
    case 'Z': return 3;
  }
  throw std::invalid_argument(std::string("PauliString: bad letter '") + c + "'");
}

// Single-qubit products: table[a][b] = (phase, letter) with P_a P_b = phase * P_letter.
struct Prod {
  Complex phase;
  char letter;
};

const Prod kTable[4][4] = {
    {{1, 'I'}, {1, 'X'}, {1, 'Y'}, {1, 'Z'}},
    {{1, 'X'}, {1, 'I'}, {Complex(0, 1), 'Z'}, {Complex(0, -1), 'Y'}},
    {{1, 'Y'}, {Complex(0, -1), 'Z'}, {1, 'I'}, {Complex(0, 1), 'X'}},
    {{1, 'Z'}, {Complex(0, 1), 'Y'}, {Complex(0, -1), 'X'}, {1, 'I'}},
};

}  // namespace

bool PauliString::is_identity() const {
  return letters.find_first_not_of('I') == std::string::npos;
}

int PauliString::weight() const {
  return n_qubits() - static_cast<int>(std::count(letters.begin(), letters.end(), 'I'));
}

std::uint64_t PauliString::x_mask() const {
  std::uint64_t m = 0;
  for (int q = 0; q < n_qubits(); ++q)
    if (letters[q] == 'X' || letters[q] == 'Y') m |= 1ull << q;
  return m;
}

std::uint64_t PauliString::zy_mask() const {
  std::uint64_t m = 0;
  for (int q = 0; q < n_qubits(); ++q)
    if (letters[q] == 'Z' || letters[q] == 'Y') m |= 1ull << q;
  return m;
}

int PauliString::y_count() const {
  return static_cast<int>(std::count(letters.begin(), letters.end(), 'Y'));
}

void PauliString::validate() const {
  for (char c : letters) letter_index(c);
}

PauliString multiply(const PauliString& a, const PauliString& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("PauliString multiply: length mismatch");
  PauliString out;
  out.coefficient = a.coefficient * b.coefficient;
  out.letters.resize(a.letters.size());
  for (size_t q = 0; q < a.letters.size(); ++q) {
    const Prod& p = kTable[letter_index(a.letters[q])][letter_index(b.letters[q])];
    out.coefficient *= p.phase;
    out.letters[q] = p.letter;
  }
  return out;
}

void collect_terms(std::vector<PauliString>& terms, double drop_tol) {
  std::map<std::string, Complex> sums;
  for (const auto& t : terms) sums[t.letters] += t.coefficient;
  terms.clear();
  for (const auto& [letters, coeff] : sums) {
    if (std::abs(coeff) <= drop_tol) continue;
    terms.push_back({coeff, letters});
  }
}

ComplexMatrix pauli_matrix(const PauliString& p) {
  const int n = p.n_qubits();
  if (n > 14) throw std::invalid_argument("pauli_matrix: too many qubits for dense form");
  const std::uint64_t dim = 1ull << n;
  const std::uint64_t xm = p.x_mask();
  const std::uint64_t zym = p.zy_mask();
  const int ny = p.y_count();
  const Complex iy = std::pow(Complex(0, 1), ny);
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (std::uint64_t b = 0; b < dim; ++b) {
    const int par = __builtin_parityll(b & zym);
    const Complex amp = p.coefficient * iy * (par ? -1.0 : 1.0);
    m(b ^ xm, b) = amp;
  }
  return m;
}

ComplexMatrix pauli_sum_matrix(const std::vector<PauliString>& terms, int n_qubits) {
  const std::uint64_t dim = 1ull << n_qubits;
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (const auto& t : terms) {
    if (t.n_qubits() != n_qubits)
      throw std::invalid_argument("pauli_sum_matrix: length mismatch");
    m += pauli_matrix(t);
  }
  return m;
}

}  // namespace rwmp
