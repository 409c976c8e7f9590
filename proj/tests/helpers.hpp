#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "rwmp/linalg.hpp"
#include "rwmp/random.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp::testing {

// Dense discrete Fourier matrix matching the register-value convention:
// F[x][y] = exp(i 2 pi x y / 2^n) / 2^(n/2).
inline ComplexMatrix dft_matrix(int n_qubits) {
  const std::uint64_t dim = std::uint64_t(1) << n_qubits;
  ComplexMatrix f(dim, dim);
  const double norm = 1.0 / std::sqrt(double(dim));
  for (std::uint64_t x = 0; x < dim; ++x)
    for (std::uint64_t y = 0; y < dim; ++y)
      f(x, y) = norm * std::polar(1.0, 2.0 * M_PI * double(x) * double(y) / double(dim));
  return f;
}

inline Statevector random_state(int n_qubits, RandomStream& rng) {
  Statevector s(n_qubits);
  auto& amps = s.amplitudes();
  for (auto& a : amps) a = Complex(rng.next_gaussian(), rng.next_gaussian());
  s.renormalize();
  return s;
}

inline ComplexVector to_vector(const Statevector& s) {
  ComplexVector v(s.dim());
  for (std::uint64_t b = 0; b < s.dim(); ++b) v[b] = s.amplitude(b);
  return v;
}

inline Statevector from_vector(const ComplexVector& v, int n_qubits) {
  Statevector s(n_qubits);
  auto& amps = s.amplitudes();
  for (std::uint64_t b = 0; b < amps.size(); ++b) amps[b] = v[b];
  return s;
}

// Dense mode operators built directly from occupation-number sign rules;
// the brute-force side of the Jordan-Wigner checks.
inline ComplexMatrix dense_annihilation(int mode, int n_modes) {
  const std::uint64_t dim = std::uint64_t(1) << n_modes;
  ComplexMatrix c = ComplexMatrix::Zero(dim, dim);
  const std::uint64_t bit = std::uint64_t(1) << mode;
  for (std::uint64_t b = 0; b < dim; ++b) {
    if (!(b & bit)) continue;
    const int sign = __builtin_parityll(b & (bit - 1)) ? -1 : 1;
    c(b ^ bit, b) = sign;
  }
  return c;
}

inline ComplexMatrix dense_creation(int mode, int n_modes) {
  return dense_annihilation(mode, n_modes).adjoint();
}

// Exact two-site Hubbard singlet ground energy at half filling, v = 0.
inline double hubbard_dimer_ground(double t, double u) {
  return 0.5 * (u - std::sqrt(u * u + 16.0 * t * t));
}

}  // namespace rwmp::testing
