#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwmp/linalg.hpp"
#include "rwmp/pauli.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp {

enum class Spin { spinless, half };

// Lattice Hamiltonian
//   H = sum_{ij,s} t_ij c+_{is} c_{js}
//     + sum_{ijkl,s,s'} V_ijkl c+_{is} c+_{js'} c_{ls'} c_{ks}
// with V stored flat as V[((i*N+j)*N+k)*N+l]. Mode ordering is site-major,
// spin-minor: mode(i, s) = 2i + s for spin-half, mode(i) = i for spinless,
// and Jordan-Wigner strings are anchored at qubit 0.
struct FermionHamiltonian {
  int n_sites = 0;
  Spin spin = Spin::half;
  ComplexMatrix t;         // n_sites x n_sites, Hermitian
  std::vector<double> v;   // n_sites^4, may be empty for noninteracting

  int n_modes() const { return spin == Spin::half ? 2 * n_sites : n_sites; }
  int mode(int site, int sigma) const {
    return spin == Spin::half ? 2 * site + sigma : site;
  }
  double v_at(int i, int j, int k, int l) const;
  void validate() const;
};

// Nearest-neighbour chain with hopping -t, on-site interaction U and on-site
// potential v added to the diagonal. V_iiii = U/2 so that the interaction
// sums to U * n_up * n_down per site.
FermionHamiltonian build_hubbard(int n_sites, double t, double U,
                                 std::span<const double> v);

// Hopping matrix of the open chain (-t on nearest neighbours); the lattice
// stand-in for the kinetic operator.
RealMatrix chain_kinetic(int n_sites, double t);

struct QubitHamiltonian {
  int n_qubits = 0;
  std::vector<PauliString> terms;  // collected, lexicographic order
  double shift = 0.0;              // constant C added before scaling
  double scale = 1.0;              // eps_max; (H + C) / eps_max in [0, 1]
  Spin spin = Spin::half;          // mode convention of the fermionic source

  double identity_coefficient() const;
  double offdiagonal_bound() const;  // sum |coeff| over non-identity terms
  ComplexMatrix matrix() const;      // dense, small systems only
  ComplexMatrix scaled_matrix() const;
  void check_finite() const;
};

std::vector<PauliString> jordan_wigner(const FermionHamiltonian& h);
QubitHamiltonian to_qubit_hamiltonian(const FermionHamiltonian& h);

// One-body operator sum_{ij,s} m_ij c+_{is} c_{js} as collected Pauli terms.
std::vector<PauliString> jordan_wigner_one_body(const ComplexMatrix& m, Spin spin);

// Collected Pauli terms of the single transition c+_a c_b on mode indices.
std::vector<PauliString> jw_transition(int mode_a, int mode_b, int n_modes);

// Chooses C and eps_max so that all eigenvalues of (H + C)/eps_max lie in
// [0, 1]. Bounds come from the summed coefficient magnitudes, or from the
// exact spectrum when use_oracle_bounds is set and the system is small.
QubitHamiltonian shift_and_scale(const QubitHamiltonian& h, double margin,
                                 bool use_oracle_bounds = false);

double unscale_energy(double scaled, const QubitHamiltonian& h);

struct SectorFilter {
  std::optional<int> n_electrons;
  std::optional<int> two_sz;  // N_up - N_down (spin-half only)
  bool matches(std::uint64_t occupation, int n_modes, Spin spin) const;
};

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  Statevector ground_state;         // embedded in the full 2^Q space
  std::vector<bool> degenerate;     // per level, tolerance 1e-9
  double residual = 0.0;            // max |H v - E v| over reported pairs

  bool ground_degenerate() const { return !degenerate.empty() && degenerate[0]; }
};

inline constexpr int kDefaultDiagQubitCap = 14;
inline constexpr double kDegeneracyTol = 1e-9;

// Brute-force oracle on the qubit route: builds the dense (sector) matrix
// from the Pauli terms. Refuses above the qubit cap.
Spectrum exact_diagonalize(const QubitHamiltonian& h, const SectorFilter& filter = {},
                           int qubit_cap = kDefaultDiagQubitCap);

// Independent fermionic route: occupation-number matrix built directly from
// the coefficient tensors with fermionic sign rules, no Pauli algebra.
ComplexMatrix fermion_matrix(const FermionHamiltonian& h);
ComplexMatrix fermion_sector_matrix(const FermionHamiltonian& h,
                                    const SectorFilter& filter,
                                    std::vector<std::uint64_t>* basis_out = nullptr);
Spectrum diagonalize_fermionic(const FermionHamiltonian& h,
                               const SectorFilter& filter = {});

// <state| c+_{is} c_{js} |state> evaluated directly on the occupation basis.
Complex one_body_expectation(const Statevector& state, const FermionHamiltonian& h,
                             int site_i, int site_j, int sigma);

// Per-spin rho_ij = <c+_{is} c_{js}>; spinless returns a single block.
std::vector<ComplexMatrix> density_matrix_from_state(const Statevector& state,
                                                     const FermionHamiltonian& h);

}  // namespace rwmp
