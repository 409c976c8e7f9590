#include "rwmp/fermion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace rwmp {
namespace {

// c_m as a sum of two Pauli strings with the Z chain on qubits below m.
std::vector<PauliString> jw_annihilation(int m, int n_modes) {
  PauliString x{Complex(0.5, 0), std::string(n_modes, 'I')};
  PauliString y{Complex(0, 0.5), std::string(n_modes, 'I')};
  for (int k = 0; k < m; ++k) {
    x.letters[k] = 'Z';
    y.letters[k] = 'Z';
  }
  x.letters[m] = 'X';
  y.letters[m] = 'Y';
  return {x, y};
}

std::vector<PauliString> jw_creation(int m, int n_modes) {
  auto ops = jw_annihilation(m, n_modes);
  ops[1].coefficient = -ops[1].coefficient;
  return ops;
}

void multiply_into(std::vector<PauliString>& acc, const std::vector<PauliString>& factor) {
  std::vector<PauliString> out;
  out.reserve(acc.size() * factor.size());
  for (const auto& a : acc)
    for (const auto& f : factor) out.push_back(multiply(a, f));
  acc = std::move(out);
}

int sign_below(std::uint64_t occ, int m) {
  const std::uint64_t below = occ & ((std::uint64_t(1) << m) - 1);
  return __builtin_parityll(below) ? -1 : 1;
}

// c_m |occ> and c+_m |occ>; returns false when annihilated.
bool annihilate(std::uint64_t& occ, int m, int& sign) {
  const std::uint64_t bit = std::uint64_t(1) << m;
  if (!(occ & bit)) return false;
  sign *= sign_below(occ, m);
  occ ^= bit;
  return true;
}

bool create(std::uint64_t& occ, int m, int& sign) {
  const std::uint64_t bit = std::uint64_t(1) << m;
  if (occ & bit) return false;
  sign *= sign_below(occ, m);
  occ |= bit;
  return true;
}

// Applies one H term to |occ> and adds the images into the column.
template <typename Add>
void apply_terms(const FermionHamiltonian& h, std::uint64_t occ, Add&& add) {
  const int n = h.n_sites;
  const int n_spins = h.spin == Spin::half ? 2 : 1;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Complex tij = h.t(i, j);
      if (tij == Complex(0, 0)) continue;
      for (int s = 0; s < n_spins; ++s) {
        std::uint64_t b = occ;
        int sign = 1;
        if (!annihilate(b, h.mode(j, s), sign)) continue;
        if (!create(b, h.mode(i, s), sign)) continue;
        add(b, tij * double(sign));
      }
    }
  if (h.v.empty()) return;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double vv = h.v_at(i, j, k, l);
          if (vv == 0.0) continue;
          for (int s = 0; s < n_spins; ++s)
            for (int sp = 0; sp < n_spins; ++sp) {
              // c+_{is} c+_{js'} c_{ls'} c_{ks}, applied right to left
              std::uint64_t b = occ;
              int sign = 1;
              if (!annihilate(b, h.mode(k, s), sign)) continue;
              if (!annihilate(b, h.mode(l, sp), sign)) continue;
              if (!create(b, h.mode(j, sp), sign)) continue;
              if (!create(b, h.mode(i, s), sign)) continue;
              add(b, Complex(vv * sign, 0));
            }
        }
}

Spectrum make_spectrum(const ComplexMatrix& m, int n_qubits,
                       const std::vector<std::uint64_t>& basis) {
  if (basis.empty())
    throw std::invalid_argument("diagonalization: the requested sector is empty");
  HermitianEigen sys = eig_hermitian(m);
  Spectrum out{std::vector<double>(sys.eigenvalues.data(),
                                   sys.eigenvalues.data() + sys.eigenvalues.size()),
               Statevector(n_qubits),
               {},
               eigen_residual(m, sys)};
  const std::size_t nlev = out.eigenvalues.size();
  out.degenerate.assign(nlev, false);
  for (std::size_t i = 0; i + 1 < nlev; ++i)
    if (std::abs(out.eigenvalues[i + 1] - out.eigenvalues[i]) <= kDegeneracyTol) {
      out.degenerate[i] = true;
      out.degenerate[i + 1] = true;
    }
  auto& amps = out.ground_state.amplitudes();
  std::fill(amps.begin(), amps.end(), Complex(0, 0));
  for (Eigen::Index r = 0; r < sys.eigenvectors.rows(); ++r)
    amps[basis[static_cast<std::size_t>(r)]] = sys.eigenvectors(r, 0);
  return out;
}

std::vector<std::uint64_t> sector_basis(int n_modes, Spin spin,
                                        const SectorFilter& filter) {
  std::vector<std::uint64_t> basis;
  for (std::uint64_t b = 0; b < (std::uint64_t(1) << n_modes); ++b)
    if (filter.matches(b, n_modes, spin)) basis.push_back(b);
  return basis;
}

}  // namespace

double FermionHamiltonian::v_at(int i, int j, int k, int l) const {
  if (v.empty()) return 0.0;
  const std::size_t n = static_cast<std::size_t>(n_sites);
  return v[((static_cast<std::size_t>(i) * n + j) * n + k) * n + l];
}

void FermionHamiltonian::validate() const {
  if (n_sites < 1) throw std::invalid_argument("n_sites must be >= 1");
  if (t.rows() != n_sites || t.cols() != n_sites)
    throw std::invalid_argument("t matrix must be n_sites x n_sites");
  for (int i = 0; i < n_sites; ++i)
    for (int j = 0; j < n_sites; ++j) {
      if (std::abs(t(i, j) - std::conj(t(j, i))) > 1e-12)
        throw std::invalid_argument("t matrix is not Hermitian");
      if (!std::isfinite(t(i, j).real()) || !std::isfinite(t(i, j).imag()))
        throw std::invalid_argument("t matrix has non-finite entries");
    }
  if (!v.empty()) {
    const std::size_t n4 = static_cast<std::size_t>(n_sites) * n_sites * n_sites * n_sites;
    if (v.size() != n4)
      throw std::invalid_argument("V tensor must have n_sites^4 entries");
    for (int i = 0; i < n_sites; ++i)
      for (int j = 0; j < n_sites; ++j)
        for (int k = 0; k < n_sites; ++k)
          for (int l = 0; l < n_sites; ++l)
            if (std::abs(v_at(i, j, k, l) - v_at(j, i, l, k)) > 1e-12)
              throw std::invalid_argument("V tensor violates V_ijkl = V_jilk");
  }
  if (n_modes() > 24) throw std::invalid_argument("too many fermionic modes");
}

FermionHamiltonian build_hubbard(int n_sites, double t, double U,
                                 std::span<const double> v) {
  if (n_sites < 1) throw std::invalid_argument("build_hubbard: n_sites must be >= 1");
  if (v.size() != static_cast<std::size_t>(n_sites))
    throw std::invalid_argument("build_hubbard: potential has wrong length");
  FermionHamiltonian h;
  h.n_sites = n_sites;
  h.spin = Spin::half;
  h.t = chain_kinetic(n_sites, t).cast<Complex>();
  for (int i = 0; i < n_sites; ++i) h.t(i, i) += v[i];
  if (U != 0.0) {
    h.v.assign(static_cast<std::size_t>(n_sites) * n_sites * n_sites * n_sites, 0.0);
    const std::size_t n = static_cast<std::size_t>(n_sites);
    for (std::size_t i = 0; i < n; ++i) h.v[((i * n + i) * n + i) * n + i] = U / 2.0;
  }
  h.validate();
  return h;
}

RealMatrix chain_kinetic(int n_sites, double t) {
  RealMatrix m = RealMatrix::Zero(n_sites, n_sites);
  for (int i = 0; i + 1 < n_sites; ++i) {
    m(i, i + 1) = -t;
    m(i + 1, i) = -t;
  }
  return m;
}

double QubitHamiltonian::identity_coefficient() const {
  for (const auto& term : terms)
    if (term.is_identity()) return term.coefficient.real();
  return 0.0;
}

double QubitHamiltonian::offdiagonal_bound() const {
  double b = 0.0;
  for (const auto& term : terms)
    if (!term.is_identity()) b += std::abs(term.coefficient);
  return b;
}

ComplexMatrix QubitHamiltonian::matrix() const {
  return pauli_sum_matrix(terms, n_qubits);
}

ComplexMatrix QubitHamiltonian::scaled_matrix() const {
  const std::uint64_t dim = std::uint64_t(1) << n_qubits;
  ComplexMatrix m = matrix();
  m += shift * ComplexMatrix::Identity(dim, dim);
  return m / scale;
}

void QubitHamiltonian::check_finite() const {
  for (const auto& term : terms)
    if (!std::isfinite(term.coefficient.real()) || !std::isfinite(term.coefficient.imag()))
      throw std::invalid_argument("Hamiltonian has non-finite coefficients");
}

std::vector<PauliString> jordan_wigner(const FermionHamiltonian& h) {
  h.validate();
  const int nm = h.n_modes();
  const int n_spins = h.spin == Spin::half ? 2 : 1;
  std::vector<PauliString> terms;
  for (int i = 0; i < h.n_sites; ++i)
    for (int j = 0; j < h.n_sites; ++j) {
      const Complex tij = h.t(i, j);
      if (tij == Complex(0, 0)) continue;
      for (int s = 0; s < n_spins; ++s) {
        std::vector<PauliString> prod = jw_creation(h.mode(i, s), nm);
        multiply_into(prod, jw_annihilation(h.mode(j, s), nm));
        for (auto& p : prod) {
          p.coefficient *= tij;
          terms.push_back(std::move(p));
        }
      }
    }
  if (!h.v.empty()) {
    for (int i = 0; i < h.n_sites; ++i)
      for (int j = 0; j < h.n_sites; ++j)
        for (int k = 0; k < h.n_sites; ++k)
          for (int l = 0; l < h.n_sites; ++l) {
            const double vv = h.v_at(i, j, k, l);
            if (vv == 0.0) continue;
            for (int s = 0; s < n_spins; ++s)
              for (int sp = 0; sp < n_spins; ++sp) {
                std::vector<PauliString> prod = jw_creation(h.mode(i, s), nm);
                multiply_into(prod, jw_creation(h.mode(j, sp), nm));
                multiply_into(prod, jw_annihilation(h.mode(l, sp), nm));
                multiply_into(prod, jw_annihilation(h.mode(k, s), nm));
                for (auto& p : prod) {
                  p.coefficient *= vv;
                  terms.push_back(std::move(p));
                }
              }
          }
  }
  collect_terms(terms);
  for (const auto& term : terms)
    if (std::abs(term.coefficient.imag()) > 1e-10)
      throw std::logic_error("collected Jordan-Wigner terms must be real");
  return terms;
}

QubitHamiltonian to_qubit_hamiltonian(const FermionHamiltonian& h) {
  QubitHamiltonian q;
  q.n_qubits = h.n_modes();
  q.terms = jordan_wigner(h);
  q.spin = h.spin;
  return q;
}

std::vector<PauliString> jordan_wigner_one_body(const ComplexMatrix& m, Spin spin) {
  FermionHamiltonian h;
  h.n_sites = static_cast<int>(m.rows());
  h.spin = spin;
  h.t = m;
  return jordan_wigner(h);
}

std::vector<PauliString> jw_transition(int mode_a, int mode_b, int n_modes) {
  std::vector<PauliString> prod = jw_creation(mode_a, n_modes);
  multiply_into(prod, jw_annihilation(mode_b, n_modes));
  collect_terms(prod);
  return prod;
}

QubitHamiltonian shift_and_scale(const QubitHamiltonian& h, double margin,
                                 bool use_oracle_bounds) {
  if (margin < 0) throw std::invalid_argument("shift_and_scale: margin must be >= 0");
  h.check_finite();
  double lo, hi;
  if (use_oracle_bounds) {
    Spectrum s = exact_diagonalize(h);
    lo = s.eigenvalues.front();
    hi = s.eigenvalues.back();
  } else {
    const double c0 = h.identity_coefficient();
    const double b = h.offdiagonal_bound();
    lo = c0 - b;
    hi = c0 + b;
  }
  lo -= margin;
  hi += margin;
  QubitHamiltonian out = h;
  out.shift = -lo;
  out.scale = (hi - lo < 1e-12) ? 1.0 : (hi - lo);  // 1.0 when H ~ identity
  return out;
}

double unscale_energy(double scaled, const QubitHamiltonian& h) {
  return scaled * h.scale - h.shift;
}

bool SectorFilter::matches(std::uint64_t occ, int n_modes, Spin spin) const {
  if (n_electrons && std::popcount(occ) != *n_electrons) return false;
  if (two_sz) {
    if (spin != Spin::half) return true;  // ignored for spinless
    int up = 0, down = 0;
    for (int m = 0; m < n_modes; ++m)
      if (occ & (std::uint64_t(1) << m)) ((m & 1) ? down : up)++;
    if (up - down != *two_sz) return false;
  }
  return true;
}

Spectrum exact_diagonalize(const QubitHamiltonian& h, const SectorFilter& filter,
                           int qubit_cap) {
  if (h.n_qubits > qubit_cap)
    throw std::invalid_argument("exact_diagonalize: " + std::to_string(h.n_qubits) +
                                " qubits exceeds the cap of " +
                                std::to_string(qubit_cap));
  // The filter is expressed in fermionic occupations; the qubit route shares
  // the mode ordering, so bit masks coincide.
  std::vector<std::uint64_t> basis = sector_basis(h.n_qubits, h.spin, filter);
  std::vector<std::int64_t> where(std::size_t(1) << h.n_qubits, -1);
  for (std::size_t r = 0; r < basis.size(); ++r) where[basis[r]] = static_cast<std::int64_t>(r);

  // Individual Pauli strings leave the sector; only the collected column may
  // be checked for closure.
  ComplexMatrix m = ComplexMatrix::Zero(basis.size(), basis.size());
  std::vector<Complex> scratch(std::size_t(1) << h.n_qubits, Complex(0, 0));
  std::vector<std::uint64_t> touched;
  for (std::size_t col = 0; col < basis.size(); ++col) {
    const std::uint64_t b = basis[col];
    touched.clear();
    for (const auto& term : h.terms) {
      const std::uint64_t xm = term.x_mask();
      const std::uint64_t zym = term.zy_mask();
      static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      const Complex lam = term.coefficient * kIPow[term.y_count() & 3] *
                          (__builtin_parityll(b & zym) ? -1.0 : 1.0);
      const std::uint64_t b2 = b ^ xm;
      if (scratch[b2] == Complex(0, 0)) touched.push_back(b2);
      scratch[b2] += lam;
    }
    for (std::uint64_t b2 : touched) {
      const Complex amp = scratch[b2];
      scratch[b2] = Complex(0, 0);
      if (std::abs(amp) < 1e-12) continue;
      const std::int64_t row = where[b2];
      if (row < 0)
        throw std::invalid_argument(
            "exact_diagonalize: Hamiltonian does not preserve the requested sector");
      m(row, col) += amp;
    }
  }
  Spectrum out = make_spectrum(m, h.n_qubits, basis);
  if (out.residual > 1e-10)
    throw std::runtime_error("exact_diagonalize: eigenpair residual above 1e-10");
  return out;
}

ComplexMatrix fermion_matrix(const FermionHamiltonian& h) {
  h.validate();
  return fermion_sector_matrix(h, SectorFilter{});
}

ComplexMatrix fermion_sector_matrix(const FermionHamiltonian& h,
                                    const SectorFilter& filter,
                                    std::vector<std::uint64_t>* basis_out) {
  h.validate();
  const int nm = h.n_modes();
  std::vector<std::uint64_t> basis = sector_basis(nm, h.spin, filter);
  std::vector<std::int64_t> where(std::size_t(1) << nm, -1);
  for (std::size_t r = 0; r < basis.size(); ++r) where[basis[r]] = static_cast<std::int64_t>(r);
  ComplexMatrix m = ComplexMatrix::Zero(basis.size(), basis.size());
  for (std::size_t col = 0; col < basis.size(); ++col) {
    apply_terms(h, basis[col], [&](std::uint64_t b, Complex amp) {
      const std::int64_t row = where[b];
      if (row < 0)
        throw std::invalid_argument(
            "fermion_sector_matrix: Hamiltonian does not preserve the sector");
      m(row, col) += amp;
    });
  }
  if (basis_out) *basis_out = std::move(basis);
  return m;
}

Spectrum diagonalize_fermionic(const FermionHamiltonian& h, const SectorFilter& filter) {
  std::vector<std::uint64_t> basis;
  ComplexMatrix m = fermion_sector_matrix(h, filter, &basis);
  return make_spectrum(m, h.n_modes(), basis);
}

Complex one_body_expectation(const Statevector& state, const FermionHamiltonian& h,
                             int site_i, int site_j, int sigma) {
  const int mi = h.mode(site_i, sigma);
  const int mj = h.mode(site_j, sigma);
  Complex acc(0, 0);
  const auto& amps = state.amplitudes();
  for (std::uint64_t b = 0; b < state.dim(); ++b) {
    if (amps[b] == Complex(0, 0)) continue;
    std::uint64_t b2 = b;
    int sign = 1;
    if (!annihilate(b2, mj, sign)) continue;
    if (!create(b2, mi, sign)) continue;
    acc += std::conj(amps[b2]) * amps[b] * double(sign);
  }
  return acc;
}

std::vector<ComplexMatrix> density_matrix_from_state(const Statevector& state,
                                                     const FermionHamiltonian& h) {
  const int n_spins = h.spin == Spin::half ? 2 : 1;
  std::vector<ComplexMatrix> rho(n_spins, ComplexMatrix::Zero(h.n_sites, h.n_sites));
  for (int s = 0; s < n_spins; ++s)
    for (int i = 0; i < h.n_sites; ++i)
      for (int j = 0; j < h.n_sites; ++j)
        rho[s](i, j) = one_body_expectation(state, h, i, j, s);
  return rho;
}

}  // namespace rwmp
