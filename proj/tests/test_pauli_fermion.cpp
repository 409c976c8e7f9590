#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rwmp/fermion.hpp"
#include "rwmp/pauli.hpp"

using namespace rwmp;
using namespace rwmp::testing;

TEST_CASE("pauli products match their dense matrices") {
  RandomStream rng(11);
  const std::string letters = "IXYZ";
  for (int trial = 0; trial < 40; ++trial) {
    PauliString a{Complex(1, 0), ""}, b{Complex(1, 0), ""};
    for (int q = 0; q < 3; ++q) {
      a.letters += letters[rng.next_u64() % 4];
      b.letters += letters[rng.next_u64() % 4];
    }
    const ComplexMatrix lhs = pauli_matrix(multiply(a, b));
    const ComplexMatrix rhs = pauli_matrix(a) * pauli_matrix(b);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("collect_terms sums duplicates and drops zeros") {
  std::vector<PauliString> terms = {{Complex(0.5, 0), "XZ"},
                                    {Complex(0.5, 0), "XZ"},
                                    {Complex(1, 0), "IY"},
                                    {Complex(-1, 0), "IY"}};
  collect_terms(terms);
  REQUIRE(terms.size() == 1);
  CHECK(terms[0].letters == "XZ");
  CHECK(terms[0].coefficient.real() == doctest::Approx(1.0));
}

TEST_CASE("number operator maps to (I - Z)/2") {
  const auto terms = jw_transition(1, 1, 2);
  REQUIRE(terms.size() == 2);
  // lexicographic collection: II then IZ
  CHECK(terms[0].letters == "II");
  CHECK(terms[0].coefficient.real() == doctest::Approx(0.5));
  CHECK(terms[1].letters == "IZ");
  CHECK(terms[1].coefficient.real() == doctest::Approx(-0.5));
}

TEST_CASE("hopping maps to (XX + YY)/2") {
  std::vector<PauliString> terms = jw_transition(0, 1, 2);
  for (auto t : jw_transition(1, 0, 2)) terms.push_back(t);
  collect_terms(terms);
  const ComplexMatrix lhs = pauli_sum_matrix(terms, 2);
  ComplexMatrix expect = ComplexMatrix::Zero(4, 4);
  // (X0 X1 + Y0 Y1)/2 written out by hand
  expect(1, 2) = 1;
  expect(2, 1) = 1;
  CHECK((lhs - expect).norm() < 1e-12);
  const ComplexMatrix oracle = dense_creation(0, 2) * dense_annihilation(1, 2) +
                               dense_creation(1, 2) * dense_annihilation(0, 2);
  CHECK((lhs - oracle).norm() < 1e-12);
}

TEST_CASE("jordan-wigner transitions equal the occupation-basis operators") {
  const int n_modes = 4;
  for (int a = 0; a < n_modes; ++a)
    for (int b = 0; b < n_modes; ++b) {
      const ComplexMatrix jw = pauli_sum_matrix(jw_transition(a, b, n_modes), n_modes);
      const ComplexMatrix oracle =
          dense_creation(a, n_modes) * dense_annihilation(b, n_modes);
      CHECK((jw - oracle).norm() < 1e-12);
    }
}

TEST_CASE("mode operators anticommute") {
  const int n_modes = 4;
  const ComplexMatrix id =
      ComplexMatrix::Identity(std::uint64_t(1) << n_modes, std::uint64_t(1) << n_modes);
  for (int i = 0; i < n_modes; ++i)
    for (int j = 0; j < n_modes; ++j) {
      const ComplexMatrix ci = dense_annihilation(i, n_modes);
      const ComplexMatrix cj = dense_annihilation(j, n_modes);
      const ComplexMatrix cjd = dense_creation(j, n_modes);
      CHECK((ci * cj + cj * ci).norm() < 1e-12);
      const ComplexMatrix anti = ci * cjd + cjd * ci;
      CHECK((anti - (i == j ? id : ComplexMatrix::Zero(id.rows(), id.cols()))).norm() <
            1e-12);
    }
}

TEST_CASE("build_hubbard rejects bad input") {
  std::vector<double> v{0.0, 0.0};
  CHECK_THROWS(build_hubbard(0, 1.0, 0.0, v));
  std::vector<double> wrong{0.0};
  CHECK_THROWS(build_hubbard(2, 1.0, 0.0, wrong));
}

TEST_CASE("noninteracting dimer single-particle levels are -t and +t") {
  std::vector<double> v{0.0, 0.0};
  FermionHamiltonian h = build_hubbard(2, 1.0, 0.0, v);
  SymmetricEigen sys = eig_symmetric(h.t.real());
  CHECK(sys.eigenvalues[0] == doctest::Approx(-1.0));
  CHECK(sys.eigenvalues[1] == doctest::Approx(1.0));
}

TEST_CASE("hubbard dimer ground energy matches the closed form") {
  std::vector<double> v{0.0, 0.0};
  FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);

  // independent fermionic route
  Spectrum ferm = diagonalize_fermionic(h, SectorFilter{2, 0});
  CHECK(ferm.eigenvalues.front() ==
        doctest::Approx(hubbard_dimer_ground(1.0, 4.0)).epsilon(1e-12));
  CHECK(ferm.eigenvalues.front() == doctest::Approx(-0.8284271247461903).epsilon(1e-10));

  // qubit route through Jordan-Wigner
  QubitHamiltonian qh = to_qubit_hamiltonian(h);
  Spectrum qs = exact_diagonalize(qh, SectorFilter{2, 0});
  CHECK(qs.eigenvalues.front() ==
        doctest::Approx(hubbard_dimer_ground(1.0, 4.0)).epsilon(1e-12));
}

TEST_CASE("atomic limit: huge U pushes the half-filled ground energy to zero") {
  std::vector<double> v{0.0, 0.0};
  FermionHamiltonian h = build_hubbard(2, 1.0, 400.0, v);
  Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
  CHECK(s.eigenvalues.front() < 0.0);
  CHECK(s.eigenvalues.front() > -0.05);
}

TEST_CASE("qubit and fermionic spectra agree sector by sector") {
  std::vector<double> v{-0.35, 0.35};
  FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
  QubitHamiltonian qh = to_qubit_hamiltonian(h);
  for (int n = 0; n <= 4; ++n)
    for (int sz = -n; sz <= n; ++sz) {
      SectorFilter f{n, sz};
      bool any = false;
      for (std::uint64_t b = 0; b < 16; ++b) any = any || f.matches(b, 4, Spin::half);
      if (!any) continue;
      Spectrum a = diagonalize_fermionic(h, f);
      Spectrum b = exact_diagonalize(qh, f);
      REQUIRE(a.eigenvalues.size() == b.eigenvalues.size());
      for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
        CHECK(a.eigenvalues[i] == doctest::Approx(b.eigenvalues[i]).epsilon(1e-10));
    }
}

TEST_CASE("sector blocks together reproduce the full spectrum") {
  std::vector<double> v{-0.7, 0.7};
  FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
  QubitHamiltonian qh = to_qubit_hamiltonian(h);
  Spectrum full = exact_diagonalize(qh);
  std::vector<double> merged;
  for (int n = 0; n <= 4; ++n) {
    SectorFilter f{n, std::nullopt};
    Spectrum s = exact_diagonalize(qh, f);
    merged.insert(merged.end(), s.eigenvalues.begin(), s.eigenvalues.end());
  }
  std::sort(merged.begin(), merged.end());
  REQUIRE(merged.size() == full.eigenvalues.size());
  for (std::size_t i = 0; i < merged.size(); ++i)
    CHECK(merged[i] == doctest::Approx(full.eigenvalues[i]).epsilon(1e-10));
}

TEST_CASE("constant potential shift moves eigenvalues by c N_e and keeps states") {
  std::vector<double> v{-0.4, 0.9};
  std::vector<double> shifted{-0.4 + 0.77, 0.9 + 0.77};
  FermionHamiltonian h0 = build_hubbard(2, 1.0, 4.0, v);
  FermionHamiltonian h1 = build_hubbard(2, 1.0, 4.0, shifted);
  SectorFilter f{2, std::nullopt};
  Spectrum a = diagonalize_fermionic(h0, f);
  Spectrum b = diagonalize_fermionic(h1, f);
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
    CHECK(b.eigenvalues[i] == doctest::Approx(a.eigenvalues[i] + 2 * 0.77).epsilon(1e-10));
  CHECK(a.ground_state.fidelity(b.ground_state) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("shift_and_scale lands the spectrum in the unit interval") {
  SUBCASE("single Z") {
    QubitHamiltonian h;
    h.n_qubits = 1;
    h.terms = {{Complex(1, 0), "Z"}};
    QubitHamiltonian s = shift_and_scale(h, 0.0);
    CHECK(s.shift == doctest::Approx(1.0));
    CHECK(s.scale == doctest::Approx(2.0));
    HermitianEigen sys = eig_hermitian(s.scaled_matrix());
    CHECK(sys.eigenvalues[0] == doctest::Approx(0.0));
    CHECK(sys.eigenvalues[1] == doctest::Approx(1.0));
  }
  SUBCASE("zero Hamiltonian is a constant") {
    QubitHamiltonian h;
    h.n_qubits = 1;
    QubitHamiltonian s = shift_and_scale(h, 0.0);
    HermitianEigen sys = eig_hermitian(s.scaled_matrix());
    CHECK(sys.eigenvalues[0] == doctest::Approx(sys.eigenvalues[1]));
  }
  SUBCASE("dimer scaled ground state unscales to the oracle energy") {
    std::vector<double> v{0.0, 0.0};
    FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
    QubitHamiltonian qh = to_qubit_hamiltonian(h);
    for (bool oracle_bounds : {false, true}) {
      QubitHamiltonian s = shift_and_scale(qh, oracle_bounds ? 0.25 : 0.0, oracle_bounds);
      Spectrum spec = exact_diagonalize(s, SectorFilter{2, 0});
      const double lam = (spec.eigenvalues.front() + s.shift) / s.scale;
      CHECK(lam > 0.0);
      CHECK(lam < 1.0);
      CHECK(unscale_energy(lam, s) ==
            doctest::Approx(hubbard_dimer_ground(1.0, 4.0)).epsilon(1e-12));
    }
  }
  SUBCASE("non-finite coefficients are rejected") {
    QubitHamiltonian h;
    h.n_qubits = 1;
    h.terms = {{Complex(std::nan(""), 0), "Z"}};
    CHECK_THROWS(shift_and_scale(h, 0.0));
  }
}

TEST_CASE("exact_diagonalize basics and refusals") {
  SUBCASE("one qubit Z") {
    QubitHamiltonian h;
    h.n_qubits = 1;
    h.terms = {{Complex(1, 0), "Z"}};
    Spectrum s = exact_diagonalize(h);
    CHECK(s.eigenvalues[0] == doctest::Approx(-1.0));
    CHECK(s.eigenvalues[1] == doctest::Approx(1.0));
    CHECK(s.residual < 1e-10);
  }
  SUBCASE("noninteracting dimer fills the bonding orbital twice") {
    std::vector<double> v{0.0, 0.0};
    QubitHamiltonian qh = to_qubit_hamiltonian(build_hubbard(2, 1.0, 0.0, v));
    Spectrum s = exact_diagonalize(qh, SectorFilter{2, 0});
    CHECK(s.eigenvalues.front() == doctest::Approx(-2.0).epsilon(1e-12));
  }
  SUBCASE("qubit cap is named in the refusal") {
    QubitHamiltonian h;
    h.n_qubits = 15;
    h.terms = {{Complex(1, 0), std::string(15, 'Z')}};
    CHECK_THROWS_WITH_AS(exact_diagonalize(h), doctest::Contains("cap"),
                         std::invalid_argument);
  }
}

TEST_CASE("degenerate levels are flagged") {
  QubitHamiltonian h;
  h.n_qubits = 2;
  h.terms = {{Complex(1, 0), "ZZ"}};  // eigenvalues {+1, -1, -1, +1}
  Spectrum s = exact_diagonalize(h);
  CHECK(s.ground_degenerate());
}

TEST_CASE("one_body_expectation agrees with the dense density matrix") {
  std::vector<double> v{-0.3, 0.5};
  FermionHamiltonian h = build_hubbard(2, 1.0, 3.0, v);
  Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
  auto rho = density_matrix_from_state(s.ground_state, h);
  REQUIRE(rho.size() == 2);
  for (int spin = 0; spin < 2; ++spin) {
    CHECK(std::abs(rho[spin](0, 1) - std::conj(rho[spin](1, 0))) < 1e-12);
    CHECK(rho[spin].trace().real() == doctest::Approx(1.0).epsilon(1e-10));
  }
  // against a literal statevector contraction
  const ComplexMatrix op =
      dense_creation(0, 4) * dense_annihilation(2, 4);  // c+_{0,up} c_{1,up}
  ComplexVector psi = to_vector(s.ground_state);
  const Complex direct = (psi.adjoint() * op * psi)(0);
  CHECK(std::abs(direct - rho[0](0, 1)) < 1e-12);
}

TEST_CASE("V tensor symmetry is validated") {
  FermionHamiltonian h;
  h.n_sites = 2;
  h.spin = Spin::half;
  h.t = ComplexMatrix::Zero(2, 2);
  h.v.assign(16, 0.0);
  h.v[1] = 0.3;  // V_0001 without its V_0010 partner
  CHECK_THROWS(h.validate());
}
