#pragma once

#include <string>
#include <vector>

#include "rwmp/fermion.hpp"
#include "rwmp/qpe.hpp"
#include "rwmp/random.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp {

// "full" runs the four-register circuit: the observable measurement is a
// pointer-qubit Hadamard test and the ground check compares a fresh
// check-energy readout against the saved energy register. "collapse" is the
// statistically equivalent oracle: both measurements are applied as direct
// projections using the known ground state.
enum class QaeMode { full, collapse };

struct QaeOptions {
  long rounds = 0;  // 0: use ceil(round_factor / epsilon)
  double epsilon = 0.01;
  QaeMode mode = QaeMode::collapse;
  int check_bits = 7;             // check-energy resolution (full mode)
  double repair_cap_factor = 10;  // repair aborts beyond cap_factor/epsilon
  double round_factor = 1.0;      // rounds-per-1/epsilon when rounds == 0
  long resolved_rounds() const;
  long repair_cap() const;
};

struct QAEEstimate {
  std::string label;
  double value = 0.0;  // 2 * accepted / rounds - 1
  long accepted = 0;
  long rounds = 0;
  long repair_iterations = 0;  // failed ground checks across all rounds
  double epsilon = 0.0;
  double stderr_est = 0.0;
  double input_fidelity = 1.0;  // vs the oracle ground state, when known
};

// Real combination of Hermitian unitary Pauli strings representing a
// Hermitian one-body observable; counted string by string and recombined.
struct ObservablePlan {
  struct Entry {
    PauliString string;  // unit coefficient
    double weight = 0.0;
    long rounds = 0;  // 0: estimator default
  };
  std::vector<Entry> entries;
  double identity_offset = 0.0;
  int n_qubits = 0;

  // Reconstructs the represented operator; used to validate the plan.
  ComplexMatrix matrix() const;
};

// Plan for sum_ab w_ab c+_a c_b over Jordan-Wigner modes (w Hermitian).
ObservablePlan plan_one_body_modes(const ComplexMatrix& w, long rounds_per_string = 0);

struct DensityMatrixEstimate {
  std::vector<ComplexMatrix> rho;  // per spin block
  std::vector<QAEEstimate> strings;
  double trace = 0.0;
  long total_repairs = 0;
};

struct KsEnergyEstimate {
  double value = 0.0;
  std::vector<double> mode_energies;     // h_k of the diagonalized KS matrix
  std::vector<double> mode_occupations;  // counted <n_k>
  std::vector<QAEEstimate> estimates;
  long total_repairs = 0;
};

// State-preserving quantum counting against a recorded Hamiltonian. The
// wavefunction passed to the estimate calls is mutated in place and handed
// back ready for the next use; after each call its fidelity with the input
// is 1 - O(epsilon) (exactly 1 in collapse mode).
class CountingEstimator {
 public:
  // `scaled` must have its spectrum in [0, 1]; `oracle` supplies the ground
  // state for collapse mode, the degeneracy refusal and fidelity records.
  CountingEstimator(QubitHamiltonian scaled, Spectrum oracle, QaeOptions options);

  // <psi|P|psi> for a bare Pauli string (P^2 = I).
  QAEEstimate estimate_pauli(Statevector& psi, const PauliString& p,
                             RandomStream& rng, long rounds_override = 0);

  // <psi|R|psi> for a dense Hermitian unitary reflection on the system.
  QAEEstimate estimate_reflection(Statevector& psi, const ComplexMatrix& refl,
                                  const std::string& label, RandomStream& rng,
                                  long rounds_override = 0);

  // Weighted recombination of per-string counts.
  double estimate_plan(Statevector& psi, const ObservablePlan& plan,
                       RandomStream& rng, std::vector<QAEEstimate>* records);

  // rho_ij = <c+_is c_js> per spin; trace approaches the electron count.
  DensityMatrixEstimate estimate_density_matrix(Statevector& psi,
                                                const FermionHamiltonian& h,
                                                RandomStream& rng);

  // <T + V_s> from counted occupations of the diagonalized KS modes.
  KsEnergyEstimate ks_energy_expectation(Statevector& psi, const RealMatrix& kinetic,
                                         const std::vector<double>& v_s,
                                         RandomStream& rng);

  const QaeOptions& options() const { return options_; }
  // Saved energy register content (full mode), valid after the first call.
  std::uint64_t saved_energy_value() const { return saved_energy_; }

 private:
  struct Observable;  // Pauli or dense reflection
  QAEEstimate run_counting(Statevector& psi, const Observable& op,
                           const std::string& label, long rounds, RandomStream& rng);

  QubitHamiltonian scaled_;
  Spectrum oracle_;
  QaeOptions options_;
  RegisterLayout layout_;  // system | check-energy | pointer (full mode)
  std::vector<ComplexMatrix> powers_;      // U^(2^j)
  std::vector<ComplexMatrix> powers_inv_;  // U^(-2^j)
  std::uint64_t saved_energy_ = 0;
  bool have_saved_energy_ = false;
};

}  // namespace rwmp
