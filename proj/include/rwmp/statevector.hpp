#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "rwmp/kernels.hpp"
#include "rwmp/pauli.hpp"
#include "rwmp/random.hpp"

namespace rwmp {

struct QubitRange {
  int first = 0;
  int count = 0;
  bool contains(int q) const { return q >= first && q < first + count; }
  int qubit(int k) const { return first + k; }
};

// Named contiguous qubit ranges (system, energy, check-energy, pointer, ...).
// Ranges must be disjoint and cover exactly the allocated qubits.
class RegisterLayout {
 public:
  QubitRange add(const std::string& name, int count);
  const QubitRange& range(const std::string& name) const;
  bool has(const std::string& name) const;
  int total_qubits() const { return next_; }
  void validate() const;

 private:
  std::vector<std::pair<std::string, QubitRange>> regs_;
  int next_ = 0;
};

struct GateCounts {
  long hadamard = 0;
  long controlled_phase = 0;
  long swap = 0;
  long pauli_exponential = 0;
  long dense = 0;
  long single_qubit = 0;
  long measurement = 0;
  long total() const {
    return hadamard + controlled_phase + swap + pauli_exponential + dense +
           single_qubit + measurement;
  }
};

// Dense little-endian statevector: qubit q is bit q of the basis index.
class Statevector {
 public:
  static constexpr int kMaxQubits = 24;

  explicit Statevector(int n_qubits);
  static Statevector basis_state(int n_qubits, std::uint64_t index);

  int n_qubits() const { return n_qubits_; }
  std::uint64_t dim() const { return std::uint64_t(1) << n_qubits_; }
  const std::vector<Complex>& amplitudes() const { return amps_; }
  std::vector<Complex>& amplitudes() { return amps_; }
  Complex amplitude(std::uint64_t b) const { return amps_[b]; }

  void apply_hadamard(int q);
  void apply_hadamard_all(QubitRange range);
  void apply_x(int q);
  void apply_single_qubit(int q, const Complex u[4]);
  void apply_phase(int q, double angle);  // diag(1, e^{i angle})
  // phase e^{i pi / 2^ell} on amplitudes with control and target both set
  void apply_controlled_phase(int control, int target, int ell);
  void apply_controlled_phase_angle(int control, int target, double angle);
  void apply_swap(int a, int b);

  // exp(-i theta P); the string's |coefficient| must be folded into theta.
  void apply_pauli_exponential(const PauliString& p, double theta);
  // The bare string as a gate (coefficient ignored).
  void apply_pauli(const PauliString& p);

  void apply_matrix(QubitRange range, const ComplexMatrix& u);
  void apply_controlled_matrix(int control, QubitRange range, const ComplexMatrix& u);
  void apply_phase_table(QubitRange range, const std::vector<Complex>& table);
  void flip_where_register_equals(QubitRange range, std::uint64_t value, int target);
  void apply_global_phase(double angle);

  void qft(QubitRange range);
  void inverse_qft(QubitRange range);

  int measure(int q, RandomStream& rng);
  std::uint64_t measure_register(QubitRange range, RandomStream& rng);
  double bit_probability(int q) const;
  // Probability of reading `value` if the register were measured now.
  double register_probability(QubitRange range, std::uint64_t value) const;

  double norm() const;
  void renormalize();
  Complex inner(const Statevector& other) const;
  double fidelity(const Statevector& other) const;

  // Pull out a sub-register; all other qubits must be fixed to the given
  // classical bits (e.g. after measuring them).
  Statevector extract_register(QubitRange keep, std::uint64_t rest_bits) const;

  const GateCounts& gate_counts() const { return counts_; }
  void reset_gate_counts() { counts_ = GateCounts{}; }

  // Little-endian binary dump: 2^n (re, im) pairs of 64-bit floats.
  void save_binary(const std::string& path) const;
  static Statevector load_binary(const std::string& path, int n_qubits);

 private:
  void check_qubit(int q) const;

  int n_qubits_;
  std::vector<Complex> amps_;
  GateCounts counts_;
};

}  // namespace rwmp
