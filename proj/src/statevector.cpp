#include "rwmp/statevector.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rwmp {

QubitRange RegisterLayout::add(const std::string& name, int count) {
  if (count <= 0) throw std::invalid_argument("register size must be positive");
  for (const auto& [n, r] : regs_)
    if (n == name) throw std::invalid_argument("duplicate register '" + name + "'");
  QubitRange r{next_, count};
  regs_.emplace_back(name, r);
  next_ += count;
  return r;
}

const QubitRange& RegisterLayout::range(const std::string& name) const {
  for (const auto& [n, r] : regs_)
    if (n == name) return r;
  throw std::out_of_range("no register '" + name + "'");
}

bool RegisterLayout::has(const std::string& name) const {
  for (const auto& [n, r] : regs_)
    if (n == name) return true;
  return false;
}

void RegisterLayout::validate() const {
  std::vector<bool> covered(next_, false);
  for (const auto& [name, r] : regs_) {
    for (int q = r.first; q < r.first + r.count; ++q) {
      if (q < 0 || q >= next_ || covered[q])
        throw std::logic_error("register layout overlap at qubit " + std::to_string(q));
      covered[q] = true;
    }
  }
  for (int q = 0; q < next_; ++q)
    if (!covered[q]) throw std::logic_error("register layout gap at qubit " + std::to_string(q));
}

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("statevector supports 1.." +
                                std::to_string(kMaxQubits) + " qubits, got " +
                                std::to_string(n_qubits));
  amps_.assign(std::size_t(1) << n_qubits, Complex(0, 0));
  amps_[0] = Complex(1, 0);
}

Statevector Statevector::basis_state(int n_qubits, std::uint64_t index) {
  Statevector s(n_qubits);
  if (index >= s.dim()) throw std::out_of_range("basis index out of range");
  s.amps_[0] = Complex(0, 0);
  s.amps_[index] = Complex(1, 0);
  return s;
}

void Statevector::check_qubit(int q) const {
  if (q < 0 || q >= n_qubits_)
    throw std::out_of_range("qubit " + std::to_string(q) + " out of range");
}

void Statevector::apply_hadamard(int q) {
  check_qubit(q);
  static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Complex u[4] = {{inv_sqrt2, 0}, {inv_sqrt2, 0}, {inv_sqrt2, 0}, {-inv_sqrt2, 0}};
  kernels::apply_single_qubit(amps_.data(), n_qubits_, q, u);
  ++counts_.hadamard;
}

void Statevector::apply_hadamard_all(QubitRange range) {
  for (int k = 0; k < range.count; ++k) apply_hadamard(range.qubit(k));
}

void Statevector::apply_x(int q) {
  check_qubit(q);
  const Complex u[4] = {{0, 0}, {1, 0}, {1, 0}, {0, 0}};
  kernels::apply_single_qubit(amps_.data(), n_qubits_, q, u);
  ++counts_.single_qubit;
}

void Statevector::apply_single_qubit(int q, const Complex u[4]) {
  check_qubit(q);
  kernels::apply_single_qubit(amps_.data(), n_qubits_, q, u);
  ++counts_.single_qubit;
}

void Statevector::apply_phase(int q, double angle) {
  check_qubit(q);
  kernels::apply_phase_one(amps_.data(), n_qubits_, q, std::polar(1.0, angle));
  ++counts_.single_qubit;
}

void Statevector::apply_controlled_phase(int control, int target, int ell) {
  if (ell < 0) throw std::invalid_argument("controlled phase: ell must be >= 0");
  apply_controlled_phase_angle(control, target, M_PI / double(std::uint64_t(1) << ell));
}

void Statevector::apply_controlled_phase_angle(int control, int target, double angle) {
  check_qubit(control);
  check_qubit(target);
  kernels::apply_controlled_phase(amps_.data(), n_qubits_, control, target,
                                  std::polar(1.0, angle));
  ++counts_.controlled_phase;
}

void Statevector::apply_swap(int a, int b) {
  check_qubit(a);
  check_qubit(b);
  kernels::apply_swap(amps_.data(), n_qubits_, a, b);
  ++counts_.swap;
}

void Statevector::apply_pauli_exponential(const PauliString& p, double theta) {
  if (p.n_qubits() != n_qubits_)
    throw std::invalid_argument("pauli exponential: string length mismatch");
  if (p.is_identity())
    throw std::invalid_argument("pauli exponential: identity string; fold into a global phase");
  kernels::apply_pauli_exponential(amps_.data(), n_qubits_, p.x_mask(), p.zy_mask(),
                                   p.y_count(), theta);
  ++counts_.pauli_exponential;
}

void Statevector::apply_pauli(const PauliString& p) {
  if (p.n_qubits() != n_qubits_)
    throw std::invalid_argument("apply_pauli: string length mismatch");
  kernels::apply_pauli(amps_.data(), n_qubits_, p.x_mask(), p.zy_mask(), p.y_count());
  ++counts_.pauli_exponential;
}

void Statevector::apply_matrix(QubitRange range, const ComplexMatrix& u) {
  kernels::apply_dense(amps_.data(), n_qubits_, range.first, range.count, u);
  ++counts_.dense;
}

void Statevector::apply_controlled_matrix(int control, QubitRange range,
                                          const ComplexMatrix& u) {
  check_qubit(control);
  kernels::apply_controlled_dense(amps_.data(), n_qubits_, control, range.first,
                                  range.count, u);
  ++counts_.dense;
}

void Statevector::apply_phase_table(QubitRange range, const std::vector<Complex>& table) {
  if (table.size() != (std::size_t(1) << range.count))
    throw std::invalid_argument("phase table size mismatch");
  kernels::apply_phase_table(amps_.data(), n_qubits_, range.first, range.count,
                             table.data());
  ++counts_.dense;
}

void Statevector::flip_where_register_equals(QubitRange range, std::uint64_t value,
                                             int target) {
  check_qubit(target);
  kernels::flip_where_register_equals(amps_.data(), n_qubits_, range.first,
                                      range.count, value, target);
  ++counts_.dense;
}

void Statevector::apply_global_phase(double angle) {
  const Complex ph = std::polar(1.0, angle);
  for (auto& a : amps_) a *= ph;
}

void Statevector::qft(QubitRange range) {
  if (range.count <= 0) throw std::invalid_argument("qft: empty range");
  check_qubit(range.first);
  check_qubit(range.first + range.count - 1);
  const int n = range.count;
  for (int j = n - 1; j >= 0; --j) {
    apply_hadamard(range.qubit(j));
    for (int m = j - 1; m >= 0; --m)
      apply_controlled_phase(range.qubit(m), range.qubit(j), j - m);
  }
  for (int k = 0; k < n / 2; ++k) apply_swap(range.qubit(k), range.qubit(n - 1 - k));
}

void Statevector::inverse_qft(QubitRange range) {
  if (range.count <= 0) throw std::invalid_argument("inverse_qft: empty range");
  const int n = range.count;
  for (int k = 0; k < n / 2; ++k) apply_swap(range.qubit(k), range.qubit(n - 1 - k));
  for (int j = 0; j < n; ++j) {
    for (int m = 0; m < j; ++m)
      apply_controlled_phase_angle(range.qubit(m), range.qubit(j),
                                   -M_PI / double(std::uint64_t(1) << (j - m)));
    apply_hadamard(range.qubit(j));
  }
}

int Statevector::measure(int q, RandomStream& rng) {
  check_qubit(q);
  double p1 = kernels::bit_probability(amps_.data(), n_qubits_, q);
  p1 = std::min(1.0, std::max(0.0, p1));
  int outcome;
  // A branch with probability below 1e-15 is never sampled.
  if (p1 < 1e-15) {
    outcome = 0;
    rng.next_unit();  // keep the draw count independent of amplitudes
  } else if (1.0 - p1 < 1e-15) {
    outcome = 1;
    rng.next_unit();
  } else {
    outcome = rng.next_unit() < p1 ? 1 : 0;
  }
  const double p = outcome ? p1 : 1.0 - p1;
  kernels::project_bit(amps_.data(), n_qubits_, q, outcome, 1.0 / std::sqrt(p));
  ++counts_.measurement;
  return outcome;
}

std::uint64_t Statevector::measure_register(QubitRange range, RandomStream& rng) {
  std::uint64_t value = 0;
  for (int k = 0; k < range.count; ++k)
    value |= std::uint64_t(measure(range.qubit(k), rng)) << k;
  return value;
}

double Statevector::bit_probability(int q) const {
  check_qubit(q);
  return kernels::bit_probability(amps_.data(), n_qubits_, q);
}

double Statevector::register_probability(QubitRange range, std::uint64_t value) const {
  const std::uint64_t mask = ((std::uint64_t(1) << range.count) - 1) << range.first;
  const std::uint64_t want = value << range.first;
  double p = 0.0;
  for (std::uint64_t b = 0; b < dim(); ++b)
    if ((b & mask) == want) p += std::norm(amps_[b]);
  return p;
}

double Statevector::norm() const {
  return std::sqrt(kernels::norm_sq(amps_.data(), amps_.size()));
}

void Statevector::renormalize() {
  const double n = norm();
  if (n < 1e-300) throw std::runtime_error("cannot renormalize zero state");
  kernels::scale(amps_.data(), amps_.size(), 1.0 / n);
}

Complex Statevector::inner(const Statevector& other) const {
  if (other.n_qubits_ != n_qubits_)
    throw std::invalid_argument("inner product: dimension mismatch");
  Complex acc(0, 0);
  for (std::size_t i = 0; i < amps_.size(); ++i)
    acc += std::conj(amps_[i]) * other.amps_[i];
  return acc;
}

double Statevector::fidelity(const Statevector& other) const {
  return std::norm(inner(other));
}

Statevector Statevector::extract_register(QubitRange keep, std::uint64_t rest_bits) const {
  Statevector out(keep.count);
  const std::uint64_t reg_mask = ((std::uint64_t(1) << keep.count) - 1) << keep.first;
  if (rest_bits & reg_mask)
    throw std::invalid_argument("extract_register: rest bits overlap the register");
  double weight = 0.0;
  for (std::uint64_t r = 0; r < out.dim(); ++r) {
    out.amps_[r] = amps_[rest_bits | (r << keep.first)];
    weight += std::norm(out.amps_[r]);
  }
  if (weight < 1.0 - 1e-9)
    throw std::runtime_error(
        "extract_register: remaining qubits are not fixed to the given bits");
  kernels::scale(out.amps_.data(), out.amps_.size(), 1.0 / std::sqrt(weight));
  return out;
}

void Statevector::save_binary(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const Complex& a : amps_) {
    const double re = a.real(), im = a.imag();
    f.write(reinterpret_cast<const char*>(&re), sizeof(double));
    f.write(reinterpret_cast<const char*>(&im), sizeof(double));
  }
}

Statevector Statevector::load_binary(const std::string& path, int n_qubits) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  Statevector s(n_qubits);
  for (auto& a : s.amps_) {
    double re = 0, im = 0;
    f.read(reinterpret_cast<char*>(&re), sizeof(double));
    f.read(reinterpret_cast<char*>(&im), sizeof(double));
    if (!f) throw std::runtime_error("truncated amplitude dump " + path);
    a = Complex(re, im);
  }
  return s;
}

}  // namespace rwmp
