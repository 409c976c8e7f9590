#include "rwmp/qae.hpp"

#include <cmath>
#include <stdexcept>

namespace rwmp {

long QaeOptions::resolved_rounds() const {
  if (rounds > 0) return rounds;
  if (epsilon <= 0 || epsilon >= 1)
    throw std::invalid_argument("qae: epsilon must lie in (0, 1)");
  return static_cast<long>(std::ceil(round_factor / epsilon));
}

long QaeOptions::repair_cap() const {
  if (epsilon <= 0 || epsilon >= 1)
    throw std::invalid_argument("qae: epsilon must lie in (0, 1)");
  return static_cast<long>(std::ceil(repair_cap_factor / epsilon));
}

ComplexMatrix ObservablePlan::matrix() const {
  const std::uint64_t dim = std::uint64_t(1) << n_qubits;
  ComplexMatrix m = identity_offset * ComplexMatrix::Identity(dim, dim);
  for (const auto& e : entries) m += e.weight * pauli_matrix(e.string);
  return m;
}

ObservablePlan plan_one_body_modes(const ComplexMatrix& w, long rounds_per_string) {
  const int n_modes = static_cast<int>(w.rows());
  for (int a = 0; a < n_modes; ++a)
    for (int b = 0; b < n_modes; ++b)
      if (std::abs(w(a, b) - std::conj(w(b, a))) > 1e-12)
        throw std::invalid_argument("plan_one_body_modes: weights not Hermitian");
  std::vector<PauliString> terms;
  for (int a = 0; a < n_modes; ++a)
    for (int b = 0; b < n_modes; ++b) {
      if (w(a, b) == Complex(0, 0)) continue;
      for (auto p : jw_transition(a, b, n_modes)) {
        p.coefficient *= w(a, b);
        terms.push_back(std::move(p));
      }
    }
  collect_terms(terms);
  ObservablePlan plan;
  plan.n_qubits = n_modes;
  for (auto& t : terms) {
    if (std::abs(t.coefficient.imag()) > 1e-10)
      throw std::logic_error("plan_one_body_modes: complex collected coefficient");
    if (t.is_identity()) {
      plan.identity_offset += t.coefficient.real();
    } else {
      const double weight = t.coefficient.real();
      plan.entries.push_back({PauliString{Complex(1, 0), t.letters}, weight,
                              rounds_per_string});
    }
  }
  return plan;
}

struct CountingEstimator::Observable {
  const PauliString* pauli = nullptr;   // fast mask-based application
  const ComplexMatrix* dense = nullptr;  // reflections without string form
  ComplexMatrix controlled_cache;        // dense form for the Hadamard test

  void apply(Statevector& psi) const {
    if (pauli)
      psi.apply_pauli(*pauli);
    else
      psi.apply_matrix(QubitRange{0, psi.n_qubits()}, *dense);
  }

  void apply_controlled(Statevector& joint, int control, QubitRange sys) const {
    joint.apply_controlled_matrix(control, sys,
                                  dense ? *dense : controlled_cache);
  }
};

CountingEstimator::CountingEstimator(QubitHamiltonian scaled, Spectrum oracle,
                                     QaeOptions options)
    : scaled_(std::move(scaled)), oracle_(std::move(oracle)), options_(options) {
  if (oracle_.ground_degenerate())
    throw std::invalid_argument(
        "qae: the recorded Hamiltonian has a degenerate ground state; "
        "the repair loop is ill-defined");
  (void)options_.resolved_rounds();  // validates epsilon
  layout_.add("system", scaled_.n_qubits);
  layout_.add("check-energy", options_.check_bits);
  layout_.add("pointer", 1);
  layout_.validate();
  if (options_.mode == QaeMode::full) {
    if (layout_.total_qubits() > Statevector::kMaxQubits)
      throw std::invalid_argument("qae: full-mode registers exceed the qubit cap");
    const double t_evo = qpe_evolution_time(options_.check_bits);
    const ComplexMatrix hs = scaled_.scaled_matrix();
    powers_.resize(options_.check_bits);
    powers_inv_.resize(options_.check_bits);
    powers_[0] = hermitian_exp(hs, Complex(0, t_evo));
    powers_inv_[0] = hermitian_exp(hs, Complex(0, -t_evo));
    for (int j = 1; j < options_.check_bits; ++j) {
      powers_[j] = powers_[j - 1] * powers_[j - 1];
      powers_inv_[j] = powers_inv_[j - 1] * powers_inv_[j - 1];
    }
  }
}

QAEEstimate CountingEstimator::run_counting(Statevector& psi, const Observable& op,
                                            const std::string& label, long rounds,
                                            RandomStream& rng) {
  if (psi.n_qubits() != scaled_.n_qubits)
    throw std::invalid_argument("qae: state does not match the Hamiltonian");
  const long cap = options_.repair_cap();

  QAEEstimate est;
  est.label = label;
  est.rounds = rounds;
  est.epsilon = options_.epsilon;
  est.input_fidelity = psi.fidelity(oracle_.ground_state);

  const QubitRange sys = layout_.range("system");
  const QubitRange check = layout_.range("check-energy");
  const int pointer = layout_.range("pointer").first;

  if (options_.mode == QaeMode::collapse) {
    auto pm = [&]() {
      // Measure {(1+P)/2, (1-P)/2} by direct projection.
      Statevector applied = psi;
      op.apply(applied);
      const double a = 0.5 * (1.0 + psi.inner(applied).real());
      int outcome;
      if (a < 1e-15) {
        outcome = 0;
        rng.next_unit();
      } else if (1.0 - a < 1e-15) {
        outcome = 1;
        rng.next_unit();
      } else {
        outcome = rng.next_unit() < a ? 1 : 0;
      }
      const double sign = outcome ? 1.0 : -1.0;
      auto& amps = psi.amplitudes();
      const auto& papp = applied.amplitudes();
      for (std::size_t i = 0; i < amps.size(); ++i)
        amps[i] = 0.5 * (amps[i] + sign * papp[i]);
      psi.renormalize();
      return outcome == 1;  // accept <=> (1+P)/2 branch
    };
    auto ground_check = [&]() {
      const Complex ov = oracle_.ground_state.inner(psi);
      const double p = std::norm(ov);
      bool fired;
      if (p < 1e-15) {
        fired = false;
        rng.next_unit();
      } else if (1.0 - p < 1e-15) {
        fired = true;
        rng.next_unit();
      } else {
        fired = rng.next_unit() < p;
      }
      if (fired) {
        psi = oracle_.ground_state;
      } else {
        auto& amps = psi.amplitudes();
        const auto& g = oracle_.ground_state.amplitudes();
        for (std::size_t i = 0; i < amps.size(); ++i) amps[i] -= ov * g[i];
        psi.renormalize();
      }
      return fired;
    };

    for (long r = 0; r < rounds; ++r) {
      if (pm()) ++est.accepted;
      long iters = 0;
      while (!ground_check()) {
        if (++iters > cap)
          throw std::runtime_error(
              "qae: repair loop exceeded " + std::to_string(cap) +
              " iterations (10/epsilon with epsilon = " +
              std::to_string(options_.epsilon) + ")");
        pm();
      }
      est.repair_iterations += iters;
    }
  } else {
    // Full mode: system + check-energy + pointer registers simulated as one
    // state; the saved energy register is classical after its measurement.
    Statevector joint(layout_.total_qubits());
    auto& jamps = joint.amplitudes();
    std::fill(jamps.begin(), jamps.end(), Complex(0, 0));
    for (std::uint64_t b = 0; b < psi.dim(); ++b) jamps[b] = psi.amplitude(b);

    auto qpe_block = [&]() {
      joint.apply_hadamard_all(check);
      for (int j = 0; j < check.count; ++j)
        joint.apply_controlled_matrix(check.qubit(j), sys, powers_[j]);
      joint.inverse_qft(check);
    };
    auto qpe_block_inverse = [&]() {
      joint.qft(check);
      for (int j = check.count - 1; j >= 0; --j)
        joint.apply_controlled_matrix(check.qubit(j), sys, powers_inv_[j]);
      joint.apply_hadamard_all(check);
    };
    auto reset_check_by_measurement = [&]() {
      for (int k = 0; k < check.count; ++k)
        if (joint.measure(check.qubit(k), rng)) joint.apply_x(check.qubit(k));
    };

    if (!have_saved_energy_) {
      // One phase estimation beforehand records the ground energy.
      qpe_block();
      saved_energy_ = joint.measure_register(check, rng);
      have_saved_energy_ = true;
      for (int k = 0; k < check.count; ++k)
        if ((saved_energy_ >> k) & 1) joint.apply_x(check.qubit(k));
    }

    auto pm = [&]() {
      joint.apply_hadamard(pointer);
      op.apply_controlled(joint, pointer, sys);
      joint.apply_hadamard(pointer);
      const int outcome = joint.measure(pointer, rng);
      if (outcome) joint.apply_x(pointer);
      return outcome == 0;  // pointer 0 <=> (1+P)/2 branch
    };
    auto ground_check = [&]() {
      qpe_block();
      joint.flip_where_register_equals(check, saved_energy_, pointer);
      const int match = joint.measure(pointer, rng);
      if (match) joint.apply_x(pointer);
      qpe_block_inverse();
      reset_check_by_measurement();
      return match == 1;
    };

    for (long r = 0; r < rounds; ++r) {
      if (pm()) ++est.accepted;
      long iters = 0;
      while (!ground_check()) {
        if (++iters > cap)
          throw std::runtime_error(
              "qae: repair loop exceeded " + std::to_string(cap) +
              " iterations (10/epsilon with epsilon = " +
              std::to_string(options_.epsilon) + ")");
        pm();
      }
      est.repair_iterations += iters;
    }
    psi = joint.extract_register(sys, 0);
  }

  est.value = 2.0 * double(est.accepted) / double(est.rounds) - 1.0;
  const double a_hat = double(est.accepted) / double(est.rounds);
  est.stderr_est = 2.0 * std::sqrt(std::max(0.0, a_hat * (1.0 - a_hat)) /
                                   double(est.rounds));
  return est;
}

QAEEstimate CountingEstimator::estimate_pauli(Statevector& psi, const PauliString& p,
                                              RandomStream& rng, long rounds_override) {
  if (std::abs(p.coefficient - Complex(1, 0)) > 1e-12)
    throw std::invalid_argument("estimate_pauli: string must have unit coefficient");
  if (p.is_identity())
    throw std::invalid_argument("estimate_pauli: identity has trivial expectation");
  Observable op;
  op.pauli = &p;
  if (options_.mode == QaeMode::full) op.controlled_cache = pauli_matrix(p);
  const long rounds = rounds_override > 0 ? rounds_override : options_.resolved_rounds();
  return run_counting(psi, op, p.letters, rounds, rng);
}

QAEEstimate CountingEstimator::estimate_reflection(Statevector& psi,
                                                   const ComplexMatrix& refl,
                                                   const std::string& label,
                                                   RandomStream& rng,
                                                   long rounds_override) {
  const std::uint64_t dim = std::uint64_t(1) << scaled_.n_qubits;
  if (refl.rows() != static_cast<Eigen::Index>(dim))
    throw std::invalid_argument("estimate_reflection: dimension mismatch");
  if ((refl * refl - ComplexMatrix::Identity(dim, dim)).norm() > 1e-8)
    throw std::invalid_argument("estimate_reflection: operator is not an involution");
  Observable op;
  op.dense = &refl;
  const long rounds = rounds_override > 0 ? rounds_override : options_.resolved_rounds();
  return run_counting(psi, op, label, rounds, rng);
}

double CountingEstimator::estimate_plan(Statevector& psi, const ObservablePlan& plan,
                                        RandomStream& rng,
                                        std::vector<QAEEstimate>* records) {
  double value = plan.identity_offset;
  for (const auto& entry : plan.entries) {
    QAEEstimate est = estimate_pauli(psi, entry.string, rng, entry.rounds);
    value += entry.weight * est.value;
    if (records) records->push_back(std::move(est));
  }
  return value;
}

DensityMatrixEstimate CountingEstimator::estimate_density_matrix(
    Statevector& psi, const FermionHamiltonian& h, RandomStream& rng) {
  const int n_spins = h.spin == Spin::half ? 2 : 1;
  const int nm = h.n_modes();
  DensityMatrixEstimate out;
  out.rho.assign(n_spins, ComplexMatrix::Zero(h.n_sites, h.n_sites));
  for (int s = 0; s < n_spins; ++s)
    for (int i = 0; i < h.n_sites; ++i)
      for (int j = i; j < h.n_sites; ++j) {
        const int ma = h.mode(i, s);
        const int mb = h.mode(j, s);
        ComplexMatrix w_re = ComplexMatrix::Zero(nm, nm);
        w_re(ma, mb) += 0.5;
        w_re(mb, ma) += 0.5;
        const double re =
            estimate_plan(psi, plan_one_body_modes(w_re), rng, &out.strings);
        double im = 0.0;
        if (i != j) {
          ComplexMatrix w_im = ComplexMatrix::Zero(nm, nm);
          w_im(ma, mb) += Complex(0, -0.5);
          w_im(mb, ma) += Complex(0, 0.5);
          im = estimate_plan(psi, plan_one_body_modes(w_im), rng, &out.strings);
        }
        out.rho[s](i, j) = Complex(re, im);
        out.rho[s](j, i) = Complex(re, -im);
      }
  for (int s = 0; s < n_spins; ++s) out.trace += out.rho[s].trace().real();
  for (const auto& e : out.strings) out.total_repairs += e.repair_iterations;
  return out;
}

KsEnergyEstimate CountingEstimator::ks_energy_expectation(
    Statevector& psi, const RealMatrix& kinetic, const std::vector<double>& v_s,
    RandomStream& rng) {
  const int n_sites = static_cast<int>(kinetic.rows());
  if (static_cast<int>(v_s.size()) != n_sites)
    throw std::invalid_argument("ks_energy_expectation: potential length mismatch");
  RealMatrix m = kinetic;
  for (int i = 0; i < n_sites; ++i) m(i, i) += v_s[i];
  SymmetricEigen sys = eig_symmetric(m);

  const bool spin_half = scaled_.spin == Spin::half;
  const int n_spins = spin_half ? 2 : 1;
  const int nm = spin_half ? 2 * n_sites : n_sites;
  const std::uint64_t dim = std::uint64_t(1) << nm;

  KsEnergyEstimate out;
  for (int s = 0; s < n_spins; ++s)
    for (int k = 0; k < n_sites; ++k) {
      // Occupation of diagonalized mode k: a projector, so 2 n_k - 1 is a
      // Hermitian unitary reflection counted in one go.
      ComplexMatrix w = ComplexMatrix::Zero(nm, nm);
      for (int i = 0; i < n_sites; ++i)
        for (int j = 0; j < n_sites; ++j) {
          const int ma = spin_half ? 2 * i + s : i;
          const int mb = spin_half ? 2 * j + s : j;
          w(ma, mb) = sys.eigenvectors(i, k) * sys.eigenvectors(j, k);
        }
      ObservablePlan plan = plan_one_body_modes(w);
      ComplexMatrix refl = 2.0 * plan.matrix() - ComplexMatrix::Identity(dim, dim);
      QAEEstimate est = estimate_reflection(
          psi, refl, "n[" + std::to_string(k) + (spin_half ? (s ? ",down]" : ",up]") : "]"),
          rng);
      const double occupation = 0.5 * (1.0 + est.value);
      out.mode_energies.push_back(sys.eigenvalues[k]);
      out.mode_occupations.push_back(occupation);
      out.value += sys.eigenvalues[k] * occupation;
      out.total_repairs += est.repair_iterations;
      out.estimates.push_back(std::move(est));
    }
  return out;
}

}  // namespace rwmp
