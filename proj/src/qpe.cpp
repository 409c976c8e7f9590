#include "rwmp/qpe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rwmp {
namespace {

struct MergedTerm {
  PauliString string;  // unit coefficient
  double c0 = 0.0;
  double c1 = 0.0;
};

// Union of the two term lists; coefficient at ramp value lambda is c0 + lambda c1.
std::vector<MergedTerm> merge_terms(const QubitHamiltonian& h0,
                                    const QubitHamiltonian& h1) {
  std::map<std::string, MergedTerm> merged;
  auto feed = [&](const QubitHamiltonian& h, bool second) {
    for (const auto& t : h.terms) {
      auto& m = merged[t.letters];
      if (m.string.letters.empty()) m.string = PauliString{Complex(1, 0), t.letters};
      (second ? m.c1 : m.c0) += t.coefficient.real();
    }
  };
  feed(h0, false);
  feed(h1, true);
  std::vector<MergedTerm> out;
  out.reserve(merged.size());
  for (auto& [letters, m] : merged) out.push_back(std::move(m));
  return out;
}

void trotter_step(Statevector& psi, const std::vector<MergedTerm>& terms,
                  double lambda, double dt, int order) {
  auto sweep = [&](double step, bool reverse) {
    const int n = static_cast<int>(terms.size());
    for (int idx = 0; idx < n; ++idx) {
      const MergedTerm& m = terms[reverse ? n - 1 - idx : idx];
      const double c = m.c0 + lambda * m.c1;
      if (c == 0.0) continue;
      if (m.string.is_identity())
        psi.apply_global_phase(-c * step);
      else
        psi.apply_pauli_exponential(m.string, c * step);
    }
  };
  if (order == 1) {
    sweep(dt, false);
  } else {
    sweep(dt / 2, false);
    sweep(dt / 2, true);
  }
}

}  // namespace

Schedule Schedule::linear(double t_max, int steps, int order) {
  Schedule s;
  s.breakpoints = {{0.0, 0.0}, {t_max, 1.0}};
  s.steps = steps;
  s.trotter_order = order;
  s.validate();
  return s;
}

double Schedule::lambda_at(double t) const {
  if (t <= breakpoints.front().first) return breakpoints.front().second;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const auto& [t1, l1] = breakpoints[i];
    if (t <= t1) {
      const auto& [t0, l0] = breakpoints[i - 1];
      if (t1 == t0) return l1;
      return l0 + (l1 - l0) * (t - t0) / (t1 - t0);
    }
  }
  return breakpoints.back().second;
}

void Schedule::validate() const {
  if (breakpoints.size() < 2) throw std::invalid_argument("schedule needs >= 2 breakpoints");
  if (steps < 1) throw std::invalid_argument("schedule needs >= 1 step");
  if (trotter_order != 1 && trotter_order != 2)
    throw std::invalid_argument("Trotter order must be 1 or 2");
  if (breakpoints.front().first != 0.0 || breakpoints.front().second != 0.0)
    throw std::invalid_argument("schedule must start at lambda(0) = 0");
  if (std::abs(breakpoints.back().second - 1.0) > 1e-12)
    throw std::invalid_argument("schedule must end at lambda(t_max) = 1");
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (breakpoints[i].first < breakpoints[i - 1].first)
      throw std::invalid_argument("schedule times must be nondecreasing");
    if (breakpoints[i].second < breakpoints[i - 1].second - 1e-15)
      throw std::invalid_argument("schedule must be monotone nondecreasing");
  }
}

void trotter_evolve(Statevector& psi, const QubitHamiltonian& h, double duration,
                    int steps, int order) {
  if (steps < 1) throw std::invalid_argument("trotter_evolve: steps must be >= 1");
  if (order != 1 && order != 2) throw std::invalid_argument("trotter_evolve: order must be 1 or 2");
  if (psi.n_qubits() != h.n_qubits)
    throw std::invalid_argument("trotter_evolve: state does not match Hamiltonian");
  if (duration == 0.0) return;
  QubitHamiltonian zero;
  zero.n_qubits = h.n_qubits;
  const auto merged = merge_terms(h, zero);
  const double dt = duration / steps;
  for (int k = 0; k < steps; ++k) trotter_step(psi, merged, 0.0, dt, order);
}

RtePrepareResult rte_prepare(const QubitHamiltonian& h0, const QubitHamiltonian& h1,
                             const Schedule& schedule, const Statevector& psi0,
                             const Statevector* oracle_ground,
                             double fidelity_threshold) {
  schedule.validate();
  if (h0.n_qubits != h1.n_qubits)
    throw std::invalid_argument("rte_prepare: Hamiltonian sizes differ");
  if (psi0.n_qubits() != h0.n_qubits)
    throw std::invalid_argument("rte_prepare: state does not match Hamiltonian");

  RtePrepareResult out{psi0, std::nullopt, false, 0, -1};
  const auto merged = merge_terms(h0, h1);
  const double dt = schedule.t_max() / schedule.steps;
  for (int k = 0; k < schedule.steps; ++k) {
    const double t_mid = (k + 0.5) * dt;
    trotter_step(out.state, merged, schedule.lambda_at(t_mid), dt,
                 schedule.trotter_order);
    ++out.trotter_steps;
    if (oracle_ground && out.steps_to_threshold < 0 && fidelity_threshold > 0.0) {
      if (out.state.fidelity(*oracle_ground) >= fidelity_threshold)
        out.steps_to_threshold = out.trotter_steps;
    }
  }
  if (oracle_ground) {
    out.fidelity = out.state.fidelity(*oracle_ground);
    if (fidelity_threshold > 0.0 && *out.fidelity < fidelity_threshold)
      out.warned = true;
  }
  return out;
}

double qpe_evolution_time(int t_bits) {
  return 2.0 * M_PI * (1.0 - std::ldexp(1.0, -t_bits));
}

double phase_to_energy(double phase, double shift, double scale, double t_evo) {
  const double lambda = 2.0 * M_PI * phase / t_evo;
  return lambda * scale - shift;
}

QpeResult qpe(const Statevector& system, const QubitHamiltonian& scaled, int t_bits,
              RandomStream& rng, int repeats) {
  if (t_bits < 1) throw std::invalid_argument("qpe: t_bits must be >= 1");
  if (repeats < 1 || repeats % 2 == 0)
    throw std::invalid_argument("qpe: repeats must be odd");
  if (system.n_qubits() != scaled.n_qubits)
    throw std::invalid_argument("qpe: state does not match Hamiltonian");

  const int n_sys = scaled.n_qubits;
  const QubitRange sys_range{0, n_sys};
  const QubitRange anc_range{n_sys, t_bits};
  const double t_evo = qpe_evolution_time(t_bits);

  // Controlled powers U^(2^j) of U = exp(i t_evo (H + C)/eps_max).
  std::vector<ComplexMatrix> powers(t_bits);
  powers[0] = hermitian_exp(scaled.scaled_matrix(), Complex(0, t_evo));
  for (int j = 1; j < t_bits; ++j) powers[j] = powers[j - 1] * powers[j - 1];

  QpeResult result{PhaseReadout{}, system, {}};
  std::vector<double> probs;
  for (int rep = 0; rep < repeats; ++rep) {
    Statevector joint(n_sys + t_bits);
    auto& amps = joint.amplitudes();
    std::fill(amps.begin(), amps.end(), Complex(0, 0));
    for (std::uint64_t b = 0; b < result.state.dim(); ++b)
      amps[b] = result.state.amplitude(b);

    joint.apply_hadamard_all(anc_range);
    for (int j = 0; j < t_bits; ++j)
      joint.apply_controlled_matrix(anc_range.qubit(j), sys_range, powers[j]);
    joint.inverse_qft(anc_range);

    // Sample the readout, then note its Born probability for diagnostics.
    Statevector pre_measure = joint;
    const std::uint64_t k = joint.measure_register(anc_range, rng);
    probs.push_back(pre_measure.register_probability(anc_range, k));

    result.state = joint.extract_register(sys_range, k << n_sys);
    result.phases.push_back(std::ldexp(double(k), -t_bits));
  }

  std::vector<double> sorted = result.phases;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  result.readout.t_bits = t_bits;
  result.readout.phase = median;
  result.readout.energy = phase_to_energy(median, scaled.shift, scaled.scale, t_evo);
  result.readout.register_value =
      static_cast<std::uint64_t>(std::llround(std::ldexp(median, t_bits)));
  for (std::size_t i = 0; i < result.phases.size(); ++i)
    if (result.phases[i] == median) {
      result.readout.success_probability = probs[i];
      break;
    }
  return result;
}

}  // namespace rwmp
