#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rwmp/fermion.hpp"
#include "rwmp/random.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp {

// Piecewise-linear ramp lambda(t) on [0, t_max] with lambda(0)=0 and
// lambda(t_max)=1, monotone nondecreasing.
struct Schedule {
  std::vector<std::pair<double, double>> breakpoints;  // (t, lambda)
  int steps = 100;
  int trotter_order = 2;

  static Schedule linear(double t_max, int steps, int order = 2);
  double t_max() const { return breakpoints.back().first; }
  double lambda_at(double t) const;
  void validate() const;
};

// psi <- exp(-i H duration) psi, Trotterized product of term exponentials.
void trotter_evolve(Statevector& psi, const QubitHamiltonian& h, double duration,
                    int steps, int order);

struct RtePrepareResult {
  Statevector state;
  std::optional<double> fidelity;  // vs oracle ground state when provided
  bool warned = false;             // final fidelity below the threshold
  long trotter_steps = 0;
  long steps_to_threshold = -1;  // first step whose fidelity met the threshold
};

// Adiabatic preparation along H(t) = h0 + lambda(t) h1, starting from psi0
// (the ground state of h0). Warns rather than fails when the final fidelity
// is low: the pipeline may still warm-start from the returned state.
RtePrepareResult rte_prepare(const QubitHamiltonian& h0, const QubitHamiltonian& h1,
                             const Schedule& schedule, const Statevector& psi0,
                             const Statevector* oracle_ground = nullptr,
                             double fidelity_threshold = 0.0);

struct PhaseReadout {
  int t_bits = 0;
  double phase = 0.0;   // in [0, 1)
  double energy = 0.0;  // unshifted and unscaled
  double success_probability = 0.0;
  std::uint64_t register_value = 0;
};

struct QpeResult {
  PhaseReadout readout;
  Statevector state;  // system register, projected by the readout
  std::vector<double> phases;  // one per repetition
};

// Evolution phase per unit scaled energy; chosen below 2 pi so the scaled
// spectrum occupies [0, 1 - 2^-t_bits) and never wraps.
double qpe_evolution_time(int t_bits);

double phase_to_energy(double phase, double shift, double scale, double t_evo);

// Textbook phase estimation on the scaled Hamiltonian: Hadamards, controlled
// powers of exp(i t_evo H), inverse QFT, ancilla measurement. The controlled
// evolution is applied as the exact unitary of the (small) system register.
// repeats must be odd; the median readout is reported.
QpeResult qpe(const Statevector& system, const QubitHamiltonian& scaled, int t_bits,
              RandomStream& rng, int repeats = 1);

}  // namespace rwmp
