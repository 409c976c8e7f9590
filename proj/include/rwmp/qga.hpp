#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rwmp/random.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp {

using OracleFunction = std::function<double(std::span<const double>)>;

// One-query gradient job: m components sampled on N-bit grids over a window
// of width L around the center, phases written through an N_p-bit fixed-point
// kickback, output decoded as signed integers times M / 2^N.
struct GradientJob {
  std::vector<double> center;
  int bits_per_component = 8;  // N
  int kickback_bits = 16;      // N_p
  std::optional<double> window;        // L; probed when unset
  std::optional<double> output_scale;  // M; probed when unset
  OracleFunction oracle;
  int qubit_cap = Statevector::kMaxQubits;

  void validate() const;
};

struct GradientResult {
  std::vector<double> gradient;
  std::vector<std::int64_t> raw_registers;  // signed register integers
  std::vector<bool> saturated;              // register at the wrap boundary
  double window = 0.0;        // L used
  double output_scale = 0.0;  // M used
  double quantization_step = 0.0;       // M / 2^N
  double truncation_error = 0.0;        // decode + kickback rounding bound
  double nonlinearity_residual = 0.0;   // probed second difference, when probed
  long quantum_queries = 0;   // superposed oracle applications; exactly 1
  long probe_evaluations = 0;  // classical scaling/validation probes
  long branch_evaluations = 0;  // grid points inside the single query
};

GradientResult quantum_gradient(const GradientJob& job, RandomStream& rng);

// The kickback itself: multiplies every branch |delta> of the prepared
// superposition by exp(i 2 pi round(2^N 2^Np f / (M L)) / 2^Np), matching the
// modular addition against a Fourier-prepared pointer register. Returns the
// number of grid evaluations folded into the one query.
long simulated_kickback_oracle(Statevector& deltas, const OracleFunction& oracle,
                               std::span<const double> center,
                               int bits_per_component, int kickback_bits,
                               double window, double output_scale);

struct FunctionalGradientOptions {
  int bits_per_component = 6;
  int kickback_bits = 6;
  double eta_window = 1e-3;  // perturbation window; underflow is refused
  std::optional<double> output_scale;
  int qubit_cap = Statevector::kMaxQubits;
};

// delta F / delta g sampled on the grid: differentiates
// h(eta) = F[g + sum_k eta_k Y_k] at eta = 0 with one gradient query.
// Empty `directions` means one unit vector per sample point.
std::vector<double> functional_gradient(const OracleFunction& functional,
                                        std::span<const double> g,
                                        const std::vector<std::vector<double>>& directions,
                                        const FunctionalGradientOptions& options,
                                        RandomStream& rng);

}  // namespace rwmp
