#include "rwmp/qga.hpp"

#include <cmath>
#include <stdexcept>

namespace rwmp {

void GradientJob::validate() const {
  if (center.empty()) throw std::invalid_argument("qga: empty center");
  if (bits_per_component < 2) throw std::invalid_argument("qga: need >= 2 bits per component");
  if (kickback_bits < 2) throw std::invalid_argument("qga: need >= 2 kickback bits");
  if (!oracle) throw std::invalid_argument("qga: no oracle");
  const int m = static_cast<int>(center.size());
  if (m * bits_per_component + kickback_bits > qubit_cap)
    throw std::invalid_argument("qga: m*N + N_p exceeds the qubit cap");
  if (window && *window <= 0) throw std::invalid_argument("qga: window must be positive");
  if (output_scale && *output_scale <= 0)
    throw std::invalid_argument("qga: output scale must be positive");
}

long simulated_kickback_oracle(Statevector& deltas, const OracleFunction& oracle,
                               std::span<const double> center,
                               int bits_per_component, int kickback_bits,
                               double window, double output_scale) {
  const int m = static_cast<int>(center.size());
  const int n_bits = bits_per_component;
  if (deltas.n_qubits() != m * n_bits)
    throw std::invalid_argument("kickback: register size mismatch");
  const std::uint64_t grid = std::uint64_t(1) << n_bits;
  const std::uint64_t dim = deltas.dim();
  const double np_scale = std::ldexp(1.0, kickback_bits);
  const double fixed_point = std::ldexp(1.0, n_bits) / (output_scale * window);
  const double half = 0.5 * double(grid);

  std::vector<Complex> table(dim);
  std::vector<double> x(center.begin(), center.end());
  for (std::uint64_t b = 0; b < dim; ++b) {
    for (int k = 0; k < m; ++k) {
      const std::uint64_t dk = (b >> (k * n_bits)) & (grid - 1);
      x[k] = center[k] + window * (double(dk) - half) / double(grid);
    }
    const double f = oracle(x);
    if (!std::isfinite(f))
      throw std::runtime_error("kickback: oracle returned a non-finite value");
    // Fixed-point addition into the Fourier register, modulo 2^Np.
    const double t = std::fmod(f * fixed_point * np_scale, np_scale);
    const double kick = std::nearbyint(t);
    table[b] = std::polar(1.0, 2.0 * M_PI * kick / np_scale);
  }
  deltas.apply_phase_table(QubitRange{0, deltas.n_qubits()}, table);
  return static_cast<long>(dim);
}

GradientResult quantum_gradient(const GradientJob& job, RandomStream& rng) {
  job.validate();
  const int m = static_cast<int>(job.center.size());
  const int n_bits = job.bits_per_component;

  GradientResult result;

  // Classical probe: central differences per component. It feeds the window
  // and headroom when they are unset, the recorded nonlinearity residual,
  // and the post-hoc |df| <= M check. Never touches the quantum counter.
  const double window = job.window.value_or(1.0 / 64.0);
  std::vector<double> probe_slopes(m, 0.0);
  {
    const double f0 = job.oracle(job.center);
    ++result.probe_evaluations;
    double max_second = 0.0;
    std::vector<double> x(job.center.begin(), job.center.end());
    for (int k = 0; k < m; ++k) {
      const double h = window / 2;
      x[k] = job.center[k] + h;
      const double fp = job.oracle(x);
      x[k] = job.center[k] - h;
      const double fm = job.oracle(x);
      x[k] = job.center[k];
      result.probe_evaluations += 2;
      probe_slopes[k] = (fp - fm) / (2 * h);
      max_second = std::max(max_second, std::abs(fp - 2 * f0 + fm));
    }
    result.nonlinearity_residual = max_second;
  }
  double scale = job.output_scale.value_or(0.0);
  if (!job.output_scale) {
    double max_slope = 0.0;
    for (double s : probe_slopes) max_slope = std::max(max_slope, std::abs(s));
    scale = 4.0 * std::max(max_slope, 0.25);
  }

  Statevector deltas(m * n_bits);
  deltas.apply_hadamard_all(QubitRange{0, m * n_bits});
  result.branch_evaluations = simulated_kickback_oracle(
      deltas, job.oracle, job.center, n_bits, job.kickback_bits, window, scale);
  result.quantum_queries = 1;

  const std::int64_t grid = std::int64_t(1) << n_bits;
  for (int k = 0; k < m; ++k)
    deltas.inverse_qft(QubitRange{k * n_bits, n_bits});
  for (int k = 0; k < m; ++k) {
    const std::uint64_t raw =
        deltas.measure_register(QubitRange{k * n_bits, n_bits}, rng);
    std::int64_t s = static_cast<std::int64_t>(raw);
    if (s >= grid / 2) s -= grid;
    result.raw_registers.push_back(s);
    result.gradient.push_back(double(s) * scale / double(grid));
    // Flagged when the probed slope exceeds the headroom (decode aliases)
    // or the register sits at the wrap boundary.
    result.saturated.push_back(std::abs(probe_slopes[k]) > scale ||
                               std::llabs(s) >= grid / 2 - 1);
  }

  result.window = window;
  result.output_scale = scale;
  result.quantization_step = scale / double(grid);
  result.truncation_error =
      0.5 * result.quantization_step + scale * std::ldexp(1.0, -job.kickback_bits);
  return result;
}

std::vector<double> functional_gradient(const OracleFunction& functional,
                                        std::span<const double> g,
                                        const std::vector<std::vector<double>>& directions,
                                        const FunctionalGradientOptions& options,
                                        RandomStream& rng) {
  if (g.empty()) throw std::invalid_argument("functional_gradient: empty samples");
  if (options.eta_window < 1e-12)
    throw std::invalid_argument("functional_gradient: perturbation step underflow");

  std::vector<std::vector<double>> dirs = directions;
  if (dirs.empty()) {
    dirs.assign(g.size(), std::vector<double>(g.size(), 0.0));
    for (std::size_t i = 0; i < g.size(); ++i) dirs[i][i] = 1.0;
  }
  for (const auto& d : dirs)
    if (d.size() != g.size())
      throw std::invalid_argument("functional_gradient: direction length mismatch");

  const std::vector<double> base(g.begin(), g.end());
  GradientJob job;
  job.center.assign(dirs.size(), 0.0);
  job.bits_per_component = options.bits_per_component;
  job.kickback_bits = options.kickback_bits;
  job.window = options.eta_window;
  job.output_scale = options.output_scale;
  job.qubit_cap = options.qubit_cap;
  job.oracle = [&](std::span<const double> eta) {
    std::vector<double> sample = base;
    for (std::size_t k = 0; k < dirs.size(); ++k)
      for (std::size_t i = 0; i < sample.size(); ++i)
        sample[i] += eta[k] * dirs[k][i];
    return functional(sample);
  };
  return quantum_gradient(job, rng).gradient;
}

}  // namespace rwmp
