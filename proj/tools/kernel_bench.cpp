// Times the statevector kernels in their serial and OpenMP variants and
// reports the throughput ratio. The two variants are bitwise-identical by
// construction; tests assert that, this tool only measures.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rwmp/kernels.hpp"
#include "rwmp/random.hpp"

using namespace rwmp;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<Complex> random_amplitudes(int n_qubits, RandomStream& rng) {
  std::vector<Complex> amps(std::size_t(1) << n_qubits);
  for (auto& a : amps) a = Complex(rng.next_gaussian(), rng.next_gaussian());
  return amps;
}

template <typename F>
double time_op(const std::vector<Complex>& base, int reps, F&& op) {
  std::vector<Complex> amps = base;
  // warm up once, then time
  op(amps.data());
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) op(amps.data());
  const auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_s, double parallel_s) {
  std::printf("%-22s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
  int n_qubits = 22;
  int reps = 8;
  if (argc > 1) n_qubits = std::atoi(argv[1]);
  if (argc > 2) reps = std::atoi(argv[2]);

#ifdef _OPENMP
  std::printf("kernels on %d qubits (%zu amplitudes), %d reps, %d threads\n",
              n_qubits, std::size_t(1) << n_qubits, reps, omp_get_max_threads());
#else
  std::printf("kernels on %d qubits (%zu amplitudes), %d reps, OpenMP disabled\n",
              n_qubits, std::size_t(1) << n_qubits, reps);
#endif
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  RandomStream rng(7);
  const std::vector<Complex> base = random_amplitudes(n_qubits, rng);
  const Complex h[4] = {{M_SQRT1_2, 0}, {M_SQRT1_2, 0}, {M_SQRT1_2, 0}, {-M_SQRT1_2, 0}};
  using kernels::ExecMode;

  report("single-qubit gate",
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_single_qubit(a, n_qubits, n_qubits / 2, h, ExecMode::serial);
         }),
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_single_qubit(a, n_qubits, n_qubits / 2, h, ExecMode::parallel);
         }));

  report("controlled phase",
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_controlled_phase(a, n_qubits, 1, n_qubits - 2,
                                           std::polar(1.0, 0.3), ExecMode::serial);
         }),
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_controlled_phase(a, n_qubits, 1, n_qubits - 2,
                                           std::polar(1.0, 0.3), ExecMode::parallel);
         }));

  const std::uint64_t x_mask = 0b10110101;
  const std::uint64_t zy_mask = 0b01101100;
  report("pauli exponential",
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_pauli_exponential(a, n_qubits, x_mask, zy_mask, 2, 0.17,
                                            ExecMode::serial);
         }),
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_pauli_exponential(a, n_qubits, x_mask, zy_mask, 2, 0.17,
                                            ExecMode::parallel);
         }));

  ComplexMatrix u = ComplexMatrix::Identity(16, 16);
  report("dense 4-qubit block",
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_dense(a, n_qubits, 2, 4, u, ExecMode::serial);
         }),
         time_op(base, reps, [&](Complex* a) {
           kernels::apply_dense(a, n_qubits, 2, 4, u, ExecMode::parallel);
         }));

  report("norm reduction",
         time_op(base, reps, [&](Complex* a) {
           (void)kernels::norm_sq(a, std::size_t(1) << n_qubits, ExecMode::serial);
         }),
         time_op(base, reps, [&](Complex* a) {
           (void)kernels::norm_sq(a, std::size_t(1) << n_qubits, ExecMode::parallel);
         }));

  return 0;
}
