#include "rwmp/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <vector>

namespace rwmp::kernels {
namespace {

std::atomic<ExecMode> g_mode{ExecMode::automatic};

// Below this dimension the parallel variants are not worth the fork/join.
constexpr std::size_t kParallelThreshold = std::size_t(1) << 12;
constexpr std::size_t kBlock = 4096;  // reduction block, fixed for determinism

bool use_parallel(ExecMode mode, std::size_t dim) {
#ifdef _OPENMP
  ExecMode m = (mode == ExecMode::automatic) ? g_mode.load() : mode;
  if (m == ExecMode::serial) return false;
  if (m == ExecMode::parallel) return true;
  return dim >= kParallelThreshold;
#else
  (void)mode;
  (void)dim;
  return false;
#endif
}

// Fixed-block deterministic reduction: per-block sums are accumulated in
// index order, then combined in block order, so the result is independent
// of the thread count.
template <typename F>
double blocked_sum(std::size_t count, bool parallel, F&& per_index) {
  const std::size_t nblocks = (count + kBlock - 1) / kBlock;
  std::vector<double> partial(nblocks, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(nblocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t hi = std::min(lo + kBlock, count);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += per_index(i);
    partial[static_cast<std::size_t>(blk)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <typename F>
void for_each_index(std::size_t count, bool parallel, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i)
    body(static_cast<std::size_t>(i));
}

}  // namespace

ExecMode exec_mode() { return g_mode.load(); }
void set_exec_mode(ExecMode mode) { g_mode.store(mode); }

void apply_single_qubit(Complex* amps, int n_qubits, int q, const Complex u[4],
                        ExecMode mode) {
  if (q < 0 || q >= n_qubits) throw std::out_of_range("gate qubit out of range");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t bit = std::size_t(1) << q;
  const bool par = use_parallel(mode, dim);
  const Complex u00 = u[0], u01 = u[1], u10 = u[2], u11 = u[3];
  for_each_index(dim >> 1, par, [&](std::size_t i) {
    // i enumerates pairs: insert a zero at position q
    const std::size_t low = i & (bit - 1);
    const std::size_t b0 = ((i & ~(bit - 1)) << 1) | low;
    const std::size_t b1 = b0 | bit;
    const Complex a0 = amps[b0];
    const Complex a1 = amps[b1];
    amps[b0] = u00 * a0 + u01 * a1;
    amps[b1] = u10 * a0 + u11 * a1;
  });
}

void apply_phase_one(Complex* amps, int n_qubits, int q, Complex phase,
                     ExecMode mode) {
  if (q < 0 || q >= n_qubits) throw std::out_of_range("gate qubit out of range");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t bit = std::size_t(1) << q;
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t b) {
    if (b & bit) amps[b] *= phase;
  });
}

void apply_controlled_phase(Complex* amps, int n_qubits, int control, int target,
                            Complex phase, ExecMode mode) {
  if (control == target)
    throw std::invalid_argument("controlled phase: control equals target");
  if (control < 0 || control >= n_qubits || target < 0 || target >= n_qubits)
    throw std::out_of_range("gate qubit out of range");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t mask = (std::size_t(1) << control) | (std::size_t(1) << target);
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t b) {
    if ((b & mask) == mask) amps[b] *= phase;
  });
}

void apply_swap(Complex* amps, int n_qubits, int a, int b, ExecMode mode) {
  if (a == b) return;
  if (a < 0 || a >= n_qubits || b < 0 || b >= n_qubits)
    throw std::out_of_range("gate qubit out of range");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t ba = std::size_t(1) << a;
  const std::size_t bb = std::size_t(1) << b;
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t i) {
    if ((i & ba) && !(i & bb)) std::swap(amps[i], amps[(i ^ ba) | bb]);
  });
}

void apply_pauli_exponential(Complex* amps, int n_qubits, std::uint64_t x_mask,
                             std::uint64_t zy_mask, int y_count, double theta,
                             ExecMode mode) {
  const std::size_t dim = std::size_t(1) << n_qubits;
  const bool par = use_parallel(mode, dim);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // i^y_count
  static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const Complex iy = kIPow[y_count & 3];
  if (x_mask == 0) {
    // Diagonal string: amp[b] *= exp(-i theta * (+-1))
    const Complex e_plus(c, -s);
    const Complex e_minus(c, s);
    for_each_index(dim, par, [&](std::size_t b) {
      amps[b] *= __builtin_parityll(b & zy_mask) ? e_minus : e_plus;
    });
    return;
  }
  const std::uint64_t pivot = x_mask & (~x_mask + 1);  // lowest set bit
  const Complex mis(0, -1);
  for_each_index(dim, par, [&](std::size_t b0) {
    if (b0 & pivot) return;  // one representative per pair
    const std::size_t b1 = b0 ^ x_mask;
    const Complex lam0 = __builtin_parityll(b0 & zy_mask) ? -iy : iy;
    const Complex lam1 = __builtin_parityll(b1 & zy_mask) ? -iy : iy;
    const Complex a0 = amps[b0];
    const Complex a1 = amps[b1];
    amps[b0] = c * a0 + mis * s * lam1 * a1;
    amps[b1] = c * a1 + mis * s * lam0 * a0;
  });
}

void apply_pauli(Complex* amps, int n_qubits, std::uint64_t x_mask,
                 std::uint64_t zy_mask, int y_count, ExecMode mode) {
  const std::size_t dim = std::size_t(1) << n_qubits;
  const bool par = use_parallel(mode, dim);
  static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const Complex iy = kIPow[y_count & 3];
  if (x_mask == 0) {
    for_each_index(dim, par, [&](std::size_t b) {
      if (__builtin_parityll(b & zy_mask)) amps[b] = -amps[b];
    });
    return;
  }
  const std::uint64_t pivot = x_mask & (~x_mask + 1);
  for_each_index(dim, par, [&](std::size_t b0) {
    if (b0 & pivot) return;
    const std::size_t b1 = b0 ^ x_mask;
    const Complex lam0 = __builtin_parityll(b0 & zy_mask) ? -iy : iy;
    const Complex lam1 = __builtin_parityll(b1 & zy_mask) ? -iy : iy;
    const Complex a0 = amps[b0];
    amps[b0] = lam1 * amps[b1];
    amps[b1] = lam0 * a0;
  });
}

void apply_dense(Complex* amps, int n_qubits, int first, int k,
                 const ComplexMatrix& u, ExecMode mode) {
  if (first < 0 || k <= 0 || first + k > n_qubits)
    throw std::out_of_range("dense register out of range");
  const std::size_t rdim = std::size_t(1) << k;
  if (u.rows() != static_cast<Eigen::Index>(rdim) || u.cols() != u.rows())
    throw std::invalid_argument("dense matrix does not match register");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t nouter = dim >> k;
  const std::size_t low_mask = (std::size_t(1) << first) - 1;
  const bool par = use_parallel(mode, dim);
  for_each_index(nouter, par, [&](std::size_t outer) {
    const std::size_t low = outer & low_mask;
    const std::size_t high = (outer & ~low_mask) << k;
    const std::size_t base = high | low;
    std::vector<Complex> buf(rdim);
    for (std::size_t r = 0; r < rdim; ++r) buf[r] = amps[base | (r << first)];
    for (std::size_t r = 0; r < rdim; ++r) {
      Complex acc(0, 0);
      for (std::size_t cidx = 0; cidx < rdim; ++cidx) acc += u(r, cidx) * buf[cidx];
      amps[base | (r << first)] = acc;
    }
  });
}

void apply_controlled_dense(Complex* amps, int n_qubits, int control, int first,
                            int k, const ComplexMatrix& u, ExecMode mode) {
  if (control >= first && control < first + k)
    throw std::invalid_argument("control overlaps dense register");
  if (control < 0 || control >= n_qubits)
    throw std::out_of_range("control out of range");
  const std::size_t rdim = std::size_t(1) << k;
  if (u.rows() != static_cast<Eigen::Index>(rdim) || u.cols() != u.rows())
    throw std::invalid_argument("dense matrix does not match register");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t nouter = dim >> k;
  const std::size_t low_mask = (std::size_t(1) << first) - 1;
  const std::size_t cbit = std::size_t(1) << control;
  const bool par = use_parallel(mode, dim);
  for_each_index(nouter, par, [&](std::size_t outer) {
    const std::size_t low = outer & low_mask;
    const std::size_t high = (outer & ~low_mask) << k;
    const std::size_t base = high | low;
    if (!(base & cbit)) return;
    std::vector<Complex> buf(rdim);
    for (std::size_t r = 0; r < rdim; ++r) buf[r] = amps[base | (r << first)];
    for (std::size_t r = 0; r < rdim; ++r) {
      Complex acc(0, 0);
      for (std::size_t cidx = 0; cidx < rdim; ++cidx) acc += u(r, cidx) * buf[cidx];
      amps[base | (r << first)] = acc;
    }
  });
}

void apply_phase_table(Complex* amps, int n_qubits, int first, int k,
                       const Complex* table, ExecMode mode) {
  if (first < 0 || k <= 0 || first + k > n_qubits)
    throw std::out_of_range("phase table register out of range");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t mask = (std::size_t(1) << k) - 1;
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t b) {
    amps[b] *= table[(b >> first) & mask];
  });
}

void flip_where_register_equals(Complex* amps, int n_qubits, int first, int k,
                                std::uint64_t value, int target, ExecMode mode) {
  if (target >= first && target < first + k)
    throw std::invalid_argument("flip target overlaps register");
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t mask = (std::size_t(1) << k) - 1;
  const std::size_t tbit = std::size_t(1) << target;
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t b) {
    if (((b >> first) & mask) == value && !(b & tbit))
      std::swap(amps[b], amps[b | tbit]);
  });
}

double norm_sq(const Complex* amps, std::size_t dim, ExecMode mode) {
  return blocked_sum(dim, use_parallel(mode, dim), [&](std::size_t i) {
    return std::norm(amps[i]);
  });
}

double bit_probability(const Complex* amps, int n_qubits, int q, ExecMode mode) {
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t bit = std::size_t(1) << q;
  return blocked_sum(dim, use_parallel(mode, dim), [&](std::size_t b) {
    return (b & bit) ? std::norm(amps[b]) : 0.0;
  });
}

void project_bit(Complex* amps, int n_qubits, int q, int bit, double scale_factor,
                 ExecMode mode) {
  const std::size_t dim = std::size_t(1) << n_qubits;
  const std::size_t qbit = std::size_t(1) << q;
  const std::size_t want = bit ? qbit : 0;
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t b) {
    amps[b] = ((b & qbit) == want) ? amps[b] * scale_factor : Complex(0, 0);
  });
}

void scale(Complex* amps, std::size_t dim, double factor, ExecMode mode) {
  for_each_index(dim, use_parallel(mode, dim), [&](std::size_t i) {
    amps[i] *= factor;
  });
}

}  // namespace rwmp::kernels
