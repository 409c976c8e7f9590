#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

#include "rwmp/linalg.hpp"

namespace rwmp::kernels {

// Every kernel has a serial reference implementation and an OpenMP variant.
// Both produce bitwise-identical amplitudes for any partitioning: pair/block
// updates write disjoint locations and reductions accumulate fixed-size
// blocks in a fixed order. The benchmark tool compares their throughput;
// tests assert equality.
enum class ExecMode { serial, parallel, automatic };

ExecMode exec_mode();
void set_exec_mode(ExecMode mode);

void apply_single_qubit(Complex* amps, int n_qubits, int q, const Complex u[4],
                        ExecMode mode = ExecMode::automatic);

// diag(1, phase) on qubit q.
void apply_phase_one(Complex* amps, int n_qubits, int q, Complex phase,
                     ExecMode mode = ExecMode::automatic);

// phase on amplitudes with both control and target set.
void apply_controlled_phase(Complex* amps, int n_qubits, int control, int target,
                            Complex phase, ExecMode mode = ExecMode::automatic);

void apply_swap(Complex* amps, int n_qubits, int a, int b,
                ExecMode mode = ExecMode::automatic);

// exp(-i theta P) for a bare Pauli string P given by its masks.
void apply_pauli_exponential(Complex* amps, int n_qubits, std::uint64_t x_mask,
                             std::uint64_t zy_mask, int y_count, double theta,
                             ExecMode mode = ExecMode::automatic);

// The bare Pauli string itself (a unitary gate).
void apply_pauli(Complex* amps, int n_qubits, std::uint64_t x_mask,
                 std::uint64_t zy_mask, int y_count,
                 ExecMode mode = ExecMode::automatic);

// Dense unitary on the contiguous register [first, first+k).
void apply_dense(Complex* amps, int n_qubits, int first, int k,
                 const ComplexMatrix& u, ExecMode mode = ExecMode::automatic);

// Same, applied only where the control qubit (outside the register) is set.
void apply_controlled_dense(Complex* amps, int n_qubits, int control, int first,
                            int k, const ComplexMatrix& u,
                            ExecMode mode = ExecMode::automatic);

// amps[b] *= table[(b >> first) & (2^k - 1)]; table has 2^k entries.
void apply_phase_table(Complex* amps, int n_qubits, int first, int k,
                       const Complex* table, ExecMode mode = ExecMode::automatic);

// Multi-controlled X: flip `target` on amplitudes whose register equals value.
void flip_where_register_equals(Complex* amps, int n_qubits, int first, int k,
                                std::uint64_t value, int target,
                                ExecMode mode = ExecMode::automatic);

double norm_sq(const Complex* amps, std::size_t dim,
               ExecMode mode = ExecMode::automatic);

double bit_probability(const Complex* amps, int n_qubits, int q,
                       ExecMode mode = ExecMode::automatic);

// Keep the branch with qubit q == bit, zero the other, scale the survivor.
void project_bit(Complex* amps, int n_qubits, int q, int bit, double scale,
                 ExecMode mode = ExecMode::automatic);

void scale(Complex* amps, std::size_t dim, double factor,
           ExecMode mode = ExecMode::automatic);

}  // namespace rwmp::kernels
