#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rwmp/fermion.hpp"
#include "rwmp/linalg.hpp"
#include "rwmp/statevector.hpp"

namespace rwmp {

// Spin-summed site occupations.
struct Density {
  std::vector<double> n;

  int n_sites() const { return static_cast<int>(n.size()); }
  double total() const;
  void validate(std::optional<int> n_electrons = std::nullopt,
                double tol = 1e-8) const;
};

// N coefficients of the noninteracting potential; the constant shift is pure
// gauge, fixed to sum zero.
struct KSPotential {
  std::vector<double> kappa;

  int n_sites() const { return static_cast<int>(kappa.size()); }
  void gauge_fix();
  KSPotential gauge_fixed() const;
};

struct KSOrbitals {
  RealMatrix phi;                   // phi(site, orbital)
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> occupations;  // spin-summed, 0..2
};

struct KSSolution {
  KSOrbitals orbitals;
  Density density;
  double eigenvalue_sum = 0.0;  // sum_j xi_j eps_j
  double kinetic_energy = 0.0;  // T_s
};

Density density_from_dm(const std::vector<ComplexMatrix>& rho_per_spin);

// Diagonalizes kinetic + diag(v_s) and fills by aufbau. A HOMO degenerate
// with the first unfilled level (within 1e-9) is refused.
KSSolution solve_ks(const RealMatrix& kinetic, const KSPotential& v_s, int n_electrons);

// <Psi|T + V_s|Psi> - <Phi[v_s]|T + V_s|Phi[v_s]> >= 0, zero iff densities
// match. The interacting side enters through its kinetic expectation and
// density, which may come from the oracle or from counting estimates.
double t_psi_objective(double kinetic_psi, const Density& n_psi,
                       const RealMatrix& kinetic, const KSPotential& v_s,
                       int n_electrons);

// Gradient of the objective in v_s: the density difference, sum-zero.
std::vector<double> ks_inversion_gradient(const Density& n_psi,
                                          const RealMatrix& kinetic,
                                          const KSPotential& v_s, int n_electrons);

struct DescentTraceRow {
  int iteration = 0;
  double objective = 0.0;
  double grad_inf = 0.0;
  double eta = 0.0;
};

struct InversionResult {
  KSPotential v_s;
  bool converged = false;
  int iterations = 0;
  double final_grad_inf = 0.0;
  std::vector<DescentTraceRow> trace;
};

struct InversionOptions {
  double eta = 0.5;
  double tol = 1e-6;  // on the density mismatch, infinity norm
  int max_iters = 200000;
  int trace_stride = 1;
};

InversionResult invert_to_ks(double kinetic_psi, const Density& n_psi,
                             const RealMatrix& kinetic, int n_electrons,
                             KSPotential v0, const InversionOptions& options = {});

// Interacting kinetic expectation sum_s tr(T rho_s); the psi-side input of
// the objective.
double kinetic_expectation(const std::vector<ComplexMatrix>& rho_per_spin,
                           const RealMatrix& kinetic);

// Lieb dual F[n] = max_v { E[v] - n.v } with the exact-diagonalization E[v]
// of the Hubbard chain; gradient ascent with the ground density as gradient.
struct FunctionalValue {
  double value = 0.0;
  KSPotential maximizer;  // sum-zero; delta F / delta n = -maximizer
  int iterations = 0;
};

// grad_tol below ~1e-8 is not reachable: the inner ground solves carry
// floating-point noise that floors the achievable density mismatch.
FunctionalValue exact_functional_oracle(const Density& target, int n_electrons,
                                        double t_hop, double u,
                                        double grad_tol = 3e-8,
                                        int max_iters = 200000,
                                        const KSPotential* warm_start = nullptr);

// Abstract F[n] for the Euler-Lagrange solver: oracle- or model-backed.
class DensityFunctional {
 public:
  virtual ~DensityFunctional() = default;
  virtual double value(const Density& n) = 0;
  virtual std::vector<double> derivative(const Density& n) = 0;
};

class OracleDensityFunctional : public DensityFunctional {
 public:
  OracleDensityFunctional(int n_electrons, double t_hop, double u)
      : n_electrons_(n_electrons), t_hop_(t_hop), u_(u) {}
  double value(const Density& n) override;
  std::vector<double> derivative(const Density& n) override;

 private:
  // The inner maximization warm-starts from the previous maximizer; repeated
  // value/derivative queries at one density share a single solve.
  const FunctionalValue& solve(const Density& n);
  int n_electrons_;
  double t_hop_;
  double u_;
  std::vector<double> last_density_;
  FunctionalValue last_value_;
  bool have_last_ = false;
};

struct EulerLagrangeOptions {
  double eta = 0.2;
  double tol = 1e-7;  // on the projected stationarity residual
  int max_iters = 50000;
  double box_margin = 1e-6;
  bool adaptive = true;  // halve eta on objective increase
};

struct EulerLagrangeResult {
  Density density;
  double energy = 0.0;
  bool converged = false;
  bool diverged = false;       // runaway objective detected and halted
  bool manifold_flag = false;  // box constraints became active
  int iterations = 0;
  std::vector<DescentTraceRow> trace;
};

EulerLagrangeResult euler_lagrange_solve(DensityFunctional& f,
                                         const std::vector<double>& v,
                                         int n_electrons, Density n0,
                                         const EulerLagrangeOptions& options = {});

// Hartree pieces for a general lattice kernel; the on-site Hubbard kernel is
// (U/2) I, giving U[n] = (U/4) sum n_i^2 and v_H = U n / 2.
RealMatrix onsite_hartree_kernel(int n_sites, double u);
std::vector<double> hartree_potential(const std::vector<double>& n,
                                      const RealMatrix& kernel);
double hartree_energy(const std::vector<double>& n, const RealMatrix& kernel);

// E = sum_eps - U[n] + E_xc - integral n v_xc.
double ks_energy_reconstruction(double eigenvalue_sum, const Density& n,
                                double hartree, double e_xc,
                                const std::vector<double>& v_xc);

// Full oracle decomposition of the functional on one system; every piece of
// the reconstruction identity from one consistent chain.
struct KsDecomposition {
  Density density;
  KSPotential v_s;
  double eigenvalue_sum = 0.0;
  double kinetic_s = 0.0;
  double hartree = 0.0;
  double e_xc = 0.0;
  std::vector<double> v_h;
  std::vector<double> v_xc;
  double f_value = 0.0;
  double exact_energy = 0.0;
};

KsDecomposition decompose_functional(const std::vector<double>& v, double t_hop,
                                     double u, int n_electrons);

struct ResponseFunction {
  std::vector<double> omega;
  double eta = 0.0;
  std::vector<ComplexMatrix> chi;  // one (site, site) block per frequency
};

ResponseFunction chi_s_response(const KSOrbitals& orbitals,
                                const std::vector<double>& omega_grid, double eta);

struct ThermalDensity {
  Density density;
  double mu = 0.0;
  std::vector<double> occupations;
};

ThermalDensity fermi_weighted_density(const KSOrbitals& orbitals, double tau,
                                      int n_electrons);

}  // namespace rwmp
