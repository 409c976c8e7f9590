#include "rwmp/dft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rwmp {
namespace {

double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

double inf_norm(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// Ground energy and spin-summed density of the Hubbard chain at potential v,
// over the full N_e sector (all S_z blocks).
struct GroundData {
  double energy;
  Density density;
};

GroundData hubbard_ground(const std::vector<double>& v, double t_hop, double u,
                          int n_electrons) {
  FermionHamiltonian h = build_hubbard(static_cast<int>(v.size()), t_hop, u, v);
  Spectrum s = diagonalize_fermionic(h, SectorFilter{n_electrons, std::nullopt});
  auto rho = density_matrix_from_state(s.ground_state, h);
  return {s.eigenvalues.front(), density_from_dm(rho)};
}

}  // namespace

double Density::total() const { return std::accumulate(n.begin(), n.end(), 0.0); }

void Density::validate(std::optional<int> n_electrons, double tol) const {
  for (double ni : n)
    if (ni < -tol || ni > 2.0 + tol)
      throw std::invalid_argument("density outside [0, 2] per site");
  if (n_electrons && std::abs(total() - *n_electrons) > tol)
    throw std::invalid_argument("density does not sum to the electron count");
}

void KSPotential::gauge_fix() {
  const double m = mean(kappa);
  for (double& k : kappa) k -= m;
}

KSPotential KSPotential::gauge_fixed() const {
  KSPotential out = *this;
  out.gauge_fix();
  return out;
}

Density density_from_dm(const std::vector<ComplexMatrix>& rho_per_spin) {
  if (rho_per_spin.empty()) throw std::invalid_argument("density_from_dm: no blocks");
  Density out;
  out.n.assign(rho_per_spin[0].rows(), 0.0);
  for (const auto& rho : rho_per_spin)
    for (int i = 0; i < rho.rows(); ++i) {
      if (std::abs(rho(i, i).imag()) > 1e-8)
        throw std::invalid_argument("density_from_dm: complex diagonal");
      out.n[i] += rho(i, i).real();
    }
  return out;
}

KSSolution solve_ks(const RealMatrix& kinetic, const KSPotential& v_s, int n_electrons) {
  const int n_sites = static_cast<int>(kinetic.rows());
  if (v_s.n_sites() != n_sites)
    throw std::invalid_argument("solve_ks: potential length mismatch");
  if (n_electrons < 0 || n_electrons > 2 * n_sites)
    throw std::invalid_argument("solve_ks: electron count not representable");
  RealMatrix m = kinetic;
  for (int i = 0; i < n_sites; ++i) m(i, i) += v_s.kappa[i];
  SymmetricEigen sys = eig_symmetric(m);

  KSSolution out;
  out.orbitals.phi = sys.eigenvectors;
  out.orbitals.eigenvalues.assign(sys.eigenvalues.data(),
                                  sys.eigenvalues.data() + n_sites);
  out.orbitals.occupations.assign(n_sites, 0.0);
  int left = n_electrons;
  for (int j = 0; j < n_sites && left > 0; ++j) {
    const double fill = std::min(2, left);
    out.orbitals.occupations[j] = fill;
    left -= static_cast<int>(fill);
  }
  // Aufbau is ambiguous when the Fermi level sits on a degeneracy.
  for (int j = 0; j + 1 < n_sites; ++j) {
    const bool partial_boundary =
        out.orbitals.occupations[j] > 0.0 && out.orbitals.occupations[j + 1] < 2.0;
    if (partial_boundary &&
        std::abs(out.orbitals.eigenvalues[j + 1] - out.orbitals.eigenvalues[j]) <=
            kDegeneracyTol &&
        out.orbitals.occupations[j + 1] != out.orbitals.occupations[j])
      throw std::runtime_error(
          "solve_ks: degenerate level at the Fermi energy; occupation is ambiguous");
  }

  out.density.n.assign(n_sites, 0.0);
  for (int j = 0; j < n_sites; ++j) {
    const double occ = out.orbitals.occupations[j];
    if (occ == 0.0) continue;
    out.eigenvalue_sum += occ * out.orbitals.eigenvalues[j];
    for (int i = 0; i < n_sites; ++i)
      out.density.n[i] += occ * sys.eigenvectors(i, j) * sys.eigenvectors(i, j);
  }
  for (int j = 0; j < n_sites; ++j) {
    const double occ = out.orbitals.occupations[j];
    if (occ == 0.0) continue;
    out.kinetic_energy +=
        occ * (sys.eigenvectors.col(j).transpose() * kinetic * sys.eigenvectors.col(j))(0);
  }
  return out;
}

double t_psi_objective(double kinetic_psi, const Density& n_psi,
                       const RealMatrix& kinetic, const KSPotential& v_s,
                       int n_electrons) {
  double psi_term = kinetic_psi;
  for (int i = 0; i < n_psi.n_sites(); ++i) psi_term += v_s.kappa[i] * n_psi.n[i];
  const KSSolution ks = solve_ks(kinetic, v_s, n_electrons);
  return psi_term - ks.eigenvalue_sum;
}

std::vector<double> ks_inversion_gradient(const Density& n_psi,
                                          const RealMatrix& kinetic,
                                          const KSPotential& v_s, int n_electrons) {
  const KSSolution ks = solve_ks(kinetic, v_s, n_electrons);
  std::vector<double> g(n_psi.n.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = n_psi.n[i] - ks.density.n[i];
  const double m = mean(g);
  for (double& gi : g) gi -= m;
  return g;
}

namespace {

// Static density response dn_i / dv_j of the KS system; symmetric, singular
// along the constant shift.
RealMatrix ks_static_response(const RealMatrix& kinetic, const KSPotential& v_s,
                              int n_electrons) {
  const KSSolution ks = solve_ks(kinetic, v_s, n_electrons);
  const int n = static_cast<int>(kinetic.rows());
  RealMatrix chi = RealMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const double occ = ks.orbitals.occupations[k];
    if (occ == 0.0) continue;
    for (int l = 0; l < n; ++l) {
      if (l == k) continue;
      const double de = ks.orbitals.eigenvalues[k] - ks.orbitals.eigenvalues[l];
      if (std::abs(de) < 1e-12) continue;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          chi(i, j) += 2.0 * occ * ks.orbitals.phi(i, k) * ks.orbitals.phi(i, l) *
                       ks.orbitals.phi(j, k) * ks.orbitals.phi(j, l) / de;
    }
  }
  return chi;
}

}  // namespace

InversionResult invert_to_ks(double kinetic_psi, const Density& n_psi,
                             const RealMatrix& kinetic, int n_electrons,
                             KSPotential v0, const InversionOptions& options) {
  if (options.eta <= 0) throw std::invalid_argument("invert_to_ks: eta must be positive");
  InversionResult out;
  out.v_s = v0.gauge_fixed();
  double eta = options.eta;
  double objective =
      t_psi_objective(kinetic_psi, n_psi, kinetic, out.v_s, n_electrons);
  for (int it = 0; it < options.max_iters; ++it) {
    const std::vector<double> grad =
        ks_inversion_gradient(n_psi, kinetic, out.v_s, n_electrons);
    const double gnorm = inf_norm(grad);
    if (it % options.trace_stride == 0)
      out.trace.push_back({it, objective, gnorm, eta});
    out.final_grad_inf = gnorm;
    out.iterations = it;
    if (gnorm <= options.tol) {
      out.converged = true;
      return out;
    }
    // Newton step through the static response once the gradient is small;
    // quadratic convergence reaches gauge-unique potentials at tight tolerances
    // the plain descent cannot resolve.
    if (gnorm < 1e-3) {
      const RealMatrix chi = ks_static_response(kinetic, out.v_s, n_electrons);
      Eigen::SelfAdjointEigenSolver<RealMatrix> sys(chi);
      RealVector rhs(grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i) rhs[i] = grad[i];
      RealVector delta = RealVector::Zero(rhs.size());
      for (Eigen::Index k = 0; k < sys.eigenvalues().size(); ++k) {
        const double lam = sys.eigenvalues()[k];
        if (std::abs(lam) < 1e-12) continue;  // constant-shift null mode
        delta += (sys.eigenvectors().col(k).dot(rhs) / lam) * sys.eigenvectors().col(k);
      }
      KSPotential cand = out.v_s;
      for (std::size_t i = 0; i < cand.kappa.size(); ++i) cand.kappa[i] += delta[i];
      cand.gauge_fix();
      const double cand_obj =
          t_psi_objective(kinetic_psi, n_psi, kinetic, cand, n_electrons);
      if (cand_obj <= objective + 1e-14) {
        out.v_s = cand;
        objective = cand_obj;
        continue;
      }
    }
    // Halving line check with sufficient decrease; the step regrows after
    // accepted moves so weakly responding (near-boundary) targets still run.
    double grad_sq = 0.0;
    for (double g : grad) grad_sq += g * g;
    bool stalled = false;
    while (true) {
      KSPotential cand = out.v_s;
      for (std::size_t i = 0; i < cand.kappa.size(); ++i)
        cand.kappa[i] -= eta * grad[i];
      cand.gauge_fix();
      const double cand_obj =
          t_psi_objective(kinetic_psi, n_psi, kinetic, cand, n_electrons);
      if (cand_obj <= objective - 0.25 * eta * grad_sq) {
        out.v_s = cand;
        objective = cand_obj;
        eta = std::min(eta * 1.5, 1e6);
        break;
      }
      eta /= 2;
      if (eta < 1e-13) {
        stalled = true;  // progress below floating-point resolution
        break;
      }
    }
    if (stalled) break;
  }
  out.iterations = options.max_iters;
  return out;
}

double kinetic_expectation(const std::vector<ComplexMatrix>& rho_per_spin,
                           const RealMatrix& kinetic) {
  double acc = 0.0;
  for (const auto& rho : rho_per_spin)
    for (int i = 0; i < kinetic.rows(); ++i)
      for (int j = 0; j < kinetic.cols(); ++j)
        acc += kinetic(i, j) * rho(i, j).real();
  return acc;
}

FunctionalValue exact_functional_oracle(const Density& target, int n_electrons,
                                        double t_hop, double u, double grad_tol,
                                        int max_iters, const KSPotential* warm_start) {
  const int n_sites = target.n_sites();
  constexpr double kBoundary = 1e-6;
  for (double ni : target.n)
    if (ni < kBoundary || ni > 2.0 - kBoundary)
      throw std::invalid_argument(
          "exact_functional_oracle: density touches the [0, 2] boundary; the "
          "maximizing potential diverges there");
  if (std::abs(target.total() - n_electrons) > 1e-6)
    throw std::invalid_argument("exact_functional_oracle: density sum mismatch");

  FunctionalValue out;
  if (warm_start && warm_start->n_sites() == n_sites)
    out.maximizer = warm_start->gauge_fixed();
  else
    out.maximizer.kappa.assign(n_sites, 0.0);
  double eta = 1.0;
  GroundData gd = hubbard_ground(out.maximizer.kappa, t_hop, u, n_electrons);
  double g_val = gd.energy;
  for (int i = 0; i < n_sites; ++i) g_val -= target.n[i] * out.maximizer.kappa[i];
  int noise_steps = 0;
  for (int it = 0; it < max_iters; ++it) {
    std::vector<double> grad(n_sites);
    double grad_sq = 0.0;
    for (int i = 0; i < n_sites; ++i) {
      grad[i] = gd.density.n[i] - target.n[i];
      grad_sq += grad[i] * grad[i];
    }
    out.iterations = it;
    if (inf_norm(grad) <= grad_tol) break;
    bool stalled = false;
    while (true) {
      KSPotential cand = out.maximizer;
      for (int i = 0; i < n_sites; ++i) cand.kappa[i] += eta * grad[i];
      cand.gauge_fix();
      GroundData cand_gd = hubbard_ground(cand.kappa, t_hop, u, n_electrons);
      double cand_g = cand_gd.energy;
      for (int i = 0; i < n_sites; ++i) cand_g -= target.n[i] * cand.kappa[i];
      // sufficient increase, so an overlong step cannot ping-pong forever
      if (cand_g >= g_val + 0.25 * eta * grad_sq) {
        const double gain = cand_g - g_val;
        out.maximizer = cand;
        gd = cand_gd;
        g_val = cand_g;
        // the dual flattens near the density-box boundary; let the step grow
        eta = std::min(eta * 1.5, 1e6);
        noise_steps = gain < 1e-13 * std::max(1.0, std::abs(g_val)) ? noise_steps + 1 : 0;
        break;
      }
      eta /= 2;
      if (eta < 1e-13) {
        stalled = true;  // ascent at floating-point resolution
        break;
      }
    }
    if (stalled || noise_steps >= 3) break;  // gains within solver noise
  }
  out.value = g_val;
  return out;
}

const FunctionalValue& OracleDensityFunctional::solve(const Density& n) {
  if (!have_last_ || n.n != last_density_) {
    last_value_ = exact_functional_oracle(n, n_electrons_, t_hop_, u_, 3e-8, 200000,
                                          have_last_ ? &last_value_.maximizer : nullptr);
    last_density_ = n.n;
    have_last_ = true;
  }
  return last_value_;
}

double OracleDensityFunctional::value(const Density& n) { return solve(n).value; }

std::vector<double> OracleDensityFunctional::derivative(const Density& n) {
  // Envelope theorem on the Lieb dual: dF/dn = -v* at the maximizer.
  const FunctionalValue& f = solve(n);
  std::vector<double> d(f.maximizer.kappa.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = -f.maximizer.kappa[i];
  return d;
}

EulerLagrangeResult euler_lagrange_solve(DensityFunctional& f,
                                         const std::vector<double>& v,
                                         int n_electrons, Density n0,
                                         const EulerLagrangeOptions& options) {
  const int n_sites = static_cast<int>(v.size());
  if (n0.n_sites() != n_sites)
    throw std::invalid_argument("euler_lagrange_solve: density length mismatch");

  auto project = [&](Density& n, bool& clipped) {
    // Restore the particle number, then keep sites inside the box.
    for (int pass = 0; pass < 8; ++pass) {
      const double deficit = (n_electrons - n.total()) / n_sites;
      for (double& ni : n.n) ni += deficit;
      bool any = false;
      for (double& ni : n.n) {
        if (ni < options.box_margin) {
          ni = options.box_margin;
          any = true;
        } else if (ni > 2.0 - options.box_margin) {
          ni = 2.0 - options.box_margin;
          any = true;
        }
      }
      clipped = clipped || any;
      if (!any) break;
    }
  };

  EulerLagrangeResult out;
  out.density = n0;
  bool clipped = false;
  project(out.density, clipped);
  auto energy_at = [&](const Density& n) {
    double e = f.value(n);
    for (int i = 0; i < n_sites; ++i) e += n.n[i] * v[i];
    return e;
  };
  double energy = energy_at(out.density);
  double eta = options.eta;
  double best = energy;
  int stale = 0;

  for (int it = 0; it < options.max_iters; ++it) {
    std::vector<double> grad = f.derivative(out.density);
    for (int i = 0; i < n_sites; ++i) grad[i] += v[i];
    const double gm = mean(grad);
    for (double& g : grad) g -= gm;  // chemical potential is the multiplier
    const double gnorm = inf_norm(grad);
    out.trace.push_back({it, energy, gnorm, eta});
    out.iterations = it;
    if (gnorm <= options.tol) {
      out.converged = true;
      break;
    }
    Density cand = out.density;
    for (int i = 0; i < n_sites; ++i) cand.n[i] -= eta * grad[i];
    project(cand, clipped);
    const double cand_energy = energy_at(cand);
    if (!std::isfinite(cand_energy)) {
      out.diverged = true;
      break;
    }
    if (options.adaptive && cand_energy > energy + 1e-14) {
      eta /= 2;
      if (eta < 1e-14) break;
      continue;
    }
    if (!options.adaptive) {
      // A runaway step bounces without ever improving: call it out.
      if (cand_energy < best - 1e-12) {
        best = cand_energy;
        stale = 0;
      } else if (++stale >= 20) {
        out.diverged = true;
        break;
      }
    }
    out.density = cand;
    energy = cand_energy;
  }
  out.energy = energy;
  out.manifold_flag = clipped;
  return out;
}

RealMatrix onsite_hartree_kernel(int n_sites, double u) {
  return (u / 2.0) * RealMatrix::Identity(n_sites, n_sites);
}

std::vector<double> hartree_potential(const std::vector<double>& n,
                                      const RealMatrix& kernel) {
  if (kernel.rows() != static_cast<Eigen::Index>(n.size()))
    throw std::invalid_argument("hartree_potential: kernel size mismatch");
  std::vector<double> v(n.size(), 0.0);
  for (std::size_t i = 0; i < n.size(); ++i)
    for (std::size_t j = 0; j < n.size(); ++j) v[i] += kernel(i, j) * n[j];
  return v;
}

double hartree_energy(const std::vector<double>& n, const RealMatrix& kernel) {
  const std::vector<double> v = hartree_potential(n, kernel);
  double e = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) e += 0.5 * n[i] * v[i];
  return e;
}

double ks_energy_reconstruction(double eigenvalue_sum, const Density& n,
                                double hartree, double e_xc,
                                const std::vector<double>& v_xc) {
  if (v_xc.size() != n.n.size())
    throw std::invalid_argument("ks_energy_reconstruction: length mismatch");
  double e = eigenvalue_sum - hartree + e_xc;
  for (std::size_t i = 0; i < n.n.size(); ++i) e -= n.n[i] * v_xc[i];
  return e;
}

KsDecomposition decompose_functional(const std::vector<double>& v, double t_hop,
                                     double u, int n_electrons) {
  const int n_sites = static_cast<int>(v.size());
  const RealMatrix kinetic = chain_kinetic(n_sites, t_hop);

  KsDecomposition out;
  FermionHamiltonian h = build_hubbard(n_sites, t_hop, u, v);
  Spectrum s = diagonalize_fermionic(h, SectorFilter{n_electrons, std::nullopt});
  out.exact_energy = s.eigenvalues.front();
  auto rho = density_matrix_from_state(s.ground_state, h);
  out.density = density_from_dm(rho);

  KSPotential v0;
  v0.kappa.assign(n_sites, 0.0);
  InversionOptions iopt;
  iopt.tol = 3e-8;
  InversionResult inv = invert_to_ks(kinetic_expectation(rho, kinetic), out.density,
                                     kinetic, n_electrons, v0, iopt);
  if (!inv.converged)
    throw std::runtime_error("decompose_functional: inversion did not converge");
  out.v_s = inv.v_s;

  const KSSolution ks = solve_ks(kinetic, out.v_s, n_electrons);
  out.eigenvalue_sum = ks.eigenvalue_sum;
  out.kinetic_s = ks.kinetic_energy;
  // Gauge consistency of the chain: sum_eps = T_s + n.v_s must tie out.
  double check = out.kinetic_s;
  for (int i = 0; i < n_sites; ++i) check += ks.density.n[i] * out.v_s.kappa[i];
  if (std::abs(check - out.eigenvalue_sum) > 1e-8)
    throw std::logic_error("decompose_functional: inconsistent gauge in the KS chain");

  const RealMatrix kernel = onsite_hartree_kernel(n_sites, u);
  out.hartree = hartree_energy(out.density.n, kernel);
  out.v_h = hartree_potential(out.density.n, kernel);
  out.f_value = exact_functional_oracle(out.density, n_electrons, t_hop, u).value;
  out.e_xc = out.f_value - out.kinetic_s - out.hartree;
  out.v_xc.assign(n_sites, 0.0);
  for (int i = 0; i < n_sites; ++i)
    out.v_xc[i] = out.v_s.kappa[i] - out.v_h[i] - v[i];
  return out;
}

ResponseFunction chi_s_response(const KSOrbitals& orbitals,
                                const std::vector<double>& omega_grid, double eta) {
  if (eta <= 0) throw std::invalid_argument("chi_s_response: eta must be positive");
  const int n_sites = static_cast<int>(orbitals.phi.rows());
  const int n_orb = static_cast<int>(orbitals.eigenvalues.size());
  ResponseFunction out;
  out.omega = omega_grid;
  out.eta = eta;
  out.chi.reserve(omega_grid.size());
  for (double w : omega_grid) {
    ComplexMatrix chi = ComplexMatrix::Zero(n_sites, n_sites);
    for (int k = 0; k < n_orb; ++k)
      for (int j = 0; j < n_orb; ++j) {
        const double dxi = orbitals.occupations[k] - orbitals.occupations[j];
        if (dxi == 0.0) continue;
        const Complex denom(w - (orbitals.eigenvalues[j] - orbitals.eigenvalues[k]),
                            eta);
        for (int r = 0; r < n_sites; ++r)
          for (int rp = 0; rp < n_sites; ++rp)
            chi(r, rp) += dxi * orbitals.phi(r, k) * orbitals.phi(r, j) *
                          orbitals.phi(rp, j) * orbitals.phi(rp, k) / denom;
      }
    out.chi.push_back(std::move(chi));
  }
  return out;
}

ThermalDensity fermi_weighted_density(const KSOrbitals& orbitals, double tau,
                                      int n_electrons) {
  const int n_sites = static_cast<int>(orbitals.phi.rows());
  const int n_orb = static_cast<int>(orbitals.eigenvalues.size());
  if (tau < 0) throw std::invalid_argument("fermi_weighted_density: tau must be >= 0");
  if (n_electrons < 0 || n_electrons > 2 * n_orb)
    throw std::invalid_argument("fermi_weighted_density: electron count unreachable");

  ThermalDensity out;
  out.occupations.assign(n_orb, 0.0);
  if (tau == 0.0) {
    int left = n_electrons;
    for (int j = 0; j < n_orb && left > 0; ++j) {
      out.occupations[j] = std::min(2, left);
      left -= static_cast<int>(out.occupations[j]);
    }
    out.mu = n_electrons > 0 && n_electrons < 2 * n_orb
                 ? orbitals.eigenvalues[(n_electrons - 1) / 2]
                 : 0.0;
  } else {
    auto count_at = [&](double mu) {
      double total = 0.0;
      for (int j = 0; j < n_orb; ++j)
        total += 2.0 / (1.0 + std::exp((orbitals.eigenvalues[j] - mu) / tau));
      return total;
    };
    double lo = orbitals.eigenvalues.front() - 60.0 * tau - 1.0;
    double hi = orbitals.eigenvalues.back() + 60.0 * tau + 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (count_at(mid) < n_electrons ? lo : hi) = mid;
    }
    out.mu = 0.5 * (lo + hi);
    for (int j = 0; j < n_orb; ++j)
      out.occupations[j] =
          2.0 / (1.0 + std::exp((orbitals.eigenvalues[j] - out.mu) / tau));
  }
  out.density.n.assign(n_sites, 0.0);
  for (int j = 0; j < n_orb; ++j)
    for (int i = 0; i < n_sites; ++i)
      out.density.n[i] += out.occupations[j] * orbitals.phi(i, j) * orbitals.phi(i, j);
  return out;
}

}  // namespace rwmp
