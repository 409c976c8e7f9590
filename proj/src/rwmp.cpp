#include "rwmp/rwmp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "rwmp/format.hpp"

namespace rwmp {
namespace {

double inf_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Terms of (target - base), for ramping base into target.
QubitHamiltonian hamiltonian_difference(const QubitHamiltonian& target,
                                        const QubitHamiltonian& base) {
  QubitHamiltonian out;
  out.n_qubits = target.n_qubits;
  out.spin = target.spin;
  out.terms = target.terms;
  for (const auto& t : base.terms) {
    PauliString neg = t;
    neg.coefficient = -neg.coefficient;
    out.terms.push_back(std::move(neg));
  }
  collect_terms(out.terms);
  return out;
}

Statevector noninteracting_ground(int n_sites, double t_hop,
                                  const std::vector<double>& v, int n_electrons) {
  FermionHamiltonian free_h = build_hubbard(n_sites, t_hop, 0.0, v);
  Spectrum s = diagonalize_fermionic(free_h, SectorFilter{n_electrons, std::nullopt});
  return s.ground_state;
}

}  // namespace

void PotentialSchedule::validate() const {
  if (potentials.empty()) return;
  const std::size_t n = potentials.front().size();
  for (const auto& v : potentials)
    if (v.size() != n)
      throw std::invalid_argument("potential schedule: inconsistent lengths");
  if (max_step_inf > 0.0)
    for (std::size_t k = 1; k < potentials.size(); ++k)
      if (inf_dist(potentials[k], potentials[k - 1]) > max_step_inf + 1e-12)
        throw std::invalid_argument(
            "potential schedule: step " + std::to_string(k) +
            " exceeds the warm-start bound");
}

PotentialSchedule PotentialSchedule::nearest_neighbor_chain(
    std::vector<std::vector<double>> points, double max_step_inf) {
  PotentialSchedule out;
  out.max_step_inf = max_step_inf;
  if (points.empty()) return out;
  std::vector<bool> used(points.size(), false);
  std::size_t current = 0;
  used[0] = true;
  out.potentials.push_back(points[0]);
  for (std::size_t step = 1; step < points.size(); ++step) {
    std::size_t best = points.size();
    double best_d = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (used[j]) continue;
      const double d = inf_dist(points[current], points[j]);
      if (best == points.size() || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    used[best] = true;
    out.potentials.push_back(points[best]);
    current = best;
  }
  return out;
}

RwmpResult run_rwmp(const RwmpConfig& config) {
  config.schedule.validate();
  RwmpResult result;
  if (config.schedule.potentials.empty()) return result;

  const RealMatrix kinetic = chain_kinetic(config.n_sites, config.t_hop);
  RandomStream root(config.seed);

  std::optional<Statevector> carried_state;
  std::optional<QubitHamiltonian> carried_h;

  for (std::size_t k = 0; k < config.schedule.potentials.size(); ++k) {
    const std::vector<double>& v = config.schedule.potentials[k];
    SystemRecord rec;
    rec.index = static_cast<int>(k);
    rec.v = v;
    RandomStream rng = root.split(k);
    rec.seed = rng.seed();
    try {
      FermionHamiltonian h_f = build_hubbard(config.n_sites, config.t_hop, config.u, v);
      QubitHamiltonian qh = to_qubit_hamiltonian(h_f);
      QubitHamiltonian scaled =
          shift_and_scale(qh, config.scale_margin, config.oracle_bounds);
      Spectrum oracle =
          diagonalize_fermionic(h_f, SectorFilter{config.n_electrons, std::nullopt});
      rec.oracle_energy = oracle.eigenvalues.front();
      auto rho_oracle = density_matrix_from_state(oracle.ground_state, h_f);
      rec.density_oracle = density_from_dm(rho_oracle).n;

      // Step 1: ground state by real-time evolution, recycled when possible.
      Statevector psi0 = (config.warm_start && carried_state)
                             ? *carried_state
                             : noninteracting_ground(config.n_sites, config.t_hop, v,
                                                     config.n_electrons);
      QubitHamiltonian h0 =
          (config.warm_start && carried_h)
              ? *carried_h
              : to_qubit_hamiltonian(build_hubbard(config.n_sites, config.t_hop, 0.0, v));
      QubitHamiltonian ramp = hamiltonian_difference(qh, h0);
      Schedule schedule =
          Schedule::linear(config.rte_t_max, config.rte_steps, config.rte_order);
      RtePrepareResult rte = rte_prepare(h0, ramp, schedule, psi0,
                                         &oracle.ground_state,
                                         config.rte_fidelity_threshold);
      rec.rte_fidelity = rte.fidelity.value_or(0.0);
      rec.rte_steps = rte.trotter_steps;
      rec.rte_steps_to_threshold = rte.steps_to_threshold;
      result.total_rte_steps += rte.trotter_steps;
      result.total_counted_steps +=
          rte.steps_to_threshold >= 0 ? rte.steps_to_threshold : rte.trotter_steps;

      // Step 2: energy readout.
      QpeResult qpe_out =
          qpe(rte.state, scaled, config.qpe_bits, rng, config.qpe_repeats);
      rec.qpe_phase = qpe_out.readout.phase;
      rec.qpe_energy = qpe_out.readout.energy;
      Statevector psi = qpe_out.state;

      // Step 3: counted quantities, wavefunction handed back for reuse.
      TrainingSample sample;
      sample.v = v;
      sample.energy = rec.qpe_energy;
      sample.provenance = "qpe";
      if (config.estimate_density) {
        const Statevector before = psi;
        CountingEstimator estimator(scaled, oracle, config.qae);
        DensityMatrixEstimate dm = estimator.estimate_density_matrix(psi, h_f, rng);
        rec.recycle_fidelity = psi.fidelity(before);
        rec.density = density_from_dm(dm.rho).n;
        for (const auto& e : dm.strings) rec.qae_rounds += e.rounds;
        rec.qae_repairs = dm.total_repairs;
        sample.n = rec.density;
      } else {
        rec.recycle_fidelity = 1.0;
        sample.n = rec.density_oracle;
      }

      if (config.invert_ks) {
        Density target;
        target.n = (config.inversion_density == "qae" && !rec.density.empty())
                       ? rec.density
                       : rec.density_oracle;
        const double kin_psi = kinetic_expectation(rho_oracle, kinetic);
        KSPotential v0;
        v0.kappa.assign(config.n_sites, 0.0);
        InversionResult inv = invert_to_ks(kin_psi, target, kinetic,
                                           config.n_electrons, v0, config.inversion);
        rec.v_s = inv.v_s.kappa;
        sample.v_s = inv.v_s.kappa;
      }

      result.samples.push_back(std::move(sample));
      carried_state = psi;
      carried_h = qh;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    result.records.push_back(std::move(rec));
  }

  if (config.train_mode != "none" && !result.samples.empty()) {
    ModelSignature sig{QuantityKind::potential, QuantityKind::energy,
                       config.n_sites, 1};
    RandomStream model_rng = root.split(0x4D4C);
    MLModel model = make_mlp(sig, config.ml_hidden, Activation::tanh_odd, -1, model_rng);
    fit_standardization(model, result.samples);
    model.manifold.n_electrons = config.n_electrons;
    result.train_report = train(model, result.samples, config.train_options, model_rng);
    result.model = std::move(model);
  }
  return result;
}

std::string RwmpResult::records_csv() const {
  std::string out =
      "k,v,oracle_energy,qpe_phase,qpe_energy,density,density_oracle,v_s,"
      "rte_fidelity,rte_steps,rte_steps_to_threshold,recycle_fidelity,"
      "qae_rounds,qae_repairs,seed,error\n";
  for (const auto& r : records) {
    std::vector<std::string> cells;
    cells.push_back(std::to_string(r.index));
    cells.push_back(join_doubles(r.v, ';'));
    cells.push_back(format_double(r.oracle_energy));
    cells.push_back(format_double(r.qpe_phase));
    cells.push_back(format_double(r.qpe_energy));
    cells.push_back(join_doubles(r.density, ';'));
    cells.push_back(join_doubles(r.density_oracle, ';'));
    cells.push_back(join_doubles(r.v_s, ';'));
    cells.push_back(format_double(r.rte_fidelity));
    cells.push_back(std::to_string(r.rte_steps));
    cells.push_back(std::to_string(r.rte_steps_to_threshold));
    cells.push_back(format_double(r.recycle_fidelity));
    cells.push_back(std::to_string(r.qae_rounds));
    cells.push_back(std::to_string(r.qae_repairs));
    cells.push_back(std::to_string(r.seed));
    cells.push_back(r.error);
    out += csv_row(cells);
  }
  return out;
}

MlDensityFunctional::MlDensityFunctional(const MLModel& model) : model_(model) {
  if (model.signature.input != QuantityKind::density ||
      model.signature.output != QuantityKind::energy)
    throw std::invalid_argument("MlDensityFunctional requires an E[n] model");
}

double MlDensityFunctional::value(const Density& n) {
  return model_.forward(n.n)[0];
}

std::vector<double> MlDensityFunctional::derivative(const Density& n) {
  return functional_derivative_backprop(model_, n.n);
}

ClassicalSolveResult classical_user_solve(const std::vector<MLModel>& models,
                                          const std::vector<double>& v,
                                          int n_electrons, double t_hop,
                                          const ClassicalSolveOptions& options) {
  const int n_sites = static_cast<int>(v.size());
  const MLModel* e_of_v = nullptr;
  const MLModel* e_of_n = nullptr;
  const MLModel* n_of_v = nullptr;
  const MLModel* vs_of_v = nullptr;
  const MLModel* e_of_nv = nullptr;
  for (const auto& m : models) {
    if (m.signature.output == QuantityKind::energy) {
      if (m.signature.input == QuantityKind::potential) e_of_v = &m;
      if (m.signature.input == QuantityKind::density) e_of_n = &m;
      if (m.signature.input == QuantityKind::density_and_potential) e_of_nv = &m;
    }
    if (m.signature.input == QuantityKind::potential) {
      if (m.signature.output == QuantityKind::density) n_of_v = &m;
      if (m.signature.output == QuantityKind::ks_potential) vs_of_v = &m;
    }
  }
  if (models.empty()) throw std::invalid_argument("classical solve: no models");

  ClassicalSolveResult out;
  // Training-manifold guard: wrong electron count is refused outright, a
  // potential outside the declared ranges is solved best-effort but flagged.
  for (const auto& m : models) {
    if (m.manifold.n_electrons != 0 && m.manifold.n_electrons != n_electrons)
      throw std::invalid_argument(
          "classical solve: model was trained at N_e = " +
          std::to_string(m.manifold.n_electrons) + ", refusing N_e = " +
          std::to_string(n_electrons));
    if (!m.manifold.v_min.empty() &&
        m.manifold.v_min.size() == static_cast<std::size_t>(n_sites)) {
      for (int i = 0; i < n_sites; ++i)
        if (v[i] < m.manifold.v_min[i] - 1e-9 || v[i] > m.manifold.v_max[i] + 1e-9) {
          out.trusted = false;
          out.warnings.push_back(
              "potential leaves the training manifold at site " + std::to_string(i));
          break;
        }
    }
  }

  const RealMatrix kinetic = chain_kinetic(n_sites, t_hop);
  bool have_density = false;

  if (e_of_n) {
    MlDensityFunctional f(*e_of_n);
    Density n0;
    n0.n.assign(n_sites, double(n_electrons) / n_sites);
    EulerLagrangeOptions el;
    el.eta = options.el_eta;
    el.tol = options.el_tol;
    el.max_iters = options.el_max_iters;
    EulerLagrangeResult res = euler_lagrange_solve(f, v, n_electrons, n0, el);
    out.density = res.density;
    out.energy = res.energy;
    out.trusted = out.trusted && !res.manifold_flag;
    if (res.manifold_flag)
      out.warnings.push_back("density solver touched the box constraints");
    have_density = true;
  }
  if (!have_density && n_of_v) {
    out.density.n = n_of_v->forward(v);
    have_density = true;
    if (e_of_nv) {
      std::vector<double> both = out.density.n;
      both.insert(both.end(), v.begin(), v.end());
      out.energy = e_of_nv->forward(both)[0];
    } else if (e_of_v) {
      out.energy = e_of_v->forward(v)[0];
    }
  }
  if (vs_of_v) {
    out.v_s = vs_of_v->forward(v);
    KSPotential ks{out.v_s};
    KSSolution sol = solve_ks(kinetic, ks.gauge_fixed(), n_electrons);
    if (!have_density) {
      out.density = sol.density;
      have_density = true;
      if (e_of_v) out.energy = e_of_v->forward(v)[0];
    }
    if (options.want_response)
      out.response = chi_s_response(sol.orbitals, options.omega, options.response_eta);
    if (options.want_thermal)
      out.thermal = fermi_weighted_density(sol.orbitals, options.tau, n_electrons);
  }
  if (!have_density && e_of_v) {
    out.energy = e_of_v->forward(v)[0];
    out.warnings.push_back("no density-bearing model; energy only");
  } else if (!have_density) {
    throw std::invalid_argument("classical solve: no usable model combination");
  }
  return out;
}

BatchDispatchResult batch_dispatch(const std::vector<RwmpConfig>& jobs,
                                   int parallelism) {
  if (parallelism < 1) throw std::invalid_argument("batch_dispatch: parallelism >= 1");
  BatchDispatchResult out;
  out.per_job.resize(jobs.size());
  std::vector<char> failed(jobs.size(), 0);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      try {
        RwmpConfig cfg = jobs[k];
        cfg.train_mode = "none";  // workers only produce samples
        RwmpResult r = run_rwmp(cfg);
        for (const auto& rec : r.records)
          if (!rec.error.empty()) throw std::runtime_error(rec.error);
        out.per_job[k] = std::move(r.samples);
      } catch (...) {
        failed[k] = 1;
      }
    }
  };
  if (parallelism == 1 || jobs.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    const int nthreads = std::min<int>(parallelism, static_cast<int>(jobs.size()));
    threads.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (failed[k]) {
      out.failed_jobs.push_back(static_cast<int>(k));
      continue;
    }
    for (const auto& s : out.per_job[k]) out.merged.push_back(s);
  }
  return out;
}

HamiltonianConfig parse_hamiltonian_config(const KvFile& kv) {
  HamiltonianConfig out;
  const int n_sites = static_cast<int>(kv.get_int("n_sites"));
  out.t_hop = kv.get_double_or("t", 1.0);
  out.u = kv.get_double_or("U", 0.0);
  out.v = kv.has("v") ? kv.get_vector("v") : std::vector<double>(n_sites, 0.0);
  out.n_electrons = static_cast<int>(kv.get_int_or("n_electrons", n_sites));

  FermionHamiltonian h;
  h.n_sites = n_sites;
  const std::string spin = kv.has("spin") ? kv.get_string("spin") : "half";
  if (spin == "half")
    h.spin = Spin::half;
  else if (spin == "spinless")
    h.spin = Spin::spinless;
  else
    throw std::invalid_argument("spin must be 'half' or 'spinless'");

  if (kv.has("t_matrix")) {
    const auto rows = kv.get_matrix("t_matrix");
    if (static_cast<int>(rows.size()) != n_sites)
      throw std::invalid_argument("t_matrix must have n_sites rows");
    h.t = ComplexMatrix::Zero(n_sites, n_sites);
    for (int i = 0; i < n_sites; ++i) {
      if (static_cast<int>(rows[i].size()) != n_sites)
        throw std::invalid_argument("t_matrix must be square");
      for (int j = 0; j < n_sites; ++j) h.t(i, j) = rows[i][j];
    }
  } else {
    h.t = chain_kinetic(n_sites, out.t_hop).cast<Complex>();
  }
  if (static_cast<int>(out.v.size()) != n_sites)
    throw std::invalid_argument("v must have n_sites entries");
  for (int i = 0; i < n_sites; ++i) h.t(i, i) += out.v[i];

  if (kv.has("V_tensor")) {
    const auto rows = kv.get_matrix("V_tensor");
    const std::size_t n2 = std::size_t(n_sites) * n_sites;
    if (rows.size() != n2)
      throw std::invalid_argument("V_tensor must have n_sites^2 rows");
    h.v.assign(n2 * n2, 0.0);
    for (std::size_t r = 0; r < n2; ++r) {
      if (rows[r].size() != n2)
        throw std::invalid_argument("V_tensor rows must have n_sites^2 entries");
      for (std::size_t c = 0; c < n2; ++c) h.v[r * n2 + c] = rows[r][c];
    }
  } else if (out.u != 0.0) {
    if (h.spin != Spin::half)
      throw std::invalid_argument("on-site U needs spin-half");
    const std::size_t n = static_cast<std::size_t>(n_sites);
    h.v.assign(n * n * n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) h.v[((i * n + i) * n + i) * n + i] = out.u / 2.0;
  }
  h.validate();
  out.hamiltonian = std::move(h);
  return out;
}

RwmpConfig parse_rwmp_config(const KvFile& kv) {
  RwmpConfig cfg;
  cfg.n_sites = static_cast<int>(kv.get_int("n_sites"));
  cfg.t_hop = kv.get_double_or("t", 1.0);
  cfg.u = kv.get_double_or("U", 0.0);
  cfg.n_electrons = static_cast<int>(kv.get_int_or("n_electrons", cfg.n_sites));
  cfg.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 1));

  if (kv.has("potentials")) {
    cfg.schedule.potentials = kv.get_matrix("potentials");
  } else if (kv.has("v_start") && kv.has("v_end")) {
    const auto v0 = kv.get_vector("v_start");
    const auto v1 = kv.get_vector("v_end");
    const long n = kv.get_int_or("n_systems", 10);
    for (long k = 0; k < n; ++k) {
      const double s = n == 1 ? 0.0 : double(k) / double(n - 1);
      std::vector<double> v(v0.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = v0[i] + s * (v1[i] - v0[i]);
      cfg.schedule.potentials.push_back(std::move(v));
    }
  } else {
    throw std::invalid_argument("run-rwmp config needs 'potentials' or a v_start/v_end sweep");
  }
  cfg.schedule.max_step_inf = kv.get_double_or("max_step_inf", 0.0);

  cfg.warm_start = kv.get_int_or("warm_start", 1) != 0;
  cfg.rte_t_max = kv.get_double_or("rte_t_max", cfg.rte_t_max);
  cfg.rte_steps = static_cast<int>(kv.get_int_or("rte_steps", cfg.rte_steps));
  cfg.rte_order = static_cast<int>(kv.get_int_or("rte_order", cfg.rte_order));
  cfg.rte_fidelity_threshold =
      kv.get_double_or("rte_threshold", cfg.rte_fidelity_threshold);

  cfg.qpe_bits = static_cast<int>(kv.get_int_or("qpe_bits", cfg.qpe_bits));
  cfg.qpe_repeats = static_cast<int>(kv.get_int_or("qpe_repeats", cfg.qpe_repeats));
  cfg.scale_margin = kv.get_double_or("margin", cfg.scale_margin);
  cfg.oracle_bounds = kv.get_int_or("oracle_bounds", 1) != 0;

  cfg.qae.rounds = kv.get_int_or("qae_rounds", cfg.qae.rounds);
  cfg.qae.epsilon = kv.get_double_or("qae_epsilon", cfg.qae.epsilon);
  const std::string mode = kv.has("qae_mode") ? kv.get_string("qae_mode") : "collapse";
  if (mode == "full")
    cfg.qae.mode = QaeMode::full;
  else if (mode == "collapse")
    cfg.qae.mode = QaeMode::collapse;
  else
    throw std::invalid_argument("qae_mode must be 'full' or 'collapse'");
  cfg.qae.check_bits = static_cast<int>(kv.get_int_or("qae_check_bits", cfg.qae.check_bits));
  cfg.estimate_density = kv.get_int_or("estimate_density", 1) != 0;

  cfg.invert_ks = kv.get_int_or("invert_ks", 0) != 0;
  if (kv.has("inversion_density")) cfg.inversion_density = kv.get_string("inversion_density");
  cfg.inversion.eta = kv.get_double_or("inv_eta", cfg.inversion.eta);
  cfg.inversion.tol = kv.get_double_or("inv_tol", cfg.inversion.tol);
  cfg.inversion.max_iters =
      static_cast<int>(kv.get_int_or("inv_max_iters", cfg.inversion.max_iters));

  if (kv.has("train_mode")) cfg.train_mode = kv.get_string("train_mode");
  if (kv.has("ml_hidden")) {
    cfg.ml_hidden.clear();
    for (double h : kv.get_vector("ml_hidden")) cfg.ml_hidden.push_back(int(h));
  }
  cfg.train_options.epochs =
      static_cast<int>(kv.get_int_or("train_epochs", cfg.train_options.epochs));
  cfg.train_options.batch_size =
      static_cast<int>(kv.get_int_or("train_batch", cfg.train_options.batch_size));
  cfg.train_options.eta0 = kv.get_double_or("train_eta", cfg.train_options.eta0);
  return cfg;
}

void save_samples(const std::vector<TrainingSample>& samples, const std::string& path) {
  KvFile kv;
  kv.set_int("n_samples", static_cast<long>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string p = "sample" + std::to_string(i) + "_";
    const TrainingSample& s = samples[i];
    if (!s.v.empty()) kv.set_vector(p + "v", s.v);
    if (!s.n.empty()) kv.set_vector(p + "n", s.n);
    if (!s.v_s.empty()) kv.set_vector(p + "vs", s.v_s);
    if (s.energy) kv.set_double(p + "E", *s.energy);
    kv.set_string(p + "provenance", s.provenance);
    kv.set_double(p + "weight", s.weight);
  }
  kv.save(path);
}

std::vector<TrainingSample> load_samples(const std::string& path) {
  KvFile kv = KvFile::load(path);
  const long n = kv.get_int("n_samples");
  std::vector<TrainingSample> out;
  out.reserve(n);
  for (long i = 0; i < n; ++i) {
    const std::string p = "sample" + std::to_string(i) + "_";
    TrainingSample s;
    if (kv.has(p + "v")) s.v = kv.get_vector(p + "v");
    if (kv.has(p + "n")) s.n = kv.get_vector(p + "n");
    if (kv.has(p + "vs")) s.v_s = kv.get_vector(p + "vs");
    if (kv.has(p + "E")) s.energy = kv.get_double(p + "E");
    if (kv.has(p + "provenance")) s.provenance = kv.get_string(p + "provenance");
    s.weight = kv.get_double_or(p + "weight", 1.0);
    out.push_back(std::move(s));
  }
  return out;
}

void save_potential(const std::vector<double>& kappa, const std::string& path) {
  KvFile kv;
  kv.set_int("n_sites", static_cast<long>(kappa.size()));
  kv.set_vector("kappa", kappa);
  kv.save(path);
}

std::vector<double> load_potential(const std::string& path) {
  return KvFile::load(path).get_vector("kappa");
}

void save_density(const Density& n, const std::string& path) {
  KvFile kv;
  kv.set_int("n_sites", n.n_sites());
  kv.set_vector("n", n.n);
  kv.save(path);
}

Density load_density(const std::string& path) {
  Density d;
  d.n = KvFile::load(path).get_vector("n");
  return d;
}

}  // namespace rwmp
