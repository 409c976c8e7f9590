// rwmp-lab: command-line front end for the lattice DFT / quantum-subroutine
// toolkit. Subcommands mirror the pipeline stages; all numeric output is
// 64-bit decimal text so identical seeds reproduce identical bytes.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rwmp/dft.hpp"
#include "rwmp/fermion.hpp"
#include "rwmp/format.hpp"
#include "rwmp/kvfile.hpp"
#include "rwmp/ml.hpp"
#include "rwmp/qae.hpp"
#include "rwmp/qpe.hpp"
#include "rwmp/rwmp.hpp"

namespace fs = std::filesystem;
using namespace rwmp;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

struct SystemContext {
  HamiltonianConfig cfg;
  QubitHamiltonian scaled;
  Spectrum oracle;
};

SystemContext load_system(const std::string& config_path, double margin,
                          bool oracle_bounds) {
  KvFile kv = KvFile::load(config_path);
  SystemContext ctx{parse_hamiltonian_config(kv), {}, Spectrum{{}, Statevector(1), {}, 0}};
  QubitHamiltonian qh = to_qubit_hamiltonian(ctx.cfg.hamiltonian);
  ctx.scaled = shift_and_scale(qh, kv.get_double_or("margin", margin),
                               kv.get_int_or("oracle_bounds", oracle_bounds ? 1 : 0) != 0);
  ctx.oracle = diagonalize_fermionic(ctx.cfg.hamiltonian,
                                     SectorFilter{ctx.cfg.n_electrons, std::nullopt});
  return ctx;
}

std::string qpe_csv_row(std::uint64_t seed, int t_bits, double phase, double energy,
                        double fidelity) {
  return csv_row({std::to_string(seed), std::to_string(t_bits), format_double(phase),
                  format_double(energy), format_double(fidelity)});
}

int cmd_hamiltonian(const std::string& config, bool dump_terms, bool spectrum,
                    int sector_n, int sector_sz) {
  KvFile kv = KvFile::load(config);
  HamiltonianConfig hc = parse_hamiltonian_config(kv);
  QubitHamiltonian qh = to_qubit_hamiltonian(hc.hamiltonian);
  std::cout << "n_sites " << hc.hamiltonian.n_sites << "\n"
            << "spin " << (hc.hamiltonian.spin == Spin::half ? "half" : "spinless")
            << "\n"
            << "n_qubits " << qh.n_qubits << "\n"
            << "n_terms " << qh.terms.size() << "\n"
            << "n_electrons " << hc.n_electrons << "\n";
  if (dump_terms)
    for (const auto& t : qh.terms)
      std::cout << "term " << t.letters << " " << format_double(t.coefficient.real())
                << "\n";
  if (spectrum) {
    SectorFilter f;
    if (sector_n >= 0) f.n_electrons = sector_n;
    if (sector_sz != INT32_MIN) f.two_sz = sector_sz;
    Spectrum s = exact_diagonalize(qh, f);
    for (double e : s.eigenvalues) std::cout << "eigenvalue " << format_double(e) << "\n";
    std::cout << "ground_degenerate " << (s.ground_degenerate() ? 1 : 0) << "\n";
  }
  return 0;
}

int cmd_rte(const std::string& config, std::uint64_t seed, const std::string& out_dir) {
  KvFile kv = KvFile::load(config);
  SystemContext ctx = load_system(config, 0.25, true);
  const FermionHamiltonian& h = ctx.cfg.hamiltonian;

  FermionHamiltonian free_h = h;
  free_h.v.clear();  // interaction off, same one-body part
  Spectrum free_gs = diagonalize_fermionic(free_h, SectorFilter{ctx.cfg.n_electrons,
                                                                std::nullopt});
  QubitHamiltonian h0 = to_qubit_hamiltonian(free_h);
  QubitHamiltonian target = to_qubit_hamiltonian(h);
  QubitHamiltonian ramp;
  ramp.n_qubits = target.n_qubits;
  ramp.terms = target.terms;
  for (auto t : h0.terms) {
    t.coefficient = -t.coefficient;
    ramp.terms.push_back(t);
  }
  collect_terms(ramp.terms);

  Schedule schedule = Schedule::linear(kv.get_double_or("rte_t_max", 60.0),
                                       int(kv.get_int_or("rte_steps", 600)),
                                       int(kv.get_int_or("rte_order", 2)));
  RtePrepareResult r = rte_prepare(h0, ramp, schedule, free_gs.ground_state,
                                   &ctx.oracle.ground_state,
                                   kv.get_double_or("rte_threshold", 0.99));
  // energy expectation of the prepared state
  ComplexMatrix hm = target.matrix();
  ComplexVector psi(r.state.dim());
  for (std::uint64_t b = 0; b < r.state.dim(); ++b) psi[b] = r.state.amplitude(b);
  const double energy = (psi.adjoint() * hm * psi)(0).real();
  std::string csv = "seed,t_bits,phase,energy,fidelity\n";
  csv += qpe_csv_row(seed, 0, 0.0, energy, r.fidelity.value_or(0.0));
  write_file(fs::path(out_dir) / "rte.csv", csv);
  r.state.save_binary((fs::path(out_dir) / "rte_state.bin").string());
  std::cout << "rte fidelity " << format_double(r.fidelity.value_or(0.0))
            << (r.warned ? " (warning: below threshold)" : "") << "\n";
  return 0;
}

int cmd_qpe(const std::string& config, std::uint64_t seed, int t_bits, int repeats,
            const std::string& out_dir) {
  KvFile kv = KvFile::load(config);
  SystemContext ctx = load_system(config, 0.25, true);
  if (t_bits <= 0) t_bits = int(kv.get_int_or("qpe_bits", 10));
  if (repeats <= 0) repeats = int(kv.get_int_or("qpe_repeats", 1));
  RandomStream rng(seed);
  QpeResult r = qpe(ctx.oracle.ground_state, ctx.scaled, t_bits, rng, repeats);
  std::string csv = "seed,t_bits,phase,energy,fidelity\n";
  csv += qpe_csv_row(seed, t_bits, r.readout.phase, r.readout.energy,
                     r.state.fidelity(ctx.oracle.ground_state));
  write_file(fs::path(out_dir) / "qpe.csv", csv);
  std::cout << "qpe energy " << format_double(r.readout.energy) << " (oracle "
            << format_double(ctx.oracle.eigenvalues.front()) << ")\n";
  return 0;
}

int cmd_qae(const std::string& config, std::uint64_t seed, long rounds, double epsilon,
            const std::string& mode, const std::string& out_dir) {
  KvFile kv = KvFile::load(config);
  SystemContext ctx = load_system(config, 0.25, true);
  QaeOptions opt;
  opt.rounds = rounds > 0 ? rounds : kv.get_int_or("qae_rounds", 0);
  opt.epsilon = epsilon > 0 ? epsilon : kv.get_double_or("qae_epsilon", 0.01);
  opt.check_bits = int(kv.get_int_or("qae_check_bits", 7));
  if (mode == "full")
    opt.mode = QaeMode::full;
  else if (mode == "collapse")
    opt.mode = QaeMode::collapse;
  else
    throw CLI::ValidationError("--mode must be full or collapse");

  CountingEstimator estimator(ctx.scaled, ctx.oracle, opt);
  RandomStream rng(seed);
  Statevector psi = ctx.oracle.ground_state;
  const Statevector before = psi;
  DensityMatrixEstimate dm = estimator.estimate_density_matrix(psi, ctx.cfg.hamiltonian, rng);

  std::string csv = "label,rounds,accepted,value,stderr,repair_iterations\n";
  for (const auto& e : dm.strings)
    csv += csv_row({e.label, std::to_string(e.rounds), std::to_string(e.accepted),
                    format_double(e.value), format_double(e.stderr_est),
                    std::to_string(e.repair_iterations)});
  write_file(fs::path(out_dir) / "qae.csv", csv);
  save_density(density_from_dm(dm.rho), (fs::path(out_dir) / "density.kv").string());
  std::cout << "qae trace " << format_double(dm.trace) << " recycle_fidelity "
            << format_double(psi.fidelity(before)) << "\n";
  return 0;
}

int cmd_invert_ks(const std::string& config, const std::string& density_file,
                  double eta, double tol, int max_iters, const std::string& out_dir) {
  KvFile kv = KvFile::load(config);
  SystemContext ctx = load_system(config, 0.25, true);
  const RealMatrix kinetic = chain_kinetic(ctx.cfg.hamiltonian.n_sites, ctx.cfg.t_hop);
  auto rho = density_matrix_from_state(ctx.oracle.ground_state, ctx.cfg.hamiltonian);
  Density target = density_file.empty() ? density_from_dm(rho)
                                        : load_density(density_file);
  InversionOptions opt;
  opt.eta = eta > 0 ? eta : kv.get_double_or("inv_eta", 0.5);
  opt.tol = tol > 0 ? tol : kv.get_double_or("inv_tol", 1e-6);
  opt.max_iters = max_iters > 0 ? max_iters : int(kv.get_int_or("inv_max_iters", 200000));
  KSPotential v0;
  v0.kappa.assign(ctx.cfg.hamiltonian.n_sites, 0.0);
  InversionResult r = invert_to_ks(kinetic_expectation(rho, kinetic), target, kinetic,
                                   ctx.cfg.n_electrons, v0, opt);
  std::string csv = "iteration,objective,grad_inf,eta\n";
  for (const auto& row : r.trace)
    csv += csv_row({std::to_string(row.iteration), format_double(row.objective),
                    format_double(row.grad_inf), format_double(row.eta)});
  write_file(fs::path(out_dir) / "inversion_trace.csv", csv);
  save_potential(r.v_s.kappa, (fs::path(out_dir) / "vs.kv").string());
  std::cout << (r.converged ? "converged" : "not converged") << " after "
            << r.iterations << " iterations, |grad| "
            << format_double(r.final_grad_inf) << "\n";
  return r.converged ? 0 : 2;
}

int cmd_train(const std::string& samples_file, const std::string& target,
              std::uint64_t seed, int epochs, int batch, double eta,
              const std::string& hidden, const std::string& out_dir) {
  std::vector<TrainingSample> data = load_samples(samples_file);
  if (data.empty()) throw CLI::ValidationError("no samples in " + samples_file);
  ModelSignature sig;
  if (target == "E_of_v")
    sig = {QuantityKind::potential, QuantityKind::energy,
           static_cast<int>(data[0].v.size()), 1};
  else if (target == "n_of_v")
    sig = {QuantityKind::potential, QuantityKind::density,
           static_cast<int>(data[0].v.size()), static_cast<int>(data[0].v.size())};
  else if (target == "E_of_n")
    sig = {QuantityKind::density, QuantityKind::energy,
           static_cast<int>(data[0].n.size()), 1};
  else if (target == "vs_of_v")
    sig = {QuantityKind::potential, QuantityKind::ks_potential,
           static_cast<int>(data[0].v.size()), static_cast<int>(data[0].v.size())};
  else if (target == "E_of_nv")
    sig = {QuantityKind::density_and_potential, QuantityKind::energy,
           static_cast<int>(data[0].v.size() + data[0].n.size()), 1};
  else
    throw CLI::ValidationError("unknown --target " + target);

  std::vector<int> widths;
  {
    std::istringstream hs(hidden);
    int w;
    while (hs >> w) widths.push_back(w);
  }
  RandomStream rng(seed);
  MLModel model = make_mlp(sig, widths, Activation::tanh_odd, -1, rng);
  fit_standardization(model, data);
  TrainOptions opt;
  opt.epochs = epochs;
  opt.batch_size = batch;
  opt.eta0 = eta;
  opt.eta_decay = 0.0;
  TrainReport rep = train(model, data, opt, rng);
  save_model(model, (fs::path(out_dir) / ("model_" + target + ".kv")).string());
  std::string csv = "epoch,cost\n";
  for (std::size_t e = 0; e < rep.epoch_costs.size(); ++e)
    csv += csv_row({std::to_string(e), format_double(rep.epoch_costs[e])});
  write_file(fs::path(out_dir) / "train_curve.csv", csv);
  std::cout << "final cost " << format_double(rep.final_cost) << " after "
            << rep.epochs_run << " epochs\n";
  return 0;
}

int cmd_run_rwmp(const std::string& config, std::uint64_t seed_override,
                 const std::string& out_dir) {
  KvFile kv = KvFile::load(config);
  RwmpConfig cfg = parse_rwmp_config(kv);
  if (seed_override) cfg.seed = seed_override;
  RwmpResult r = run_rwmp(cfg);
  write_file(fs::path(out_dir) / "records.csv", r.records_csv());
  save_samples(r.samples, (fs::path(out_dir) / "samples.kv").string());
  if (r.model) save_model(*r.model, (fs::path(out_dir) / "model_E_of_v.kv").string());
  long errors = 0;
  for (const auto& rec : r.records)
    if (!rec.error.empty()) ++errors;
  std::cout << "systems " << r.records.size() << " skipped " << errors
            << " rte_steps " << r.total_rte_steps << "\n";
  return 0;
}

int cmd_solve(const std::vector<std::string>& model_files, const std::string& model_dir,
              const std::vector<double>& v, int n_electrons, double t_hop,
              bool respond, double omega_min, double omega_max, int omega_steps,
              double response_eta, bool thermal, double tau,
              const std::string& out_dir) {
  std::vector<MLModel> models;
  for (const auto& f : model_files) models.push_back(load_model(f));
  if (!model_dir.empty())
    for (const auto& entry : fs::directory_iterator(model_dir))
      if (entry.path().extension() == ".kv" &&
          entry.path().filename().string().rfind("model_", 0) == 0)
        models.push_back(load_model(entry.path().string()));
  ClassicalSolveOptions opt;
  opt.want_response = respond;
  if (respond)
    for (int i = 0; i < omega_steps; ++i)
      opt.omega.push_back(omega_min + (omega_max - omega_min) * i /
                          std::max(1, omega_steps - 1));
  opt.response_eta = response_eta;
  opt.want_thermal = thermal;
  opt.tau = tau;
  ClassicalSolveResult r = classical_user_solve(models, v, n_electrons, t_hop, opt);

  KvFile out;
  out.set_vector("v", v);
  out.set_int("n_electrons", n_electrons);
  out.set_vector("density", r.density.n);
  out.set_double("energy", r.energy);
  if (!r.v_s.empty()) out.set_vector("v_s", r.v_s);
  out.set_int("trusted", r.trusted ? 1 : 0);
  out.save((fs::path(out_dir) / "solution.kv").string());
  for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
  std::cout << "density " << join_doubles(r.density.n) << "\nenergy "
            << format_double(r.energy) << "\n";
  if (r.response) {
    std::string csv = "omega,i,j,re,im\n";
    for (std::size_t w = 0; w < r.response->omega.size(); ++w)
      for (int i = 0; i < r.response->chi[w].rows(); ++i)
        for (int j = 0; j < r.response->chi[w].cols(); ++j)
          csv += csv_row({format_double(r.response->omega[w]), std::to_string(i),
                          std::to_string(j), format_double(r.response->chi[w](i, j).real()),
                          format_double(r.response->chi[w](i, j).imag())});
    write_file(fs::path(out_dir) / "response.csv", csv);
  }
  if (r.thermal) {
    KvFile th;
    th.set_double("tau", tau);
    th.set_double("mu", r.thermal->mu);
    th.set_vector("occupations", r.thermal->occupations);
    th.set_vector("n", r.thermal->density.n);
    th.save((fs::path(out_dir) / "thermal.kv").string());
  }
  return 0;
}

int cmd_respond(const std::string& vs_file, int n_electrons, double t_hop,
                double omega_min, double omega_max, int omega_steps, double eta,
                const std::string& out_dir) {
  std::vector<double> kappa = load_potential(vs_file);
  KSPotential vs{kappa};
  const RealMatrix kinetic = chain_kinetic(static_cast<int>(kappa.size()), t_hop);
  KSSolution sol = solve_ks(kinetic, vs, n_electrons);
  std::vector<double> grid;
  for (int i = 0; i < omega_steps; ++i)
    grid.push_back(omega_min + (omega_max - omega_min) * i / std::max(1, omega_steps - 1));
  ResponseFunction chi = chi_s_response(sol.orbitals, grid, eta);
  std::string csv = "omega,i,j,re,im\n";
  for (std::size_t w = 0; w < grid.size(); ++w)
    for (int i = 0; i < chi.chi[w].rows(); ++i)
      for (int j = 0; j < chi.chi[w].cols(); ++j)
        csv += csv_row({format_double(grid[w]), std::to_string(i), std::to_string(j),
                        format_double(chi.chi[w](i, j).real()),
                        format_double(chi.chi[w](i, j).imag())});
  write_file(fs::path(out_dir) / "response.csv", csv);
  std::cout << "response on " << grid.size() << " frequencies\n";
  return 0;
}

int cmd_thermal(const std::string& vs_file, int n_electrons, double t_hop, double tau,
                const std::string& out_dir) {
  std::vector<double> kappa = load_potential(vs_file);
  KSPotential vs{kappa};
  const RealMatrix kinetic = chain_kinetic(static_cast<int>(kappa.size()), t_hop);
  KSSolution sol = solve_ks(kinetic, vs, n_electrons);
  ThermalDensity th = fermi_weighted_density(sol.orbitals, tau, n_electrons);
  KvFile out;
  out.set_double("tau", tau);
  out.set_double("mu", th.mu);
  out.set_vector("occupations", th.occupations);
  out.set_vector("n", th.density.n);
  out.save((fs::path(out_dir) / "thermal.kv").string());
  std::cout << "thermal density " << join_doubles(th.density.n) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale lattice DFT pipeline with simulated quantum subroutines"};
  app.require_subcommand(1);
  app.fallthrough();  // global --config/--seed/--out may follow the subcommand

  std::string config, out_dir = ".";
  std::uint64_t seed = 1;
  app.add_option("--config", config, "configuration file")->envname("RWMP_CONFIG");
  app.add_option("--seed", seed, "random stream seed");
  app.add_option("--out", out_dir, "output directory");

  auto* ham = app.add_subcommand("hamiltonian", "parse and inspect a Hamiltonian spec");
  bool dump_terms = false, spectrum = false;
  int sector_n = -1, sector_sz = INT32_MIN;
  ham->add_flag("--dump-terms", dump_terms, "print the Pauli terms");
  ham->add_flag("--spectrum", spectrum, "diagonalize and print eigenvalues");
  ham->add_option("--sector-n", sector_n, "restrict to an electron count");
  ham->add_option("--sector-sz", sector_sz, "restrict to 2*Sz");

  auto* rte = app.add_subcommand("rte", "adiabatic ground-state preparation");
  auto* qpe_cmd = app.add_subcommand("qpe", "phase-estimation energy readout");
  int t_bits = 0, repeats = 0;
  qpe_cmd->add_option("--t-bits", t_bits, "readout register width");
  qpe_cmd->add_option("--repeats", repeats, "odd number of repetitions");

  auto* qae_cmd = app.add_subcommand("qae", "state-preserving density-matrix counting");
  long rounds = 0;
  double epsilon = 0;
  std::string mode = "collapse";
  qae_cmd->add_option("--rounds", rounds, "rounds per Pauli string");
  qae_cmd->add_option("--epsilon", epsilon, "failure probability budget");
  qae_cmd->add_option("--mode", mode, "full or collapse");

  auto* inv = app.add_subcommand("invert-ks", "KS potential from a target density");
  std::string density_file;
  double inv_eta = 0, inv_tol = 0;
  int inv_iters = 0;
  inv->add_option("--density", density_file, "target density file (default: oracle)");
  inv->add_option("--eta", inv_eta, "descent step");
  inv->add_option("--tol", inv_tol, "density mismatch tolerance");
  inv->add_option("--max-iters", inv_iters, "iteration budget");

  auto* train_cmd = app.add_subcommand("train", "fit a model from recorded samples");
  std::string samples_file, target = "E_of_v", hidden = "16 16";
  int epochs = 20000, batch = 64;
  double eta0 = 0.5;
  train_cmd->add_option("--samples", samples_file, "samples file")->required();
  train_cmd->add_option("--target", target, "E_of_v n_of_v E_of_n vs_of_v E_of_nv");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch", batch, "mini-batch size");
  train_cmd->add_option("--eta", eta0, "learning rate");
  train_cmd->add_option("--hidden", hidden, "hidden widths, space separated");

  auto* run = app.add_subcommand("run-rwmp", "full recycled-wavefunction sweep");

  auto* solve = app.add_subcommand("solve", "classical solve from exported models");
  std::vector<std::string> model_files;
  std::string model_dir;
  std::vector<double> v_opt;
  int ne = 2;
  double t_hop = 1.0, tau = 0.0, omega_min = 0.0, omega_max = 4.0, response_eta = 0.1;
  int omega_steps = 81;
  bool respond_flag = false, thermal_flag = false;
  solve->add_option("--models", model_files, "model files");
  solve->add_option("--model-dir", model_dir, "directory of model_*.kv files");
  solve->add_option("--v", v_opt, "external potential")->expected(-1);
  solve->add_option("--ne", ne, "electron count");
  solve->add_option("--t-hop", t_hop, "hopping amplitude");
  solve->add_flag("--respond", respond_flag, "emit the KS response");
  solve->add_option("--omega-min", omega_min);
  solve->add_option("--omega-max", omega_max);
  solve->add_option("--omega-steps", omega_steps);
  solve->add_option("--response-eta", response_eta);
  solve->add_flag("--thermal", thermal_flag, "emit a Fermi-weighted density");
  solve->add_option("--tau", tau, "temperature");

  auto* resp = app.add_subcommand("respond", "KS response from a stored potential");
  std::string vs_file;
  resp->add_option("--vs", vs_file, "KS potential file")->required();
  resp->add_option("--ne", ne, "electron count");
  resp->add_option("--t-hop", t_hop, "hopping amplitude");
  resp->add_option("--omega-min", omega_min);
  resp->add_option("--omega-max", omega_max);
  resp->add_option("--omega-steps", omega_steps);
  resp->add_option("--eta", response_eta, "Lorentzian broadening");

  auto* th = app.add_subcommand("thermal-density", "Fermi-weighted density");
  th->add_option("--vs", vs_file, "KS potential file")->required();
  th->add_option("--ne", ne, "electron count");
  th->add_option("--t-hop", t_hop, "hopping amplitude");
  th->add_option("--tau", tau, "temperature")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ham->parsed())
      return cmd_hamiltonian(config, dump_terms, spectrum, sector_n, sector_sz);
    if (rte->parsed()) return cmd_rte(config, seed, out_dir);
    if (qpe_cmd->parsed()) return cmd_qpe(config, seed, t_bits, repeats, out_dir);
    if (qae_cmd->parsed()) return cmd_qae(config, seed, rounds, epsilon, mode, out_dir);
    if (inv->parsed())
      return cmd_invert_ks(config, density_file, inv_eta, inv_tol, inv_iters, out_dir);
    if (train_cmd->parsed())
      return cmd_train(samples_file, target, seed, epochs, batch, eta0, hidden, out_dir);
    if (run->parsed()) return cmd_run_rwmp(config, seed, out_dir);
    if (solve->parsed())
      return cmd_solve(model_files, model_dir, v_opt, ne, t_hop, respond_flag,
                       omega_min, omega_max, omega_steps, response_eta, thermal_flag,
                       tau, out_dir);
    if (resp->parsed())
      return cmd_respond(vs_file, ne, t_hop, omega_min, omega_max, omega_steps,
                         response_eta, out_dir);
    if (th->parsed()) return cmd_thermal(vs_file, ne, t_hop, tau, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
