#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rwmp/dft.hpp"
#include "rwmp/fermion.hpp"
#include "rwmp/kvfile.hpp"
#include "rwmp/ml.hpp"
#include "rwmp/qae.hpp"
#include "rwmp/qpe.hpp"

namespace rwmp {

// Ordered potentials visited by the loop; consecutive steps should stay small
// enough that the recycled wavefunction remains a good starting state.
struct PotentialSchedule {
  std::vector<std::vector<double>> potentials;
  double max_step_inf = 0.0;  // 0 disables the warm-start validity check

  void validate() const;
  // Greedy nearest-neighbour ordering, chained from the first point.
  static PotentialSchedule nearest_neighbor_chain(
      std::vector<std::vector<double>> points, double max_step_inf = 0.0);
};

struct RwmpConfig {
  int n_sites = 2;
  double t_hop = 1.0;
  double u = 4.0;
  int n_electrons = 2;
  PotentialSchedule schedule;
  std::uint64_t seed = 1;

  bool warm_start = true;
  double rte_t_max = 60.0;
  int rte_steps = 600;
  int rte_order = 2;
  double rte_fidelity_threshold = 0.99;

  int qpe_bits = 10;
  int qpe_repeats = 1;
  double scale_margin = 0.25;
  bool oracle_bounds = true;

  QaeOptions qae{/*rounds=*/2000, /*epsilon=*/0.01, QaeMode::collapse,
                 /*check_bits=*/7, /*repair_cap_factor=*/10, /*round_factor=*/1};
  bool estimate_density = true;

  bool invert_ks = false;
  std::string inversion_density = "oracle";  // oracle | qae
  InversionOptions inversion;

  std::string train_mode = "post";  // none | inline | post
  std::vector<int> ml_hidden = {16, 16};
  TrainOptions train_options;
};

struct SystemRecord {
  int index = 0;
  std::vector<double> v;
  double oracle_energy = 0.0;
  double qpe_phase = 0.0;
  double qpe_energy = 0.0;
  std::vector<double> density;         // counted
  std::vector<double> density_oracle;  // brute force
  std::vector<double> v_s;             // empty unless inverted
  double rte_fidelity = 0.0;
  long rte_steps = 0;
  long rte_steps_to_threshold = -1;
  double recycle_fidelity = 0.0;  // post-QAE vs pre-QAE state
  long qae_rounds = 0;
  long qae_repairs = 0;
  std::uint64_t seed = 0;
  std::string error;  // nonempty when the system was skipped
};

struct RwmpResult {
  std::vector<SystemRecord> records;
  std::vector<TrainingSample> samples;
  std::optional<MLModel> model;
  TrainReport train_report;
  long total_rte_steps = 0;
  long total_counted_steps = 0;  // steps-to-threshold summed, full runs counted whole

  std::string records_csv() const;
};

RwmpResult run_rwmp(const RwmpConfig& config);

// ---- classical user side --------------------------------------------------

class MlDensityFunctional : public DensityFunctional {
 public:
  explicit MlDensityFunctional(const MLModel& model);
  double value(const Density& n) override;
  std::vector<double> derivative(const Density& n) override;

 private:
  const MLModel& model_;
};

struct ClassicalSolveOptions {
  double el_eta = 0.2;
  double el_tol = 1e-7;
  int el_max_iters = 20000;
  bool want_response = false;
  std::vector<double> omega;
  double response_eta = 0.1;
  bool want_thermal = false;
  double tau = 0.0;
};

struct ClassicalSolveResult {
  Density density;
  double energy = 0.0;
  std::vector<double> v_s;  // when a KS-potential model participated
  bool trusted = true;      // false outside the training manifold
  std::vector<std::string> warnings;
  std::optional<ResponseFunction> response;
  std::optional<ThermalDensity> thermal;
};

// Solves a new potential from exported models only. Refuses an electron-count
// mismatch; flags out-of-manifold potentials and still returns a best effort.
ClassicalSolveResult classical_user_solve(const std::vector<MLModel>& models,
                                          const std::vector<double>& v,
                                          int n_electrons, double t_hop,
                                          const ClassicalSolveOptions& options = {});

// ---- multi-instance batching ----------------------------------------------

struct BatchDispatchResult {
  std::vector<std::vector<TrainingSample>> per_job;  // empty for failed jobs
  std::vector<TrainingSample> merged;                // job-index order
  std::vector<int> failed_jobs;
};

// Runs the configured pipelines on up to `parallelism` workers and merges
// their training samples deterministically (sorted by job index). A failed
// worker drops out of the batch and is reported.
BatchDispatchResult batch_dispatch(const std::vector<RwmpConfig>& jobs,
                                   int parallelism);

// ---- structured-text configs ----------------------------------------------

struct HamiltonianConfig {
  FermionHamiltonian hamiltonian;
  int n_electrons = 0;
  double t_hop = 1.0;
  double u = 0.0;
  std::vector<double> v;
};

HamiltonianConfig parse_hamiltonian_config(const KvFile& kv);
RwmpConfig parse_rwmp_config(const KvFile& kv);

void save_samples(const std::vector<TrainingSample>& samples, const std::string& path);
std::vector<TrainingSample> load_samples(const std::string& path);

void save_potential(const std::vector<double>& kappa, const std::string& path);
std::vector<double> load_potential(const std::string& path);
void save_density(const Density& n, const std::string& path);
Density load_density(const std::string& path);

}  // namespace rwmp
