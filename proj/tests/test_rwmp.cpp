#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "rwmp/rwmp.hpp"

using namespace rwmp;

namespace {

RwmpConfig small_sweep(int systems, bool warm) {
  RwmpConfig cfg;
  cfg.n_sites = 2;
  cfg.t_hop = 1.0;
  cfg.u = 4.0;
  cfg.n_electrons = 2;
  cfg.seed = 21;
  cfg.warm_start = warm;
  cfg.rte_t_max = 40.0;
  cfg.rte_steps = 400;
  cfg.qpe_bits = 10;
  cfg.qae.rounds = 400;
  cfg.qae.epsilon = 0.01;
  cfg.train_mode = "none";
  for (int k = 0; k < systems; ++k) {
    const double d = 0.1 + 0.8 * k / std::max(1, systems - 1);
    cfg.schedule.potentials.push_back({-d, d});
  }
  return cfg;
}

}  // namespace

TEST_CASE("potential schedules") {
  PotentialSchedule s;
  s.potentials = {{0.0, 0.0}, {0.2, -0.2}, {0.5, -0.5}};
  s.max_step_inf = 0.31;
  CHECK_NOTHROW(s.validate());
  s.max_step_inf = 0.25;
  CHECK_THROWS(s.validate());

  PotentialSchedule chained = PotentialSchedule::nearest_neighbor_chain(
      {{0.0, 0.0}, {1.0, -1.0}, {0.2, -0.2}, {0.6, -0.6}});
  REQUIRE(chained.potentials.size() == 4);
  CHECK(chained.potentials[1][0] == doctest::Approx(0.2));
  CHECK(chained.potentials[2][0] == doctest::Approx(0.6));
  CHECK(chained.potentials[3][0] == doctest::Approx(1.0));
}

TEST_CASE("empty schedules exit cleanly") {
  RwmpConfig cfg = small_sweep(0, true);
  RwmpResult r = run_rwmp(cfg);
  CHECK(r.records.empty());
  CHECK(r.samples.empty());
}

TEST_CASE("one-system run matches the oracle quantities") {
  RwmpConfig cfg = small_sweep(1, true);
  cfg.qae.rounds = 4000;
  cfg.invert_ks = true;
  RwmpResult r = run_rwmp(cfg);
  REQUIRE(r.records.size() == 1);
  const SystemRecord& rec = r.records[0];
  CHECK(rec.error.empty());
  // energy within the phase-readout quantization
  CHECK(std::abs(rec.qpe_energy - rec.oracle_energy) < 0.02);
  // counted density within statistics of the oracle density
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(rec.density[i] - rec.density_oracle[i]) <
          3.0 * 2.0 / std::sqrt(4000.0));
  CHECK(rec.recycle_fidelity >= 1.0 - cfg.qae.epsilon);
  // the inverted potential reproduces the oracle density
  KSPotential vs{rec.v_s};
  KSSolution ks = solve_ks(chain_kinetic(2, 1.0), vs, 2);
  CHECK(std::abs(ks.density.n[0] - rec.density_oracle[0]) < 1e-5);
}

TEST_CASE("recycling keeps wavefunctions and saves preparation steps") {
  RwmpConfig warm = small_sweep(6, true);
  RwmpConfig cold = small_sweep(6, false);
  RwmpResult rw = run_rwmp(warm);
  RwmpResult rc = run_rwmp(cold);
  REQUIRE(rw.records.size() == 6);
  for (const auto& rec : rw.records) {
    CHECK(rec.error.empty());
    CHECK(rec.recycle_fidelity >= 1.0 - warm.qae.epsilon);
    CHECK(rec.rte_fidelity >= 0.99);
  }
  // warm starts reach the fidelity threshold with strictly fewer total steps
  CHECK(rw.total_counted_steps < rc.total_counted_steps);
  // after the first system, the recycled state is already close
  for (std::size_t k = 1; k < rw.records.size(); ++k)
    CHECK(rw.records[k].rte_steps_to_threshold <=
          rw.records[0].rte_steps_to_threshold);
}

TEST_CASE("runs are deterministic byte for byte") {
  RwmpConfig cfg = small_sweep(3, true);
  cfg.invert_ks = true;
  RwmpResult a = run_rwmp(cfg);
  RwmpResult b = run_rwmp(cfg);
  CHECK(a.records_csv() == b.records_csv());
  CHECK_FALSE(a.records_csv().empty());
}

TEST_CASE("failing systems are recorded and skipped") {
  RwmpConfig cfg = small_sweep(3, true);
  cfg.schedule.potentials[1] = {std::nan(""), 0.0};
  RwmpResult r = run_rwmp(cfg);
  REQUIRE(r.records.size() == 3);
  CHECK_FALSE(r.records[1].error.empty());
  CHECK(r.records[0].error.empty());
  CHECK(r.records[2].error.empty());  // the loop continued
  CHECK(r.samples.size() == 2);
}

TEST_CASE("classical user solve") {
  // oracle-labelled models for the dimer family
  std::vector<TrainingSample> data;
  for (int k = 0; k < 36; ++k) {
    const double d = 1.8 * k / 35.0;
    std::vector<double> v{-d / 2, d / 2};
    FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
    Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
    TrainingSample ts;
    ts.v = v;
    ts.n = density_from_dm(density_matrix_from_state(s.ground_state, h)).n;
    ts.energy = s.eigenvalues.front();
    data.push_back(std::move(ts));
  }
  TrainOptions topt;
  topt.epochs = 8000;
  topt.batch_size = 36;
  topt.eta0 = 0.5;
  topt.eta_decay = 0.0;

  RandomStream r1(5);
  MLModel e_of_v = make_mlp({QuantityKind::potential, QuantityKind::energy, 2, 1},
                            {16, 16}, Activation::tanh_odd, -1, r1);
  fit_standardization(e_of_v, data);
  e_of_v.manifold.n_electrons = 2;
  train(e_of_v, data, topt, r1);

  RandomStream r2(6);
  MLModel n_of_v = make_mlp({QuantityKind::potential, QuantityKind::density, 2, 2},
                            {16, 16}, Activation::tanh_odd, -1, r2);
  fit_standardization(n_of_v, data);
  n_of_v.manifold.n_electrons = 2;
  train(n_of_v, data, topt, r2);

  std::vector<MLModel> models{e_of_v, n_of_v};

  SUBCASE("in-manifold potentials solve close to the oracle") {
    const double d = 0.77;
    std::vector<double> v{-d / 2, d / 2};
    FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
    Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
    const auto n_true = density_from_dm(density_matrix_from_state(s.ground_state, h));
    ClassicalSolveResult sol = classical_user_solve(models, v, 2, 1.0);
    CHECK(sol.trusted);
    CHECK(std::abs(sol.density.n[0] - n_true.n[0]) < 1e-2);
    CHECK(std::abs(sol.energy - s.eigenvalues.front()) < 1e-2);
  }
  SUBCASE("a training potential itself reproduces its labels") {
    const auto& s0 = data[10];
    ClassicalSolveResult sol = classical_user_solve(models, s0.v, 2, 1.0);
    CHECK(std::abs(sol.energy - *s0.energy) < 5e-3);
    CHECK(std::abs(sol.density.n[0] - s0.n[0]) < 5e-3);
  }
  SUBCASE("electron-count mismatches are refused") {
    CHECK_THROWS_WITH_AS(classical_user_solve(models, {-0.3, 0.3}, 3, 1.0),
                         doctest::Contains("refusing"), std::invalid_argument);
  }
  SUBCASE("out-of-manifold potentials are flagged untrusted") {
    ClassicalSolveResult sol = classical_user_solve(models, {-3.0, 3.0}, 2, 1.0);
    CHECK_FALSE(sol.trusted);
    CHECK_FALSE(sol.warnings.empty());
  }
}

TEST_CASE("batch dispatch") {
  std::vector<RwmpConfig> jobs;
  for (int j = 0; j < 4; ++j) {
    RwmpConfig cfg = small_sweep(2, true);
    cfg.seed = 100 + j;
    cfg.schedule.potentials = {{-0.1 * (j + 1), 0.1 * (j + 1)},
                               {-0.15 * (j + 1), 0.15 * (j + 1)}};
    jobs.push_back(std::move(cfg));
  }
  BatchDispatchResult serial = batch_dispatch(jobs, 1);
  BatchDispatchResult parallel = batch_dispatch(jobs, 4);
  CHECK(serial.failed_jobs.empty());
  REQUIRE(serial.merged.size() == parallel.merged.size());
  for (std::size_t i = 0; i < serial.merged.size(); ++i) {
    CHECK(serial.merged[i].v == parallel.merged[i].v);
    CHECK(serial.merged[i].n == parallel.merged[i].n);
    CHECK(*serial.merged[i].energy == *parallel.merged[i].energy);
  }

  // a failing worker shrinks the batch and is reported
  jobs[2].n_electrons = 99;
  BatchDispatchResult partial = batch_dispatch(jobs, 2);
  REQUIRE(partial.failed_jobs.size() == 1);
  CHECK(partial.failed_jobs[0] == 2);
  CHECK(partial.merged.size() == serial.merged.size() - 2);
}

TEST_CASE("config files parse into pipelines") {
  const std::string text =
      "n_sites 2\n"
      "t 1\n"
      "U 4\n"
      "n_electrons 2\n"
      "v_start -0.2 0.2\n"
      "v_end -1 1\n"
      "n_systems 5\n"
      "qae_mode full\n"
      "qae_check_bits 6\n"
      "invert_ks 1\n"
      "train_mode none\n";
  RwmpConfig cfg = parse_rwmp_config(KvFile::parse(text));
  CHECK(cfg.schedule.potentials.size() == 5);
  CHECK(cfg.schedule.potentials[4][1] == doctest::Approx(1.0));
  CHECK(cfg.qae.mode == QaeMode::full);
  CHECK(cfg.qae.check_bits == 6);
  CHECK(cfg.invert_ks);
  CHECK_THROWS(parse_rwmp_config(KvFile::parse("n_sites 2\n")));
}

TEST_CASE("hamiltonian spec files parse both input routes") {
  SUBCASE("scalar hopping plus on-site U") {
    KvFile kv = KvFile::parse(
        "n_sites 2\nspin half\nt 1.0\nU 4.0\nv -0.5 0.5\nn_electrons 2\n");
    HamiltonianConfig hc = parse_hamiltonian_config(kv);
    Spectrum s = diagonalize_fermionic(hc.hamiltonian, SectorFilter{2, std::nullopt});
    FermionHamiltonian direct = build_hubbard(2, 1.0, 4.0, std::vector<double>{-0.5, 0.5});
    Spectrum expect = diagonalize_fermionic(direct, SectorFilter{2, std::nullopt});
    CHECK(s.eigenvalues.front() == doctest::Approx(expect.eigenvalues.front()));
  }
  SUBCASE("explicit t_matrix and V_tensor") {
    KvFile kv = KvFile::parse(
        "n_sites 2\nspin half\nn_electrons 2\n"
        "t_matrix\n  0 -1\n  -1 0\n"
        "V_tensor\n"
        "  2 0 0 0\n"
        "  0 0 0 0\n"
        "  0 0 0 0\n"
        "  0 0 0 2\n");
    HamiltonianConfig hc = parse_hamiltonian_config(kv);
    // V_0000 = V_1111 = 2 is the U = 4 on-site interaction
    Spectrum s = diagonalize_fermionic(hc.hamiltonian, SectorFilter{2, 0});
    CHECK(s.eigenvalues.front() ==
          doctest::Approx(rwmp::testing::hubbard_dimer_ground(1.0, 4.0)));
  }
  SUBCASE("bad spin tokens are rejected") {
    CHECK_THROWS(parse_hamiltonian_config(KvFile::parse("n_sites 2\nspin up\n")));
  }
}

TEST_CASE("sample, potential and density files round-trip") {
  std::vector<TrainingSample> samples(2);
  samples[0].v = {0.1, -0.1};
  samples[0].n = {1.2, 0.8};
  samples[0].energy = -1.5;
  samples[0].provenance = "qpe";
  samples[1].v = {0.4, -0.4};
  samples[1].v_s = {0.2, -0.2};
  const std::string path = "rwmp_samples_test.kv";
  save_samples(samples, path);
  auto back = load_samples(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].v == samples[0].v);
  CHECK(back[0].n == samples[0].n);
  CHECK(*back[0].energy == *samples[0].energy);
  CHECK(back[0].provenance == "qpe");
  CHECK(back[1].v_s == samples[1].v_s);
  CHECK_FALSE(back[1].energy.has_value());
  std::filesystem::remove(path);

  save_potential({0.3, -0.3}, "rwmp_vs_test.kv");
  CHECK(load_potential("rwmp_vs_test.kv") == std::vector<double>{0.3, -0.3});
  std::filesystem::remove("rwmp_vs_test.kv");

  Density d{{1.25, 0.75}};
  save_density(d, "rwmp_density_test.kv");
  CHECK(load_density("rwmp_density_test.kv").n == d.n);
  std::filesystem::remove("rwmp_density_test.kv");
}
