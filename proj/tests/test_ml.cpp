#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helpers.hpp"
#include "rwmp/dft.hpp"
#include "rwmp/ml.hpp"
#include "rwmp/rwmp.hpp"

using namespace rwmp;

namespace {

double dimer_energy(double delta, double u = 4.0) {
  std::vector<double> v{-delta / 2, delta / 2};
  FermionHamiltonian h = build_hubbard(2, 1.0, u, v);
  return diagonalize_fermionic(h, SectorFilter{2, std::nullopt}).eigenvalues.front();
}

std::vector<TrainingSample> dimer_family(int count, double lo, double hi,
                                         double offset = 0.0) {
  std::vector<TrainingSample> out;
  for (int k = 0; k < count; ++k) {
    const double d = lo + (hi - lo) * (count == 1 ? 0.0 : double(k) / (count - 1)) +
                     offset;
    TrainingSample s;
    s.v = {-d / 2, d / 2};
    s.energy = dimer_energy(d);
    out.push_back(std::move(s));
  }
  return out;
}

MLModel linear_model(const std::vector<std::vector<double>>& w,
                     const std::vector<double>& b) {
  MLModel m;
  m.signature = {QuantityKind::potential, QuantityKind::energy,
                 static_cast<int>(w[0].size()), static_cast<int>(w.size())};
  MLLayer layer;
  layer.in = m.signature.input_dim;
  layer.out = m.signature.output_dim;
  layer.activation = Activation::identity;
  for (const auto& row : w)
    layer.weights.insert(layer.weights.end(), row.begin(), row.end());
  layer.bias = b;
  layer.mask.assign(layer.weights.size(), 1);
  m.layers.push_back(std::move(layer));
  m.in_shift.assign(m.signature.input_dim, 0.0);
  m.in_scale.assign(m.signature.input_dim, 1.0);
  m.out_shift.assign(m.signature.output_dim, 0.0);
  m.out_scale.assign(m.signature.output_dim, 1.0);
  return m;
}

}  // namespace

TEST_CASE("a single identity layer is a plain affine map") {
  MLModel m = linear_model({{2.0, -1.0}, {0.5, 0.25}}, {0.1, -0.2});
  const auto y = m.forward(std::vector<double>{1.0, 2.0});
  CHECK(y[0] == doctest::Approx(2.0 - 2.0 + 0.1));
  CHECK(y[1] == doctest::Approx(0.5 + 0.5 - 0.2));
}

TEST_CASE("odd activation with zero bias maps zero to zero") {
  RandomStream rng(3);
  ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 3, 1};
  MLModel m = make_mlp(sig, {8, 8}, Activation::tanh_odd, -1, rng);
  for (auto& layer : m.layers) std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  const auto y = m.forward(std::vector<double>{0.0, 0.0, 0.0});
  CHECK(std::abs(y[0]) < 1e-15);
}

TEST_CASE("identical seeds build identical models") {
  ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
  RandomStream a(11), b(11);
  MLModel ma = make_mlp(sig, {8}, Activation::tanh_odd, -1, a);
  MLModel mb = make_mlp(sig, {8}, Activation::tanh_odd, -1, b);
  const auto ya = ma.forward(std::vector<double>{0.4, -0.3});
  const auto yb = mb.forward(std::vector<double>{0.4, -0.3});
  CHECK(ya[0] == yb[0]);
}

TEST_CASE("forward rejects shape mismatches") {
  MLModel m = linear_model({{1.0, 2.0}}, {0.0});
  CHECK_THROWS(m.forward(std::vector<double>{1.0, 2.0, 3.0}));
}

TEST_CASE("backward matches the analytic gradient of a linear fit") {
  MLModel m = linear_model({{0.7, -0.4}}, {0.2});
  std::vector<TrainingSample> data(1);
  data[0].v = {1.5, -0.5};
  data[0].energy = 2.0;
  const std::vector<int> batch{0};
  double cost = 0.0;
  Gradients g = backward(m, data, batch, &cost);
  const double out = 0.7 * 1.5 + (-0.4) * (-0.5) + 0.2;
  const double r = out - 2.0;
  CHECK(cost == doctest::Approx(r * r));
  CHECK(g.dw[0][0] == doctest::Approx(2 * r * 1.5));
  CHECK(g.dw[0][1] == doctest::Approx(2 * r * -0.5));
  CHECK(g.db[0][0] == doctest::Approx(2 * r));
}

TEST_CASE("backward agrees with central finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    RandomStream rng(seed);
    ModelSignature sig{QuantityKind::potential, QuantityKind::density, 3, 3};
    MLModel m = make_mlp(sig, {5, 4}, Activation::sigmoid, -1, rng);
    std::vector<TrainingSample> data(2);
    for (auto& s : data) {
      s.v = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
      s.n = {rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian()};
    }
    const std::vector<int> batch{0, 1};
    Gradients g = backward(m, data, batch);
    const double h = 1e-6;
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (std::size_t i = 0; i < m.layers[l].weights.size(); i += 3) {
        MLModel plus = m, minus = m;
        plus.layers[l].weights[i] += h;
        minus.layers[l].weights[i] -= h;
        const double fd =
            (batch_cost(plus, data, batch) - batch_cost(minus, data, batch)) / (2 * h);
        CHECK(g.dw[l][i] == doctest::Approx(fd).epsilon(1e-6));
      }
  }
}

TEST_CASE("zero-residual batches produce zero gradients and no step") {
  MLModel m = linear_model({{1.0, 0.0}}, {0.0});
  std::vector<TrainingSample> data(1);
  data[0].v = {0.8, 0.3};
  data[0].energy = 0.8;  // exactly reproduced
  const std::vector<int> batch{0};
  Gradients g = backward(m, data, batch);
  CHECK(g.grad_norm() < 1e-15);
  MLModel before = m;
  CHECK_FALSE(sgd_step(m, data, batch, 0.1));
  CHECK(m.layers[0].weights == before.layers[0].weights);
}

TEST_CASE("sgd on a one-parameter quadratic converges geometrically") {
  MLModel m = linear_model({{1.0}}, {0.0});
  m.layers[0].bias[0] = 0.0;
  std::vector<TrainingSample> data(1);
  data[0].v = {1.0};
  data[0].energy = 0.0;  // cost (w + b)^2
  const std::vector<int> batch{0};
  std::vector<double> costs;
  for (int i = 0; i < 20; ++i) {
    CostReport rep;
    sgd_step(m, data, batch, 0.1, &rep);
    costs.push_back(rep.cost);
  }
  for (std::size_t i = 1; i < costs.size(); ++i)
    if (costs[i - 1] > 1e-20) CHECK(costs[i] < 0.5 * costs[i - 1]);
}

TEST_CASE("eta zero leaves the model untouched") {
  RandomStream rng(5);
  ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
  MLModel m = make_mlp(sig, {4}, Activation::tanh_odd, -1, rng);
  std::vector<TrainingSample> data = dimer_family(3, 0.1, 1.0);
  MLModel before = m;
  const std::vector<int> batch{0, 1, 2};
  CHECK_FALSE(sgd_step(m, data, batch, 0.0));
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    CHECK(m.layers[l].weights == before.layers[l].weights);
}

TEST_CASE("every accepted step decreases the cost over its own batch") {
  RandomStream rng(8);
  ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
  MLModel m = make_mlp(sig, {8, 8}, Activation::tanh_odd, -1, rng);
  std::vector<TrainingSample> data = dimer_family(12, 0.0, 2.0);
  fit_standardization(m, data);
  int accepted = 0;
  for (int step = 0; step < 1000; ++step) {
    std::vector<int> batch;
    for (int k = 0; k < 4; ++k)
      batch.push_back(static_cast<int>(rng.next_u64() % data.size()));
    const double before = batch_cost(m, data, batch);
    CostReport rep;
    if (sgd_step(m, data, batch, 0.05, &rep)) {
      ++accepted;
      CHECK(rep.cost < before);
    }
  }
  CHECK(accepted > 900);
}

TEST_CASE("nan labels abort with a diagnostic") {
  MLModel m = linear_model({{1.0}}, {0.0});
  std::vector<TrainingSample> data(1);
  data[0].v = {1.0};
  data[0].energy = std::nan("");
  const std::vector<int> batch{0};
  CHECK_THROWS_WITH_AS(backward(m, data, batch), doctest::Contains("non-finite"),
                       std::runtime_error);
}

TEST_CASE("training") {
  SUBCASE("memorizes a three-sample set") {
    RandomStream rng(21);
    ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
    MLModel m = make_mlp(sig, {8, 8}, Activation::tanh_odd, -1, rng);
    std::vector<TrainingSample> data = dimer_family(3, 0.2, 1.8);
    fit_standardization(m, data);
    TrainOptions opt;
    opt.epochs = 30000;
    opt.batch_size = 3;
    opt.eta0 = 0.5;
    opt.eta_decay = 0.0;
    opt.target_cost = 1e-17;
    train(m, data, opt, rng);
    for (const auto& s : data)
      CHECK(std::abs(m.forward(s.v)[0] - *s.energy) < 1e-8);
  }
  SUBCASE("empty datasets are refused") {
    RandomStream rng(1);
    ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
    MLModel m = make_mlp(sig, {4}, Activation::tanh_odd, -1, rng);
    std::vector<TrainingSample> data;
    CHECK_THROWS(train(m, data, {}, rng));
  }
  SUBCASE("generalizes across the dimer family, unlike a shuffled control") {
    std::vector<TrainingSample> train_set = dimer_family(40, 0.0, 2.0);
    std::vector<TrainingSample> test_set = dimer_family(10, 0.05, 1.93, 0.011);
    TrainOptions opt;
    opt.epochs = 20000;
    opt.batch_size = 40;
    opt.eta0 = 0.8;
    opt.eta_decay = 0.0;
    opt.target_cost = 1e-9;
    ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};

    RandomStream rng(7);
    MLModel model = make_mlp(sig, {24, 24}, Activation::tanh_odd, -1, rng);
    fit_standardization(model, train_set);
    TrainReport rep = train(model, train_set, opt, rng);
    double held = 0.0;
    for (const auto& s : test_set)
      held = std::max(held, std::abs(model.forward(s.v)[0] - *s.energy));
    CHECK(held < 1e-3);

    // scrambled labels memorize at best; they cannot generalize
    std::vector<TrainingSample> shuffled = train_set;
    RandomStream shuffle_rng(99);
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.next_u64() % std::uint64_t(i + 1));
      std::swap(shuffled[i].energy, shuffled[j].energy);
    }
    RandomStream rng2(7);
    MLModel control = make_mlp(sig, {24, 24}, Activation::tanh_odd, -1, rng2);
    fit_standardization(control, shuffled);
    train(control, shuffled, opt, rng2);
    double held_control = 0.0;
    for (const auto& s : test_set)
      held_control = std::max(held_control, std::abs(control.forward(s.v)[0] - *s.energy));
    CHECK(held_control > 20 * held);
    const double train_rmse = std::sqrt(batch_cost(control, shuffled,
                                                   std::vector<int>{0, 5, 10, 20, 30}) / 5);
    CHECK(held_control > train_rmse);
  }
}

TEST_CASE("masks survive training") {
  RandomStream rng(31);
  ModelSignature sig{QuantityKind::potential, QuantityKind::density, 4, 4};
  MLModel m = make_mlp(sig, {8}, Activation::tanh_odd, 1, rng);
  bool any_masked = false;
  for (const auto& layer : m.layers)
    for (auto bit : layer.mask) any_masked = any_masked || !bit;
  REQUIRE(any_masked);
  std::vector<TrainingSample> data(6);
  RandomStream gen(4);
  for (auto& s : data) {
    s.v = {gen.next_gaussian(), gen.next_gaussian(), gen.next_gaussian(),
           gen.next_gaussian()};
    s.n = {gen.next_unit(), gen.next_unit(), gen.next_unit(), gen.next_unit()};
  }
  fit_standardization(m, data);
  TrainOptions opt;
  opt.epochs = 200;
  opt.batch_size = 3;
  train(m, data, opt, rng);
  for (const auto& layer : m.layers)
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      if (!layer.mask[i]) CHECK(layer.weights[i] == 0.0);
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("constant energy offsets shift the fit without moving the minimizer") {
  std::vector<TrainingSample> base;
  for (int k = 0; k < 25; ++k) {
    const double x = 0.6 + 0.8 * k / 24.0;  // density on site 0
    TrainingSample s;
    s.n = {x, 2.0 - x};
    Density n{{x, 2.0 - x}};
    s.energy = exact_functional_oracle(n, 2, 1.0, 4.0).value;
    base.push_back(std::move(s));
  }
  std::vector<TrainingSample> lifted = base;
  const double offset = 7.5;
  for (auto& s : lifted) s.energy = *s.energy + offset;

  ModelSignature sig{QuantityKind::density, QuantityKind::energy, 2, 1};
  TrainOptions opt;
  opt.epochs = 4000;
  opt.batch_size = 25;
  opt.eta0 = 0.5;
  opt.eta_decay = 0.0;
  RandomStream ra(13), rb(13);
  MLModel ma = make_mlp(sig, {12, 12}, Activation::tanh_odd, -1, ra);
  MLModel mb = make_mlp(sig, {12, 12}, Activation::tanh_odd, -1, rb);
  fit_standardization(ma, base);
  fit_standardization(mb, lifted);
  train(ma, base, opt, ra);
  train(mb, lifted, opt, rb);

  // identical standardized problems: outputs differ by exactly the offset
  std::vector<double> probe{1.1, 0.9};
  CHECK(mb.forward(probe)[0] - ma.forward(probe)[0] ==
        doctest::Approx(offset).epsilon(1e-12));

  MlDensityFunctional fa(ma), fb(mb);
  std::vector<double> v{-0.4, 0.4};
  Density n0{{1.0, 1.0}};
  EulerLagrangeOptions el;
  el.tol = 1e-6;
  EulerLagrangeResult sa = euler_lagrange_solve(fa, v, 2, n0, el);
  EulerLagrangeResult sb = euler_lagrange_solve(fb, v, 2, n0, el);
  CHECK(sa.density.n[0] == doctest::Approx(sb.density.n[0]).epsilon(1e-9));
  CHECK(sb.energy - sa.energy == doctest::Approx(offset).epsilon(1e-9));
}

TEST_CASE("bifunctional evaluation needs no self-consistent loop") {
  std::vector<TrainingSample> data;
  for (int k = 0; k < 30; ++k) {
    const double d = 2.0 * k / 29.0;
    std::vector<double> v{-d / 2, d / 2};
    FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
    Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
    TrainingSample ts;
    ts.v = v;
    ts.n = density_from_dm(density_matrix_from_state(s.ground_state, h)).n;
    ts.energy = s.eigenvalues.front();
    data.push_back(std::move(ts));
  }
  RandomStream rng(17);
  ModelSignature sig{QuantityKind::density_and_potential, QuantityKind::energy, 4, 1};
  MLModel m = make_mlp(sig, {16, 16}, Activation::tanh_odd, -1, rng);
  fit_standardization(m, data);
  TrainOptions opt;
  opt.epochs = 12000;
  opt.batch_size = 30;
  opt.eta0 = 0.5;
  opt.eta_decay = 0.0;
  train(m, data, opt, rng);
  // held-out matched pair evaluated directly
  const double d = 0.777;
  std::vector<double> v{-d / 2, d / 2};
  FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
  Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
  std::vector<double> input = density_from_dm(density_matrix_from_state(s.ground_state, h)).n;
  input.insert(input.end(), v.begin(), v.end());
  CHECK(std::abs(m.forward(input)[0] - s.eigenvalues.front()) < 5e-3);
}

TEST_CASE("functional derivative by backprop") {
  SUBCASE("a linear model returns its weights") {
    MLModel m = linear_model({{1.25, -0.75}}, {0.3});
    const auto d = functional_derivative_backprop(m, std::vector<double>{0.2, 0.4});
    CHECK(d[0] == doctest::Approx(1.25));
    CHECK(d[1] == doctest::Approx(-0.75));
  }
  SUBCASE("matches numeric differentiation on a trained model") {
    std::vector<TrainingSample> data = dimer_family(30, 0.0, 2.0);
    RandomStream rng(23);
    ModelSignature sig{QuantityKind::potential, QuantityKind::energy, 2, 1};
    MLModel m = make_mlp(sig, {10, 10}, Activation::tanh_odd, -1, rng);
    fit_standardization(m, data);
    TrainOptions opt;
    opt.epochs = 3000;
    opt.batch_size = 30;
    opt.eta0 = 0.5;
    opt.eta_decay = 0.0;
    train(m, data, opt, rng);
    std::vector<double> point{-0.37, 0.37};
    const auto d = functional_derivative_backprop(m, point);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      std::vector<double> p = point, q = point;
      p[i] += h;
      q[i] -= h;
      const double fd = (m.forward(p)[0] - m.forward(q)[0]) / (2 * h);
      CHECK(d[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  SUBCASE("trained E[n] is stationary at the interacting ground density") {
    std::vector<TrainingSample> data;
    for (int k = 0; k < 45; ++k) {
      const double d = 1.6 * k / 44.0;
      std::vector<double> vv{-d / 2, d / 2};
      FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, vv);
      Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
      TrainingSample ts;
      ts.n = density_from_dm(density_matrix_from_state(s.ground_state, h)).n;
      Density dn{ts.n};
      ts.energy = exact_functional_oracle(dn, 2, 1.0, 4.0).value;
      data.push_back(std::move(ts));
    }
    RandomStream rng(29);
    ModelSignature sig{QuantityKind::density, QuantityKind::energy, 2, 1};
    MLModel m = make_mlp(sig, {16, 16}, Activation::tanh_odd, -1, rng);
    fit_standardization(m, data);
    TrainOptions opt;
    opt.epochs = 30000;
    opt.batch_size = 45;
    opt.eta0 = 0.5;
    opt.eta_decay = 0.0;
    train(m, data, opt, rng);
    // at the ground density of this v, dF/dn + v is a constant vector
    const double dd = 0.8;
    std::vector<double> v{-dd / 2, dd / 2};
    FermionHamiltonian h = build_hubbard(2, 1.0, 4.0, v);
    Spectrum s = diagonalize_fermionic(h, SectorFilter{2, std::nullopt});
    const auto n = density_from_dm(density_matrix_from_state(s.ground_state, h)).n;
    const auto deriv = functional_derivative_backprop(m, n);
    const double r0 = deriv[0] + v[0];
    const double r1 = deriv[1] + v[1];
    CHECK(std::abs(r0 - r1) < 0.05);  // equal up to the chemical potential
  }
}

TEST_CASE("model files round-trip") {
  RandomStream rng(41);
  ModelSignature sig{QuantityKind::potential, QuantityKind::ks_potential, 3, 3};
  MLModel m = make_mlp(sig, {6, 5}, Activation::sigmoid, 1, rng);
  m.manifold.v_min = {-1.0, -1.0, -1.0};
  m.manifold.v_max = {1.0, 1.0, 1.0};
  m.manifold.n_electrons = 3;
  const std::string path = "ml_model_test.kv";
  save_model(m, path);
  MLModel back = load_model(path);
  std::vector<double> probe{0.3, -0.2, 0.8};
  const auto ya = m.forward(probe);
  const auto yb = back.forward(probe);
  for (int i = 0; i < 3; ++i) CHECK(ya[i] == yb[i]);
  CHECK(back.manifold.n_electrons == 3);
  std::filesystem::remove(path);
}

TEST_CASE("samples lacking the needed field are rejected") {
  MLModel m = linear_model({{1.0, 1.0}}, {0.0});
  std::vector<TrainingSample> data(1);
  data[0].v = {1.0, 2.0};  // no energy label
  CHECK_THROWS(batch_cost(m, data, std::vector<int>{0}));
}
