#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rwmp/random.hpp"

namespace rwmp {

enum class Activation { identity, tanh_odd, sigmoid };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

enum class QuantityKind { potential, density, energy, ks_potential, density_and_potential };

std::string quantity_name(QuantityKind k);
QuantityKind quantity_from_name(const std::string& name);

struct ModelSignature {
  QuantityKind input = QuantityKind::potential;
  QuantityKind output = QuantityKind::energy;
  int input_dim = 0;
  int output_dim = 1;
};

struct MLLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;      // row-major, out x in
  std::vector<double> bias;         // out
  std::vector<std::uint8_t> mask;   // 1 = trainable, 0 = pinned to zero
  Activation activation = Activation::tanh_odd;
};

// Declared validity region: potentials, particle number and polarization the
// model was trained over. Solvers warn outside of it.
struct TrainingManifold {
  std::vector<double> v_min, v_max;
  int n_electrons = 0;
  int polarization = 0;
};

struct MLModel {
  ModelSignature signature;
  std::vector<MLLayer> layers;
  // Affine standardization fitted on the training set; forward() maps raw
  // inputs to raw outputs.
  std::vector<double> in_shift, in_scale;
  std::vector<double> out_shift, out_scale;
  TrainingManifold manifold;

  std::vector<double> forward(std::span<const double> input) const;
  void validate() const;
  long parameter_count() const;
};

// Dense or banded MLP; band_width < 0 keeps all-to-all connectivity,
// otherwise entries with |row_site - col_site| > band_width are masked off.
MLModel make_mlp(const ModelSignature& sig, const std::vector<int>& hidden,
                 Activation hidden_activation, int band_width, RandomStream& rng);

struct TrainingSample {
  std::vector<double> v, n, v_s;
  std::optional<double> energy;
  std::string provenance = "oracle";  // oracle | qae | qpe
  double weight = 1.0;
};

// Resolves the (input, target) pair a signature asks of a sample.
void sample_io(const TrainingSample& s, const ModelSignature& sig,
               std::vector<double>& input, std::vector<double>& target);

struct CostReport {
  double cost = 0.0;  // sum of squared residuals over the batch
  std::vector<double> residuals;
  std::vector<int> batch_indices;
  double eta_used = 0.0;
};

double batch_cost(const MLModel& model, const std::vector<TrainingSample>& data,
                  std::span<const int> batch);

struct Gradients {
  std::vector<std::vector<double>> dw, db;
  double grad_norm() const;
};

Gradients backward(const MLModel& model, const std::vector<TrainingSample>& data,
                   std::span<const int> batch, double* cost_out = nullptr);

// One descent update w <- w - eta grad with an auto-halving line check: the
// accepted step strictly decreases the cost over the same batch. eta == 0
// leaves the model unchanged. Returns false when no decrease was possible
// (already stationary on this batch).
bool sgd_step(MLModel& model, const std::vector<TrainingSample>& data,
              std::span<const int> batch, double eta, CostReport* report = nullptr);

struct TrainOptions {
  int epochs = 2000;
  int batch_size = 8;
  double eta0 = 0.05;
  double eta_decay = 0.002;  // eta = eta0 / (1 + decay * epoch)
  int patience = 0;          // epochs without improvement before stopping; 0 = off
  double target_cost = 0.0;  // stop below this full-dataset cost; 0 = off
};

struct TrainReport {
  std::vector<double> epoch_costs;  // full-dataset cost per epoch
  double final_cost = 0.0;
  int epochs_run = 0;
};

TrainReport train(MLModel& model, const std::vector<TrainingSample>& data,
                  const TrainOptions& options, RandomStream& rng);

// Standardizes inputs/outputs from the data and stamps the manifold.
void fit_standardization(MLModel& model, const std::vector<TrainingSample>& data);

// d(output)/d(input) at the point, for scalar-output models: the functional
// derivative of the learned map.
std::vector<double> functional_derivative_backprop(const MLModel& model,
                                                   std::span<const double> point);

void save_model(const MLModel& model, const std::string& path);
MLModel load_model(const std::string& path);

}  // namespace rwmp
