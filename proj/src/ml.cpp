#include "rwmp/ml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rwmp/kvfile.hpp"

namespace rwmp {
namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::tanh_odd: return std::tanh(z);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  throw std::logic_error("unknown activation");
}

double activate_prime(Activation a, double z) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh_odd: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  throw std::logic_error("unknown activation");
}

struct ForwardPass {
  std::vector<std::vector<double>> pre;   // z per layer
  std::vector<std::vector<double>> post;  // x per layer; post[0] is the standardized input
};

ForwardPass run_forward(const MLModel& model, std::span<const double> input) {
  ForwardPass fp;
  std::vector<double> x(input.size());
  for (std::size_t i = 0; i < input.size(); ++i)
    x[i] = (input[i] - model.in_shift[i]) / model.in_scale[i];
  fp.post.push_back(x);
  for (const auto& layer : model.layers) {
    std::vector<double> z(layer.out, 0.0);
    for (int r = 0; r < layer.out; ++r) {
      double acc = layer.bias[r];
      const double* w = layer.weights.data() + std::size_t(r) * layer.in;
      for (int c = 0; c < layer.in; ++c) acc += w[c] * x[c];
      z[r] = acc;
    }
    std::vector<double> nx(layer.out);
    for (int r = 0; r < layer.out; ++r) nx[r] = activate(layer.activation, z[r]);
    fp.pre.push_back(std::move(z));
    x = nx;
    fp.post.push_back(x);
  }
  return fp;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh_odd: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh_odd;
  if (name == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string quantity_name(QuantityKind k) {
  switch (k) {
    case QuantityKind::potential: return "v";
    case QuantityKind::density: return "n";
    case QuantityKind::energy: return "E";
    case QuantityKind::ks_potential: return "vs";
    case QuantityKind::density_and_potential: return "nv";
  }
  throw std::logic_error("unknown quantity");
}

QuantityKind quantity_from_name(const std::string& name) {
  if (name == "v") return QuantityKind::potential;
  if (name == "n") return QuantityKind::density;
  if (name == "E") return QuantityKind::energy;
  if (name == "vs") return QuantityKind::ks_potential;
  if (name == "nv") return QuantityKind::density_and_potential;
  throw std::invalid_argument("unknown quantity '" + name + "'");
}

std::vector<double> MLModel::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != signature.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  ForwardPass fp = run_forward(*this, input);
  std::vector<double> out = fp.post.back();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = out[i] * out_scale[i] + out_shift[i];
  return out;
}

void MLModel::validate() const {
  if (layers.empty()) throw std::invalid_argument("model has no layers");
  if (layers.front().in != signature.input_dim ||
      layers.back().out != signature.output_dim)
    throw std::invalid_argument("model shape does not match its signature");
  int prev = layers.front().in;
  for (const auto& l : layers) {
    if (l.in != prev) throw std::invalid_argument("layer shapes do not chain");
    if (l.weights.size() != std::size_t(l.in) * l.out ||
        l.bias.size() != std::size_t(l.out) ||
        l.mask.size() != l.weights.size())
      throw std::invalid_argument("layer buffer sizes are inconsistent");
    for (std::size_t i = 0; i < l.weights.size(); ++i)
      if (!l.mask[i] && l.weights[i] != 0.0)
        throw std::invalid_argument("masked weight is nonzero");
    prev = l.out;
  }
  if (in_shift.size() != std::size_t(signature.input_dim) ||
      in_scale.size() != std::size_t(signature.input_dim) ||
      out_shift.size() != std::size_t(signature.output_dim) ||
      out_scale.size() != std::size_t(signature.output_dim))
    throw std::invalid_argument("standardization buffers mismatch the signature");
}

long MLModel::parameter_count() const {
  long n = 0;
  for (const auto& l : layers) {
    for (auto m : l.mask) n += m ? 1 : 0;
    n += l.out;
  }
  return n;
}

MLModel make_mlp(const ModelSignature& sig, const std::vector<int>& hidden,
                 Activation hidden_activation, int band_width, RandomStream& rng) {
  if (sig.input_dim < 1 || sig.output_dim < 1)
    throw std::invalid_argument("make_mlp: bad signature dimensions");
  MLModel model;
  model.signature = sig;
  std::vector<int> dims;
  dims.push_back(sig.input_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(sig.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MLLayer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.activation =
        (l + 2 == dims.size()) ? Activation::identity : hidden_activation;
    layer.weights.assign(std::size_t(layer.in) * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    layer.mask.assign(layer.weights.size(), 1);
    if (band_width >= 0) {
      // Band the connectivity by mapping units back onto sites.
      for (int r = 0; r < layer.out; ++r)
        for (int c = 0; c < layer.in; ++c) {
          const double site_r = double(r) * sig.input_dim / layer.out;
          const double site_c = double(c) * sig.input_dim / layer.in;
          if (std::abs(site_r - site_c) > band_width)
            layer.mask[std::size_t(r) * layer.in + c] = 0;
        }
    }
    const double scale = std::sqrt(2.0 / (layer.in + layer.out));
    for (std::size_t i = 0; i < layer.weights.size(); ++i)
      if (layer.mask[i]) layer.weights[i] = scale * rng.next_gaussian();
    model.layers.push_back(std::move(layer));
  }
  model.in_shift.assign(sig.input_dim, 0.0);
  model.in_scale.assign(sig.input_dim, 1.0);
  model.out_shift.assign(sig.output_dim, 0.0);
  model.out_scale.assign(sig.output_dim, 1.0);
  model.validate();
  return model;
}

void sample_io(const TrainingSample& s, const ModelSignature& sig,
               std::vector<double>& input, std::vector<double>& target) {
  auto pick = [&](QuantityKind k) -> std::vector<double> {
    switch (k) {
      case QuantityKind::potential: return s.v;
      case QuantityKind::density: return s.n;
      case QuantityKind::ks_potential: return s.v_s;
      case QuantityKind::energy:
        if (!s.energy) throw std::invalid_argument("sample lacks an energy label");
        return {*s.energy};
      case QuantityKind::density_and_potential: {
        std::vector<double> both = s.n;
        both.insert(both.end(), s.v.begin(), s.v.end());
        return both;
      }
    }
    throw std::logic_error("unknown quantity");
  };
  input = pick(sig.input);
  target = pick(sig.output);
  if (input.empty() || target.empty())
    throw std::invalid_argument("sample lacks the fields its target mode needs");
}

double batch_cost(const MLModel& model, const std::vector<TrainingSample>& data,
                  std::span<const int> batch) {
  double cost = 0.0;
  std::vector<double> input, target;
  for (int idx : batch) {
    sample_io(data[idx], model.signature, input, target);
    const std::vector<double> out = model.forward(input);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double r = std::sqrt(data[idx].weight) * (out[i] - target[i]);
      cost += r * r;
    }
  }
  return cost;
}

double Gradients::grad_norm() const {
  double acc = 0.0;
  for (const auto& layer : dw)
    for (double g : layer) acc += g * g;
  for (const auto& layer : db)
    for (double g : layer) acc += g * g;
  return std::sqrt(acc);
}

Gradients backward(const MLModel& model, const std::vector<TrainingSample>& data,
                   std::span<const int> batch, double* cost_out) {
  Gradients grads;
  grads.dw.resize(model.layers.size());
  grads.db.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    grads.dw[l].assign(model.layers[l].weights.size(), 0.0);
    grads.db[l].assign(model.layers[l].bias.size(), 0.0);
  }
  double cost = 0.0;
  std::vector<double> input, target;
  for (int idx : batch) {
    sample_io(data[idx], model.signature, input, target);
    ForwardPass fp = run_forward(model, input);
    const std::vector<double>& net_out = fp.post.back();

    // d cost / d net_out, through the output standardization
    std::vector<double> delta(net_out.size());
    for (std::size_t i = 0; i < net_out.size(); ++i) {
      const double raw = net_out[i] * model.out_scale[i] + model.out_shift[i];
      const double r = data[idx].weight * (raw - target[i]);
      cost += (raw - target[i]) * r;
      delta[i] = 2.0 * r * model.out_scale[i];
    }
    for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
      const MLLayer& layer = model.layers[l];
      std::vector<double> dz(layer.out);
      for (int r = 0; r < layer.out; ++r)
        dz[r] = delta[r] * activate_prime(layer.activation, fp.pre[l][r]);
      const std::vector<double>& x = fp.post[l];
      for (int r = 0; r < layer.out; ++r) {
        grads.db[l][r] += dz[r];
        double* gw = grads.dw[l].data() + std::size_t(r) * layer.in;
        for (int c = 0; c < layer.in; ++c) gw[c] += dz[r] * x[c];
      }
      if (l > 0) {
        std::vector<double> prev(layer.in, 0.0);
        for (int r = 0; r < layer.out; ++r) {
          const double* w = layer.weights.data() + std::size_t(r) * layer.in;
          for (int c = 0; c < layer.in; ++c) prev[c] += w[c] * dz[r];
        }
        delta = std::move(prev);
      }
    }
  }
  // Masked entries never move.
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    for (std::size_t i = 0; i < grads.dw[l].size(); ++i)
      if (!model.layers[l].mask[i]) grads.dw[l][i] = 0.0;
  for (auto& layer : grads.dw)
    for (double g : layer)
      if (!std::isfinite(g))
        throw std::runtime_error("backward: non-finite gradient; aborting");
  if (cost_out) *cost_out = cost;
  return grads;
}

bool sgd_step(MLModel& model, const std::vector<TrainingSample>& data,
              std::span<const int> batch, double eta, CostReport* report) {
  if (eta < 0) throw std::invalid_argument("sgd_step: eta must be >= 0");
  if (report) {
    report->batch_indices.assign(batch.begin(), batch.end());
    report->residuals.clear();
  }
  if (eta == 0.0) {
    if (report) {
      report->cost = batch_cost(model, data, batch);
      report->eta_used = 0.0;
    }
    return false;
  }
  double cost0 = 0.0;
  Gradients grads = backward(model, data, batch, &cost0);
  if (grads.grad_norm() < 1e-15) {
    if (report) {
      report->cost = cost0;
      report->eta_used = 0.0;
    }
    return false;  // stationary on this batch (e.g. zero residuals)
  }
  MLModel saved = model;
  for (int halving = 0; halving < 60; ++halving) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      MLLayer& layer = model.layers[l];
      for (std::size_t i = 0; i < layer.weights.size(); ++i)
        if (layer.mask[i]) layer.weights[i] -= eta * grads.dw[l][i];
      for (std::size_t i = 0; i < layer.bias.size(); ++i)
        layer.bias[i] -= eta * grads.db[l][i];
    }
    const double cost1 = batch_cost(model, data, batch);
    if (cost1 < cost0) {
      if (report) {
        report->cost = cost1;
        report->eta_used = eta;
      }
      return true;
    }
    model = saved;
    eta /= 2;
  }
  if (report) {
    report->cost = cost0;
    report->eta_used = 0.0;
  }
  return false;
}

TrainReport train(MLModel& model, const std::vector<TrainingSample>& data,
                  const TrainOptions& options, RandomStream& rng) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  model.validate();
  TrainReport report;
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> all = order;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const int batch = std::max(1, std::min<int>(options.batch_size,
                                              static_cast<int>(data.size())));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    // Fisher-Yates with the deterministic stream
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % std::uint64_t(i + 1));
      std::swap(order[i], order[j]);
    }
    const double eta = options.eta0 / (1.0 + options.eta_decay * epoch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::span<const int> mb(order.data() + start, stop - start);
      sgd_step(model, data, mb, eta);
    }
    const double full = batch_cost(model, data, all);
    report.epoch_costs.push_back(full);
    report.epochs_run = epoch + 1;
    if (options.target_cost > 0 && full <= options.target_cost) break;
    if (options.patience > 0) {
      if (full < best * (1.0 - 1e-12)) {
        best = full;
        stale = 0;
      } else if (++stale >= options.patience) {
        break;
      }
    }
  }
  report.final_cost = batch_cost(model, data, all);
  return report;
}

void fit_standardization(MLModel& model, const std::vector<TrainingSample>& data) {
  const int di = model.signature.input_dim;
  const int dout = model.signature.output_dim;
  std::vector<double> im(di, 0.0), iv(di, 0.0), om(dout, 0.0), ov(dout, 0.0);
  std::vector<double> input, target;
  std::vector<double> vmin, vmax;
  for (const auto& s : data) {
    sample_io(s, model.signature, input, target);
    for (int i = 0; i < di; ++i) im[i] += input[i];
    for (int i = 0; i < dout; ++i) om[i] += target[i];
    if (!s.v.empty()) {
      if (vmin.empty()) {
        vmin = s.v;
        vmax = s.v;
      }
      for (std::size_t i = 0; i < s.v.size(); ++i) {
        vmin[i] = std::min(vmin[i], s.v[i]);
        vmax[i] = std::max(vmax[i], s.v[i]);
      }
    }
  }
  const double inv = 1.0 / double(data.size());
  for (auto& x : im) x *= inv;
  for (auto& x : om) x *= inv;
  for (const auto& s : data) {
    sample_io(s, model.signature, input, target);
    for (int i = 0; i < di; ++i) iv[i] += (input[i] - im[i]) * (input[i] - im[i]);
    for (int i = 0; i < dout; ++i) ov[i] += (target[i] - om[i]) * (target[i] - om[i]);
  }
  model.in_shift = im;
  model.out_shift = om;
  for (int i = 0; i < di; ++i)
    model.in_scale[i] = std::max(std::sqrt(iv[i] * inv), 1e-8);
  for (int i = 0; i < dout; ++i)
    model.out_scale[i] = std::max(std::sqrt(ov[i] * inv), 1e-8);
  model.manifold.v_min = vmin;
  model.manifold.v_max = vmax;
}

std::vector<double> functional_derivative_backprop(const MLModel& model,
                                                   std::span<const double> point) {
  if (model.signature.output_dim != 1)
    throw std::invalid_argument(
        "functional_derivative_backprop: model output is not a scalar");
  ForwardPass fp = run_forward(model, point);
  std::vector<double> delta{model.out_scale[0]};
  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    const MLLayer& layer = model.layers[l];
    std::vector<double> dz(layer.out);
    for (int r = 0; r < layer.out; ++r)
      dz[r] = delta[r] * activate_prime(layer.activation, fp.pre[l][r]);
    std::vector<double> prev(layer.in, 0.0);
    for (int r = 0; r < layer.out; ++r) {
      const double* w = layer.weights.data() + std::size_t(r) * layer.in;
      for (int c = 0; c < layer.in; ++c) prev[c] += w[c] * dz[r];
    }
    delta = std::move(prev);
  }
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] /= model.in_scale[i];
  return delta;
}

void save_model(const MLModel& model, const std::string& path) {
  model.validate();
  KvFile kv;
  kv.set_string("model", "feedforward");
  kv.set_string("input", quantity_name(model.signature.input));
  kv.set_string("output", quantity_name(model.signature.output));
  kv.set_int("input_dim", model.signature.input_dim);
  kv.set_int("output_dim", model.signature.output_dim);
  kv.set_int("n_layers", static_cast<long>(model.layers.size()));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + "_";
    const MLLayer& layer = model.layers[l];
    kv.set_int(p + "in", layer.in);
    kv.set_int(p + "out", layer.out);
    kv.set_string(p + "activation", activation_name(layer.activation));
    std::vector<std::vector<double>> w(layer.out), m(layer.out);
    for (int r = 0; r < layer.out; ++r) {
      w[r].assign(layer.weights.begin() + std::size_t(r) * layer.in,
                  layer.weights.begin() + std::size_t(r + 1) * layer.in);
      m[r].assign(layer.in, 0.0);
      for (int c = 0; c < layer.in; ++c)
        m[r][c] = layer.mask[std::size_t(r) * layer.in + c];
    }
    kv.set_matrix(p + "weights", w);
    kv.set_matrix(p + "mask", m);
    kv.set_vector(p + "bias", layer.bias);
  }
  kv.set_vector("in_shift", model.in_shift);
  kv.set_vector("in_scale", model.in_scale);
  kv.set_vector("out_shift", model.out_shift);
  kv.set_vector("out_scale", model.out_scale);
  if (!model.manifold.v_min.empty()) {
    kv.set_vector("manifold_v_min", model.manifold.v_min);
    kv.set_vector("manifold_v_max", model.manifold.v_max);
  }
  kv.set_int("manifold_n_electrons", model.manifold.n_electrons);
  kv.set_int("manifold_polarization", model.manifold.polarization);
  kv.save(path);
}

MLModel load_model(const std::string& path) {
  KvFile kv = KvFile::load(path);
  MLModel model;
  model.signature.input = quantity_from_name(kv.get_string("input"));
  model.signature.output = quantity_from_name(kv.get_string("output"));
  model.signature.input_dim = static_cast<int>(kv.get_int("input_dim"));
  model.signature.output_dim = static_cast<int>(kv.get_int("output_dim"));
  const long n_layers = kv.get_int("n_layers");
  for (long l = 0; l < n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + "_";
    MLLayer layer;
    layer.in = static_cast<int>(kv.get_int(p + "in"));
    layer.out = static_cast<int>(kv.get_int(p + "out"));
    layer.activation = activation_from_name(kv.get_string(p + "activation"));
    const auto w = kv.get_matrix(p + "weights");
    const auto m = kv.get_matrix(p + "mask");
    layer.bias = kv.get_vector(p + "bias");
    layer.weights.reserve(std::size_t(layer.in) * layer.out);
    layer.mask.reserve(std::size_t(layer.in) * layer.out);
    for (int r = 0; r < layer.out; ++r)
      for (int c = 0; c < layer.in; ++c) {
        layer.weights.push_back(w.at(r).at(c));
        layer.mask.push_back(m.at(r).at(c) != 0.0 ? 1 : 0);
      }
    model.layers.push_back(std::move(layer));
  }
  model.in_shift = kv.get_vector("in_shift");
  model.in_scale = kv.get_vector("in_scale");
  model.out_shift = kv.get_vector("out_shift");
  model.out_scale = kv.get_vector("out_scale");
  if (kv.has("manifold_v_min")) {
    model.manifold.v_min = kv.get_vector("manifold_v_min");
    model.manifold.v_max = kv.get_vector("manifold_v_max");
  }
  model.manifold.n_electrons = static_cast<int>(kv.get_int("manifold_n_electrons"));
  model.manifold.polarization = static_cast<int>(kv.get_int("manifold_polarization"));
  model.validate();
  return model;
}

}  // namespace rwmp
