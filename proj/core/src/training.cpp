// SPDX-License-Identifier: Apache-2.0
#include "prunelab/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "prunelab/errors.hpp"
#include "prunelab/random.hpp"

namespace prunelab::training {

void TrainConfig::validate() const {
  if (epochs < 0 || head_epochs < 0) {
    throw ParameterError("epoch counts must be nonnegative");
  }
  if (batch_size == 0) {
    throw ParameterError("batch_size must be positive");
  }
  if (!(lr > 0.0) || !(head_lr > 0.0)) {
    throw ParameterError("learning rates must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ParameterError("momentum must lie in [0, 1)");
  }
  if (weight_decay < 0.0) {
    throw ParameterError("weight_decay must be nonnegative");
  }
  if (method == Method::scl && !(temperature > 0.0)) {
    throw ParameterError("contrastive training needs a positive temperature");
  }
  if (representation_dim == 0 || (hidden_layers > 0 && hidden_dim == 0)) {
    throw ParameterError("network widths must be positive");
  }
}

TrainConfig TrainConfig::desk_sup() {
  TrainConfig c;
  c.method = Method::sup;
  c.epochs = 30;
  c.batch_size = 32;
  c.lr = 0.1;
  return c;
}

TrainConfig TrainConfig::desk_scl() {
  TrainConfig c;
  c.method = Method::scl;
  c.epochs = 60;
  c.batch_size = 64;
  c.lr = 0.05;
  c.temperature = 0.5;
  c.cosine_annealing = true;
  return c;
}

TrainConfig TrainConfig::paper_sup() {
  TrainConfig c;
  c.method = Method::sup;
  c.epochs = 205;
  c.batch_size = 128;
  c.lr = 1.0;
  c.representation_dim = 128;
  return c;
}

TrainConfig TrainConfig::paper_scl() {
  TrainConfig c;
  c.method = Method::scl;
  c.epochs = 500;
  c.batch_size = 1024;
  c.lr = 0.05;
  c.temperature = 0.5;
  c.cosine_annealing = true;
  c.representation_dim = 128;
  return c;
}

void write_step_log(std::span<const StepRecord> steps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write step log '" + path.string() + "'");
  }
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["lr"] = s.lr;
    j["loss"] = s.loss;
    j["current_sparsity"] = s.current_sparsity;
    out << j.dump() << '\n';
  }
}

std::vector<StepRecord> read_step_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open step log '" + path.string() + "'", 0);
  }
  std::vector<StepRecord> steps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      steps.push_back(StepRecord{j.at("step").get<std::int64_t>(), j.at("epoch").get<int>(),
                                 j.at("lr").get<double>(), j.at("loss").get<double>(),
                                 j.at("current_sparsity").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed step record: ") + e.what(), lineno);
    }
  }
  return steps;
}

LossAndGrad cross_entropy_loss(const Tensor& logits, std::span<const std::uint32_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw ShapeError("cross_entropy_loss: logits " + logits.shape_string() + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  LossAndGrad out{0.0, Tensor(logits.dims())};
  std::vector<double> p(classes);
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] >= classes) {
      throw ShapeError("cross_entropy_loss: label out of range");
    }
    auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(static_cast<double>(row[c]) - mx);
      denom += p[c];
    }
    out.loss += -(static_cast<double>(row[labels[r]]) - mx - std::log(denom));
    auto g = out.grad.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      const double target = c == labels[r] ? 1.0 : 0.0;
      g[c] = static_cast<float>((p[c] / denom - target) / static_cast<double>(batch));
    }
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

LossAndGrad supcon_loss(const Tensor& z, std::span<const std::uint32_t> labels, double temperature) {
  if (z.rank() != 2 || z.dim(0) != labels.size() || labels.size() < 2) {
    throw ShapeError("supcon_loss: projections " + z.shape_string() + " vs " + std::to_string(labels.size()) +
                     " labels");
  }
  if (!(temperature > 0.0)) {
    throw PreconditionError("supcon_loss: temperature must be positive");
  }
  const std::size_t n = z.dim(0);
  const std::size_t dim = z.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (float v : z.row(i)) {
      sq += static_cast<double>(v) * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
      throw PreconditionError("supcon_loss: projection " + std::to_string(i) + " is not unit-norm");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool has_positive = false;
    for (std::size_t j = 0; j < n && !has_positive; ++j) {
      has_positive = j != i && labels[j] == labels[i];
    }
    if (!has_positive) {
      throw DegenerateBatchError("supcon_loss: anchor " + std::to_string(i) + " has no positive");
    }
  }

  std::vector<double> sim(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    auto zi = z.row(i);
    for (std::size_t j = i; j < n; ++j) {
      auto zj = z.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        dot += static_cast<double>(zi[d]) * zj[d];
      }
      sim[i * n + j] = sim[j * n + i] = dot / temperature;
    }
  }

  LossAndGrad out{0.0, Tensor(z.dims())};
  std::vector<double> grad(n * dim, 0.0);
  std::vector<double> coeff(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) {
        mx = std::max(mx, sim[i * n + a]);
      }
    }
    double denom = 0.0;
    std::size_t positives = 0;
    double pos_sum = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) {
        continue;
      }
      denom += std::exp(sim[i * n + a] - mx);
      if (labels[a] == labels[i]) {
        ++positives;
        pos_sum += sim[i * n + a];
      }
    }
    const double log_denom = mx + std::log(denom);
    out.loss += log_denom - pos_sum / static_cast<double>(positives);

    // d loss_i / d s_ia = softmax_a - [a in P(i)] / |P(i)|
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) {
        coeff[a] = 0.0;
        continue;
      }
      coeff[a] = std::exp(sim[i * n + a] - log_denom) -
                 (labels[a] == labels[i] ? 1.0 / static_cast<double>(positives) : 0.0);
    }
    auto zi = z.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      if (coeff[a] == 0.0) {
        continue;
      }
      const double c = coeff[a] / temperature;
      auto za = z.row(a);
      for (std::size_t d = 0; d < dim; ++d) {
        grad[i * dim + d] += c * za[d];
        grad[a * dim + d] += c * zi[d];
      }
    }
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    out.grad[k] = static_cast<float>(grad[k]);
  }
  return out;
}

void sgd_step(WeightStore& weights, const GradientSet& grads, const SgdParams& params,
              std::vector<Tensor>& velocity) {
  if (grads.size() != weights.size()) {
    throw ShapeError("sgd_step: gradient count does not match weight count");
  }
  if (velocity.empty()) {
    for (const auto& e : weights) {
      velocity.emplace_back(e.value.dims());
    }
  }
  if (velocity.size() != weights.size()) {
    throw ShapeError("sgd_step: velocity count does not match weight count");
  }
  for (std::size_t t = 0; t < weights.size(); ++t) {
    auto& e = weights[t];
    if (grads[t].dims() != e.value.dims() || velocity[t].dims() != e.value.dims()) {
      throw ShapeError("sgd_step: dims of '" + e.name + "' do not line up");
    }
    auto w = e.value.data();
    auto g = grads[t].data();
    auto v = velocity[t].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double vi = params.momentum * v[i] + (static_cast<double>(g[i]) + params.weight_decay * w[i]);
      v[i] = static_cast<float>(vi);
      w[i] = static_cast<float>(w[i] - params.lr * v[i]);
      if (e.has_mask() && e.mask[i] == 0) {
        w[i] = 0.0f;
      }
    }
  }
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 0 || epoch < 0 || epoch >= total_epochs) {
    throw ParameterError("cosine_lr: epoch must lie in [0, total_epochs)");
  }
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

namespace {

ArchitectureSpec architecture_for(const datagen::Dataset& data, const TrainConfig& config) {
  return ArchitectureSpec{data.dim(), config.hidden_dim, config.hidden_layers, config.representation_dim,
                          data.class_count};
}

std::vector<std::uint32_t> gather_labels(const datagen::Dataset& data, std::span<const std::size_t> idx) {
  std::vector<std::uint32_t> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    out.push_back(data.labels[i]);
  }
  return out;
}

void check_loss(double loss, std::int64_t step) {
  if (!std::isfinite(loss)) {
    throw TrainingError("loss diverged", step);
  }
}

double epoch_lr(double base, bool cosine, int epoch, int total) {
  return cosine ? cosine_lr(base, epoch, total) : base;
}

/// Cross-entropy epochs over encoder + head (or head only).
void cross_entropy_epochs(ModelBundle& bundle, const datagen::Dataset& data, int epochs, double base_lr,
                          bool cosine, std::size_t batch_size, const SgdParams& base, bool train_encoder,
                          std::uint64_t shuffle_seed, const StepHook& hook, std::int64_t& step,
                          int epoch_offset, double& sparsity, std::vector<StepRecord>& log) {
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tensor> vel_enc;
  std::vector<Tensor> vel_head;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    SgdParams params = base;
    params.lr = epoch_lr(base_lr, cosine, epoch, epochs);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      if (hook) {
        if (auto s = hook(step, bundle)) {
          sparsity = *s;
        }
      }
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch_size, order.size() - start));
      const Tensor x = gather_rows(data.features, idx);
      const auto labels = gather_labels(data, idx);
      try {
        const Activations enc = forward(bundle.encoder, x);
        const Activations head = forward(bundle.classifier_head, enc.output());
        const LossAndGrad ce = cross_entropy_loss(head.output(), labels);
        check_loss(ce.loss, step);
        BackwardResult hb = backward(bundle.classifier_head, head, ce.grad);
        if (train_encoder) {
          BackwardResult eb = backward(bundle.encoder, enc, hb.input_grad);
          sgd_step(bundle.encoder.weights(), eb.grads, params, vel_enc);
        }
        sgd_step(bundle.classifier_head.weights(), hb.grads, params, vel_head);
        log.push_back(StepRecord{step, epoch_offset + epoch, params.lr, ce.loss, sparsity});
      } catch (const NumericError& e) {
        throw TrainingError(e.what(), step);
      }
      ++step;
    }
  }
}

}  // namespace

TrainResult train_sup(const datagen::Dataset& data, const TrainConfig& config, const StepHook& hook) {
  if (config.method != Method::sup) {
    throw ParameterError("train_sup requires method sup");
  }
  config.validate();
  datagen::validate(data);
  TrainResult result{make_bundle(architecture_for(data, config), Method::sup, config.seed), {}};
  std::int64_t step = 0;
  double sparsity = result.bundle.achieved_sparsity();
  cross_entropy_epochs(result.bundle, data, config.epochs, config.lr, config.cosine_annealing, config.batch_size,
                       SgdParams{config.lr, config.momentum, config.weight_decay}, true,
                       derive_seed(config.seed, "shuffle"), hook, step, 0, sparsity, result.steps);
  return result;
}

TrainResult train_scl(const datagen::Dataset& data, const TrainConfig& config,
                      const datagen::AugmentationPolicy& policy, const StepHook& hook) {
  if (config.method != Method::scl) {
    throw ParameterError("train_scl requires method scl");
  }
  config.validate();
  policy.validate();
  datagen::validate(data);

  TrainResult result{make_bundle(architecture_for(data, config), Method::scl, config.seed), {}};
  ModelBundle& bundle = result.bundle;
  bundle.projection_head = Network("projection", projection_layers(config.representation_dim));
  bundle.projection_head->init_weights(config.seed);

  std::mt19937_64 rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tensor> vel_enc;
  std::vector<Tensor> vel_proj;
  std::int64_t step = 0;
  double sparsity = bundle.achieved_sparsity();
  const std::size_t views = policy.views_per_sample;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    SgdParams params{epoch_lr(config.lr, config.cosine_annealing, epoch, config.epochs), config.momentum,
                     config.weight_decay};
    std::shuffle(order.begin(), order.end(), rng);
    const std::uint64_t aug_seed = derive_seed(derive_seed(config.seed, "augment"), static_cast<std::uint64_t>(epoch));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      if (hook) {
        if (auto s = hook(step, bundle)) {
          sparsity = *s;
        }
      }
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(start + config.batch_size, order.size())));
      // Two or more views per sample, so every anchor has a positive.
      std::vector<std::uint32_t> labels;
      for (auto i : idx) {
        labels.insert(labels.end(), views, data.labels[i]);
      }

      Tensor x({idx.size() * views, data.dim()});
      std::size_t row = 0;
      for (auto i : idx) {
        for (const auto& v : datagen::augment(data.sample(i), policy, aug_seed, i)) {
          std::copy(v.begin(), v.end(), x.row(row++).begin());
        }
      }
      try {
        const Activations enc = forward(bundle.encoder, x);
        const Activations proj = forward(*bundle.projection_head, enc.output());
        LossAndGrad sc = supcon_loss(proj.output(), labels, config.temperature);
        const double n = static_cast<double>(labels.size());
        sc.loss /= n;
        for (float& g : sc.grad.data()) {
          g = static_cast<float>(g / n);
        }
        check_loss(sc.loss, step);
        BackwardResult pb = backward(*bundle.projection_head, proj, sc.grad);
        BackwardResult eb = backward(bundle.encoder, enc, pb.input_grad);
        sgd_step(bundle.encoder.weights(), eb.grads, params, vel_enc);
        sgd_step(bundle.projection_head->weights(), pb.grads, params, vel_proj);
        result.steps.push_back(StepRecord{step, epoch, params.lr, sc.loss, sparsity});
      } catch (const NumericError& e) {
        throw TrainingError(e.what(), step);
      } catch (const DegenerateInputError& e) {
        throw TrainingError(e.what(), step);
      }
      ++step;
    }
  }
  bundle.projection_head.reset();

  // Stage 2: the encoder is frozen, so its outputs can be computed once.
  const SgdParams head_params{config.head_lr, config.momentum, config.weight_decay};
  if (config.head_augmented) {
    datagen::Dataset augmented = data;
    const std::uint64_t aug_seed = derive_seed(config.seed, "head-augment");
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto v = datagen::augment(data.sample(i), policy, aug_seed, i).front();
      std::copy(v.begin(), v.end(), augmented.features.row(i).begin());
    }
    cross_entropy_epochs(bundle, augmented, config.head_epochs, config.head_lr, config.cosine_annealing,
                         config.batch_size, head_params, false, derive_seed(config.seed, "head-shuffle"), {}, step,
                         config.epochs, sparsity, result.steps);
  } else {
    cross_entropy_epochs(bundle, data, config.head_epochs, config.head_lr, config.cosine_annealing,
                         config.batch_size, head_params, false, derive_seed(config.seed, "head-shuffle"), {}, step,
                         config.epochs, sparsity, result.steps);
  }
  return result;
}

ModelBundle finetune(ModelBundle bundle, const datagen::Dataset& data, const FinetuneOptions& options,
                     std::vector<StepRecord>* steps) {
  if (options.epochs < 0 || options.batch_size == 0 || !(options.lr > 0.0)) {
    throw ParameterError("finetune: invalid epochs, batch size or learning rate");
  }
  datagen::validate(data);
  if (data.dim() != bundle.encoder.in_dim() || data.class_count > bundle.class_count()) {
    throw ShapeError("finetune: dataset does not match the bundle");
  }
  std::vector<StepRecord> local;
  std::int64_t step = steps && !steps->empty() ? steps->back().step + 1 : 0;
  const int epoch_offset = steps && !steps->empty() ? steps->back().epoch + 1 : 0;
  double sparsity = bundle.achieved_sparsity();
  cross_entropy_epochs(bundle, data, options.epochs, options.lr, false, options.batch_size,
                       SgdParams{options.lr, options.momentum, options.weight_decay}, options.train_encoder,
                       derive_seed(options.seed, "finetune-shuffle"), {}, step, epoch_offset, sparsity,
                       steps ? *steps : local);
  return bundle;
}

}  // namespace prunelab::training
