// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bxf/error.hpp"
#include "bxf/optim.hpp"

namespace bxf {

const char* variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::none: return "none";
    case Variant::intra: return "intra";
    case Variant::cross: return "cross";
    case Variant::aggregated: return "aggregated";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::none, Variant::intra, Variant::cross, Variant::aggregated})
    if (name == variant_name(v)) return v;
  fail(ErrorCode::argument, "unknown variant '" + name + "' (none|intra|cross|aggregated)");
}

const char* phase_name(Phase p) noexcept { return p == Phase::quantize ? "quantize" : "finetune"; }

std::string format_double(double v) {
  // shortest text that parses back to the same double
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::parse,
            "config line " + std::to_string(line_no) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    require(!key.empty(), ErrorCode::parse, "config line " + std::to_string(line_no) + ": empty key");
    require(map.emplace(key, strip(line.substr(eq + 1))).second, ErrorCode::parse,
            "config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return map;
}

std::string format_config_text(const ConfigMap& map) {
  std::string out;
  for (const auto& [k, v] : map) out += k + "=" + v + "\n";
  return out;
}

namespace {

double take_double(ConfigMap& m, const std::string& key, double def) {
  auto it = m.find(key);
  if (it == m.end()) return def;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == it->second.size() && used > 0, ErrorCode::parse,
          "config key " + key + ": '" + it->second + "' is not a number");
  m.erase(it);
  return v;
}

std::uint64_t take_uint(ConfigMap& m, const std::string& key, std::uint64_t def) {
  auto it = m.find(key);
  if (it == m.end()) return def;
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == it->second.size() && used > 0 && it->second[0] != '-', ErrorCode::parse,
          "config key " + key + ": '" + it->second + "' is not a non-negative integer");
  m.erase(it);
  return v;
}

bool take_bool(ConfigMap& m, const std::string& key, bool def) {
  auto it = m.find(key);
  if (it == m.end()) return def;
  const std::string v = it->second;
  m.erase(it);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::parse, "config key " + key + ": '" + v + "' is not a boolean");
}

std::string take_string(ConfigMap& m, const std::string& key, const std::string& def) {
  auto it = m.find(key);
  if (it == m.end()) return def;
  std::string v = it->second;
  m.erase(it);
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  require(lambda >= 0 && gamma >= 0 && reg_weight >= 0, ErrorCode::argument,
          "lambda, gamma and reg_weight must be >= 0");
  require(k >= 1, ErrorCode::argument, "k must be >= 1");
  require(block_size >= 1, ErrorCode::argument, "block_size must be >= 1");
  require(batch_size >= 1, ErrorCode::argument, "batch_size must be >= 1");
  require(buffer_capacity >= 2, ErrorCode::argument, "buffer_capacity must be >= 2");
  require(lr_quant >= 0 && lr_transform >= 0 && lr_finetune >= 0, ErrorCode::argument,
          "learning rates must be >= 0");
}

TrainConfig TrainConfig::from_map(ConfigMap& m) {
  TrainConfig c;
  c.lambda = take_double(m, "lambda", c.lambda);
  c.gamma = take_double(m, "gamma", c.gamma);
  c.k = take_uint(m, "k", c.k);
  c.epochs = take_uint(m, "epochs", c.epochs);
  c.finetune_epochs = take_uint(m, "finetune_epochs", c.finetune_epochs);
  c.lr_quant = take_double(m, "lr_quant", c.lr_quant);
  c.lr_transform = take_double(m, "lr_transform", c.lr_transform);
  c.lr_finetune = take_double(m, "lr_finetune", c.lr_finetune);
  c.batch_size = take_uint(m, "batch_size", c.batch_size);
  c.block_size = take_uint(m, "block_size", c.block_size);
  c.seed = take_uint(m, "seed", c.seed);
  c.alpha_policy = parse_alpha_policy(take_string(m, "alpha_policy", alpha_policy_name(c.alpha_policy)));
  c.act_binarization = take_bool(m, "act_binarization", c.act_binarization);
  c.variant = parse_variant(take_string(m, "variant", variant_name(c.variant)));
  c.use_reg = take_bool(m, "use_reg", c.use_reg);
  c.reg_weight = take_double(m, "reg_weight", c.reg_weight);
  c.centered = take_bool(m, "centered", c.centered);
  c.buffer_capacity = take_uint(m, "buffer_capacity", c.buffer_capacity);
  c.validate();
  return c;
}

void TrainConfig::to_map(ConfigMap& m) const {
  m["lambda"] = format_double(lambda);
  m["gamma"] = format_double(gamma);
  m["k"] = std::to_string(k);
  m["epochs"] = std::to_string(epochs);
  m["finetune_epochs"] = std::to_string(finetune_epochs);
  m["lr_quant"] = format_double(lr_quant);
  m["lr_transform"] = format_double(lr_transform);
  m["lr_finetune"] = format_double(lr_finetune);
  m["batch_size"] = std::to_string(batch_size);
  m["block_size"] = std::to_string(block_size);
  m["seed"] = std::to_string(seed);
  m["alpha_policy"] = alpha_policy_name(alpha_policy);
  m["act_binarization"] = act_binarization ? "true" : "false";
  m["variant"] = variant_name(variant);
  m["use_reg"] = use_reg ? "true" : "false";
  m["reg_weight"] = format_double(reg_weight);
  m["centered"] = centered ? "true" : "false";
  m["buffer_capacity"] = std::to_string(buffer_capacity);
}

std::vector<std::vector<std::size_t>> partition_blocks(const Network& net, std::size_t block_size) {
  require(block_size >= 1, ErrorCode::argument, "block_size must be >= 1");
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::size_t> cur;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.quantizable(i)) {
      // A full-precision layer breaks the run of consecutive layers.
      if (!cur.empty()) blocks.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur.push_back(i);
    if (cur.size() == block_size) {
      blocks.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) blocks.push_back(std::move(cur));
  return blocks;
}

std::vector<ScheduleStep> make_schedule(const Network& net) {
  std::vector<ScheduleStep> steps;
  const std::size_t n = net.layers.size();
  for (std::size_t l : net.quantizable_layers()) {
    ScheduleStep q{l, Phase::quantize, std::vector<bool>(n, false)};
    for (std::size_t i = 0; i < l; ++i) q.frozen[i] = true;
    ScheduleStep f = q;
    f.phase = Phase::finetune;
    f.frozen[l] = true;
    steps.push_back(std::move(q));
    steps.push_back(std::move(f));
  }
  return steps;
}

namespace {

Tensor sign_of(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.storage()) v = ad::sign_value(v);
  return out;
}

Tensor scale_columns(const Tensor& m, std::span<const double> c) {
  Tensor out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) *= c[j];
  return out;
}

/// ||diag(exp log_s) V^T stack_j(P_j (w_j - sgn w_j))||^2 over the block.
ad::Var block_distance(ad::Tape& tape, const Network& net, const BlockState& state,
                       std::size_t layer, ad::Var latent, ad::Var log_s, ad::Var v,
                       std::size_t* sign_count) {
  require(!state.empty() && state.layers.back() == layer, ErrorCode::contract,
          "block state must end at layer " + std::to_string(layer));
  ad::Var w_stack, q_stack;
  std::size_t count = 0;
  for (std::size_t j = 0; j < state.layers.size(); ++j) {
    const std::size_t lj = state.layers[j];
    ad::Var w = latent;
    if (lj != layer) {
      const Tensor& stored = net.layers.at(lj).latent;
      require(!stored.empty(), ErrorCode::contract,
              "layer " + std::to_string(lj) + " has no latent weights for the block distance");
      w = tape.constant(stored);
    }
    // sgn of the live layer carries the surrogate gradient; finished layers are constants
    ad::Var q = lj == layer ? ad::sign_ste(w) : tape.constant(sign_of(w.value()));
    count += w.value().size();
    const ReductionMatrix& red = state.reductions[j];
    if (!red.is_identity()) {
      ad::Var p = tape.constant(red.P);
      w = ad::matmul(p, w);
      q = ad::matmul(p, q);
    }
    w_stack = stack_weights(w_stack, w);
    q_stack = stack_weights(q_stack, q);
  }
  if (sign_count) *sign_count = count;
  return bitat_distance(w_stack, q_stack, ad::exp(log_s), v, 0.0);
}

void check_finite_loss(double value, double reference, std::size_t layer, std::size_t epoch,
                       const char* phase) {
  const double limit = std::max(1e6, 10.0 * reference);
  if (!std::isfinite(value) || value > limit)
    fail(ErrorCode::divergence, std::string(phase) + " layer " + std::to_string(layer) + " epoch " +
                                    std::to_string(epoch) + ": loss " + format_double(value) +
                                    " (limit " + format_double(limit) + ")");
}

std::vector<int> gather_labels(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<int> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) y[i] = data.labels[idx[i]];
  return y;
}

std::map<std::size_t, Tensor> binarized_candidates(const Network& net) {
  std::map<std::size_t, Tensor> out;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].binary) out[i] = net.layers[i].binary->dequantize();
  return out;
}

double ratio_of(const QReference* ref, const std::map<std::size_t, Tensor>& cands) {
  if (!ref) return 0.0;
  const QScore s = score_layers(*ref, cands);
  return s.q_orig > 0.0 ? s.q_ours / s.q_orig : 0.0;
}

}  // namespace

QuantVars make_quant_vars(ad::Tape& tape, const Network& net, const BlockState& state,
                          std::size_t layer, const Tensor& latent, const Tensor& alpha) {
  QuantVars v;
  v.latent = tape.leaf(latent, true);
  v.alpha = tape.leaf(alpha, true);
  // Trainability of the transform is decided by the caller's config; leaves
  // always carry gradients so the same graph serves every variant.
  v.log_s = tape.leaf(state.log_s, true);
  v.v = tape.leaf(state.V, true);
  for (std::size_t i = layer + 1; i < net.layers.size(); ++i) {
    require(!net.layers[i].binary, ErrorCode::contract,
            "layer " + std::to_string(i) + " above the quantized layer is already binary");
    v.upper.push_back(tape.leaf(net.layers[i].weight, true));
  }
  return v;
}

LossTerms train_loss(ad::Tape& tape, const Network& net, const BlockState& state, std::size_t layer,
                     const QuantVars& vars, const Tensor& batch, std::span<const int> labels,
                     const TrainConfig& cfg) {
  require(layer < net.layers.size() && net.quantizable(layer), ErrorCode::argument,
          "layer " + std::to_string(layer) + " is not quantizable");
  require(vars.upper.size() == net.layers.size() - layer - 1, ErrorCode::contract,
          "one upper-layer operand per layer above the quantized one");
  std::vector<LayerBinding> bindings = frozen_bindings(tape, net);
  bindings.resize(layer);
  bindings.push_back({ad::sign_ste(vars.latent), vars.alpha});
  for (const ad::Var& u : vars.upper) bindings.push_back({u, std::nullopt});

  LossTerms t;
  ad::Var logits = forward_graph(tape, net, bindings, tape.constant(batch), sign_input_mask(net, layer));
  t.task = ad::softmax_cross_entropy(logits, labels);
  std::size_t count = 0;
  t.distance = block_distance(tape, net, state, layer, vars.latent, vars.log_s, vars.v, &count);
  t.sign_l1 = cfg.gamma * static_cast<double>(count);
  t.total = ad::add_scalar(ad::add(t.task, ad::scale(t.distance, cfg.lambda)), t.sign_l1);
  if (cfg.use_reg && cfg.transform_trainable()) {
    t.reg = regularizer_log(vars.log_s, vars.v, state.sigma0);
    t.total = ad::add(t.total, ad::scale(*t.reg, cfg.reg_weight));
  }
  return t;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot write " + path);
  out << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << phase_name(r.phase) << ',' << r.layer << ',' << r.epoch << ',' << format_double(r.task_loss)
        << ',' << (r.qdist ? format_double(*r.qdist) : "") << ','
        << (r.reg ? format_double(*r.reg) : "") << ',' << format_double(r.ratio_r) << ','
        << format_double(r.accuracy) << '\n';
  }
  require(out.good(), ErrorCode::io, "write failed for " + path);
}

QReference make_q_reference(const Network& pretrained, const Dataset& data, const TrainConfig& cfg) {
  QReference ref;
  for (std::size_t l : pretrained.quantizable_layers()) {
    LayerInputBuffer buf = capture_inputs(pretrained, data, l, std::nullopt, cfg.buffer_capacity,
                                          substream_seed(cfg.seed, "reference", l));
    ref.layers.push_back(l);
    ref.weights.push_back(pretrained.layers[l].weight);
    ref.pca.push_back(pca_init(buf.matrix(), cfg.centered));
  }
  return ref;
}

QScore score_layers(const QReference& ref, const std::map<std::size_t, Tensor>& candidates) {
  QScore s;
  for (std::size_t i = 0; i < ref.layers.size(); ++i) {
    auto it = candidates.find(ref.layers[i]);
    if (it == candidates.end()) continue;
    Tensor diff = ref.weights[i];
    for (std::size_t e = 0; e < diff.size(); ++e) diff[e] -= it->second[e];
    s.q_orig += frobenius_sq(diff);
    s.q_ours += bitat_distance_value(ref.weights[i], it->second, ref.pca[i].s, ref.pca[i].U, 0.0);
  }
  return s;
}

BlockState open_layer(const Network& net, const BlockState& state, std::size_t layer,
                      const Dataset& data, const TrainConfig& cfg) {
  const std::size_t d = net.layers.at(layer).d_in;
  if (!cfg.transform_trainable())
    return expand(state, layer, Tensor::vector(std::vector<double>(d, 1.0)), Tensor::identity(d),
                  ReductionMatrix::identity(d));
  LayerInputBuffer buf = capture_inputs(net, data, layer, layer, cfg.buffer_capacity,
                                        substream_seed(cfg.seed, "capture", layer));
  const Tensor inputs = buf.matrix();
  ReductionMatrix red = cfg.variant == Variant::aggregated && d > cfg.k
                            ? kmeans_group(inputs, cfg.k, substream_seed(cfg.seed, "kmeans", layer))
                            : ReductionMatrix::identity(d);
  PcaResult pca = pca_init(red.is_identity() ? inputs : red.apply(inputs), cfg.centered);
  return expand(state, layer, pca.s, pca.U, std::move(red));
}

QuantizeOutcome quantize_layer(Network& net, BlockState& state, std::size_t layer,
                               const Dataset& data, const TrainConfig& cfg, Rng& data_rng,
                               std::vector<MetricsRow>* metrics, const QReference* ref) {
  cfg.validate();
  require(layer < net.layers.size() && net.quantizable(layer), ErrorCode::argument,
          "layer " + std::to_string(layer) + " is not quantizable");
  require(!net.layers[layer].binary, ErrorCode::contract,
          "layer " + std::to_string(layer) + " is already binarized");
  for (std::size_t i = 0; i < layer; ++i)
    require(!net.quantizable(i) || net.layers[i].binary.has_value(), ErrorCode::contract,
            "layer " + std::to_string(i) + " below " + std::to_string(layer) + " is not yet binarized");

  // Start from the MSE binarization: alpha = mean|w_c|, latent = w / alpha.
  const BinaryLayer init = quantize_mse(net.layers[layer].weight);
  Tensor alpha = Tensor::vector(init.alpha);
  Tensor latent = net.layers[layer].weight;
  for (std::size_t r = 0; r < latent.rows(); ++r)
    for (std::size_t c = 0; c < latent.cols(); ++c) latent(r, c) /= alpha[c];

  const std::size_t n_upper = net.layers.size() - layer - 1;
  Adam adam(4 + n_upper);
  const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * per_epoch;
  std::size_t step = 0;
  double reference_loss = -1.0;
  QuantizeOutcome outcome;

  auto distance_and_reg = [&]() {
    ad::Tape tape;
    ad::Var ls = tape.constant(state.log_s), v = tape.constant(state.V);
    const double dist = block_distance(tape, net, state, layer, tape.constant(latent), ls, v, nullptr)
                            .value()
                            .item();
    std::optional<double> reg;
    if (cfg.use_reg && cfg.transform_trainable())
      reg = regularizer_log(ls, v, state.sigma0).value().item();
    return std::make_pair(dist, reg);
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double task_sum = 0.0;
    for (const auto& idx : make_batches(data.size(), cfg.batch_size, data_rng)) {
      ad::Tape tape;
      QuantVars vars = make_quant_vars(tape, net, state, layer, latent, alpha);
      const std::vector<int> y = gather_labels(data, idx);
      LossTerms terms = train_loss(tape, net, state, layer, vars, gather_rows(data.features, idx), y, cfg);
      const double total = terms.total.value().item();
      if (reference_loss < 0.0) reference_loss = total;
      check_finite_loss(total, reference_loss, layer, epoch, "quantize");
      tape.backward(terms.total);

      const double decay = linear_decay(1.0, step++, total_steps);
      adam.update(0, latent, vars.latent.grad(), cfg.lr_quant * decay);
      adam.update(1, alpha, vars.alpha.grad(), cfg.lr_quant * decay);
      if (cfg.transform_trainable()) {
        adam.update(2, state.log_s, vars.log_s.grad(), cfg.lr_transform * decay);
        adam.update(3, state.V, vars.v.grad(), cfg.lr_transform * decay);
      }
      for (std::size_t u = 0; u < n_upper; ++u)
        adam.update(4 + u, net.layers[layer + 1 + u].weight, vars.upper[u].grad(), cfg.lr_quant * decay);
      adam.tick();
      task_sum += terms.task.value().item() * static_cast<double>(idx.size());
    }

    const auto [dist, reg] = distance_and_reg();
    if (epoch == 0) outcome.first_qdist = dist;
    outcome.last_qdist = dist;
    ++outcome.epochs_run;
    if (metrics) {
      const Tensor candidate = scale_columns(sign_of(latent), alpha.data());
      Network probe = net;
      probe.layers[layer].weight = candidate;
      auto cands = binarized_candidates(net);
      cands[layer] = candidate;
      metrics->push_back({Phase::quantize, layer, epoch, task_sum / static_cast<double>(data.size()),
                          dist, reg, ratio_of(ref, cands), accuracy(probe, data, layer)});
    }
  }

  Layer& target = net.layers[layer];
  target.binary = finalize(scale_columns(latent, alpha.data()), cfg.alpha_policy, alpha.data());
  target.latent = std::move(latent);
  target.weight = target.binary->dequantize();
  return outcome;
}

void finetune_upper(Network& net, std::size_t layer, const Dataset& data, const TrainConfig& cfg,
                    Rng& data_rng, std::vector<MetricsRow>* metrics, const QReference* ref) {
  require(layer < net.layers.size() && net.layers[layer].binary, ErrorCode::contract,
          "finetune_upper needs layer " + std::to_string(layer) + " finalized");
  std::vector<std::size_t> trainable;
  for (std::size_t i = layer + 1; i < net.layers.size(); ++i)
    if (!net.layers[i].binary) trainable.push_back(i);
  if (trainable.empty() || cfg.finetune_epochs == 0) return;

  Adam adam(net.layers.size());
  const auto mask = sign_input_mask(net);
  const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.finetune_epochs * per_epoch;
  std::size_t step = 0;
  double reference_loss = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    double task_sum = 0.0;
    for (const auto& idx : make_batches(data.size(), cfg.batch_size, data_rng)) {
      ad::Tape tape;
      std::vector<LayerBinding> bindings = frozen_bindings(tape, net);
      for (std::size_t i : trainable) bindings[i].weight = tape.leaf(net.layers[i].weight, true);
      const std::vector<int> y = gather_labels(data, idx);
      ad::Var loss = ad::softmax_cross_entropy(
          forward_graph(tape, net, bindings, tape.constant(gather_rows(data.features, idx)), mask), y);
      const double value = loss.value().item();
      if (reference_loss < 0.0) reference_loss = value;
      check_finite_loss(value, reference_loss, layer, epoch, "finetune");
      tape.backward(loss);
      const double lr = linear_decay(cfg.lr_finetune, step++, total_steps);
      for (std::size_t i : trainable) adam.update(i, net.layers[i].weight, bindings[i].weight.grad(), lr);
      adam.tick();
      task_sum += value * static_cast<double>(idx.size());
    }
    if (metrics)
      metrics->push_back({Phase::finetune, layer, epoch, task_sum / static_cast<double>(data.size()),
                          std::nullopt, std::nullopt, ratio_of(ref, binarized_candidates(net)),
                          accuracy(net, data)});
  }
}

RunResult run_bitat(const Network& pretrained, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  pretrained.validate();
  data.validate();
  RunResult result;
  result.net = pretrained;
  result.net.binarize_activations = cfg.act_binarization;
  for (const Layer& l : result.net.layers)
    require(!l.binary, ErrorCode::contract, "run_bitat expects a full-precision network");

  const QReference ref = make_q_reference(pretrained, data, cfg);
  Rng data_rng = make_rng(cfg.seed, "data");
  const std::size_t block_size = cfg.variant == Variant::intra ? 1 : cfg.block_size;
  for (const auto& block : partition_blocks(result.net, block_size)) {
    BlockState state;
    for (std::size_t l : block) {
      state = open_layer(result.net, state, l, data, cfg);
      result.quantize_epochs +=
          quantize_layer(result.net, state, l, data, cfg, data_rng, &result.metrics, &ref).epochs_run;
      finetune_upper(result.net, l, data, cfg, data_rng, &result.metrics, &ref);
    }
    result.block_orthogonality.push_back(orthogonality_deviation(state.V));
    result.blocks.push_back(std::move(state));
  }
  result.q = score_layers(ref, binarized_candidates(result.net));
  return result;
}

}  // namespace bxf
