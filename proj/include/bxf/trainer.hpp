// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bxf/autodiff.hpp"
#include "bxf/dataset.hpp"
#include "bxf/layers.hpp"
#include "bxf/quantizer.hpp"
#include "bxf/rng.hpp"
#include "bxf/transform.hpp"

namespace bxf {

/// Which parts of the transform are active.
///   none        V = I, s = 1, P = I, all fixed (proximity QAT baseline)
///   intra       per-layer PCA transform, no cross-layer blocks
///   cross       blocks of consecutive layers, no input grouping
///   aggregated  blocks plus k-means input grouping when d > k
enum class Variant { none, intra, cross, aggregated };

const char* variant_name(Variant v) noexcept;
Variant parse_variant(const std::string& name);

using ConfigMap = std::map<std::string, std::string>;

/// key=value lines; '#' starts a comment. Duplicate keys are an error.
ConfigMap parse_config_text(const std::string& text);
std::string format_config_text(const ConfigMap& map);
std::string format_double(double v);

struct TrainConfig {
  double lambda = 100.0;
  double gamma = 1e-5;
  std::size_t k = 256;
  std::size_t epochs = 40;
  std::size_t finetune_epochs = 40;
  double lr_quant = 3e-4;
  double lr_transform = 3e-4;
  double lr_finetune = 3e-4;
  std::size_t batch_size = 64;
  std::size_t block_size = 2;
  std::uint64_t seed = 1;
  AlphaPolicy alpha_policy = AlphaPolicy::trained;
  bool act_binarization = true;
  Variant variant = Variant::aggregated;
  bool use_reg = true;
  /// Multiplier on Reg in the training loss (1 = plain sum).
  double reg_weight = 1.0;
  bool centered = false;
  std::size_t buffer_capacity = kDefaultBufferCapacity;

  void validate() const;
  bool transform_trainable() const noexcept { return variant != Variant::none; }
  /// Consumes the keys it knows from `map`; leaves the rest.
  static TrainConfig from_map(ConfigMap& map);
  void to_map(ConfigMap& map) const;
};

/// Consecutive quantizable layers grouped `block_size` at a time.
std::vector<std::vector<std::size_t>> partition_blocks(const Network& net, std::size_t block_size);

enum class Phase { quantize, finetune };
const char* phase_name(Phase p) noexcept;

struct ScheduleStep {
  std::size_t layer = 0;
  Phase phase = Phase::quantize;
  /// frozen[i]: layer i receives no updates during this step.
  std::vector<bool> frozen;
};

/// quantize/finetune steps, bottom to top.
std::vector<ScheduleStep> make_schedule(const Network& net);

/// Trainable operands of one quantize step.
struct QuantVars {
  ad::Var latent;
  ad::Var alpha;
  ad::Var log_s;
  ad::Var v;
  /// Full-precision weights of the layers above the one being quantized.
  std::vector<ad::Var> upper;
};

struct LossTerms {
  ad::Var total;
  ad::Var task;
  /// Unweighted ||diag(s) V^T P (w - sgn w)||^2 over the block.
  ad::Var distance;
  /// gamma ||sgn w||_1 over the block; constant in the parameters.
  double sign_l1 = 0.0;
  /// Empty when the regularizer is off.
  std::optional<ad::Var> reg;
};

/// Leaves (requires_grad) for every trainable operand of layer `layer`.
QuantVars make_quant_vars(ad::Tape& tape, const Network& net, const BlockState& state,
                          std::size_t layer, const Tensor& latent, const Tensor& alpha);

/// Task loss with sign-STE weights for `layer`, plus lambda * distance,
/// gamma * ||sgn||_1 and Reg. Lower layers of the block enter the distance
/// through their stored latent weights as constants.
LossTerms train_loss(ad::Tape& tape, const Network& net, const BlockState& state, std::size_t layer,
                     const QuantVars& vars, const Tensor& batch, std::span<const int> labels,
                     const TrainConfig& cfg);

struct MetricsRow {
  Phase phase = Phase::quantize;
  std::size_t layer = 0;
  std::size_t epoch = 0;
  double task_loss = 0.0;
  std::optional<double> qdist;
  std::optional<double> reg;
  double ratio_r = 0.0;
  double accuracy = 0.0;
};

inline constexpr const char* kMetricsHeader = "phase,layer,epoch,task_loss,qdist,reg,ratio_r,accuracy";
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

/// Per-layer (s, U) of a fixed reference network, used to score how far a
/// binarization lands from the reference weights.
struct QReference {
  std::vector<std::size_t> layers;
  std::vector<Tensor> weights;
  std::vector<PcaResult> pca;
};

QReference make_q_reference(const Network& pretrained, const Dataset& data, const TrainConfig& cfg);

struct QScore {
  double q_orig = 0.0;  // ||w - w_q||^2
  double q_ours = 0.0;  // ||diag(s) U^T (w - w_q)||^2
};

/// Scores for the reference layers that have a candidate in `candidates`.
QScore score_layers(const QReference& ref, const std::map<std::size_t, Tensor>& candidates);

struct QuantizeOutcome {
  std::size_t epochs_run = 0;
  double first_qdist = 0.0;
  double last_qdist = 0.0;
};

/// Quantized training of `layer` followed by finalization. Updates the
/// network in place and appends per-epoch rows to `metrics`.
QuantizeOutcome quantize_layer(Network& net, BlockState& state, std::size_t layer,
                               const Dataset& data, const TrainConfig& cfg, Rng& data_rng,
                               std::vector<MetricsRow>* metrics = nullptr,
                               const QReference* ref = nullptr);

/// Task-loss training of the full-precision layers above `layer`.
void finetune_upper(Network& net, std::size_t layer, const Dataset& data, const TrainConfig& cfg,
                    Rng& data_rng, std::vector<MetricsRow>* metrics = nullptr,
                    const QReference* ref = nullptr);

/// Inputs to `layer` grouped and decomposed, appended to `state`.
BlockState open_layer(const Network& net, const BlockState& state, std::size_t layer,
                      const Dataset& data, const TrainConfig& cfg);

struct RunResult {
  Network net;
  std::vector<MetricsRow> metrics;
  std::vector<BlockState> blocks;
  /// ||V V^T - I||_F per block at the end of the run.
  std::vector<double> block_orthogonality;
  QScore q;
  std::size_t quantize_epochs = 0;
};

RunResult run_bitat(const Network& pretrained, const Dataset& data, const TrainConfig& cfg);

}  // namespace bxf
