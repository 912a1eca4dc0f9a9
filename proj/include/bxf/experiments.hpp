// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bxf/binary_inference.hpp"
#include "bxf/dataset.hpp"
#include "bxf/layers.hpp"
#include "bxf/trainer.hpp"

namespace bxf {

/// Output directory from BXF_OUT_DIR, else ".".
std::string output_dir_from_env();

/// Hex FNV-1a 64 of a byte string; used for run ids and checkpoint digests.
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::string& path);

/// Dataset, split and seed shared by every command.
struct DataConfig {
  std::string dataset = "synthetic-gaussians:dim=2,classes=2,informative=2,separation=6";
  double train_fraction = 0.8;
  std::uint64_t seed = 1;

  static DataConfig from_map(ConfigMap& map);
  void to_map(ConfigMap& map) const;
  /// Loads and splits; train and test are disjoint.
  std::pair<Dataset, Dataset> load() const;
};

std::vector<std::size_t> parse_size_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

/// Rejects keys no consumer took.
void require_consumed(const ConfigMap& rest, const std::string& command);

struct PretrainConfig {
  DataConfig data;
  std::vector<std::size_t> hidden{16, 16};
  std::size_t epochs = 60;
  double lr = 3e-3;
  std::size_t batch_size = 64;

  static PretrainConfig from_map(ConfigMap map);
  ConfigMap to_map() const;
};

struct PretrainOutcome {
  Network net;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  ConfigMap snapshot;
};

PretrainOutcome run_pretrain(const PretrainConfig& cfg);

struct BinarizeConfig {
  DataConfig data;
  TrainConfig train;
  /// Also run the fixed-identity baseline for the report.
  bool baseline = true;

  static BinarizeConfig from_map(ConfigMap map);
  ConfigMap to_map() const;
};

struct ExperimentReport {
  std::string run_id;
  ConfigMap config;
  ConfigMap baseline_config;
  std::string checkpoint_digest;
  double fp_accuracy = 0.0;
  std::optional<double> baseline_accuracy;
  double bitat_accuracy = 0.0;
  QScore bitat_q;
  std::optional<QScore> baseline_q;
  std::vector<double> block_orthogonality;
  std::vector<MetricsRow> metrics;
  std::vector<MetricsRow> baseline_metrics;
};

std::string report_json(const ExperimentReport& report);

struct BinarizeOutcome {
  RunResult bitat;
  std::optional<RunResult> baseline;
  ExperimentReport report;
};

/// The baseline shares every setting except the transform variant.
TrainConfig baseline_config(const TrainConfig& cfg);

BinarizeOutcome run_binarize(const Network& pretrained, const BinarizeConfig& cfg);

enum class ProbeMode { layer_dependent, layer_independent };
enum class ProbeRows { top, bottom };
const char* probe_mode_name(ProbeMode m) noexcept;
const char* probe_rows_name(ProbeRows r) noexcept;

struct NoiseProbeConfig {
  DataConfig data;
  /// Empty: 9 points log-spaced over [1e-3, 1e1].
  std::vector<double> scales;
  std::size_t rows = 5;
  bool centered = false;
  std::size_t buffer_capacity = kDefaultBufferCapacity;

  static NoiseProbeConfig from_map(ConfigMap map);
  ConfigMap to_map() const;
  std::vector<double> effective_scales() const;
};

struct NoiseProbeRow {
  ProbeMode mode = ProbeMode::layer_independent;
  ProbeRows rows = ProbeRows::top;
  double scale = 0.0;
  double accuracy = 0.0;
};

inline constexpr const char* kNoiseProbeHeader = "mode,rows,scale,accuracy";

/// Perturbs `rows` rows of U^T w in every layer and reports test accuracy.
/// PCA inputs come from `pca_data`; accuracy from `eval_data`. Noise draws
/// are shared by both modes and both row choices at a given scale.
std::vector<NoiseProbeRow> noise_probe(const Network& net, const Dataset& pca_data,
                                       const Dataset& eval_data, const NoiseProbeConfig& cfg,
                                       std::vector<std::string>* warnings = nullptr);

struct NoiseProbeSummary {
  double clean_accuracy = 0.0;
  /// Largest scale where top-row noise costs >= 10 points in both modes.
  std::optional<double> critical_scale;
  double top_dependent = 0.0, bottom_dependent = 0.0;
  double top_independent = 0.0, bottom_independent = 0.0;
};

NoiseProbeSummary summarize_noise_probe(const std::vector<NoiseProbeRow>& rows, double clean_accuracy);

/// Three-sample linear regression y = X w with a full-precision w.
struct ToyInstance {
  Tensor x;  // 3 x d
  Tensor w;  // d
};

struct ToySelection {
  std::string quantizer;
  double alpha = 0.0;
  std::vector<double> signs;
  double mse = 0.0;        // mean (w - alpha b)^2
  double task_loss = 0.0;  // mean (X (w - alpha b))^2
};

inline constexpr const char* kToyHeader = "quantizer,mse,task_loss";

/// Per-element MSE binarization of w.
ToySelection toy_naive(const ToyInstance& inst);
/// Binarization minimizing ||diag(s) U^T (w - alpha b)||^2 with (s, U) from
/// PCA of the rows of X, exhaustive over signs.
ToySelection toy_dependency(const ToyInstance& inst);

/// Draws random instances of dimension `dim` until the two selections pick
/// different signs and the naive one has the lower weight MSE but the higher
/// task loss. Returns the attempt count too.
std::pair<ToyInstance, std::size_t> toy_search(std::uint64_t seed, std::size_t dim,
                                               std::size_t max_tries = 100000);
/// The committed instance (output of toy_search(kToySeed, 3)).
ToyInstance toy_committed_instance();
inline constexpr std::uint64_t kToySeed = 7;

struct InferBenchResult {
  BenchmarkResult bench;
  double max_abs_diff = 0.0;
  bool signs_match = true;
};

InferBenchResult infer_bench(const Network& net, std::size_t samples, std::size_t repeats,
                             std::uint64_t seed);

// Command entry points: write their outputs under `out_dir` and return a JSON
// summary. Errors are thrown as bxf::Error.
std::string cmd_pretrain(const ConfigMap& config, const std::string& out_dir);
std::string cmd_binarize(const ConfigMap& config, const std::string& checkpoint,
                         const std::string& out_dir);
std::string cmd_noise_probe(const ConfigMap& config, const std::string& checkpoint,
                            const std::string& out_dir);
std::string cmd_toy_mse(const std::string& out_dir);
std::string cmd_infer_bench(const ConfigMap& config, const std::string& checkpoint,
                            const std::string& out_dir);

}  // namespace bxf
