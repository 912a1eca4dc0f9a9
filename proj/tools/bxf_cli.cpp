// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end over the C API.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bxf/bxf.h"

namespace {

using Config = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// key=value lines; later sources override earlier ones.
void merge_text(Config& into, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError(origin + ":" + std::to_string(n), "expected key=value");
    into[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
}

std::string render(const Config& c) {
  std::string out;
  for (const auto& [k, v] : c) out += k + "=" + v + "\n";
  return out;
}

// Options bind to members, so a Verb stays where it was constructed.
struct Verb {
  Verb(CLI::App& root, const std::string& name, const std::string& help, bool needs_checkpoint,
       bool configurable = true) {
    app = root.add_subcommand(name, help);
    if (configurable) {
      app->add_option("--config", config_file, "key=value config file");
      app->add_option("--set", sets, "extra key=value (repeatable)");
    }
    if (needs_checkpoint) app->add_option("checkpoint", checkpoint, "checkpoint path")->required();
  }
  Verb(const Verb&) = delete;
  Verb& operator=(const Verb&) = delete;

  CLI::App* app = nullptr;
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  std::string checkpoint;

  void add_keys(const std::vector<std::pair<std::string, std::string>>& keys) {
    for (const auto& [key, help] : keys) {
      std::string flag = "--" + key;
      for (char& c : flag)
        if (c == '_') c = '-';
      app->add_option(flag, flags[key], help);
    }
  }

  std::string config_text() const {
    Config c;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw CLI::ValidationError("--config", "cannot read " + config_file);
      std::stringstream ss;
      ss << in.rdbuf();
      merge_text(c, ss.str(), config_file);
    }
    for (const auto& [k, v] : flags)
      if (!v.empty()) c[k] = v;
    for (const std::string& s : sets) merge_text(c, s, "--set");
    return render(c);
  }
};

const std::vector<std::pair<std::string, std::string>> kDataKeys = {
    {"dataset", "generator spec or csv:/idx: path"},
    {"train_fraction", "fraction of rows used for training"},
    {"seed", "run seed"},
};

const std::vector<std::pair<std::string, std::string>> kTrainKeys = {
    {"lambda", "weight of the transformed distance"},
    {"gamma", "l1 weight on the binary weights"},
    {"k", "groups for aggregated inputs"},
    {"epochs", "quantize epochs per layer"},
    {"finetune_epochs", "finetune epochs per layer"},
    {"lr_quant", "learning rate for weights and alpha"},
    {"lr_transform", "learning rate for s and V"},
    {"lr_finetune", "learning rate for upper layers"},
    {"batch_size", "minibatch size"},
    {"block_size", "layers per cross-layer block"},
    {"alpha_policy", "trained | recompute"},
    {"act_binarization", "binarize hidden activations (true|false)"},
    {"variant", "none | intra | cross | aggregated"},
    {"use_reg", "orthonormality regularizer (true|false)"},
    {"reg_weight", "regularizer multiplier"},
    {"centered", "center inputs before PCA (true|false)"},
    {"buffer_capacity", "captured input rows per layer"},
    {"baseline", "also run the identity-transform baseline (true|false)"},
};

int report(bxf_status st, char* summary) {
  if (st != BXF_OK) {
    std::cerr << "error [" << bxf_status_name(st) << "]: " << bxf_last_error() << "\n";
    return static_cast<int>(st);
  }
  if (summary) std::cout << summary << "\n";
  bxf_string_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binxform: binarization with weight transforms"};
  app.require_subcommand(1);
  app.fallthrough();
  const char* env = std::getenv("BXF_OUT_DIR");
  std::string out_dir = env && *env ? env : ".";
  app.add_option("-o,--out", out_dir, "output directory (default $BXF_OUT_DIR or .)");

  Verb pretrain(app, "pretrain", "train a full-precision MLP", false);
  pretrain.add_keys(kDataKeys);
  pretrain.add_keys({{"hidden", "hidden sizes, comma separated"},
                     {"epochs", "training epochs"},
                     {"lr", "Adam learning rate"},
                     {"batch_size", "minibatch size"}});

  Verb binarize(app, "binarize", "binarize a checkpoint layer by layer", true);
  binarize.add_keys(kDataKeys);
  binarize.add_keys(kTrainKeys);

  Verb probe(app, "noise-probe", "noise on top/bottom rows of transformed weights", true);
  probe.add_keys(kDataKeys);
  probe.add_keys({{"scales", "noise scales, comma separated"},
                  {"rows", "rows perturbed per layer"},
                  {"centered", "center inputs before PCA (true|false)"},
                  {"buffer_capacity", "captured input rows per layer"}});

  Verb toy(app, "toy-mse", "weight MSE vs task loss on a 3-sample regression", false, false);

  Verb bench(app, "infer-bench", "bit-packed inference throughput", true);
  bench.add_keys({{"samples", "random inputs"}, {"repeats", "timed passes"}, {"seed", "input seed"}});

  try {
    app.parse(argc, argv);
    char* summary = nullptr;
    bxf_status st = BXF_E_ARGUMENT;
    if (pretrain.app->parsed())
      st = bxf_cmd_pretrain(pretrain.config_text().c_str(), out_dir.c_str(), &summary);
    else if (binarize.app->parsed())
      st = bxf_cmd_binarize(binarize.config_text().c_str(), binarize.checkpoint.c_str(),
                            out_dir.c_str(), &summary);
    else if (probe.app->parsed())
      st = bxf_cmd_noise_probe(probe.config_text().c_str(), probe.checkpoint.c_str(), out_dir.c_str(),
                               &summary);
    else if (toy.app->parsed())
      st = bxf_cmd_toy_mse(out_dir.c_str(), &summary);
    else if (bench.app->parsed())
      st = bxf_cmd_infer_bench(bench.config_text().c_str(), bench.checkpoint.c_str(), out_dir.c_str(),
                               &summary);
    return report(st, summary);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(BXF_E_ARGUMENT);
  }
}
