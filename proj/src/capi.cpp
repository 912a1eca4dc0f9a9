// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/bxf.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "bxf/binary_inference.hpp"
#include "bxf/error.hpp"
#include "bxf/experiments.hpp"
#include "bxf/layers.hpp"

struct bxf_network {
  bxf::Network net;
};

namespace {

thread_local std::string g_last_error;

template <class F>
bxf_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return BXF_OK;
  } catch (const bxf::Error& e) {
    g_last_error = e.what();
    return static_cast<bxf_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BXF_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BXF_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BXF_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  bxf::require(p != nullptr, bxf::ErrorCode::argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** summary, const std::string& text) {
  if (summary) *summary = dup_string(text);
}

bxf::ConfigMap config_of(const char* text) { return bxf::parse_config_text(text ? text : ""); }

bxf::Tensor input_batch(const bxf_network* net, const double* x, size_t rows) {
  need(net, "network");
  need(x, "input");
  bxf::require(rows > 0, bxf::ErrorCode::argument, "rows must be > 0");
  const std::size_t d = net->net.input_dim;
  return bxf::Tensor({rows, d}, std::vector<double>(x, x + rows * d));
}

void copy_logits(const bxf::Tensor& logits, double* out, size_t len) {
  need(out, "logits");
  bxf::require(len >= logits.size(), bxf::ErrorCode::dimension,
               "logits buffer holds " + std::to_string(len) + " values, need " +
                   std::to_string(logits.size()));
  std::memcpy(out, logits.data().data(), logits.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* bxf_version(void) { return "0.1.0"; }

const char* bxf_status_name(bxf_status status) {
  if (status == BXF_OK) return "ok";
  return bxf::error_code_name(static_cast<bxf::ErrorCode>(status));
}

const char* bxf_last_error(void) { return g_last_error.c_str(); }

void bxf_string_free(char* s) { std::free(s); }

bxf_status bxf_network_load(const char* path, bxf_network** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto* h = new bxf_network{bxf::load_network(path)};
    *out = h;
  });
}

bxf_status bxf_network_save(const bxf_network* net, const char* path) {
  return guarded([&] {
    need(net, "network");
    need(path, "path");
    bxf::save_network(net->net, path);
  });
}

void bxf_network_free(bxf_network* net) { delete net; }

bxf_status bxf_network_info(const bxf_network* net, size_t* input_dim, size_t* num_classes,
                            size_t* num_layers, size_t* binarized_layers) {
  return guarded([&] {
    need(net, "network");
    if (input_dim) *input_dim = net->net.input_dim;
    if (num_classes) *num_classes = net->net.num_classes();
    if (num_layers) *num_layers = net->net.layers.size();
    if (binarized_layers) {
      std::size_t n = 0;
      for (const auto& l : net->net.layers) n += l.binary ? 1 : 0;
      *binarized_layers = n;
    }
  });
}

bxf_status bxf_network_forward(const bxf_network* net, const double* x, size_t rows, double* logits,
                               size_t logits_len) {
  return guarded([&] {
    const bxf::Tensor batch = input_batch(net, x, rows);
    copy_logits(bxf::forward(net->net, batch), logits, logits_len);
  });
}

bxf_status bxf_binary_forward(const bxf_network* net, const double* x, size_t rows, double* logits,
                              size_t logits_len) {
  return guarded([&] {
    const bxf::Tensor batch = input_batch(net, x, rows);
    copy_logits(bxf::binary_forward(net->net, batch), logits, logits_len);
  });
}

bxf_status bxf_cmd_pretrain(const char* config, const char* out_dir, char** summary) {
  return guarded([&] {
    need(out_dir, "out_dir");
    emit(summary, bxf::cmd_pretrain(config_of(config), out_dir));
  });
}

bxf_status bxf_cmd_binarize(const char* config, const char* checkpoint, const char* out_dir,
                            char** summary) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out_dir, "out_dir");
    emit(summary, bxf::cmd_binarize(config_of(config), checkpoint, out_dir));
  });
}

bxf_status bxf_cmd_noise_probe(const char* config, const char* checkpoint, const char* out_dir,
                               char** summary) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out_dir, "out_dir");
    emit(summary, bxf::cmd_noise_probe(config_of(config), checkpoint, out_dir));
  });
}

bxf_status bxf_cmd_toy_mse(const char* out_dir, char** summary) {
  return guarded([&] {
    need(out_dir, "out_dir");
    emit(summary, bxf::cmd_toy_mse(out_dir));
  });
}

bxf_status bxf_cmd_infer_bench(const char* config, const char* checkpoint, const char* out_dir,
                               char** summary) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out_dir, "out_dir");
    emit(summary, bxf::cmd_infer_bench(config_of(config), checkpoint, out_dir));
  });
}

}  // extern "C"
