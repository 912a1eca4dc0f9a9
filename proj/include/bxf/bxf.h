/* Copyright 2026 The binxform Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to binxform. Every call returns a bxf_status; on failure the
 * message is available from bxf_last_error() on the same thread until the
 * next call. Strings returned through out-parameters are owned by the caller
 * and released with bxf_string_free.
 */
#ifndef BXF_BXF_H
#define BXF_BXF_H

#include <stddef.h>

#if defined(_WIN32)
#define BXF_API __declspec(dllexport)
#else
#define BXF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values match the library's error categories and the CLI exit codes. */
typedef enum bxf_status {
  BXF_OK = 0,
  BXF_E_ARGUMENT = 1,
  BXF_E_DIMENSION = 2,
  BXF_E_DOMAIN = 3,
  BXF_E_CONTRACT = 4,
  BXF_E_IO = 5,
  BXF_E_PARSE = 6,
  BXF_E_NUMERICAL = 7,
  BXF_E_DIVERGENCE = 8,
  BXF_E_INTERNAL = 9
} bxf_status;

typedef struct bxf_network bxf_network;

BXF_API const char* bxf_version(void);
BXF_API const char* bxf_status_name(bxf_status status);
BXF_API const char* bxf_last_error(void);
BXF_API void bxf_string_free(char* s);

BXF_API bxf_status bxf_network_load(const char* path, bxf_network** out);
BXF_API bxf_status bxf_network_save(const bxf_network* net, const char* path);
BXF_API void bxf_network_free(bxf_network* net);

/* binarized_layers counts layers stored as 1-bit weights. */
BXF_API bxf_status bxf_network_info(const bxf_network* net, size_t* input_dim, size_t* num_classes,
                                    size_t* num_layers, size_t* binarized_layers);

/* Row-major rows x input_dim in, rows x num_classes logits out. The float
 * path simulates binarized layers with alpha * sign weights; the binary path
 * runs them on packed bits and needs every hidden layer binarized. */
BXF_API bxf_status bxf_network_forward(const bxf_network* net, const double* x, size_t rows,
                                       double* logits, size_t logits_len);
BXF_API bxf_status bxf_binary_forward(const bxf_network* net, const double* x, size_t rows,
                                      double* logits, size_t logits_len);

/* Commands. `config` is key=value text (one pair per line). Outputs go to
 * out_dir; a JSON summary is returned in *summary when it is not NULL. */
BXF_API bxf_status bxf_cmd_pretrain(const char* config, const char* out_dir, char** summary);
BXF_API bxf_status bxf_cmd_binarize(const char* config, const char* checkpoint, const char* out_dir,
                                    char** summary);
BXF_API bxf_status bxf_cmd_noise_probe(const char* config, const char* checkpoint,
                                       const char* out_dir, char** summary);
BXF_API bxf_status bxf_cmd_toy_mse(const char* out_dir, char** summary);
BXF_API bxf_status bxf_cmd_infer_bench(const char* config, const char* checkpoint,
                                       const char* out_dir, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* BXF_BXF_H */
