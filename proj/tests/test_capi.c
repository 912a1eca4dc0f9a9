/* Copyright 2026 The binxform Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Exercises the shared library through its C header only.
 */
#define _POSIX_C_SOURCE 200809L

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "bxf/bxf.h"

static int failures = 0;

#define EXPECT(cond)                                               \
  do {                                                             \
    if (!(cond)) {                                                 \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                  \
    }                                                              \
  } while (0)

static const char* kPretrain =
    "dataset=synthetic-gaussians:n=200,dim=2,classes=2,informative=2,separation=6\n"
    "hidden=8,8\n"
    "epochs=10\n";

static const char* kBinarize =
    "dataset=synthetic-gaussians:n=200,dim=2,classes=2,informative=2,separation=6\n"
    "epochs=2\n"
    "finetune_epochs=1\n"
    "k=4\n"
    "baseline=false\n";

int main(void) {
  char tmpl[] = "/tmp/bxf_capi_XXXXXX";
  const char* dir = mkdtemp(tmpl);
  char path[512];
  char* summary = NULL;
  bxf_network* net = NULL;
  bxf_network* bin = NULL;
  size_t in_dim = 0, classes = 0, layers = 0, binarized = 0;
  double x[3 * 2] = {0.5, -1.0, 2.0, 0.25, -3.0, 1.5};
  double a[3 * 2], b[3 * 2];
  int i;

  if (!dir) {
    perror("mkdtemp");
    return 1;
  }

  EXPECT(strcmp(bxf_version(), "0.1.0") == 0);
  EXPECT(strcmp(bxf_status_name(BXF_OK), "ok") == 0);
  EXPECT(strcmp(bxf_status_name(BXF_E_DIVERGENCE), "divergence") == 0);

  /* errors carry a category and a message */
  EXPECT(bxf_network_load("/nonexistent/net.bxf", &net) == BXF_E_IO);
  EXPECT(strstr(bxf_last_error(), "/nonexistent/net.bxf") != NULL);
  EXPECT(net == NULL);
  EXPECT(bxf_network_load(NULL, &net) == BXF_E_ARGUMENT);
  EXPECT(bxf_network_info(NULL, &in_dim, NULL, NULL, NULL) == BXF_E_ARGUMENT);
  EXPECT(bxf_cmd_pretrain("bogus_key=1\n", dir, NULL) == BXF_E_ARGUMENT);
  EXPECT(bxf_cmd_pretrain("no equals sign\n", dir, NULL) == BXF_E_PARSE);

  EXPECT(bxf_cmd_pretrain(kPretrain, dir, &summary) == BXF_OK);
  EXPECT(summary != NULL && strstr(summary, "\"command\":\"pretrain\"") != NULL);
  bxf_string_free(summary);
  summary = NULL;
  EXPECT(strcmp(bxf_last_error(), "") == 0);

  snprintf(path, sizeof path, "%s/pretrained.bxf", dir);
  EXPECT(bxf_network_load(path, &net) == BXF_OK);
  EXPECT(bxf_network_info(net, &in_dim, &classes, &layers, &binarized) == BXF_OK);
  EXPECT(in_dim == 2 && classes == 2 && layers == 3 && binarized == 0);
  EXPECT(bxf_network_forward(net, x, 3, a, 6) == BXF_OK);
  EXPECT(bxf_network_forward(net, x, 3, a, 5) == BXF_E_DIMENSION);
  EXPECT(bxf_network_forward(net, x, 0, a, 6) == BXF_E_ARGUMENT);
  /* a full-precision hidden layer cannot run on bits */
  EXPECT(bxf_binary_forward(net, x, 3, a, 6) == BXF_E_CONTRACT);

  EXPECT(bxf_cmd_binarize(kBinarize, path, dir, &summary) == BXF_OK);
  EXPECT(summary != NULL && strstr(summary, "q_ours") != NULL);
  bxf_string_free(summary);
  summary = NULL;

  snprintf(path, sizeof path, "%s/binary.bxf", dir);
  EXPECT(bxf_network_load(path, &bin) == BXF_OK);
  EXPECT(bxf_network_info(bin, NULL, NULL, NULL, &binarized) == BXF_OK);
  EXPECT(binarized == 1);
  EXPECT(bxf_network_forward(bin, x, 3, a, 6) == BXF_OK);
  EXPECT(bxf_binary_forward(bin, x, 3, b, 6) == BXF_OK);
  for (i = 0; i < 6; ++i) EXPECT(fabs(a[i] - b[i]) <= 1e-12);

  snprintf(path, sizeof path, "%s/resaved.bxf", dir);
  EXPECT(bxf_network_save(bin, path) == BXF_OK);

  EXPECT(bxf_cmd_infer_bench("samples=50\nrepeats=2\n", path, dir, &summary) == BXF_OK);
  EXPECT(summary != NULL && strstr(summary, "\"signs_match\":true") != NULL);
  bxf_string_free(summary);
  summary = NULL;

  EXPECT(bxf_cmd_noise_probe("dataset=synthetic-gaussians:n=200,dim=2,classes=2,informative=2\nscales=0\n",
                             path, dir, NULL) == BXF_E_CONTRACT);

  EXPECT(bxf_cmd_toy_mse(dir, &summary) == BXF_OK);
  EXPECT(summary != NULL && strstr(summary, "\"naive_lower_mse_higher_loss\":true") != NULL);
  bxf_string_free(summary);

  bxf_network_free(net);
  bxf_network_free(bin);
  bxf_network_free(NULL);

  if (failures) fprintf(stderr, "%d check(s) failed\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
