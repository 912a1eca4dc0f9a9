// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "bxf/error.hpp"
#include "bxf/trainer.hpp"
#include "gradcheck.hpp"
#include "trainer_fixtures.hpp"

using namespace bxf;
using namespace bxf::testing;

TEST_CASE("partition_blocks groups consecutive quantizable layers") {
  const std::vector<std::size_t> dims{2, 4, 4, 4, 4, 4, 2};
  Network net = make_mlp(dims, 1);
  CHECK(net.quantizable_layers() == std::vector<std::size_t>{1, 2, 3, 4});
  using Blocks = std::vector<std::vector<std::size_t>>;
  CHECK(partition_blocks(net, 1) == Blocks{{1}, {2}, {3}, {4}});
  CHECK(partition_blocks(net, 2) == Blocks{{1, 2}, {3, 4}});
  CHECK(partition_blocks(net, 3) == Blocks{{1, 2, 3}, {4}});
  CHECK(partition_blocks(net, 9) == Blocks{{1, 2, 3, 4}});
  net.layers[2].keep_full_precision = true;
  CHECK(partition_blocks(net, 3) == Blocks{{1}, {3, 4}});
  CHECK_THROWS_AS(partition_blocks(net, 0), Error);
}

TEST_CASE("schedule freezes everything below the active layer") {
  const std::vector<std::size_t> dims{2, 4, 4, 4, 2};
  Network net = make_mlp(dims, 1);
  auto steps = make_schedule(net);
  REQUIRE(steps.size() == 4);
  CHECK(steps[0].layer == 1);
  CHECK(steps[0].phase == Phase::quantize);
  CHECK(steps[0].frozen == std::vector<bool>{true, false, false, false});
  CHECK(steps[1].phase == Phase::finetune);
  CHECK(steps[1].frozen == std::vector<bool>{true, true, false, false});
  CHECK(steps[2].layer == 2);
  CHECK(steps[2].frozen == std::vector<bool>{true, true, false, false});
  CHECK(steps[3].frozen == std::vector<bool>{true, true, true, false});
}

TEST_CASE("train_loss gradients match finite differences") {
  // alpha, log s, V and the upper weights; the latent only reaches the loss
  // through sgn and is checked against the surrogate below.
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Layer2Setup s = block_of_two(seed);
    std::mt19937_64 rng(seed);
    const std::size_t side = s.state.side();
    Tensor latent = random_tensor({4, 4}, rng, -1.5, 1.5);
    Tensor alpha = random_tensor({4}, rng, 0.2, 1.0);
    Tensor log_s = s.state.log_s;
    Tensor v = s.state.V;
    Tensor noise = random_tensor({side, side}, rng, -0.05, 0.05);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += noise[i];
    for (std::size_t i = 0; i < log_s.size(); ++i) log_s[i] += 0.1 * (static_cast<double>(i % 3) - 1.0);
    const Tensor upper = s.net.layers[3].weight;
    const Tensor batch = first_rows(s.data.features, 16);
    const std::vector<int> labels(s.data.labels.begin(), s.data.labels.begin() + 16);

    auto f = [&](ad::Tape& tape, const std::vector<ad::Var>& in) {
      QuantVars q{in[0], in[1], in[2], in[3], {in[4]}};
      return train_loss(tape, s.net, s.state, 2, q, batch, labels, s.cfg).total;
    };
    worst = std::max(worst, bxf::testing::gradient_error(f, {latent, alpha, log_s, v, upper}, {1, 2, 3, 4}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("latent gradient of the distance term follows the sign surrogate") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Layer2Setup s = block_of_two(seed);
    std::mt19937_64 rng(100 + seed);
    Tensor latent = random_tensor({4, 4}, rng, -1.5, 1.5);
    ad::Tape tape;
    QuantVars q = make_quant_vars(tape, s.net, s.state, 2, latent, Tensor::vector({1, 1, 1, 1}));
    const Tensor batch = first_rows(s.data.features, 8);
    const std::vector<int> labels(s.data.labels.begin(), s.data.labels.begin() + 8);
    LossTerms t = train_loss(tape, s.net, s.state, 2, q, batch, labels, s.cfg);
    tape.backward(t.distance);
    const Tensor got = q.latent.grad();

    const Tensor expect = surrogate_latent_gradient(s, latent);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-10));
  }
}

TEST_CASE("identity transform reduces train_loss to task plus proximity") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Network net = small_net(seed);
    Dataset data = small_data(seed);
    TrainConfig cfg = quick_config();
    cfg.variant = Variant::none;
    cfg.lambda = 7.5;
    BlockState state = open_layer(net, {}, 1, data, cfg);
    CHECK(state.V.rows() == 5);
    std::mt19937_64 rng(seed);
    Tensor latent = random_tensor({5, 4}, rng, -2.0, 2.0);
    Tensor alpha = random_tensor({4}, rng, 0.1, 1.0);
    const Tensor batch = first_rows(data.features, 20);
    const std::vector<int> labels(data.labels.begin(), data.labels.begin() + 20);

    ad::Tape tape;
    QuantVars q = make_quant_vars(tape, net, state, 1, latent, alpha);
    LossTerms t = train_loss(tape, net, state, 1, q, batch, labels, cfg);
    CHECK_FALSE(t.reg.has_value());

    Network probe = net;
    double prox = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const double sg = ad::sign_value(latent(i, j));
        probe.layers[1].weight(i, j) = alpha[j] * sg;
        prox += (latent(i, j) - sg) * (latent(i, j) - sg);
      }
    const double task = cross_entropy(forward(probe, batch, 1), labels);
    const double expect = task + cfg.lambda * prox + cfg.gamma * 20.0;
    CHECK(std::abs(t.total.value().item() - expect) <= 1e-10);
    CHECK(std::abs(t.task.value().item() - task) <= 1e-12);
  }
}

TEST_CASE("zero quantize epochs reproduces post-training binarization") {
  Network net = small_net(3);
  Dataset data = small_data(3);
  TrainConfig cfg = quick_config();
  cfg.epochs = 0;
  cfg.finetune_epochs = 0;
  for (Variant v : {Variant::none, Variant::aggregated}) {
    cfg.variant = v;
    RunResult r = run_bitat(net, data, cfg);
    CHECK(r.quantize_epochs == 0);
    for (std::size_t l : net.quantizable_layers()) {
      REQUIRE(r.net.layers[l].binary);
      const BinaryLayer ptq = quantize_mse(net.layers[l].weight);
      CHECK(r.net.layers[l].binary->bits == ptq.bits);
      for (std::size_t c = 0; c < ptq.alpha.size(); ++c)
        CHECK(r.net.layers[l].binary->alpha[c] == doctest::Approx(ptq.alpha[c]).epsilon(1e-14));
    }
    for (std::size_t l : {0, 3}) CHECK(r.net.layers[l].weight == net.layers[l].weight);
  }
}

TEST_CASE("zero finetune epochs leaves the upper layers untouched") {
  Network net = small_net(4);
  Dataset data = small_data(4);
  TrainConfig cfg = quick_config();
  cfg.finetune_epochs = 0;
  Rng rng = make_rng(4, "data");
  BlockState state = open_layer(net, {}, 1, data, cfg);
  quantize_layer(net, state, 1, data, cfg, rng);
  const Network before = net;
  std::vector<MetricsRow> rows;
  finetune_upper(net, 1, data, cfg, rng, &rows);
  CHECK(rows.empty());
  for (std::size_t l = 0; l < net.layers.size(); ++l) CHECK(net.layers[l].weight == before.layers[l].weight);
}

TEST_CASE("finalized layers keep their bits while later layers train") {
  Network net = small_net(5);
  Dataset data = small_data(5);
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  cfg.finetune_epochs = 2;
  Rng rng = make_rng(5, "data");
  BlockState state = open_layer(net, {}, 1, data, cfg);
  quantize_layer(net, state, 1, data, cfg, rng);
  finetune_upper(net, 1, data, cfg, rng);
  const BinaryLayer frozen = *net.layers[1].binary;
  const Tensor first = net.layers[0].weight;
  state = open_layer(net, state, 2, data, cfg);
  quantize_layer(net, state, 2, data, cfg, rng);
  finetune_upper(net, 2, data, cfg, rng);
  CHECK(*net.layers[1].binary == frozen);
  CHECK(net.layers[0].weight == first);
  CHECK_THROWS_AS(quantize_layer(net, state, 2, data, cfg, rng), Error);
}

TEST_CASE("quantizing out of order is a contract error") {
  Network net = small_net(6);
  Dataset data = small_data(6);
  TrainConfig cfg = quick_config();
  Rng rng = make_rng(6, "data");
  BlockState state = open_layer(net, {}, 2, data, cfg);
  try {
    quantize_layer(net, state, 2, data, cfg, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::contract);
  }
  CHECK_THROWS_AS(quantize_layer(net, state, 0, data, cfg, rng), Error);
}

TEST_CASE("metrics rows and CSV schema") {
  Network net = small_net(7);
  Dataset data = small_data(7);
  TrainConfig cfg = quick_config();
  cfg.epochs = 3;
  cfg.finetune_epochs = 2;
  RunResult r = run_bitat(net, data, cfg);
  std::size_t quant = 0, fine = 0;
  for (const MetricsRow& m : r.metrics) {
    if (m.phase == Phase::quantize) {
      ++quant;
      CHECK(m.qdist.has_value());
      CHECK(m.reg.has_value());
    } else {
      ++fine;
      CHECK_FALSE(m.qdist.has_value());
      CHECK_FALSE(m.reg.has_value());
    }
    CHECK(std::isfinite(m.task_loss));
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
  }
  CHECK(quant == 2 * cfg.epochs);
  CHECK(fine == 2 * cfg.finetune_epochs);
  CHECK(r.quantize_epochs == 2 * cfg.epochs);
  CHECK(r.q.q_orig > 0.0);
  CHECK(r.q.q_ours > 0.0);

  const std::string path = "test_trainer_metrics.csv";
  write_metrics_csv(r.metrics, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == kMetricsHeader);
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
    if (line.rfind("finetune,", 0) == 0) CHECK(line.find(",,,") != std::string::npos);
  }
  CHECK(count == r.metrics.size());
  std::remove(path.c_str());
}

TEST_CASE("run_bitat is deterministic") {
  Network net = small_net(8);
  Dataset data = small_data(8);
  TrainConfig cfg = quick_config();
  RunResult a = run_bitat(net, data, cfg);
  RunResult b = run_bitat(net, data, cfg);
  CHECK(serialize_network(a.net) == serialize_network(b.net));
  CHECK(a.q.q_ours == b.q.q_ours);
  REQUIRE(a.blocks.size() == b.blocks.size());
  for (std::size_t i = 0; i < a.blocks.size(); ++i) CHECK(a.blocks[i].V == b.blocks[i].V);
}

TEST_CASE("variants shape the transform state") {
  Network net = small_net(9);
  Dataset data = small_data(9);
  TrainConfig cfg = quick_config();
  cfg.epochs = 1;
  cfg.finetune_epochs = 0;

  cfg.variant = Variant::none;
  RunResult none = run_bitat(net, data, cfg);
  REQUIRE(none.blocks.size() == 1);
  CHECK(none.blocks[0].V == Tensor::identity(9));
  for (std::size_t i = 0; i < 9; ++i) CHECK(none.blocks[0].log_s[i] == 0.0);

  cfg.variant = Variant::intra;
  RunResult intra = run_bitat(net, data, cfg);
  CHECK(intra.blocks.size() == 2);

  cfg.variant = Variant::cross;
  RunResult cross = run_bitat(net, data, cfg);
  REQUIRE(cross.blocks.size() == 1);
  CHECK(cross.blocks[0].side() == 9);

  cfg.variant = Variant::aggregated;
  RunResult agg = run_bitat(net, data, cfg);
  REQUIRE(agg.blocks.size() == 1);
  // k = 3 groups the 5 inputs of layer 1 and the 4 of layer 2.
  CHECK(agg.blocks[0].side() == 6);
  CHECK(agg.blocks[0].reductions[0].k() == 3);
}

TEST_CASE("divergence is reported with the divergence code") {
  Network net = small_net(10);
  Dataset data = small_data(10);
  TrainConfig cfg = quick_config();
  cfg.lr_quant = 1e6;
  cfg.lambda = 1e3;
  cfg.epochs = 5;
  try {
    run_bitat(net, data, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::divergence);
  }
}

TEST_CASE("config text round trip") {
  TrainConfig c = quick_config();
  c.variant = Variant::intra;
  c.alpha_policy = AlphaPolicy::recompute;
  c.act_binarization = false;
  c.lambda = 0.1;
  ConfigMap m;
  c.to_map(m);
  m["extra"] = "kept";
  ConfigMap parsed = parse_config_text(format_config_text(m));
  CHECK(parsed == m);
  TrainConfig back = TrainConfig::from_map(parsed);
  CHECK(parsed == ConfigMap{{"extra", "kept"}});
  ConfigMap again;
  back.to_map(again);
  ConfigMap orig;
  c.to_map(orig);
  CHECK(again == orig);

  CHECK(parse_config_text("# comment\n  lambda = 3 # trailing\n\n") == ConfigMap{{"lambda", "3"}});
  CHECK_THROWS_AS(parse_config_text("a=1\na=2\n"), Error);
  CHECK_THROWS_AS(parse_config_text("novalue\n"), Error);
  ConfigMap bad{{"epochs", "-3"}};
  CHECK_THROWS_AS(TrainConfig::from_map(bad), Error);
  ConfigMap bad2{{"variant", "bogus"}};
  CHECK_THROWS_AS(TrainConfig::from_map(bad2), Error);
  ConfigMap bad3{{"lambda", "1x"}};
  CHECK_THROWS_AS(TrainConfig::from_map(bad3), Error);
}
