#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dynembed/errors.hpp"
#include "dynembed/models.hpp"
#include "dynembed/nn/gradcheck.hpp"
#include "dynembed/random.hpp"
#include "dynembed/sbm.hpp"

using namespace dynembed;
using namespace dynembed::models;

namespace {

graph::DynamicGraph random_graph(int n, int steps, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<graph::Snapshot> snaps;
  for (int t = 0; t < steps; ++t) {
    std::vector<graph::Edge> edges;
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        if (rng.bernoulli(p)) edges.push_back({u, v, 1.0});
      }
    }
    snaps.emplace_back(n, std::move(edges), false);
  }
  return graph::DynamicGraph(std::move(snaps));
}

ModelSpec micro_spec(ModelKind kind, int n, int lb, int d) {
  ModelSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.lookback = lb;
  spec.embed_dim = d;
  switch (kind) {
    case ModelKind::kAE: spec.encoder_widths = {5, d}; break;
    case ModelKind::kRNN: spec.lstm_widths = {5, d}; break;
    case ModelKind::kAERNN:
      spec.encoder_widths = {5};
      spec.lstm_widths = {d};
      break;
  }
  spec.decoder_widths = {5, n};
  return spec;
}

constexpr ModelKind kKinds[] = {ModelKind::kAE, ModelKind::kRNN, ModelKind::kAERNN};

}  // namespace

TEST_CASE("get_architecture_input") {
  auto g = random_graph(3, 2, 0.6, 4);
  std::vector<SparseMatrix> window{g.adjacency(0), g.adjacency(1)};
  const std::vector<int> nodes{2, 0};

  SUBCASE("lookback one is the neighborhood row") {
    auto in = get_architecture_input(std::span(window).first(1), ModelKind::kAE, nodes);
    REQUIRE(in.steps.size() == 1);
    CHECK(Matrix(in.steps[0]).row(0) == Matrix(g.adjacency(0)).row(2));
  }
  SUBCASE("AE concatenates rows in time order") {
    auto in = get_architecture_input(window, ModelKind::kAE, nodes);
    REQUIRE(in.steps.size() == 1);
    CHECK(in.steps[0].cols() == 6);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      Matrix row = Matrix(in.steps[0]).row(i);
      CHECK(row.leftCols(3) == Matrix(g.adjacency(0)).row(nodes[i]));
      CHECK(row.rightCols(3) == Matrix(g.adjacency(1)).row(nodes[i]));
    }
  }
  SUBCASE("recurrent kinds get one matrix per step") {
    for (ModelKind kind : {ModelKind::kRNN, ModelKind::kAERNN}) {
      auto in = get_architecture_input(window, kind, nodes);
      REQUIRE(in.steps.size() == 2);
      for (int k = 0; k < 2; ++k) {
        CHECK(in.steps[k].cols() == 3);
        CHECK(Matrix(in.steps[k]).row(0) == Matrix(g.adjacency(k)).row(2));
      }
    }
  }
}

TEST_CASE("spec validation") {
  ModelSpec spec = micro_spec(ModelKind::kAE, 6, 2, 3);
  CHECK_NOTHROW(spec.validate());
  spec.encoder_widths.back() = 4;
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
  spec = micro_spec(ModelKind::kRNN, 6, 2, 3);
  spec.decoder_widths.back() = 5;
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
  spec = micro_spec(ModelKind::kAERNN, 6, 2, 3);
  spec.encoder_widths = {0};
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
  for (ModelKind kind : kKinds) CHECK_NOTHROW(default_spec(kind, 1000, 3, 128).validate());
}

TEST_CASE("forward shapes and output range") {
  auto g = random_graph(8, 3, 0.4, 1);
  std::vector<SparseMatrix> window{g.adjacency(0), g.adjacency(1)};
  const std::vector<int> nodes{0, 3, 5};
  for (ModelKind kind : kKinds) {
    Model model(micro_spec(kind, 8, 2, 3), 7);
    auto in = get_architecture_input(window, kind, nodes);
    Matrix emb = model.embed_batch(in);
    Matrix pred = model.predict_batch(in);
    CHECK(emb.rows() == 3);
    CHECK(emb.cols() == 3);
    CHECK(pred.rows() == 3);
    CHECK(pred.cols() == 8);
    CHECK(pred.minCoeff() > 0.0);
    CHECK(pred.maxCoeff() < 1.0);
  }
  SUBCASE("wrong input shape") {
    Model model(micro_spec(ModelKind::kAE, 8, 2, 3), 7);
    auto in = get_architecture_input(window, ModelKind::kRNN, nodes);
    CHECK_THROWS_AS(model.predict_batch(in), DimensionError);
  }
}

TEST_CASE("AE with zero weights predicts the output bias") {
  auto g = random_graph(8, 2, 0.5, 2);
  std::vector<SparseMatrix> window{g.adjacency(0), g.adjacency(1)};
  Model model(micro_spec(ModelKind::kAE, 8, 2, 3), 3);
  Rng rng(1);
  for (auto& [name, p] : model.params()) {
    if (name.ends_with("/weight")) p.value.setZero();
    if (name.ends_with("/bias")) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-1, 1);
    }
  }
  const Matrix& b = model.params().at("dec/1/bias").value;
  Matrix pred = model.predict_batch(get_architecture_input(window, ModelKind::kAE, std::vector<int>{0, 4, 7}));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) CHECK(pred(r, c) == doctest::Approx(1.0 / (1.0 + std::exp(-b(0, c)))));
  }
}

TEST_CASE("AERNN with an identity pre-encoder equals RNN") {
  const int n = 7, lb = 3, d = 4;
  ModelSpec rnn_spec = micro_spec(ModelKind::kRNN, n, lb, d);
  rnn_spec.lstm_widths = {d};
  ModelSpec aernn_spec = micro_spec(ModelKind::kAERNN, n, lb, d);
  aernn_spec.encoder_widths = {n};
  aernn_spec.encoder_activation = nn::Activation::kIdentity;
  Model rnn(rnn_spec, 11);
  Model aernn(aernn_spec, 12);
  aernn.params().at("enc/0/weight").value = Matrix::Identity(n, n);
  aernn.params().at("enc/0/bias").value.setZero();
  for (const auto& [name, p] : rnn.params()) aernn.params().at(name).value = p.value;

  auto g = random_graph(n, lb, 0.5, 9);
  std::vector<SparseMatrix> window{g.adjacency(0), g.adjacency(1), g.adjacency(2)};
  const std::vector<int> nodes{0, 1, 2, 3, 4, 5, 6};
  Matrix a = rnn.predict_batch(get_architecture_input(window, ModelKind::kRNN, nodes));
  Matrix b = aernn.predict_batch(get_architecture_input(window, ModelKind::kAERNN, nodes));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("first-layer parameter counts") {
  const int n = 1000, width = 500;
  for (int lb = 1; lb <= 10; ++lb) {
    ModelSpec ae = default_spec(ModelKind::kAE, n, lb, 128);
    ModelSpec rnn = default_spec(ModelKind::kRNN, n, lb, 128);
    ae.encoder_widths.front() = width;
    rnn.lstm_widths.front() = width;
    Model a(ae, 0), r(rnn, 0);
    const auto ae_first = a.params().at("enc/0/weight").value.size();
    const auto rnn_first = r.params().at("lstm/0/kernel").value.size();
    CHECK(ae_first == static_cast<Eigen::Index>(n) * lb * width);
    CHECK(rnn_first == static_cast<Eigen::Index>(n) * 4 * width);
    if (lb >= 4) CHECK(ae_first >= rnn_first);
  }
}

TEST_CASE("end-to-end loss gradients match finite differences") {
  const int n = 6, lb = 2, d = 3;
  for (ModelKind kind : kKinds) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto g = random_graph(n, lb + 1, 0.5, seed);
      auto windows = graph::make_windows(g, lb, 0, lb + 1);
      REQUIRE(windows.size() == 1);
      const std::vector<int> nodes{0, 1, 2, 3, 4, 5};
      Model model(micro_spec(kind, n, lb, d), seed + 100);
      // Zero biases put ReLU units of isolated nodes exactly on the kink.
      Rng rng(seed);
      for (auto& [name, p] : model.params()) {
        if (name.ends_with("/bias")) p.value += Matrix::NullaryExpr(p.value.rows(), p.value.cols(), [&] { return rng.uniform(-0.5, 0.5); });
      }
      auto input = get_architecture_input(windows[0], kind, nodes);
      Matrix target = gather_rows(windows[0].target, nodes);
      auto report = nn::finite_diff_check(
          [&](nn::Tape& t) { return batch_loss(t, model, input, target, 5.0); }, model.params());
      CAPTURE(std::string(to_string(kind)));
      CAPTURE(seed);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("train") {
  // A fixed graph repeated over time.
  auto base = random_graph(10, 1, 0.3, 5);
  graph::DynamicGraph g(std::vector<graph::Snapshot>(5, base.snapshot(0)));
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 5;
  cfg.adam.lr = 1e-2;
  cfg.seed = 3;

  for (ModelKind kind : kKinds) {
    CAPTURE(std::string(to_string(kind)));
    Model model(micro_spec(kind, 10, 2, 3), 1);
    TrainLog log = train(model, g, 0, 5, cfg);
    REQUIRE(log.epoch_loss.size() == 50);
    CHECK(log.epoch_loss.back() < log.epoch_loss.front());

    Model again(micro_spec(kind, 10, 2, 3), 1);
    CHECK(train(again, g, 0, 5, cfg).epoch_loss == log.epoch_loss);
  }

  Model model(micro_spec(ModelKind::kAE, 10, 2, 3), 1);
  TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(model, g, 0, 5, bad), ArgumentError);
  bad = cfg;
  bad.batch_size = 11;
  CHECK_THROWS_AS(train(model, g, 0, 5, bad), ArgumentError);
  CHECK_THROWS_AS(train(model, g, 0, 2, cfg), ArgumentError);
}

TEST_CASE("embed and predict_next") {
  auto g = random_graph(9, 4, 0.4, 8);
  for (ModelKind kind : kKinds) {
    Model model(micro_spec(kind, 9, 2, 3), 4);
    Matrix y = embed(model, g, 1);
    CHECK(y.rows() == 9);
    CHECK(y.cols() == 3);
    CHECK(y.allFinite());
    CHECK(embed(model, g, 1) == y);

    Matrix s = predict_next(model, g, 3);
    CHECK(s.rows() == 9);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(s.maxCoeff() <= 1.0);
    CHECK(s.diagonal().isZero(0.0));
    CHECK(s == s.transpose());
    CHECK(predict_next(model, g, 3) == s);

    CHECK_THROWS_AS(embed(model, g, 0), ArgumentError);
    CHECK_THROWS_AS(predict_next(model, g, 4), ArgumentError);
  }
}

TEST_CASE("checkpoint round trip") {
  auto g = random_graph(9, 3, 0.4, 8);
  for (ModelKind kind : kKinds) {
    Model model(micro_spec(kind, 9, 2, 3), 4);
    std::stringstream buf;
    write_checkpoint(model, buf);
    Model loaded = read_checkpoint(buf);
    CHECK(loaded.spec().kind == kind);
    CHECK(loaded.seed() == 4);
    CHECK(predict_next(loaded, g, 2) == predict_next(model, g, 2));
  }
  std::istringstream junk("dynembed-model 1\nkind=ae\nwidth\n");
  CHECK_THROWS_AS(read_checkpoint(junk), ParseError);
  std::istringstream unterminated("dynembed-model 1\nkind=ae\n");
  CHECK_THROWS_AS(read_checkpoint(unterminated), ParseError);
}

TEST_CASE("trained model separates held-out edges from non-edges") {
  sbm::SbmConfig cfg;
  cfg.block_sizes = {60, 60};
  cfg.p_in = 0.2;
  cfg.p_cross = 0.02;
  cfg.steps = 6;
  cfg.migrate_lo = 2;
  cfg.migrate_hi = 4;
  cfg.cross_edges_per_migrant = 5;
  cfg.seed = 21;
  auto data = sbm::generate_dynamic(cfg);
  const int n = 120;

  ModelSpec spec = default_spec(ModelKind::kAE, n, 2, 16);
  spec.encoder_widths = {64, 16};
  spec.decoder_widths = {64, n};
  Model model(spec, 5);
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 40;
  tc.seed = 5;
  train(model, data.graph, 0, 5, tc);

  Matrix scores = predict_next(model, data.graph, 4);
  const auto& truth = data.graph.snapshot(5);
  Matrix adj = graph::materialize_adjacency(truth);
  double edge_mean = 0;
  for (const auto& e : truth.edges()) edge_mean += scores(e.u, e.v);
  edge_mean /= static_cast<double>(truth.num_edges());
  Rng rng(1);
  double non_mean = 0;
  int sampled = 0;
  while (sampled < 10000) {
    const int u = static_cast<int>(rng.below(n)), v = static_cast<int>(rng.below(n));
    if (u == v || adj(u, v) != 0.0) continue;
    non_mean += scores(u, v);
    ++sampled;
  }
  non_mean /= sampled;
  CHECK(edge_mean > non_mean);
}
