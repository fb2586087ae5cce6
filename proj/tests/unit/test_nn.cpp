#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dynembed/errors.hpp"
#include "dynembed/nn/gradcheck.hpp"
#include "dynembed/nn/layers.hpp"
#include "dynembed/nn/params.hpp"
#include "dynembed/nn/tape.hpp"

using namespace dynembed;
using namespace dynembed::nn;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Contracts a non-scalar output with fixed random weights so every entry of
// the output influences the loss differently.
Var contract(Tape& tape, Var out, const Matrix& weights) {
  return tape.sum(tape.hadamard(out, tape.constant(weights)));
}

}  // namespace

TEST_CASE("primitive forward values") {
  Tape tape;
  Rng rng(1);
  Matrix x = random_matrix(3, 3, rng);
  CHECK(tape.value(tape.matmul(tape.constant(Matrix::Identity(3, 3)), tape.constant(x))) == x);
  Var zero = tape.constant(Matrix::Zero(1, 1));
  CHECK(tape.value(tape.sigmoid(zero))(0, 0) == 0.5);
  CHECK(tape.value(tape.tanh(zero))(0, 0) == 0.0);
  CHECK(tape.value(tape.relu(tape.constant(Matrix::Constant(1, 1, -2.0))))(0, 0) == 0.0);

  Matrix a(1, 2), b(1, 1);
  a << 1, 2;
  b << 3;
  Matrix expected(1, 3);
  expected << 1, 2, 3;
  CHECK(tape.value(tape.concat_cols(tape.constant(a), tape.constant(b))) == expected);
  CHECK(tape.value(tape.slice_cols(tape.constant(expected), 1, 2)) == expected.rightCols(2));
}

TEST_CASE("shape mismatches name both shapes") {
  Tape tape;
  Var a = tape.constant(Matrix::Zero(2, 3));
  Var b = tape.constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(tape.matmul(a, b), DimensionError);
  try {
    tape.matmul(a, b);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("2x3 and 2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(tape.add(a, tape.constant(Matrix::Zero(3, 2))), DimensionError);
  CHECK_THROWS_AS(tape.add_bias(a, tape.constant(Matrix::Zero(1, 2))), DimensionError);
  CHECK_THROWS_AS(tape.slice_cols(a, 2, 2), DimensionError);
  CHECK_THROWS_AS(tape.backward(a), DimensionError);
}

TEST_CASE("non-finite values are rejected") {
  Tape tape;
  Matrix bad = Matrix::Zero(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(tape.constant(bad), std::domain_error);
}

TEST_CASE("matmul backward matches finite differences") {
  Rng rng(3);
  ParamStore store;
  store.add("a", random_matrix(3, 4, rng));
  store.add("b", random_matrix(4, 2, rng));
  const Matrix r = random_matrix(3, 2, rng);
  auto report = finite_diff_check(
      [&](Tape& t) { return contract(t, t.matmul(t.param(store, "a"), t.param(store, "b")), r); },
      store, {.tolerance = 1e-6});
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("every primitive passes gradient checks over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    ParamStore store;
    store.add("x", random_matrix(3, 4, rng));
    store.add("y", random_matrix(3, 4, rng));
    store.add("w", random_matrix(5, 4, rng));
    store.add("b", random_matrix(1, 4, rng));
    store.add("v", random_matrix(4, 5, rng));
    const Matrix r34 = random_matrix(3, 4, rng);
    const Matrix r35 = random_matrix(3, 5, rng);
    const Matrix r38 = random_matrix(3, 8, rng);
    const Matrix r32 = random_matrix(3, 2, rng);
    SparseMatrix sparse = random_matrix(3, 4, rng).sparseView();
    for (Eigen::Index i = 0; i < sparse.nonZeros(); i += 2) sparse.valuePtr()[i] = 0.0;
    sparse.prune(0.0);
    Matrix target = random_matrix(3, 4, rng).cwiseMax(0.0);

    auto p = [&](Tape& t, const char* name) { return t.param(store, name); };
    struct Case {
      const char* name;
      LossClosure loss;
      double tolerance;
    };
    const std::vector<Case> cases{
        {"matmul_nt", [&](Tape& t) { return contract(t, t.matmul_nt(p(t, "x"), p(t, "w")), r35); }, 1e-6},
        {"sparse matmul", [&](Tape& t) { return contract(t, t.matmul(sparse, p(t, "v")), r35); }, 1e-6},
        {"add", [&](Tape& t) { return contract(t, t.add(p(t, "x"), p(t, "y")), r34); }, 1e-6},
        {"add_bias", [&](Tape& t) { return contract(t, t.add_bias(p(t, "x"), p(t, "b")), r34); }, 1e-6},
        {"scale", [&](Tape& t) { return contract(t, t.scale(p(t, "x"), -1.5), r34); }, 1e-6},
        {"concat", [&](Tape& t) { return contract(t, t.concat_cols(p(t, "x"), p(t, "y")), r38); }, 1e-6},
        {"slice", [&](Tape& t) { return contract(t, t.slice_cols(p(t, "x"), 1, 2), r32); }, 1e-6},
        {"hadamard", [&](Tape& t) { return contract(t, t.hadamard(p(t, "x"), p(t, "y")), r34); }, 1e-4},
        {"sigmoid", [&](Tape& t) { return contract(t, t.sigmoid(p(t, "x")), r34); }, 1e-4},
        {"tanh", [&](Tape& t) { return contract(t, t.tanh(p(t, "x")), r34); }, 1e-4},
        {"relu", [&](Tape& t) { return contract(t, t.relu(p(t, "x")), r34); }, 1e-4},
        {"loss", [&](Tape& t) { return t.weighted_recon_loss(p(t, "x"), target, 3.0); }, 1e-4},
    };
    for (const Case& c : cases) {
      CAPTURE(seed);
      CAPTURE(c.name);
      auto report = finite_diff_check(c.loss, store, {.tolerance = c.tolerance});
      CHECK(report.max_rel_error < c.tolerance);
    }
  }
}

TEST_CASE("dense_forward") {
  Rng rng(5);
  SUBCASE("zero weights with relu give zero") {
    ParamStore store;
    init_dense(store, "d", 4, 3, rng);
    store.at("d/weight").value.setZero();
    Tape tape;
    Var y = dense_forward(tape, store, "d", tape.constant(random_matrix(2, 4, rng)), Activation::kRelu);
    CHECK(tape.value(y) == Matrix::Zero(2, 3));
  }
  SUBCASE("scalar affine") {
    ParamStore store;
    store.add("d/weight", Matrix::Constant(1, 1, 2.0));
    store.add("d/bias", Matrix::Constant(1, 1, 1.0));
    Tape tape;
    Var y = dense_forward(tape, store, "d", tape.constant(Matrix::Constant(1, 1, 3.0)),
                          Activation::kIdentity);
    CHECK(tape.value(y)(0, 0) == 7.0);
  }
  SUBCASE("gradient on a random 5x8 layer") {
    ParamStore store;
    init_dense(store, "d", 8, 5, rng);
    store.at("d/bias").value = random_matrix(1, 5, rng);
    const Matrix x = random_matrix(4, 8, rng);
    const Matrix r = random_matrix(4, 5, rng);
    for (Activation a : {Activation::kIdentity, Activation::kSigmoid, Activation::kTanh,
                         Activation::kRelu}) {
      auto report = finite_diff_check(
          [&](Tape& t) { return contract(t, dense_forward(t, store, "d", t.constant(x), a), r); },
          store, {.tolerance = 1e-5});
      CHECK(report.max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("lstm_cell_forward") {
  Rng rng(8);
  SUBCASE("zero weights") {
    ParamStore store;
    init_lstm(store, "l", 3, 2, rng);
    for (const char* s : {"l/kernel", "l/recurrent", "l/bias"}) store.at(s).value.setZero();
    Tape tape;
    Matrix c0(1, 2);
    c0 << 0.8, -2.0;
    LstmState prev{tape.constant(Matrix::Zero(1, 2)), tape.constant(c0)};
    LstmState next = lstm_cell_forward(tape, store, "l", tape.constant(random_matrix(1, 3, rng)), prev);
    for (int j = 0; j < 2; ++j) {
      CHECK(tape.value(next.c)(0, j) == doctest::Approx(0.5 * c0(0, j)).epsilon(1e-15));
      CHECK(tape.value(next.h)(0, j) ==
            doctest::Approx(0.5 * std::tanh(0.5 * c0(0, j))).epsilon(1e-15));
    }
  }
  SUBCASE("saturated forget gate carries the cell state") {
    ParamStore store;
    init_lstm(store, "l", 3, 2, rng);
    for (const char* s : {"l/kernel", "l/recurrent", "l/bias"}) store.at(s).value.setZero();
    store.at("l/bias").value.middleCols(2, 2).setConstant(20.0);
    Tape tape;
    Matrix c0(1, 2);
    c0 << 0.7, -1.3;
    LstmState prev{tape.constant(Matrix::Zero(1, 2)), tape.constant(c0)};
    LstmState next = lstm_cell_forward(tape, store, "l", tape.constant(random_matrix(1, 3, rng)), prev);
    CHECK((tape.value(next.c) - c0).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("three step BPTT gradient") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng r(seed);
      ParamStore store;
      init_lstm(store, "l", 4, 3, r);
      store.at("l/bias").value = random_matrix(1, 12, r, 0.5);
      std::vector<Matrix> xs;
      for (int t = 0; t < 3; ++t) xs.push_back(random_matrix(2, 4, r));
      const Matrix w = random_matrix(2, 3, r);
      auto report = finite_diff_check(
          [&](Tape& t) {
            LstmState s = lstm_zero_state(t, 2, 3);
            for (const Matrix& x : xs) s = lstm_cell_forward(t, store, "l", t.constant(x), s);
            return contract(t, s.h, w);
          },
          store);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
  SUBCASE("gates in (0,1) and cell growth bounded by one per step") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng r(seed);
      ParamStore store;
      init_lstm(store, "l", 5, 4, r);
      store.at("l/kernel").value *= 5.0;
      Tape tape;
      LstmState s = lstm_zero_state(tape, 3, 4);
      for (int step = 0; step < 6; ++step) {
        const double prev_norm = tape.value(s.c).cwiseAbs().maxCoeff();
        s = lstm_cell_forward(tape, store, "l", tape.constant(random_matrix(3, 5, r)), s);
        CHECK(tape.value(s.c).cwiseAbs().maxCoeff() < prev_norm + 1.0);
        CHECK(tape.value(s.h).cwiseAbs().maxCoeff() < 1.0);
      }
    }
  }
  SUBCASE("forget bias initialized to one") {
    ParamStore store;
    init_lstm(store, "l", 3, 2, rng);
    const Matrix& b = store.at("l/bias").value;
    CHECK(b(0, 0) == 0.0);
    CHECK(b(0, 2) == 1.0);
    CHECK(b(0, 3) == 1.0);
    CHECK(b(0, 4) == 0.0);
  }
}

TEST_CASE("weighted_recon_loss") {
  Rng rng(2);
  Matrix t = random_matrix(3, 3, rng).cwiseMax(0.0);
  CHECK(weighted_recon_loss(t, t, 5.0).value == 0.0);

  Matrix target(2, 2);
  target << 0, 1, 0, 0;
  CHECK(weighted_recon_loss(Matrix::Zero(2, 2), target, 5.0).value == 25.0);

  Matrix pred = random_matrix(4, 4, rng);
  Matrix tgt = random_matrix(4, 4, rng).cwiseMax(0.0);
  double direct = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) direct += (pred(i, j) - tgt(i, j)) * (pred(i, j) - tgt(i, j));
  }
  CHECK(weighted_recon_loss(pred, tgt, 1.0).value == doctest::Approx(direct).epsilon(1e-14));

  Matrix nudged = t;
  nudged(1, 1) += 1e-12;
  CHECK(weighted_recon_loss(nudged, t, 5.0).value > 0.0);

  CHECK_THROWS_AS(weighted_recon_loss(pred, Matrix::Zero(3, 4), 1.0), DimensionError);
  CHECK_THROWS_AS(weighted_recon_loss(pred, tgt, 0.5), ArgumentError);
}

TEST_CASE("adam_step") {
  Rng rng(4);
  SUBCASE("zero gradient is the identity") {
    ParamStore store;
    Matrix w = random_matrix(3, 3, rng);
    store.add("w", w);
    for (int i = 0; i < 5; ++i) adam_step(store, {});
    CHECK(store.at("w").value == w);
    CHECK(store.step() == 5);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    ParamStore store;
    Matrix w = random_matrix(2, 3, rng);
    store.add("w", w);
    Matrix g = random_matrix(2, 3, rng) * 10.0;
    store.at("w").grad = g;
    adam_step(store, {.lr = 0.01});
    Matrix delta = store.at("w").value - w;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      CHECK(delta.data()[i] == doctest::Approx(-0.01 * (g.data()[i] > 0 ? 1 : -1)).epsilon(1e-6));
    }
    CHECK(store.at("w").grad == Matrix::Zero(2, 3));
  }
  SUBCASE("quadratic bowl converges") {
    ParamStore store;
    store.add("w", random_matrix(1, 5, rng));
    int steps = 0;
    while (store.at("w").value.norm() >= 1e-3 && steps < 500) {
      store.at("w").grad = 2.0 * store.at("w").value;
      adam_step(store, {.lr = 0.05});
      ++steps;
    }
    CHECK(store.at("w").value.norm() < 1e-3);
  }
}

TEST_CASE("forward passes are deterministic") {
  Rng rng(6);
  ParamStore store;
  init_lstm(store, "l", 4, 3, rng);
  Matrix x = random_matrix(2, 4, rng);
  auto run = [&] {
    Tape tape;
    LstmState s = lstm_zero_state(tape, 2, 3);
    s = lstm_cell_forward(tape, store, "l", tape.constant(x), s);
    return Matrix(tape.value(s.h));
  };
  CHECK(run() == run());
}

TEST_CASE("parameter container round trip") {
  Rng rng(9);
  ParamStore store;
  init_dense(store, "enc/0", 7, 3, rng);
  init_lstm(store, "lstm/0", 3, 2, rng);
  std::stringstream buf;
  write_params(store, buf);
  ParamStore loaded = read_params(buf);
  CHECK(loaded.names() == store.names());
  for (const auto& name : store.names()) CHECK(loaded.at(name).value == store.at(name).value);

  std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "DYNP");
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(read_params(truncated));
}
