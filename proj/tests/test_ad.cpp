#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "vepm/ad/gradcheck.hpp"
#include "vepm/ad/ops.hpp"
#include "vepm/ad/parameter_store.hpp"
#include "vepm/ad/tape.hpp"
#include "vepm/cli/verify.hpp"
#include "vepm/core/rng.hpp"

using namespace vepm;
using namespace vepm::ad;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST(Softmax, TemperatureExamples) {
  Tape tape;
  const Matrix s1 = row_softmax_with_temperature(tape.constant(Matrix{{1, 2}}), 1.0).value();
  EXPECT_NEAR(s1(0, 0), 0.26894, 1e-5);
  EXPECT_NEAR(s1(0, 1), 0.73106, 1e-5);
  const Matrix s2 = row_softmax_with_temperature(tape.constant(Matrix{{1, 2}}), 0.5).value();
  EXPECT_NEAR(s2(0, 0), 0.11920, 1e-5);
  EXPECT_NEAR(s2(0, 1), 0.88080, 1e-5);
  // Scalar oracle: e^{x/tau} / sum e^{x/tau}.
  const double e1 = std::exp(1.0 / 0.5), e2 = std::exp(2.0 / 0.5);
  EXPECT_NEAR(s2(0, 0), e1 / (e1 + e2), 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Tape tape;
  Matrix x = random_matrix(7, 5, 3, -50, 50);
  Matrix shifted = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) shifted(r, c) += 1000.0 * static_cast<double>(r);
  for (double tau : {0.01, 1.0, 30.0}) {
    const Matrix a = row_softmax_with_temperature(tape.constant(x), tau).value();
    const Matrix b = row_softmax_with_temperature(tape.constant(shifted), tau).value();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        s += a(r, c);
        EXPECT_NEAR(a(r, c), b(r, c), 1e-12);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  EXPECT_THROW(row_softmax_with_temperature(tape.constant(x), 0.0), std::invalid_argument);
}

TEST(Backward, SumGivesOnes) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, random_matrix(3, 4, 1));
  Tape tape;
  tape.backward(reduce_sum(tape.parameter(store, "W")), store);
  for (double g : store.grad("W").data()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceW) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, random_matrix(3, 4, 2));
  Tape tape;
  Var w = tape.parameter(store, "W");
  tape.backward(reduce_sum(mul(w, w)), store);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(store.grad("W")[i], 2.0 * store.value("W")[i]);
}

TEST(Backward, RejectsNonScalarLoss) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, Matrix(2, 2, 1.0));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(store, "W"), store), ShapeError);
}

TEST(Backward, ShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(matmul(tape.constant(Matrix(2, 3)), tape.constant(Matrix(2, 3))), ShapeError);
  EXPECT_THROW(add(tape.constant(Matrix(2, 3)), tape.constant(Matrix(3, 2))), ShapeError);
}

TEST(Backward, CheckFiniteRejectsNan) {
  Tape tape(Tape::Options{true});
  EXPECT_THROW(tape.constant(Matrix(1, 1, std::nan(""))), std::domain_error);
  EXPECT_THROW(log(tape.constant(Matrix(1, 1, 0.0))), std::domain_error);
}

TEST(Backward, Deterministic) {
  auto run = [] {
    ParameterStore store;
    store.add("W", ParamGroup::Generative, random_matrix(6, 4, 9));
    store.add("b", ParamGroup::Generative, random_matrix(1, 4, 10));
    Tape tape;
    Var x = tape.constant(random_matrix(5, 6, 11));
    Var h = add(matmul(x, tape.parameter(store, "W")), tape.parameter(store, "b"));
    Var y = dropout(softplus(h), 0.5, 42, true);
    tape.backward(reduce_sum(log_softmax_rows(y)), store);
    return std::make_pair(store.grad("W"), store.grad("b"));
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first.data(), b.first.data());
  EXPECT_EQ(a.second.data(), b.second.data());
}

TEST(Ops, ConcatThenSliceIsIdentity) {
  Tape tape;
  const Matrix a = random_matrix(4, 2, 1), b = random_matrix(4, 3, 2), c = random_matrix(4, 1, 3);
  Var cat = concat_columns({tape.constant(a), tape.constant(b), tape.constant(c)});
  EXPECT_EQ(slice_columns(cat, 0, 2).value(), a);
  EXPECT_EQ(slice_columns(cat, 2, 5).value(), b);
  EXPECT_EQ(slice_columns(cat, 5, 6).value(), c);
}

TEST(Ops, GatherAllRowsIsIdentity) {
  Tape tape;
  const Matrix a = random_matrix(5, 3, 4);
  EXPECT_EQ(gather_rows(tape.constant(a), {0, 1, 2, 3, 4}).value(), a);
  EXPECT_EQ(gather_rows(tape.constant(a), {3}).value(), (Matrix{{a(3, 0), a(3, 1), a(3, 2)}}));
}

TEST(Ops, BlockSumColumns) {
  Tape tape;
  Matrix m{{1, 2, 3, 4}, {5, 6, 7, 8}};
  EXPECT_EQ(block_sum_columns(tape.constant(m), 2).value(), (Matrix{{3, 7}, {11, 15}}));
  EXPECT_THROW(block_sum_columns(tape.constant(m), 3), std::invalid_argument);
}

TEST(Ops, DropoutIdentityWhenEvaluating) {
  Tape tape;
  const Matrix a = random_matrix(4, 4, 5);
  EXPECT_EQ(dropout(tape.constant(a), 0.5, 1, false).value(), a);
  EXPECT_EQ(dropout(tape.constant(a), 0.0, 1, true).value(), a);
}

TEST(GradCheck, QuadraticIsExact) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, random_matrix(4, 3, 7));
  auto build = [](Tape& t, const ParameterStore& s) {
    Var w = t.parameter(s, "W");
    return reduce_sum(mul(w, w));
  };
  EXPECT_LT(finite_difference_check(build, store, {1e-5, 12, 0, {}}).max_rel_error, 1e-8);
}

TEST(GradCheck, SoftplusChain) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, random_matrix(4, 3, 8));
  auto build = [](Tape& t, const ParameterStore& s) {
    return reduce_sum(softplus(softplus(scale(t.parameter(s, "W"), 1.5))));
  };
  EXPECT_LT(finite_difference_check(build, store, {1e-5, 12, 0, {}}).max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsNondeterministicBuilder) {
  ParameterStore store;
  store.add("W", ParamGroup::Generative, random_matrix(2, 2, 8));
  auto calls = std::make_shared<int>(0);
  auto build = [calls](Tape& t, const ParameterStore& s) {
    ++*calls;
    return reduce_sum(scale(t.parameter(s, "W"), static_cast<double>(*calls)));
  };
  EXPECT_THROW(finite_difference_check(build, store), std::runtime_error);
}

TEST(GradCheck, EveryPrimitiveBelowOneInAMillion) {
  const auto errors = cli::primitive_gradient_errors(0);
  EXPECT_GE(errors.size(), 25u);
  for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-6) << name;
}

TEST(ParameterStoreTest, CheckpointRoundTrip) {
  ParameterStore store;
  store.add("a", ParamGroup::Inference, random_matrix(2, 3, 1));
  store.add("b", ParamGroup::Generative, random_matrix(1, 1, 2));
  Checkpoint c = Checkpoint::from_store(store);
  c.meta["epoch"] = "12";
  const auto file = std::filesystem::temp_directory_path() / "vepm_ckpt_test.bin";
  save_checkpoint(c, file);
  const Checkpoint back = load_checkpoint(file);
  EXPECT_EQ(back.meta.at("epoch"), "12");
  ParameterStore other;
  other.add("a", ParamGroup::Inference, Matrix(2, 3));
  other.add("b", ParamGroup::Generative, Matrix(1, 1));
  back.restore(other);
  EXPECT_EQ(other.value("a"), store.value("a"));
  EXPECT_EQ(other.value("b"), store.value("b"));
  ParameterStore wrong;
  wrong.add("a", ParamGroup::Inference, Matrix(3, 2));
  EXPECT_THROW(back.restore(wrong), std::runtime_error);
}

TEST(ParameterStoreTest, DuplicateNameRejected) {
  ParameterStore store;
  store.add("a", ParamGroup::Inference, Matrix(1, 1));
  EXPECT_THROW(store.add("a", ParamGroup::Generative, Matrix(1, 1)), std::invalid_argument);
  EXPECT_EQ(store.names(ParamGroup::Inference), std::vector<std::string>{"a"});
}
