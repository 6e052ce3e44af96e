#include <gtest/gtest.h>

#include <cmath>

#include "hierprompt/encoder.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hierprompt;

TEST(Encoder, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto g = testing_support::gradcheck_case(seed);
    for (const auto& row : oracle::gradcheck(g.params, g.sequence, g.soft, g.weights, 1e-5, 1e-3))
      EXPECT_LT(row.rel_error, 1e-4) << row.tensor << " seed " << seed;
  }
}

TEST(Encoder, GradcheckWithProjectionlessSlotsAndTiedHead) {
  auto g = testing_support::gradcheck_case(3);
  EncoderConfig c = g.params.config;
  c.graph_dim = 0;
  c.tie_mlm = true;
  g.params = init_params(c, 3);
  g.soft = Matrix::Random(2, c.hidden);
  g.weights.graph_predictions = Matrix::Random(1, c.hidden);
  for (const auto& row : oracle::gradcheck(g.params, g.sequence, g.soft, g.weights, 1e-5, 1e-3))
    EXPECT_LT(row.rel_error, 1e-4) << row.tensor;
}

TEST(Encoder, ForwardIsDeterministicAndShaped) {
  const auto g = testing_support::gradcheck_case(4);
  const auto a = forward(g.params, g.sequence, g.soft);
  const auto b = forward(g.params, g.sequence, g.soft);
  EXPECT_EQ(a.hidden.rows(), 12);
  EXPECT_EQ(a.hidden.cols(), 16);
  EXPECT_TRUE(a.hidden == b.hidden);
  EXPECT_TRUE(a.hidden.allFinite());
}

TEST(Encoder, SoftVectorCountIsChecked) {
  const auto g = testing_support::gradcheck_case(5);
  EXPECT_THROW(forward(g.params, g.sequence, Matrix::Zero(1, 8)), Error);
  EXPECT_THROW(forward(g.params, g.sequence, Matrix::Zero(2, 7)), Error);
}

TEST(Encoder, ZeroNspHeadGivesOneHalf) {
  auto g = testing_support::gradcheck_case(6);
  g.params.nsp_w.setZero();
  g.params.nsp_b.setZero();
  const auto t = forward(g.params, g.sequence, g.soft);
  EXPECT_DOUBLE_EQ(sigmoid(nsp_logit(t, g.params)), 0.5);
}

TEST(Encoder, Pooling) {
  const auto g = testing_support::gradcheck_case(7);
  const auto t = forward(g.params, g.sequence, g.soft);
  EXPECT_TRUE(pool(t, Pooling::kCls) == t.hidden.row(0));
  // every position except CLS (0) and SEP (11)
  RowVector mean = RowVector::Zero(t.hidden.cols());
  for (int i = 1; i < 11; ++i) mean += t.hidden.row(i);
  mean /= 10.0;
  EXPECT_LT((pool(t, Pooling::kMean) - mean).norm(), 1e-12);
  EXPECT_EQ(parse_pooling("mean"), Pooling::kMean);
  EXPECT_EQ(pooling_name(Pooling::kCls), "cls");
  EXPECT_THROW(parse_pooling("max"), Error);
}

TEST(Encoder, ScalarFunctions) {
  EXPECT_NEAR(gelu(1.0), 0.5 * (1 + std::erf(1 / std::sqrt(2.0))), 1e-3);
  EXPECT_DOUBLE_EQ(gelu(0.0), 0.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  Matrix m(1, 3);
  m << 1000, 1000, 1000;
  softmax_rows(m);
  EXPECT_NEAR(m.sum(), 1.0, 1e-15);
}

TEST(Encoder, CheckpointRoundTrip) {
  const auto g = testing_support::gradcheck_case(8);
  const auto path = testing_support::scratch_dir("ckpt") / "enc.bin";
  save_checkpoint(g.params, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.hash(), g.params.hash());
  EXPECT_EQ(serialize_params(back), serialize_params(g.params));
  EXPECT_EQ(back.config.to_json(), g.params.config.to_json());
}

TEST(Encoder, CorruptCheckpointIsRejected) {
  const auto g = testing_support::gradcheck_case(9);
  const auto path = testing_support::scratch_dir("ckpt") / "enc.bin";
  save_checkpoint(g.params, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Encoder, ParamArithmetic) {
  const auto g = testing_support::gradcheck_case(10);
  auto z = g.params.zeros_like();
  EXPECT_EQ(z.squared_norm(), 0.0);
  z.add_scaled(g.params, 2.0);
  EXPECT_NEAR(z.squared_norm(), 4 * g.params.squared_norm(), 1e-9);
  std::size_t n = 0;
  g.params.for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  EXPECT_EQ(g.params.parameter_count(), n);
  EXPECT_TRUE(g.params.all_finite());
}

TEST(Encoder, ConfigValidation) {
  EncoderConfig c;
  c.vocab_size = 10;
  c.heads = 3;  // 64 not divisible by 3
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(EncoderConfig::from_json(json{{"layers", 2}, {"hiden", 4}}), Error);
}
