#include <gtest/gtest.h>

#include "falldet/tensor.hpp"

using namespace falldet;

TEST(Tensor, SizeMatchesShapeProduct) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(shape_numel(t.shape()), 24);
  for (long long i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], 0.0f);
}

TEST(Tensor, ConstructRejectsMismatchedData) {
  EXPECT_THROW(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}), ShapeError);
  EXPECT_THROW(Tensor<float>({0, 2}), ShapeError);
  EXPECT_THROW(Tensor<float>({-1}), ShapeError);
  EXPECT_THROW(Tensor<float>(Shape{}), ShapeError);
}

TEST(Tensor, ReshapeKeepsRowMajorOrder) {
  Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<float> r = t.reshaped({3, 2});
  for (long long i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], r[i]);
  EXPECT_EQ(r(0, 1), 2.0f);
  EXPECT_EQ(r(2, 1), 6.0f);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, IndexingAgreesWithFlatLayout) {
  Tensor<float> t({2, 3, 4});
  t(1, 2, 3) = 7.0f;
  EXPECT_EQ(t[1 * 12 + 2 * 4 + 3], 7.0f);
  Tensor<float> u({2, 2, 2, 2});
  u(1, 0, 1, 0) = 3.0f;
  EXPECT_EQ(u[8 + 0 + 2 + 0], 3.0f);
}

TEST(Tensor, CastPreservesValues) {
  Tensor<float> t({3}, {1.5f, -2.0f, 0.25f});
  Tensor<double> d = t.cast<double>();
  for (long long i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(d[i], static_cast<double>(t[i]));
}
