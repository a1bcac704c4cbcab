#include <gtest/gtest.h>

#include "falldet/gradcheck.hpp"
#include "falldet/models.hpp"

using namespace falldet;

namespace {

Tensor<double> normal_tensor(const Shape& shape, Rng& rng, double sigma = 1.0) {
  Tensor<double> t(shape);
  std::normal_distribution<double> dist(0.0, sigma);
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

std::vector<int> cycle_labels(int n, int k) {
  std::vector<int> y(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = i % k;
  return y;
}

}  // namespace

TEST(GradCheck, SingleDenseLayerIsTight) {
  ModelSpec spec;
  spec.name = "dense-net";
  spec.branches = {{LayerSpec::dense(3), LayerSpec::softmax()}};
  spec.input_shapes = {{3}};
  spec.inputs = {BranchInput::SensorVector};
  spec.n_classes = 3;
  Network<double> net = Network<double>::build(spec, 5);
  Rng rng = make_rng(5);
  auto res = grad_check(net, {normal_tensor({4, 3}, rng)}, cycle_labels(4, 3));
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst_param << "[" << res.worst_index << "]";
}

TEST(GradCheck, FrozenMaskDropoutIsTight) {
  ModelSpec spec;
  spec.name = "dropout-net";
  spec.branches = {{LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dropout(0.4),
                    LayerSpec::dense(3), LayerSpec::softmax()}};
  spec.input_shapes = {{5}};
  spec.inputs = {BranchInput::SensorVector};
  spec.n_classes = 3;
  Network<double> net = Network<double>::build(spec, 9);
  Rng rng = make_rng(9);
  auto res = grad_check(net, {normal_tensor({4, 5}, rng)}, cycle_labels(4, 3));
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst_param << "[" << res.worst_index << "]";
}

TEST(GradCheck, CamCnnArchitectureAtReducedInput) {
  // the single-camera architecture with an 8x8 input instead of 32x32
  ModelSpec spec = build_cam_cnn();
  spec.input_shapes = {{1, 8, 8}};
  Network<double> net = Network<double>::build(spec, 21);
  Rng rng = make_rng(21);
  // zero-mean inputs keep every conv channel alive; near-dead channels put
  // batchnorm into its epsilon regime where finite differences lose accuracy
  Tensor<double> x = normal_tensor({3, 1, 8, 8}, rng);
  auto res = grad_check(net, {x}, cycle_labels(3, 12));
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst_param << "[" << res.worst_index << "]";
}

TEST(GradCheck, MultiBranchConcatNetwork) {
  ModelSpec spec;
  spec.name = "two-branch";
  spec.branches = {{LayerSpec::conv2d(2, 3, 3), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                    LayerSpec::batchnorm(), LayerSpec::flatten()},
                   {LayerSpec::conv1d(3, 3), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                    LayerSpec::batchnorm(), LayerSpec::flatten()}};
  spec.input_shapes = {{1, 7, 7}, {1, 9}};
  spec.inputs = {BranchInput::Camera, BranchInput::SensorSequence};
  spec.head = {LayerSpec::dense(6), LayerSpec::relu(), LayerSpec::dropout(0.2), LayerSpec::dense(4),
               LayerSpec::softmax()};
  spec.n_classes = 4;
  Network<double> net = Network<double>::build(spec, 33);
  Rng rng = make_rng(33);
  auto res = grad_check(net, {normal_tensor({4, 1, 7, 7}, rng), normal_tensor({4, 1, 9}, rng)},
                        cycle_labels(4, 4));
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst_param << "[" << res.worst_index << "]";
}

TEST(GradCheck, SampledCoordinateSubsetStaysSeeded) {
  ModelSpec spec;
  spec.name = "sampled";
  spec.branches = {{LayerSpec::dense(40), LayerSpec::relu(), LayerSpec::dense(4), LayerSpec::softmax()}};
  spec.input_shapes = {{10}};
  spec.inputs = {BranchInput::SensorVector};
  spec.n_classes = 4;
  Network<double> net = Network<double>::build(spec, 13);
  Rng rng = make_rng(13);
  Tensor<double> x = normal_tensor({4, 10}, rng);
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 25;
  opts.sample_seed = 3;
  auto r1 = grad_check(net, {x}, cycle_labels(4, 4), opts);
  auto r2 = grad_check(net, {x}, cycle_labels(4, 4), opts);
  EXPECT_LT(r1.max_rel_error, 1e-6);
  EXPECT_EQ(r1.worst_param, r2.worst_param);
  EXPECT_EQ(r1.worst_index, r2.worst_index);
}
