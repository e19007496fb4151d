#include <cmath>

#include <Eigen/Eigenvalues>
#include <doctest.h>

#include "rlnst/losses.hpp"
#include "rlnst/ops.hpp"
#include "test_util.hpp"

using namespace rlnst;
using namespace rlnst::testing;

namespace {

std::vector<std::int64_t> spread_indices(std::int64_t n, std::int64_t count) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < count; ++i) idx.push_back(i * n / count);
  return idx;
}

double sampled_gradcheck(const std::function<D()>& loss, D& x, std::int64_t count, double h) {
  x.zero_grad();
  backward(loss());
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  const auto idx = spread_indices(x.numel(), std::min(count, x.numel()));
  auto numeric = finite_diff_gradient([&] { return loss().item(); }, x, idx, h);
  return max_relative_error(analytic, numeric.data(), idx);
}

struct Fixture {
  Networks<double> nets{ArchConfig{}, 1};
  Rng rng{21};
  D content = rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
  D style = rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
  StyleTarget<double> target = StyleTarget<double>::build(nets.features, style);
};

}  // namespace

TEST_CASE("gram matrix closed forms") {
  auto g = gram_matrix(D::full({1, 1, 3, 5}, 0.7));
  CHECK(g.shape() == Shape{1, 1, 1});
  CHECK(g.item() == doctest::Approx(0.49).epsilon(1e-14));

  Rng rng(2);
  auto f = random(rng, {2, 5, 4, 3}, -1, 1, false);
  auto base = gram_matrix(f);
  auto scaled = gram_matrix(f * 3.0);
  for (std::int64_t i = 0; i < base.numel(); ++i) CHECK(std::abs(scaled.data()[i] - 9.0 * base.data()[i]) <= 1e-10);

  for (std::int64_t b = 0; b < 2; ++b) {
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        CHECK(std::abs(base.data()[b * 25 + i * 5 + j] - base.data()[b * 25 + j * 5 + i]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("gram matrices are positive semidefinite") {
  Rng rng(8);
  auto f = random(rng, {1, 16, 6, 6}, -1, 1, false);
  auto g = gram_matrix(f);
  Eigen::Map<const Eigen::Matrix<double, 16, 16, Eigen::RowMajor>> gm(g.data().data());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gm);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  for (int k = 0; k < 100; ++k) {
    Eigen::VectorXd x(16);
    for (int i = 0; i < 16; ++i) x[i] = rng.normal();
    CHECK(x.dot(gm * x) >= -1e-8);
  }
}

TEST_CASE("gram gradient") {
  Rng rng(3);
  auto f = random(rng, {2, 3, 4, 4});
  auto probe = random(rng, {2, 3, 3}, -1, 1, false);
  CHECK(gradcheck([&] { return sum(gram_matrix(f) * probe); }, f) <= 1e-6);
}

TEST_CASE("content loss") {
  Fixture fx;
  CHECK(content_loss(fx.nets.features, fx.content, fx.content).item() == 0.0);
  for (int k = 0; k < 5; ++k) {
    auto m = fx.rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
    CHECK(content_loss(fx.nets.features, m, fx.content).item() >= 0.0);
  }
  auto m = random(fx.rng, {1, 3, 16, 16}, 0, 1);
  CHECK(sampled_gradcheck([&] { return content_loss(fx.nets.features, m, fx.content); }, m, 64, 1e-6) <= 1e-4);
  CHECK_THROWS_AS(content_loss(fx.nets.features, m, D::zeros({1, 3, 16, 20})), DimensionError);
}

TEST_CASE("style loss") {
  Fixture fx;
  CHECK(style_loss(fx.nets.features, fx.style, fx.target).item() == 0.0);
  auto m = random(fx.rng, {1, 3, 16, 16}, 0, 1);
  const double once = style_loss(fx.nets.features, m, fx.target).item();
  CHECK(once > 0.0);
  CHECK(style_loss(fx.nets.features, m, fx.target).item() == once);
  CHECK(sampled_gradcheck([&] { return style_loss(fx.nets.features, m, fx.target); }, m, 64, 1e-6) <= 1e-4);

  SUBCASE("per-item values for a batch") {
    auto batch = concat<double>({fx.style, m.detach()}, 0);
    auto per_item = style_loss_per_item(fx.nets.features(batch), fx.target);
    CHECK(per_item.shape() == Shape{2});
    CHECK(std::abs(per_item.data()[0]) <= 1e-12);
    CHECK(per_item.data()[1] == doctest::Approx(once).epsilon(1e-10));
  }
}

TEST_CASE("style target cache") {
  Fixture fx;
  auto again = StyleTarget<double>::build(fx.nets.features, fx.style);
  for (std::size_t j = 0; j < fx.target.grams.size(); ++j) {
    CHECK(bitwise_equal(again.grams[j], fx.target.grams[j]));
    const auto c = fx.target.grams[j].dim(1);
    CHECK(c == FeatureNet<double>::kWidths[2 * j + 1]);
    for (std::int64_t a = 0; a < c; ++a) {
      for (std::int64_t b = 0; b < c; ++b) {
        CHECK(fx.target.grams[j].data()[a * c + b] == fx.target.grams[j].data()[b * c + a]);
      }
    }
  }
  CHECK_THROWS_AS(StyleTarget<double>::build(fx.nets.features, D::zeros({2, 3, 16, 16})), DimensionError);
}

TEST_CASE("total variation") {
  CHECK(tv_loss(D::full({1, 3, 5, 4}, 0.3)).item() == 0.0);
  CHECK(tv_loss(make({1, 1, 1, 2}, {0, 1})).item() == 0.5);
  // 2x2 single channel: vertical (2,0) and horizontal (1,-1) differences.
  CHECK(tv_loss(make({1, 1, 2, 2}, {0, 1, 2, 1})).item() == doctest::Approx((4.0 + 0.0 + 1.0 + 1.0) / 4.0));
  Rng rng(5);
  auto m = random(rng, {2, 3, 5, 6}, 0, 1);
  CHECK(gradcheck([&] { return tv_loss(m); }, m) <= 1e-4);
  CHECK_THROWS_AS(tv_loss(D::zeros({1, 3, 1, 1})), DegenerateStatisticsError);
}

TEST_CASE("warp") {
  Rng rng(6);
  auto x = random(rng, {1, 3, 6, 7}, 0, 1, false);
  CHECK(bitwise_equal(warp(x, D::zeros({1, 2, 6, 7})), x));

  auto ramp = D::zeros({1, 1, 4, 6});
  for (int y = 0; y < 4; ++y) {
    for (int i = 0; i < 6; ++i) ramp.data()[y * 6 + i] = i;
  }
  auto flow = D::zeros({1, 2, 4, 6});
  for (int i = 0; i < 24; ++i) flow.data()[i] = 1.0;  // dx = 1
  auto shifted = warp(ramp, flow);
  for (int y = 0; y < 4; ++y) {
    for (int i = 0; i < 5; ++i) CHECK(shifted.data()[y * 6 + i] == i + 1);
  }

  auto xg = random(rng, {2, 3, 5, 5}, 0, 1);
  auto fl = random(rng, {1, 2, 5, 5}, -1.7, 1.7, false);
  auto probe = random(rng, {2, 3, 5, 5}, -1, 1, false);
  CHECK(gradcheck([&] { return sum(warp(xg, fl) * probe); }, xg) <= 1e-4);
  CHECK_THROWS_AS(warp(xg, D::zeros({1, 2, 5, 4})), DimensionError);
}

TEST_CASE("synthetic motion") {
  Rng rng(7);
  auto flow = synth_motion<double>(40, 70, rng);
  CHECK(flow.shape() == Shape{2, 40, 70});

  MotionParams still;
  still.wavy_std = 0.0;
  auto coarse = D::zeros({2, 1, 1});
  auto fixed = assemble_motion(coarse, 12, 9, 5.0, -3.0, still.blur_size);
  for (std::int64_t i = 0; i < 12 * 9; ++i) {
    CHECK(fixed.data()[i] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(fixed.data()[12 * 9 + i] == doctest::Approx(-3.0).epsilon(1e-12));
  }

  MotionParams wavy_only;
  wavy_only.translation = 0.0;
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    auto f = synth_motion<double>(256, 256, rng, wavy_only);
    for (double v : f.data()) worst = std::max(worst, std::abs(v));
  }
  CHECK(worst < 1.0);

  Rng a(9), b(9);
  CHECK(bitwise_equal(synth_motion<double>(30, 30, a), synth_motion<double>(30, 30, b)));

  SUBCASE("blur preserves constants and mass of an impulse") {
    auto c = D::full({1, 7, 9}, 2.5);
    auto blurred = gaussian_blur(c, 100);
    for (double v : blurred.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
    auto impulse = D::zeros({1, 201, 201});
    impulse.data()[100 * 201 + 100] = 1.0;
    auto spread = gaussian_blur(impulse, 100);
    double total = 0;
    for (double v : spread.data()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("compound temporal loss") {
  Networks<double> nets(ArchConfig{}, 4);
  Rng rng(10);
  auto s = rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
  TemporalInputs<double> in;
  in.flow = D::zeros({1, 2, 16, 16});
  in.delta = D::zeros({1, 3, 16, 16});
  in.eps = rng.normal_tensor<double>({1, 1, 4, 4});

  auto out = nets.actor(s);
  auto m = nets.stylizer(sample_action(out, in.eps).action, out.skips).image;
  CHECK(compound_temporal_loss(nets.actor, nets.stylizer, s, m, in).item() == 0.0);

  auto drawn = draw_temporal_inputs<double>(s.shape(), rng);
  CHECK(drawn.flow.shape() == Shape{1, 2, 16, 16});
  CHECK(drawn.delta.shape() == s.shape());
  CHECK(drawn.eps.shape() == Shape{1, 1, 4, 4});
  double spread = 0;
  for (double v : drawn.delta.data()) spread += v * v;
  spread = std::sqrt(spread / static_cast<double>(drawn.delta.numel()));
  CHECK(spread > 0.0007);
  CHECK(spread < 0.0025);

  drawn.eps = in.eps;
  auto loss = [&] {
    auto o = nets.actor(s);
    auto mm = nets.stylizer(sample_action(o, drawn.eps).action, o.skips).image;
    return compound_temporal_loss(nets.actor, nets.stylizer, s, mm, drawn);
  };
  CHECK(loss().item() >= 0.0);
  auto& bias = nets.params.at("stylizer.up2_norm.bias");
  CHECK(gradcheck(loss, bias, 1e-6) <= 1e-4);
  auto& w = nets.params.at("actor.mu.weight");
  CHECK(sampled_gradcheck(loss, w, 32, 1e-6) <= 1e-4);

  CHECK_THROWS_AS(compound_temporal_loss(nets.actor, nets.stylizer, s, D::zeros({1, 3, 16, 12}), in),
                  DimensionError);
}

TEST_CASE("combined loss") {
  Fixture fx;
  auto m = random(fx.rng, {1, 3, 16, 16}, 0, 1, false);
  LossWeights zero{0, 0, 0};
  auto only_content = combined_loss(fx.nets.features, m, fx.content, fx.target, zero, LossMode::image);
  CHECK(only_content.total.item() == content_loss(fx.nets.features, m, fx.content).item());
  CHECK_FALSE(only_content.temporal.defined());

  auto flat = D::full({1, 3, 16, 16}, 0.4);
  auto flat_target = StyleTarget<double>::build(fx.nets.features, flat);
  CHECK(combined_loss(fx.nets.features, flat, flat, flat_target, LossWeights{}, LossMode::image).total.item() == 0.0);

  LossWeights w1, w2;
  w2.lambda = 2e5;
  const auto l1 = combined_loss(fx.nets.features, m, fx.content, fx.target, w1, LossMode::image);
  const auto l2 = combined_loss(fx.nets.features, m, fx.content, fx.target, w2, LossMode::image);
  CHECK(std::abs((l2.total.item() - l1.total.item()) - 1e5 * l1.style.item()) <= 1e-9 * std::abs(l2.total.item()));
  CHECK(l1.total.item() == doctest::Approx(l1.content.item() + 1e5 * l1.style.item() + 1e-7 * l1.tv.item()));

  VideoLossArgs<double> video;
  video.actor = &fx.nets.actor;
  video.stylizer = &fx.nets.stylizer;
  video.state = &fx.content;
  video.inputs = draw_temporal_inputs<double>(fx.content.shape(), fx.rng);
  CHECK_THROWS_AS(combined_loss(fx.nets.features, m, fx.content, fx.target, w1, LossMode::image, &video),
                  ArgumentError);
  CHECK_THROWS_AS(combined_loss(fx.nets.features, m, fx.content, fx.target, w1, LossMode::video), ArgumentError);
  auto v = combined_loss(fx.nets.features, m, fx.content, fx.target, w1, LossMode::video, &video);
  REQUIRE(v.temporal.defined());
  CHECK(v.total.item() == doctest::Approx(l1.total.item() + 1e2 * v.temporal.item()).epsilon(1e-12));

  CHECK_THROWS_AS(LossWeights({-1, 0, 0}).validate(), ArgumentError);
  LossWeights defaults;
  CHECK(defaults.lambda == 1e5);
  CHECK(defaults.beta == 1e-7);
  CHECK(defaults.zeta == 1e2);
}

TEST_CASE("temporal metric") {
  Rng rng(11);
  std::vector<D> frames(3, D::full({1, 3, 8, 8}, 0.3));
  std::vector<D> flows;
  for (int i = 0; i < 2; ++i) flows.push_back(rng.uniform_tensor<double>({1, 2, 8, 8}, -3, 3));
  CHECK(temporal_metric(frames, flows) == 0.0);

  std::vector<D> varied;
  for (int i = 0; i < 3; ++i) varied.push_back(rng.uniform_tensor<double>({1, 3, 8, 8}, 0, 1));
  const double base = temporal_metric(varied, flows);
  CHECK(base > 0.0);
  std::vector<D> shifted;
  for (const auto& f : varied) shifted.push_back(f + 0.125);
  CHECK(temporal_metric(shifted, flows) == doctest::Approx(base).epsilon(1e-12));

  std::vector<D> pair{D::full({1, 3, 4, 4}, 0.2), D::full({1, 3, 4, 4}, 0.3)};
  CHECK(temporal_metric(pair, {D::zeros({1, 2, 4, 4})}) == doctest::Approx(10.0));
  auto half = D::zeros({1, 1, 4, 4});
  for (int i = 0; i < 8; ++i) half.data()[i] = 1.0;
  CHECK(temporal_metric(pair, {D::zeros({1, 2, 4, 4})}, {half}) == doctest::Approx(10.0));

  CHECK_THROWS_AS(temporal_metric<double>({frames[0]}, {}), ArgumentError);
  CHECK_THROWS_AS(temporal_metric<double>(frames, {flows[0]}), ArgumentError);
}
