#include "rlnst/oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rlnst/autograd.hpp"
#include "rlnst/layers.hpp"
#include "rlnst/losses.hpp"
#include "rlnst/ops.hpp"

namespace rlnst {

namespace {

using D = Tensor<double>;

constexpr double kSmoothStep = 1e-3;
constexpr double kTolerance = 1e-4;
constexpr double kPolicyTolerance = 1e-3;
constexpr std::int64_t kMaxPoints = 96;

// Worst relative error over every tensor in `wrt`; tensors larger than
// kMaxPoints are probed at evenly spread entries.
double check(const std::function<D()>& loss, const std::vector<D>& wrt, double h) {
  for (auto x : wrt) x.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (auto x : wrt) {
    std::vector<double> analytic(x.grad().begin(), x.grad().end());
    std::vector<std::int64_t> idx;
    const auto n = x.numel();
    const auto count = std::min(n, kMaxPoints);
    for (std::int64_t i = 0; i < count; ++i) idx.push_back(i * n / count);
    auto numeric = finite_diff_gradient([&] { return loss().item(); }, x, idx, h);
    worst = std::max(worst, max_relative_error(analytic, numeric.data(), idx));
  }
  return worst;
}

D leaf(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  auto t = rng.uniform_tensor<double>(std::move(shape), lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Uniform on [-1, -margin] u [margin, 1], away from kinks at zero.
D away_from_zero(Rng& rng, Shape shape, double margin = 0.05) {
  auto t = leaf(rng, std::move(shape));
  for (auto& v : t.data()) v = (v < 0 ? -1.0 : 1.0) * (margin + (1.0 - margin) * std::abs(v));
  return t;
}

D probe(Rng& rng, const D& like) { return rng.uniform_tensor<double>(like.shape(), -1, 1); }

}  // namespace

std::vector<GradCheckResult> run_oracle_suite(std::uint64_t seed, double kinked_step) {
  std::vector<GradCheckResult> out;
  Rng rng(seed);
  auto add = [&](const char* name, double err, double step, double tol = kTolerance) {
    out.push_back({name, err, tol, step});
  };
  auto weighted = [&](const std::function<D()>& f) {
    auto p = probe(rng, f());
    return [f, p] { return sum(f() * p); };
  };

  {
    auto a = leaf(rng, {3, 4}), b = leaf(rng, {4, 2});
    add("matmul 3x4 * 4x2", check(weighted([=] { return matmul(a, b); }), {a, b}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {2, 3, 4, 5}), y = leaf(rng, {2, 3, 4, 5}, 0.5, 2.0);
    auto f = weighted([=] { return x * y + x / y - y + x * 0.5; });
    add("elementwise add/sub/mul/div", check(f, {x, y}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 3, 6, 6}), pos = leaf(rng, {1, 3, 6, 6}, 0.5, 2.0);
    auto f = weighted([=] { return sigmoid(x) + tanh(x) + exp(x) + square(x) + log(pos); });
    add("sigmoid/tanh/exp/square/log", check(f, {x, pos}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = away_from_zero(rng, {1, 3, 8, 8});
    add("relu/abs", check(weighted([=] { return relu(x) + abs(x) * 0.3; }), {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {2, 3, 4, 4});
    auto f = weighted([=] {
      auto t = transpose(reshape(x, {6, 16}));
      return concat<double>({reshape(t, {2, 3, 4, 4}), select_item(x, 1)}, 0);
    });
    add("reshape/transpose/concat/select", check(f, {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 2, 8, 8}), w = leaf(rng, {3, 2, 3, 3}), b = leaf(rng, {3});
    add("conv2d 3x3 stride 1", check(weighted([=] { return conv2d_reflect(x, w, b, 1); }), {x, w, b}, kSmoothStep),
        kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 2, 8, 8}), w = leaf(rng, {2, 2, 3, 3}), b = leaf(rng, {2});
    add("conv2d 3x3 stride 2", check(weighted([=] { return conv2d_reflect(x, w, b, 2); }), {x, w, b}, kSmoothStep),
        kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 3, 16, 16}), w = leaf(rng, {2, 3, 9, 9}, -0.1, 0.1), b = leaf(rng, {2});
    add("conv2d 9x9 stride 1", check(weighted([=] { return conv2d_reflect(x, w, b, 1); }), {x, w, b}, kSmoothStep),
        kSmoothStep);
  }
  {
    auto x = leaf(rng, {2, 3, 5, 5}), g = leaf(rng, {3}), b = leaf(rng, {3});
    add("instance norm", check(weighted([=] { return instance_norm(x, g, b); }), {x, g, b}, kSmoothStep),
        kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 2, 4, 4});
    add("nearest upsampling", check(weighted([=] { return upsample_nearest(x, 2); }), {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 2, 7, 9});
    auto f = weighted([=] { return concat<double>({avg_pool_to(x, 3, 4), avg_pool_to(x, 8, 4)}, 2); });
    add("adaptive average pooling", check(f, {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {2, 4, 5, 5});
    add("gram matrix", check(weighted([=] { return gram(x); }), {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto x = leaf(rng, {1, 3, 8, 8});
    auto flow = rng.uniform_tensor<double>({1, 2, 8, 8}, -2.5, 2.5);
    add("bilinear warp", check(weighted([=] { return warp(x, flow); }), {x}, kSmoothStep), kSmoothStep);
  }
  {
    auto mu = leaf(rng, {2, 1, 4, 4}), ls = leaf(rng, {2, 1, 4, 4}, -1, 0.5);
    auto eps = rng.normal_tensor<double>({2, 1, 4, 4});
    auto f = [=] {
      ActorOutput<double> o;
      o.mu = mu;
      o.log_sigma = ls;
      auto s = sample_action(o, eps);
      return sum(s.log_prob) + sum(square(s.action));
    };
    add("gaussian sample and log-density", check(f, {mu, ls}, kSmoothStep), kSmoothStep);
  }
  {
    ParamRegistry<double> reg;
    auto cell = ConvGRUCell<double>::make(reg, "actor.gru", 3, 4, rng);
    auto x = leaf(rng, {1, 3, 6, 6}), h = leaf(rng, {1, 4, 6, 6});
    auto f = weighted([=] { return cell(x, h); });
    add("convolutional GRU", check(f, {x, h, cell.update.weight, cell.candidate.bias}, kSmoothStep), kSmoothStep);
  }
  {
    ParamRegistry<double> reg;
    auto block = ResidualBlock<double>::make(reg, "actor.res", 4, rng);
    auto x = leaf(rng, {1, 4, 8, 8});
    auto f = weighted([=] { return block(x); });
    add("residual block", check(f, {x, block.conv1.weight, block.norm2.gain}, kinked_step), kinked_step);
  }

  Networks<double> nets(ArchConfig{}, seed);
  auto content = rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
  auto style = rng.uniform_tensor<double>({1, 3, 16, 16}, 0, 1);
  const auto target = StyleTarget<double>::build(nets.features, style);

  {
    FeatureTaps<double> a, b;
    std::vector<D> wrt;
    for (std::size_t j = 0; j < a.size(); ++j) {
      const std::int64_t c = FeatureNet<double>::kWidths[2 * j + 1], s = 16 >> j;
      a[j] = leaf(rng, {1, c, s, s}, 0, 1);
      b[j] = rng.uniform_tensor<double>({1, c, s, s}, 0, 1);
    }
    add("content loss on feature maps", check([=] { return content_loss(a, b); }, {a[1]}, kSmoothStep),
        kSmoothStep);
    StyleTarget<double> fake;
    fake.image = style;
    for (std::size_t j = 0; j < b.size(); ++j) fake.grams[j] = gram(b[j]);
    add("style loss on feature maps", check([=] { return style_loss(a, fake); }, {a[0], a[1], a[2], a[3]}, kSmoothStep),
        kSmoothStep);
  }
  {
    auto m = leaf(rng, {1, 3, 16, 16}, 0, 1);
    add("content loss through the feature net",
        check([&] { return content_loss(nets.features, m, content); }, {m}, kinked_step), kinked_step);
    add("style loss through the feature net", check([&] { return style_loss(nets.features, m, target); }, {m}, kinked_step),
        kinked_step);
    add("total variation loss", check([&] { return tv_loss(m); }, {m}, kSmoothStep), kSmoothStep);
    add("combined loss", check([&] {
          return combined_loss(nets.features, m, content, target, LossWeights{}, LossMode::image).total;
        }, {m}, kinked_step),
        kinked_step);
  }
  {
    auto temporal = draw_temporal_inputs<double>(content.shape(), rng);
    auto f = [&] {
      auto o = nets.actor(content);
      auto m = nets.stylizer(sample_action(o, temporal.eps).action, o.skips).image;
      return compound_temporal_loss(nets.actor, nets.stylizer, content, m, temporal);
    };
    const auto& p = nets.params;
    add("temporal loss", check(f, {p.at("stylizer.out.bias"), p.at("stylizer.up1.weight"), p.at("actor.mu.weight")},
                               kinked_step),
        kinked_step);
  }
  {
    auto s = leaf(rng, {2, 3, 16, 16}, 0, 1), a = leaf(rng, {2, 1, 4, 4});
    auto f = [&] { return sum(nets.critic(s, a) * D::from({2}, {0.7, -1.3})); };
    add("critic", check(f, {s, a, nets.params.at("critic.conv3.weight"), nets.params.at("critic.fc.weight")},
                        kinked_step),
        kinked_step);
  }
  {
    auto s = rng.uniform_tensor<double>({2, 3, 16, 16}, 0, 1);
    auto eps = rng.normal_tensor<double>({2, 1, 4, 4});
    const double alpha = nets.alpha();
    auto f = [&] {
      auto o = nets.actor(s);
      auto sample = sample_action(o, eps);
      return mean(sample.log_prob * alpha - nets.critic(s, sample.action));
    };
    const auto& p = nets.params;
    add("policy objective", check(f, {p.at("actor.mu.weight"), p.at("actor.log_sigma.weight"), p.at("actor.conv1.weight"),
                                      p.at("actor.residual.conv2.weight"), p.at("actor.norm2.gain")},
                                  kinked_step),
        kinked_step, kPolicyTolerance);
  }
  return out;
}

}  // namespace rlnst
