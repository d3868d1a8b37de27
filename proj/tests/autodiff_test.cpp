#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tkgx/autodiff.hpp"
#include "tkgx/gradcheck.hpp"

namespace tkgx {
namespace {

void fill_random(Parameter& p, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : p.value) v = u(rng);
}

TEST(Autodiff, ForwardValues) {
  ad::Tape t(false);
  const auto a = t.constant({1.0, -2.0, 3.0});
  const auto b = t.constant({0.5, 0.5, 2.0});
  EXPECT_DOUBLE_EQ(t.dot(a, b).scalar(), 0.5 - 1.0 + 6.0);
  EXPECT_DOUBLE_EQ(t.leaky_relu(a, 0.01)[1], -0.02);
  EXPECT_DOUBLE_EQ(t.axpby(2.0, a, -1.0, b)[2], 4.0);
  const ad::Var parts[] = {a, b};
  EXPECT_EQ(t.concat(parts).size(), 6u);
  const std::size_t idx[] = {2, 0, 2};
  EXPECT_DOUBLE_EQ(t.gather(a, idx)[0], 3.0);
  EXPECT_DOUBLE_EQ(t.mean(a).scalar(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t.clamp(a, 0.0, 2.0)[2], 2.0);
}

TEST(Autodiff, WeightedSumOfTwoNeighbours) {
  ad::Tape t(false);
  const auto w = t.constant({0.25, 0.75});
  const ad::Var xs[] = {t.constant({1.0, 0.0}), t.constant({0.0, 1.0})};
  const auto h = t.weighted_sum(w, xs);
  EXPECT_DOUBLE_EQ(h[0], 0.25);
  EXPECT_DOUBLE_EQ(h[1], 0.75);
}

TEST(Autodiff, SingleParameterSoftmaxBce) {
  // f(w) = BCE of softmax([w, 0]) against label [1, 0].
  ParameterSet ps;
  auto& w = ps.add("w", 1, 1);
  w.value[0] = 0.3;
  auto loss = [&](ad::Tape& t) {
    const ad::Var parts[] = {t.param_vector(w), t.constant({0.0})};
    const std::vector<seg::SegmentId> seg = {0, 0};
    const auto p = t.segment_softmax(t.concat(parts), seg, 1);
    const auto y = t.constant({1.0, 0.0});
    const auto ny = t.constant({0.0, 1.0});
    const auto one = t.constant({1.0, 1.0});
    const auto term = t.add(t.mul(y, t.log(p)), t.mul(ny, t.log(t.axpby(1.0, one, -1.0, p))));
    return t.scale(t.mean(term), -1.0);
  };
  const auto r = check_gradients(ps, loss);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  // Analytic: d/dw of -(log s + log s)/2 with s = sigmoid(w) is -(1 - s).
  const double s = 1.0 / (1.0 + std::exp(-0.3));
  EXPECT_NEAR(w.grad[0], -(1.0 - s), 1e-12);
}

TEST(Autodiff, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  ParameterSet ps;
  auto& a = ps.add("a", 1, 4);
  auto& b = ps.add("b", 1, 4);
  auto& m = ps.add("m", 3, 4);
  auto& bias = ps.add("bias", 1, 3);
  auto& freq = ps.add("freq", 1, 3);
  auto& phase = ps.add("phase", 1, 3);
  for (auto* p : {&a, &b, &m, &bias, &freq, &phase}) fill_random(*p, rng);
  auto loss = [&](ad::Tape& t) {
    const auto va = t.param_vector(a);
    const auto vb = t.param_vector(b);
    const auto h = t.leaky_relu(t.affine(m, bias, t.mul(va, vb)), 0.1);
    const auto phi = t.time_encoding(freq, phase, 2.5);
    const ad::Var parts[] = {h, phi, t.div(va, t.add(t.constant({3, 3, 3, 3}), vb))};
    const auto cat = t.concat(parts);
    const std::vector<seg::SegmentId> seg = {0, 0, 1, 1, 1, 2, 0, 1, 2, 2};
    const auto soft = t.segment_softmax(cat, seg, 3);
    const auto sums = t.segment_sum(t.mul(soft, cat), seg, 3);
    const ad::Var xs[] = {h, phi};
    const auto ws = t.weighted_sum(t.gather(soft, std::vector<std::size_t>{0, 4}), xs);
    const auto pos = t.clamp(t.axpby(0.5, soft, 0.0, soft), 1e-3, 1.0);
    return t.add(t.add(t.sum(sums), t.dot(ws, ws)),
                 t.scale(t.element(t.log(pos), 3), 0.7));
  };
  const auto r = check_gradients(ps, loss);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Autodiff, UnusedParameterHasZeroGradient) {
  ParameterSet ps;
  auto& used = ps.add("used", 1, 2);
  auto& unused = ps.add("unused", 1, 2);
  used.value = {1.0, 2.0};
  unused.value = {3.0, 4.0};
  ad::Tape t;
  t.backward(t.dot(t.param_vector(used), t.param_vector(used)));
  EXPECT_EQ(unused.grad, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(used.grad, (std::vector<double>{2.0, 4.0}));
}

TEST(Autodiff, UnrecordedPrimitiveIsHardError) {
  ParameterSet ps;
  auto& w = ps.add("w", 1, 1);
  ad::Tape t;
  const auto x = t.param_vector(w);
  const auto y = t.record({2.0 * w.value[0]}, {x}, nullptr);
  EXPECT_THROW(t.backward(t.sum(y)), std::logic_error);
}

TEST(Autodiff, CustomAdjointViaRecord) {
  ParameterSet ps;
  auto& w = ps.add("w", 1, 1);
  w.value[0] = 1.5;
  ad::Tape t;
  const auto x = t.param_vector(w);
  const auto y = t.record({x[0] * x[0]}, {x}, [x](ad::Tape& tape, std::span<const double> g) {
    const double d[] = {2.0 * x[0] * g[0]};
    tape.add_grad(x, d);
  });
  t.backward(y);
  EXPECT_DOUBLE_EQ(w.grad[0], 3.0);
}

TEST(Autodiff, TapeRules) {
  ad::Tape t;
  const auto c = t.constant({1.0, 2.0});
  EXPECT_THROW(t.backward(c), std::invalid_argument);
  ad::Tape plain(false);
  EXPECT_THROW(plain.backward(plain.scalar_constant(1.0)), std::logic_error);
  ad::Tape once;
  const auto s = once.scalar_constant(1.0);
  once.backward(s);
  EXPECT_THROW(once.backward(s), std::logic_error);
}

TEST(Autodiff, NonRecordingTapeLeavesGradientsUntouched) {
  ParameterSet ps;
  auto& w = ps.add("w", 2, 2);
  w.value = {1, 2, 3, 4};
  ad::Tape t(false);
  const auto y = t.matvec(w, t.constant({1.0, 1.0}));
  EXPECT_DOUBLE_EQ(y[0], 3.0);
  EXPECT_DOUBLE_EQ(y[1], 7.0);
  EXPECT_EQ(w.grad, (std::vector<double>(4, 0.0)));
}

}  // namespace
}  // namespace tkgx
