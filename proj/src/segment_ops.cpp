#include "tkgx/segment_ops.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace tkgx::seg {

void validate(std::span<const double> values, std::span<const SegmentId> segments,
              std::size_t n) {
  if (values.size() != segments.size())
    throw std::invalid_argument("values and segment ids differ in length");
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i] < 0 || static_cast<std::size_t>(segments[i]) >= n)
      throw std::invalid_argument("segment id " + std::to_string(segments[i]) +
                                  " at position " + std::to_string(i) +
                                  " outside [0, " + std::to_string(n) + ")");
}

std::vector<double> segment_sum(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n) {
  validate(values, segments, n);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i)
    out[static_cast<std::size_t>(segments[i])] += values[i];
  return out;
}

std::vector<double> segment_max(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n) {
  validate(values, segments, n);
  std::vector<double> out(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& m = out[static_cast<std::size_t>(segments[i])];
    m = std::max(m, values[i]);
  }
  return out;
}

std::vector<double> segment_softmax(std::span<const double> values,
                                    std::span<const SegmentId> segments, std::size_t n) {
  const auto shift = segment_max(values, segments, n);
  std::vector<double> out(values.size());
  std::vector<double> denom(n, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto s = static_cast<std::size_t>(segments[i]);
    out[i] = std::exp(values[i] - shift[s]);
    denom[s] += out[i];
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] /= denom[static_cast<std::size_t>(segments[i])];
  return out;
}

std::vector<std::optional<std::size_t>> segment_argmax(std::span<const double> values,
                                                       std::span<const SegmentId> segments,
                                                       std::size_t n) {
  validate(values, segments, n);
  std::vector<std::optional<std::size_t>> out(n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& best = out[static_cast<std::size_t>(segments[i])];
    if (!best || values[i] > values[*best]) best = i;
  }
  return out;
}

std::vector<double> segment_sum_via_indicator(std::span<const double> values,
                                              std::span<const SegmentId> segments,
                                              std::size_t n) {
  validate(values, segments, n);
  using Triplet = Eigen::Triplet<double, std::int64_t>;
  std::vector<Triplet> ones;
  ones.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    ones.emplace_back(segments[i], static_cast<std::int64_t>(i), 1.0);
  Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t> y(
      static_cast<std::int64_t>(n), static_cast<std::int64_t>(values.size()));
  y.setFromTriplets(ones.begin(), ones.end());
  const Eigen::Map<const Eigen::VectorXd> x(values.data(),
                                            static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd out = y * x;
  return {out.data(), out.data() + out.size()};
}

namespace naive {

std::vector<double> segment_sum(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n) {
  validate(values, segments, n);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < values.size(); ++i)
      if (static_cast<std::size_t>(segments[i]) == k) out[k] += values[i];
  return out;
}

std::vector<double> segment_softmax(std::span<const double> values,
                                    std::span<const SegmentId> segments, std::size_t n) {
  validate(values, segments, n);
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < n; ++k) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i)
      if (static_cast<std::size_t>(segments[i]) == k) m = std::max(m, values[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (static_cast<std::size_t>(segments[i]) == k) z += std::exp(values[i] - m);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (static_cast<std::size_t>(segments[i]) == k) out[i] = std::exp(values[i] - m) / z;
  }
  return out;
}

std::vector<std::optional<std::size_t>> segment_argmax(std::span<const double> values,
                                                       std::span<const SegmentId> segments,
                                                       std::size_t n) {
  validate(values, segments, n);
  std::vector<std::optional<std::size_t>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < values.size(); ++i)
      if (static_cast<std::size_t>(segments[i]) == k && (!out[k] || values[i] > values[*out[k]]))
        out[k] = i;
  return out;
}

}  // namespace naive

namespace {

template <typename F>
double best_time(std::size_t iters, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    best = std::min(best, dt.count());
  }
  return best;
}

}  // namespace

std::vector<BenchResult> benchmark(std::size_t size, std::size_t segments, std::size_t iters,
                                   std::uint64_t seed) {
  if (segments == 0) throw std::invalid_argument("need at least one segment");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> val(0.0, 1.0);
  std::uniform_int_distribution<SegmentId> sid(0, static_cast<SegmentId>(segments) - 1);
  std::vector<double> x(size);
  std::vector<SegmentId> s(size);
  for (std::size_t i = 0; i < size; ++i) {
    x[i] = val(rng);
    s[i] = sid(rng);
  }
  volatile double sink = 0.0;
  std::vector<BenchResult> results;
  results.push_back({"segment_sum",
                     best_time(iters, [&] { sink = sink + naive::segment_sum(x, s, segments)[0]; }),
                     best_time(iters, [&] { sink = sink + segment_sum(x, s, segments)[0]; })});
  results.push_back(
      {"segment_softmax",
       best_time(iters, [&] { sink = sink + naive::segment_softmax(x, s, segments)[0]; }),
       best_time(iters, [&] { sink = sink + segment_softmax(x, s, segments)[0]; })});
  results.push_back(
      {"segment_argmax",
       best_time(iters,
                 [&] { sink = sink + static_cast<double>(naive::segment_argmax(x, s, segments).size()); }),
       best_time(iters,
                 [&] { sink = sink + static_cast<double>(segment_argmax(x, s, segments).size()); })});
  return results;
}

}  // namespace tkgx::seg
