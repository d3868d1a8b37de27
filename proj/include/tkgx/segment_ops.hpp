#pragma once

// Batched per-segment primitives. Element i of `values` belongs to segment
// `segments[i]`; segment ids need not be contiguous or sorted but must be below
// the declared segment count.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace tkgx::seg {

using SegmentId = std::int64_t;

struct SegmentedVector {
  std::vector<double> values;
  std::vector<SegmentId> segments;
};

// Throws std::invalid_argument on length mismatch or an id outside [0, n).
void validate(std::span<const double> values, std::span<const SegmentId> segments,
              std::size_t n);

std::vector<double> segment_sum(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n);

// Max-shifted per segment.
std::vector<double> segment_softmax(std::span<const double> values,
                                    std::span<const SegmentId> segments, std::size_t n);

std::vector<double> segment_max(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n);

// Index of the maximum per segment, smallest index on ties, nullopt for an
// empty segment.
std::vector<std::optional<std::size_t>> segment_argmax(std::span<const double> values,
                                                       std::span<const SegmentId> segments,
                                                       std::size_t n);

// Builds the n x d indicator matrix Y (Y[s[i], i] = 1) and returns Y * x.
// Slow path used to cross-check segment_sum.
std::vector<double> segment_sum_via_indicator(std::span<const double> values,
                                              std::span<const SegmentId> segments,
                                              std::size_t n);

// Reference implementations that iterate segment by segment over the whole
// input, the way per-graph loops do. Used by the benchmark harness.
namespace naive {
std::vector<double> segment_sum(std::span<const double> values,
                                std::span<const SegmentId> segments, std::size_t n);
std::vector<double> segment_softmax(std::span<const double> values,
                                    std::span<const SegmentId> segments, std::size_t n);
std::vector<std::optional<std::size_t>> segment_argmax(std::span<const double> values,
                                                       std::span<const SegmentId> segments,
                                                       std::size_t n);
}  // namespace naive

struct BenchResult {
  std::string_view kernel;
  double naive_seconds = 0.0;
  double kernel_seconds = 0.0;
  double speedup() const { return kernel_seconds > 0 ? naive_seconds / kernel_seconds : 0.0; }
};

// Times each kernel against its naive counterpart on random data (best of
// `iters` runs each).
std::vector<BenchResult> benchmark(std::size_t size, std::size_t segments, std::size_t iters,
                                   std::uint64_t seed);

}  // namespace tkgx::seg
