#include "tkgx/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tkgx::ad {

std::size_t Var::size() const { return value().size(); }

std::span<const double> Var::value() const {
  if (!tape_) throw std::logic_error("use of an empty Var");
  return tape_->val(*this);
}

double Var::scalar() const {
  const auto v = value();
  if (v.size() != 1) throw std::logic_error("Var is not a scalar");
  return v[0];
}

void Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size())
    throw std::logic_error("Var does not belong to this tape");
}

Var Tape::push(std::vector<double> value, bool needs_grad, Backward fn) {
  if (backward_done_) throw std::logic_error("tape is sealed after backward()");
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::int64_t>(nodes_.size() - 1));
}

void Tape::accumulate(Var v, std::span<const double> g) {
  auto& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (!n.needs_grad) return;
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

std::span<double> Tape::grad_of(Var v) {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id_)].grad;
}

Var Tape::constant(std::vector<double> v) { return push(std::move(v), false, nullptr); }

Var Tape::record(std::vector<double> value, std::vector<Var> parents, Backward fn) {
  bool any = false;
  for (const auto& p : parents) {
    check(p);
    any = any || needs(p);
  }
  return push(std::move(value), any, std::move(fn));
}

Var Tape::param_row(Parameter& p, std::size_t row) {
  if (row >= p.rows)
    throw std::out_of_range(p.name + ": row " + std::to_string(row) + " out of range");
  const auto r = p.row(row);
  return push(std::vector<double>(r.begin(), r.end()), true,
              [pp = &p, row](Tape&, std::span<const double> g) {
                double* dst = pp->grad.data() + row * pp->cols;
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
              });
}

Var Tape::param_vector(Parameter& p) {
  return push(p.value, true, [pp = &p](Tape&, std::span<const double> g) {
    for (std::size_t j = 0; j < g.size(); ++j) pp->grad[j] += g[j];
  });
}

Var Tape::matvec(Parameter& w, Var x) {
  check(x);
  const auto& xv = val(x);
  if (xv.size() != w.cols)
    throw std::invalid_argument(w.name + ": matvec expects input of length " +
                                std::to_string(w.cols) + ", got " + std::to_string(xv.size()));
  std::vector<double> y(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wr = w.value.data() + i * w.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += wr[j] * xv[j];
    y[i] = acc;
  }
  return push(std::move(y), true, [pw = &w, x](Tape& t, std::span<const double> g) {
    const auto& xv = t.val(x);
    const std::size_t cols = pw->cols;
    for (std::size_t i = 0; i < pw->rows; ++i) {
      if (g[i] == 0.0) continue;
      double* gr = pw->grad.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) gr[j] += g[i] * xv[j];
    }
    if (t.needs(x)) {
      auto& gx = t.nodes_[static_cast<std::size_t>(x.id_)].grad;
      for (std::size_t i = 0; i < pw->rows; ++i) {
        if (g[i] == 0.0) continue;
        const double* wr = pw->value.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gx[j] += wr[j] * g[i];
      }
    }
  });
}

Var Tape::affine(Parameter& w, Parameter& b, Var x) {
  if (b.size() != w.rows) throw std::invalid_argument(b.name + ": bias shape mismatch");
  return add(matvec(w, x), param_vector(b));
}

Var Tape::add(Var a, Var b) { return axpby(1.0, a, 1.0, b); }

Var Tape::axpby(double a, Var x, double b, Var y) {
  check(x);
  check(y);
  const auto& xv = val(x);
  const auto& yv = val(y);
  if (xv.size() != yv.size()) throw std::invalid_argument("axpby: length mismatch");
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * xv[i] + b * yv[i];
  return push(std::move(out), needs(x) || needs(y),
              [a, b, x, y](Tape& t, std::span<const double> g) {
                std::vector<double> tmp(g.size());
                if (t.needs(x)) {
                  for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = a * g[i];
                  t.accumulate(x, tmp);
                }
                if (t.needs(y)) {
                  for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = b * g[i];
                  t.accumulate(y, tmp);
                }
              });
}

Var Tape::scale(Var x, double c) {
  check(x);
  std::vector<double> out(val(x));
  for (auto& v : out) v *= c;
  return push(std::move(out), needs(x), [x, c](Tape& t, std::span<const double> g) {
    std::vector<double> tmp(g.begin(), g.end());
    for (auto& v : tmp) v *= c;
    t.accumulate(x, tmp);
  });
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  const auto& av = val(a);
  const auto& bv = val(b);
  if (av.size() != bv.size()) throw std::invalid_argument("mul: length mismatch");
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::span<const double> g) {
    const auto& av = t.val(a);
    const auto& bv = t.val(b);
    std::vector<double> tmp(g.size());
    if (t.needs(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * bv[i];
      t.accumulate(a, tmp);
    }
    if (t.needs(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] * av[i];
      t.accumulate(b, tmp);
    }
  });
}

Var Tape::div(Var a, Var b) {
  check(a);
  check(b);
  const auto& av = val(a);
  const auto& bv = val(b);
  if (av.size() != bv.size()) throw std::invalid_argument("div: length mismatch");
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, std::span<const double> g) {
    const auto& av = t.val(a);
    const auto& bv = t.val(b);
    std::vector<double> tmp(g.size());
    if (t.needs(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] / bv[i];
      t.accumulate(a, tmp);
    }
    if (t.needs(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = -g[i] * av[i] / (bv[i] * bv[i]);
      t.accumulate(b, tmp);
    }
  });
}

Var Tape::log(Var x) {
  check(x);
  std::vector<double> out(val(x));
  for (auto& v : out) v = std::log(v);
  return push(std::move(out), needs(x), [x](Tape& t, std::span<const double> g) {
    const auto& xv = t.val(x);
    std::vector<double> tmp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = g[i] / xv[i];
    t.accumulate(x, tmp);
  });
}

Var Tape::clamp(Var x, double lo, double hi) {
  check(x);
  std::vector<double> out(val(x));
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return push(std::move(out), needs(x), [x, lo, hi](Tape& t, std::span<const double> g) {
    const auto& xv = t.val(x);
    std::vector<double> tmp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      tmp[i] = (xv[i] >= lo && xv[i] <= hi) ? g[i] : 0.0;
    t.accumulate(x, tmp);
  });
}

Var Tape::leaky_relu(Var x, double slope) {
  check(x);
  std::vector<double> out(val(x));
  for (auto& v : out) v = v > 0.0 ? v : slope * v;
  return push(std::move(out), needs(x), [x, slope](Tape& t, std::span<const double> g) {
    const auto& xv = t.val(x);
    std::vector<double> tmp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = xv[i] > 0.0 ? g[i] : slope * g[i];
    t.accumulate(x, tmp);
  });
}

Var Tape::dot(Var a, Var b) {
  check(a);
  check(b);
  const auto& av = val(a);
  const auto& bv = val(b);
  if (av.size() != bv.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return push({s}, needs(a) || needs(b), [a, b](Tape& t, std::span<const double> g) {
    const auto& av = t.val(a);
    const auto& bv = t.val(b);
    std::vector<double> tmp(av.size());
    if (t.needs(a)) {
      for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = g[0] * bv[i];
      t.accumulate(a, tmp);
    }
    if (t.needs(b)) {
      for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = g[0] * av[i];
      t.accumulate(b, tmp);
    }
  });
}

Var Tape::sum(Var x) {
  check(x);
  double s = 0.0;
  for (double v : val(x)) s += v;
  return push({s}, needs(x), [x](Tape& t, std::span<const double> g) {
    std::vector<double> tmp(t.val(x).size(), g[0]);
    t.accumulate(x, tmp);
  });
}

Var Tape::mean(Var x) {
  const auto n = val(x).size();
  if (n == 0) throw std::invalid_argument("mean of an empty vector");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var Tape::concat(std::span<const Var> parts) {
  std::vector<double> out;
  bool any = false;
  for (const auto& p : parts) {
    check(p);
    const auto& v = val(p);
    out.insert(out.end(), v.begin(), v.end());
    any = any || needs(p);
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return push(std::move(out), any, [ps = std::move(ps)](Tape& t, std::span<const double> g) {
    std::size_t off = 0;
    for (const auto& p : ps) {
      const auto n = t.val(p).size();
      t.accumulate(p, g.subspan(off, n));
      off += n;
    }
  });
}

Var Tape::gather(Var x, std::span<const std::size_t> index) {
  check(x);
  const auto& xv = val(x);
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.size()) throw std::out_of_range("gather index out of range");
    out[i] = xv[index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return push(std::move(out), needs(x), [x, idx = std::move(idx)](Tape& t, std::span<const double> g) {
    std::vector<double> tmp(t.val(x).size(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) tmp[idx[i]] += g[i];
    t.accumulate(x, tmp);
  });
}

Var Tape::element(Var x, std::size_t i) {
  const std::size_t idx[] = {i};
  return gather(x, idx);
}

Var Tape::weighted_sum(Var weights, std::span<const Var> xs) {
  check(weights);
  const auto& w = val(weights);
  if (w.size() != xs.size()) throw std::invalid_argument("weighted_sum: weight count mismatch");
  if (xs.empty()) throw std::invalid_argument("weighted_sum of nothing");
  const auto d = val(xs[0]).size();
  std::vector<double> out(d, 0.0);
  bool any = needs(weights);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    check(xs[k]);
    const auto& xv = val(xs[k]);
    if (xv.size() != d) throw std::invalid_argument("weighted_sum: length mismatch");
    for (std::size_t i = 0; i < d; ++i) out[i] += w[k] * xv[i];
    any = any || needs(xs[k]);
  }
  std::vector<Var> vs(xs.begin(), xs.end());
  return push(std::move(out), any,
              [weights, vs = std::move(vs)](Tape& t, std::span<const double> g) {
                const auto& w = t.val(weights);
                std::vector<double> gw(vs.size(), 0.0);
                std::vector<double> tmp(g.size());
                for (std::size_t k = 0; k < vs.size(); ++k) {
                  const auto& xv = t.val(vs[k]);
                  double s = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * xv[i];
                  gw[k] = s;
                  if (t.needs(vs[k])) {
                    for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = w[k] * g[i];
                    t.accumulate(vs[k], tmp);
                  }
                }
                t.accumulate(weights, gw);
              });
}

Var Tape::time_encoding(Parameter& freq, Parameter& phase, double t) {
  if (freq.size() != phase.size()) throw std::invalid_argument("time encoding shape mismatch");
  const auto d = freq.size();
  const double amp = std::sqrt(1.0 / static_cast<double>(d));
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = amp * std::cos(freq.value[j] * t + phase.value[j]);
  return push(std::move(out), true,
              [pf = &freq, pp = &phase, t, amp](Tape&, std::span<const double> g) {
                for (std::size_t j = 0; j < g.size(); ++j) {
                  const double ds = -amp * std::sin(pf->value[j] * t + pp->value[j]) * g[j];
                  pf->grad[j] += ds * t;
                  pp->grad[j] += ds;
                }
              });
}

Var Tape::segment_sum(Var x, std::span<const seg::SegmentId> segments, std::size_t n) {
  check(x);
  auto out = seg::segment_sum(val(x), segments, n);
  std::vector<seg::SegmentId> s(segments.begin(), segments.end());
  return push(std::move(out), needs(x), [x, s = std::move(s)](Tape& t, std::span<const double> g) {
    std::vector<double> tmp(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) tmp[i] = g[static_cast<std::size_t>(s[i])];
    t.accumulate(x, tmp);
  });
}

Var Tape::segment_softmax(Var x, std::span<const seg::SegmentId> segments, std::size_t n) {
  check(x);
  auto out = seg::segment_softmax(val(x), segments, n);
  std::vector<seg::SegmentId> s(segments.begin(), segments.end());
  const auto self = static_cast<std::int64_t>(nodes_.size());
  return push(std::move(out), needs(x),
              [x, n, self, s = std::move(s)](Tape& t, std::span<const double> g) {
                // dx_i = y_i (g_i - sum_{j in seg(i)} g_j y_j)
                const auto& y = t.nodes_[static_cast<std::size_t>(self)].value;
                std::vector<double> gy(y.size());
                for (std::size_t i = 0; i < y.size(); ++i) gy[i] = g[i] * y[i];
                const auto inner = seg::segment_sum(gy, s, n);
                std::vector<double> tmp(y.size());
                for (std::size_t i = 0; i < y.size(); ++i)
                  tmp[i] = y[i] * (g[i] - inner[static_cast<std::size_t>(s[i])]);
                t.accumulate(x, tmp);
              });
}

void Tape::backward(Var loss) {
  check(loss);
  if (!record_) throw std::logic_error("backward() on a tape that does not record gradients");
  if (backward_done_) throw std::logic_error("backward() may run once per tape");
  if (val(loss).size() != 1) throw std::invalid_argument("backward() needs a scalar loss");
  backward_done_ = true;
  auto& root = nodes_[static_cast<std::size_t>(loss.id_)];
  if (!root.needs_grad) return;
  for (auto& n : nodes_)
    if (n.needs_grad) n.grad.assign(n.value.size(), 0.0);
  root.grad[0] = 1.0;
  for (auto i = static_cast<std::int64_t>(loss.id_); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad) continue;
    if (!n.backward)
      throw std::logic_error("node " + std::to_string(i) +
                             " depends on parameters but has no recorded adjoint");
    // Adjoints only write to parents (smaller ids), so n.grad is stable here.
    n.backward(*this, n.grad);
  }
}

}  // namespace tkgx::ad
