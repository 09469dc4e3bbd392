// Copyright 2026 The modafm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modafm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "modafm/kernels.hpp"

namespace modafm::ad {
namespace {

thread_local bool g_grad_enabled = true;

enum class Broadcast { kSame, kRow };

Broadcast check_elementwise(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1]) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

void require_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

// Sums g (rows x cols) over rows into out (cols).
void accumulate_row_sum(const Tensor& g, Tensor& out) {
  const auto& k = kernels::active();
  const std::size_t rows = g.rows();
  const std::size_t cols = g.cols();
  for (std::size_t r = 0; r < rows; ++r) k.axpy(1.0, g.ptr() + r * cols, out.ptr(), cols);
}

}  // namespace

Node::Node(Tensor value, bool requires_grad, std::string op)
    : value_(std::move(value)), grad_(value_.shape()), requires_grad_(requires_grad), op_(std::move(op)) {}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::string op,
                  Node::BackwardFn backward) {
  const bool needs = g_grad_enabled &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad(); });
  auto node = std::make_shared<Node>(std::move(value), needs, std::move(op));
  if (needs) {
    node->parents_ = std::move(parents);
    node->backward_ = std::move(backward);
  }
  return node;
}

NodePtr parameter(Tensor value, std::string name) {
  auto node = std::make_shared<Node>(std::move(value), true, "parameter");
  node->set_name(std::move(name));
  return node;
}

NodePtr constant(Tensor value) { return std::make_shared<Node>(std::move(value), false, "constant"); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
  const Broadcast mode = check_elementwise("add", a->value(), b->value());
  const auto& k = kernels::active();
  Tensor out(a->value().shape());
  if (mode == Broadcast::kSame) {
    k.add(a->value().ptr(), b->value().ptr(), out.ptr(), out.size());
  } else {
    const std::size_t cols = out.cols();
    for (std::size_t r = 0; r < out.rows(); ++r) {
      k.add(a->value().ptr() + r * cols, b->value().ptr(), out.ptr() + r * cols, cols);
    }
  }
  return make_node(std::move(out), {a, b}, "add", [mode](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& g = self.grad();
    const NodePtr& pa = self.parents()[0];
    const NodePtr& pb = self.parents()[1];
    if (pa->requires_grad()) kk.axpy(1.0, g.ptr(), pa->mutable_grad().ptr(), g.size());
    if (pb->requires_grad()) {
      if (mode == Broadcast::kSame) {
        kk.axpy(1.0, g.ptr(), pb->mutable_grad().ptr(), g.size());
      } else {
        accumulate_row_sum(g, pb->mutable_grad());
      }
    }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  const Broadcast mode = check_elementwise("sub", a->value(), b->value());
  const auto& k = kernels::active();
  Tensor out(a->value().shape());
  if (mode == Broadcast::kSame) {
    k.sub(a->value().ptr(), b->value().ptr(), out.ptr(), out.size());
  } else {
    const std::size_t cols = out.cols();
    for (std::size_t r = 0; r < out.rows(); ++r) {
      k.sub(a->value().ptr() + r * cols, b->value().ptr(), out.ptr() + r * cols, cols);
    }
  }
  return make_node(std::move(out), {a, b}, "sub", [mode](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& g = self.grad();
    const NodePtr& pa = self.parents()[0];
    const NodePtr& pb = self.parents()[1];
    if (pa->requires_grad()) kk.axpy(1.0, g.ptr(), pa->mutable_grad().ptr(), g.size());
    if (pb->requires_grad()) {
      if (mode == Broadcast::kSame) {
        kk.axpy(-1.0, g.ptr(), pb->mutable_grad().ptr(), g.size());
      } else {
        const std::size_t cols = g.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          kk.axpy(-1.0, g.ptr() + r * cols, pb->mutable_grad().ptr(), cols);
        }
      }
    }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  const Broadcast mode = check_elementwise("mul", a->value(), b->value());
  const auto& k = kernels::active();
  Tensor out(a->value().shape());
  const std::size_t cols = out.cols();
  if (mode == Broadcast::kSame) {
    k.mul(a->value().ptr(), b->value().ptr(), out.ptr(), out.size());
  } else {
    for (std::size_t r = 0; r < out.rows(); ++r) {
      k.mul(a->value().ptr() + r * cols, b->value().ptr(), out.ptr() + r * cols, cols);
    }
  }
  return make_node(std::move(out), {a, b}, "mul", [mode](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& g = self.grad();
    const NodePtr& pa = self.parents()[0];
    const NodePtr& pb = self.parents()[1];
    const std::size_t c = g.cols();
    if (mode == Broadcast::kSame) {
      if (pa->requires_grad()) kk.mul_acc(g.ptr(), pb->value().ptr(), pa->mutable_grad().ptr(), g.size());
      if (pb->requires_grad()) kk.mul_acc(g.ptr(), pa->value().ptr(), pb->mutable_grad().ptr(), g.size());
      return;
    }
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (pa->requires_grad()) {
        kk.mul_acc(g.ptr() + r * c, pb->value().ptr(), pa->mutable_grad().ptr() + r * c, c);
      }
      if (pb->requires_grad()) {
        kk.mul_acc(g.ptr() + r * c, pa->value().ptr() + r * c, pb->mutable_grad().ptr(), c);
      }
    }
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  require_rank2("matmul", a->value());
  require_rank2("matmul", b->value());
  const std::size_t n = a->value().shape()[0];
  const std::size_t k = a->value().shape()[1];
  const std::size_t m = b->value().shape()[1];
  if (b->value().shape()[0] != k) {
    throw ShapeError("matmul: inner extents differ: " + shape_string(a->value().shape()) + " x " +
                     shape_string(b->value().shape()));
  }
  Tensor out({n, m});
  kernels::active().gemm_nn(a->value().ptr(), b->value().ptr(), out.ptr(), n, k, m);
  return make_node(std::move(out), {a, b}, "matmul", [n, k, m](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& g = self.grad();
    const NodePtr& pa = self.parents()[0];
    const NodePtr& pb = self.parents()[1];
    if (pa->requires_grad()) kk.gemm_nt(g.ptr(), pb->value().ptr(), pa->mutable_grad().ptr(), n, m, k);
    if (pb->requires_grad()) kk.gemm_tn(pa->value().ptr(), g.ptr(), pb->mutable_grad().ptr(), n, k, m);
  });
}

NodePtr matmul_bt(const NodePtr& a, const NodePtr& b) {
  require_rank2("matmul_bt", a->value());
  require_rank2("matmul_bt", b->value());
  const std::size_t n = a->value().shape()[0];
  const std::size_t k = a->value().shape()[1];
  const std::size_t m = b->value().shape()[0];
  if (b->value().shape()[1] != k) {
    throw ShapeError("matmul_bt: inner extents differ: " + shape_string(a->value().shape()) +
                     " x " + shape_string(b->value().shape()) + "^T");
  }
  Tensor out({n, m});
  kernels::active().gemm_nt(a->value().ptr(), b->value().ptr(), out.ptr(), n, k, m);
  return make_node(std::move(out), {a, b}, "matmul_bt", [n, k, m](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& g = self.grad();
    const NodePtr& pa = self.parents()[0];
    const NodePtr& pb = self.parents()[1];
    if (pa->requires_grad()) kk.gemm_nn(g.ptr(), pb->value().ptr(), pa->mutable_grad().ptr(), n, m, k);
    if (pb->requires_grad()) kk.gemm_tn(g.ptr(), pa->value().ptr(), pb->mutable_grad().ptr(), n, m, k);
  });
}

NodePtr relu(const NodePtr& x) {
  Tensor out(x->value().shape());
  kernels::active().relu(x->value().ptr(), out.ptr(), out.size());
  return make_node(std::move(out), {x}, "relu", [](Node& self) {
    const NodePtr& px = self.parents()[0];
    kernels::active().relu_backward(px->value().ptr(), self.grad().ptr(), px->mutable_grad().ptr(),
                                    self.grad().size());
  });
}

NodePtr exp(const NodePtr& x) {
  Tensor out(x->value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x->value()[i]);
  return make_node(std::move(out), {x}, "exp", [](Node& self) {
    kernels::active().mul_acc(self.grad().ptr(), self.value().ptr(),
                              self.parents()[0]->mutable_grad().ptr(), self.grad().size());
  });
}

NodePtr log(const NodePtr& x) {
  Tensor out(x->value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x->value()[i];
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v) + " at index " + std::to_string(i));
    }
    out[i] = std::log(v);
  }
  return make_node(std::move(out), {x}, "log", [](Node& self) {
    const NodePtr& px = self.parents()[0];
    Tensor& gx = px->mutable_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad()[i] / px->value()[i];
  });
}

NodePtr softmax(const NodePtr& x) {
  const Tensor& in = x->value();
  const std::size_t rows = in.rows();
  const std::size_t cols = in.cols();
  const auto& k = kernels::active();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.ptr() + r * cols;
    double* dst = out.ptr() + r * cols;
    const double mx = k.max(src, cols);
    for (std::size_t c = 0; c < cols; ++c) dst[c] = std::exp(src[c] - mx);
    const double total = k.sum(dst, cols);
    k.scale(1.0 / total, dst, dst, cols);
  }
  return make_node(std::move(out), {x}, "softmax", [rows, cols](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& y = self.value();
    const Tensor& g = self.grad();
    Tensor& gx = self.parents()[0]->mutable_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.ptr() + r * cols;
      const double* gr = g.ptr() + r * cols;
      const double inner = kk.dot(gr, yr, cols);
      double* out_r = gx.ptr() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) out_r[c] += yr[c] * (gr[c] - inner);
    }
  });
}

NodePtr log_softmax(const NodePtr& x) {
  const Tensor& in = x->value();
  const std::size_t rows = in.rows();
  const std::size_t cols = in.cols();
  const auto& k = kernels::active();
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.ptr() + r * cols;
    double* dst = out.ptr() + r * cols;
    const double mx = k.max(src, cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(src[c] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c] - lse;
  }
  return make_node(std::move(out), {x}, "log_softmax", [rows, cols](Node& self) {
    const auto& kk = kernels::active();
    const Tensor& y = self.value();
    const Tensor& g = self.grad();
    Tensor& gx = self.parents()[0]->mutable_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.ptr() + r * cols;
      const double* gr = g.ptr() + r * cols;
      const double gsum = kk.sum(gr, cols);
      double* out_r = gx.ptr() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) out_r[c] += gr[c] - std::exp(yr[c]) * gsum;
    }
  });
}

NodePtr sum(const NodePtr& x) {
  Tensor out = Tensor::scalar(kernels::active().sum(x->value().ptr(), x->value().size()));
  return make_node(std::move(out), {x}, "sum", [](Node& self) {
    Tensor& gx = self.parents()[0]->mutable_grad();
    const double g = self.grad()[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

NodePtr mean(const NodePtr& x) {
  const std::size_t n = x->value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  Tensor out = Tensor::scalar(kernels::active().sum(x->value().ptr(), n) / static_cast<double>(n));
  return make_node(std::move(out), {x}, "mean", [n](Node& self) {
    Tensor& gx = self.parents()[0]->mutable_grad();
    const double g = self.grad()[0] / static_cast<double>(n);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

NodePtr scale(const NodePtr& x, double factor) {
  Tensor out(x->value().shape());
  kernels::active().scale(factor, x->value().ptr(), out.ptr(), out.size());
  return make_node(std::move(out), {x}, "scale", [factor](Node& self) {
    kernels::active().axpy(factor, self.grad().ptr(), self.parents()[0]->mutable_grad().ptr(),
                           self.grad().size());
  });
}

NodePtr concat_rows(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Tensor& first = parts.front()->value();
  if (first.rank() != 1 && first.rank() != 2) {
    throw ShapeError("concat_rows: unsupported rank " + std::to_string(first.rank()));
  }
  std::size_t total_rows = 0;
  for (const auto& p : parts) {
    const Tensor& t = p->value();
    const bool same_family = t.rank() == first.rank() && (t.rank() == 1 || t.shape()[1] == first.shape()[1]);
    if (!same_family) {
      throw ShapeError("concat_rows: mismatched parts " + shape_string(first.shape()) + " and " +
                       shape_string(t.shape()));
    }
    total_rows += t.shape()[0];
  }
  Shape shape = first.shape();
  shape[0] = total_rows;
  Tensor out(shape);
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    std::copy(p->value().ptr(), p->value().ptr() + p->value().size(), out.ptr() + off);
    off += p->value().size();
  }
  return make_node(std::move(out), parts, "concat_rows", [offsets](Node& self) {
    const auto& kk = kernels::active();
    for (std::size_t i = 0; i < self.parents().size(); ++i) {
      const NodePtr& p = self.parents()[i];
      if (!p->requires_grad()) continue;
      kk.axpy(1.0, self.grad().ptr() + offsets[i], p->mutable_grad().ptr(), p->value().size());
    }
  });
}

NodePtr select_rows(const NodePtr& x, const std::vector<std::size_t>& rows) {
  const Tensor& in = x->value();
  if (in.rank() != 1 && in.rank() != 2) throw ShapeError("select_rows: unsupported rank");
  const std::size_t width = in.rank() == 1 ? 1 : in.shape()[1];
  const std::size_t n = in.shape()[0];
  Shape shape = in.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw ShapeError("select_rows: index " + std::to_string(rows[i]) + " out of range " + std::to_string(n));
    }
    std::copy_n(in.ptr() + rows[i] * width, width, out.ptr() + i * width);
  }
  return make_node(std::move(out), {x}, "select_rows", [rows, width](Node& self) {
    const auto& kk = kernels::active();
    Tensor& gx = self.parents()[0]->mutable_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      kk.axpy(1.0, self.grad().ptr() + i * width, gx.ptr() + rows[i] * width, width);
    }
  });
}

NodePtr gather_columns(const NodePtr& x, const std::vector<std::size_t>& columns) {
  const Tensor& in = x->value();
  require_rank2("gather_columns", in);
  const std::size_t n = in.shape()[0];
  const std::size_t c = in.shape()[1];
  if (columns.size() != n) {
    throw ShapeError("gather_columns: " + std::to_string(columns.size()) + " indices for " +
                     std::to_string(n) + " rows");
  }
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    if (columns[i] >= c) {
      throw ShapeError("gather_columns: column " + std::to_string(columns[i]) + " out of range " +
                       std::to_string(c));
    }
    out[i] = in.at(i, columns[i]);
  }
  return make_node(std::move(out), {x}, "gather_columns", [columns, c](Node& self) {
    Tensor& gx = self.parents()[0]->mutable_grad();
    for (std::size_t i = 0; i < columns.size(); ++i) gx[i * c + columns[i]] += self.grad()[i];
  });
}

NodePtr apply_dropout_mask(const NodePtr& x, const Tensor& mask, double rate) {
  if (mask.shape() != x->value().shape()) {
    throw ShapeError("dropout: mask shape " + shape_string(mask.shape()) + " differs from input " +
                     shape_string(x->value().shape()));
  }
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout: rate must lie in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor scaled(mask.shape());
  kernels::active().scale(keep_scale, mask.ptr(), scaled.ptr(), mask.size());
  Tensor out(mask.shape());
  kernels::active().mul(x->value().ptr(), scaled.ptr(), out.ptr(), out.size());
  return make_node(std::move(out), {x}, "dropout", [scaled = std::move(scaled)](Node& self) {
    kernels::active().mul_acc(self.grad().ptr(), scaled.ptr(), self.parents()[0]->mutable_grad().ptr(),
                              scaled.size());
  });
}

NodePtr gradient_reversal(const NodePtr& x, double lambda) {
  Tensor out = x->value();
  return make_node(std::move(out), {x}, "gradient_reversal", [lambda](Node& self) {
    kernels::active().axpy(-lambda, self.grad().ptr(), self.parents()[0]->mutable_grad().ptr(),
                           self.grad().size());
  });
}

NodePtr detach(const NodePtr& x) { return constant(x->value()); }

void backward(const NodePtr& root) {
  if (root->value().size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_string(root->value().shape()));
  }
  if (!root->requires_grad()) return;

  // Iterative post-order DFS yields a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents_.size()) {
      Node* parent = node->parents_[next++].get();
      if (parent->requires_grad() && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_) node->backward_(*node);
  }
}

}  // namespace modafm::ad
