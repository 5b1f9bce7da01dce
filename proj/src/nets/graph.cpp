#include "skillforge/nets/graph.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "skillforge/common/error.h"

namespace skillforge {

const Matrix& Var::value() const {
  return graph->value(id);
}

Var Graph::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, {}, nullptr, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(Parameter& p) {
  nodes_.push_back({p.value, {}, {}, &p, true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(Matrix value, std::vector<int> parents, Backward back) {
  bool needs = false;
  for (int p : parents) needs = needs || nodes_[p].needsGrad;
  nodes_.push_back({std::move(value), {}, needs ? std::move(back) : Backward{}, nullptr, needs});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(int id, const Matrix& g) {
  auto& node = nodes_[id];
  if (!node.needsGrad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Graph::backward(Var out, const Matrix& seed) {
  throwIf(out.graph != this, "graph: output belongs to another graph");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  const auto& v = nodes_[out.id].value;
  if (seed.size() == 0) {
    accumulate(out.id, Matrix::Ones(v.rows(), v.cols()));
  } else {
    throwIf(seed.rows() != v.rows() || seed.cols() != v.cols(), "graph: seed shape mismatch");
    accumulate(out.id, seed);
  }
  for (int i = out.id; i >= 0; --i) {
    auto& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    if (node.param) {
      auto& pg = node.param->grad;
      if (pg.rows() != node.grad.rows() || pg.cols() != node.grad.cols()) {
        pg = node.grad;
      } else {
        pg += node.grad;
      }
    }
    if (node.back) node.back(*this, i, node.grad);
  }
}

namespace {

Graph& graphOf(Var a, Var b) {
  throwIf(a.graph == nullptr || a.graph != b.graph, "graph: operands belong to different graphs");
  return *a.graph;
}

void requireSameShape(Var a, Var b, const char* op) {
  throwIf(
      a.rows() != b.rows() || a.cols() != b.cols(),
      std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
          " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

Var add(Var a, Var b) {
  auto& g = graphOf(a, b);
  requireSameShape(a, b, "add");
  const int ia = a.id, ib = b.id;
  return g.record(a.value() + b.value(), {ia, ib}, [ia, ib](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, d);
  });
}

Var sub(Var a, Var b) {
  auto& g = graphOf(a, b);
  requireSameShape(a, b, "sub");
  const int ia = a.id, ib = b.id;
  return g.record(a.value() - b.value(), {ia, ib}, [ia, ib](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d);
    g.accumulate(ib, -d);
  });
}

Var mul(Var a, Var b) {
  auto& g = graphOf(a, b);
  requireSameShape(a, b, "mul");
  const int ia = a.id, ib = b.id;
  return g.record(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Graph& g, int, const Matrix& d) {
    if (g.needsGrad(ia)) g.accumulate(ia, d.cwiseProduct(g.value(ib)));
    if (g.needsGrad(ib)) g.accumulate(ib, d.cwiseProduct(g.value(ia)));
  });
}

Var scale(Var a, double s) {
  const int ia = a.id;
  return a.graph->record(a.value() * s, {ia}, [ia, s](Graph& g, int, const Matrix& d) { g.accumulate(ia, d * s); });
}

Var addScalar(Var a, double s) {
  const int ia = a.id;
  return a.graph->record(a.value().array() + s, {ia}, [ia](Graph& g, int, const Matrix& d) { g.accumulate(ia, d); });
}

Var matmul(Var a, Var b) {
  auto& g = graphOf(a, b);
  throwIf(
      a.cols() != b.rows(),
      "matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  const int ia = a.id, ib = b.id;
  return g.record(a.value() * b.value(), {ia, ib}, [ia, ib](Graph& g, int, const Matrix& d) {
    if (g.needsGrad(ia)) g.accumulate(ia, d * g.value(ib).transpose());
    if (g.needsGrad(ib)) g.accumulate(ib, g.value(ia).transpose() * d);
  });
}

Var broadcastRows(Var row, Eigen::Index rows) {
  throwIf(row.rows() != 1, "broadcastRows: expected a single row");
  const int ir = row.id;
  return row.graph->record(row.value().replicate(rows, 1), {ir}, [ir](Graph& g, int, const Matrix& d) {
    g.accumulate(ir, d.colwise().sum());
  });
}

Var tanh(Var a) {
  const int ia = a.id;
  return a.graph->record(a.value().array().tanh(), {ia}, [ia](Graph& g, int self, const Matrix& d) {
    g.accumulate(ia, d.array() * (1.0 - g.value(self).array().square()));
  });
}

Var sigmoid(Var a) {
  const int ia = a.id;
  Matrix y = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return a.graph->record(std::move(y), {ia}, [ia](Graph& g, int self, const Matrix& d) {
    const auto& y = g.value(self);
    g.accumulate(ia, d.array() * y.array() * (1.0 - y.array()));
  });
}

Var softplus(Var a) {
  const int ia = a.id;
  Matrix y = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return a.graph->record(y, {ia}, [ia](Graph& g, int, const Matrix& d) {
    const Matrix s = g.value(ia).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    g.accumulate(ia, d.cwiseProduct(s));
  });
}

Var exp(Var a) {
  const int ia = a.id;
  return a.graph->record(a.value().array().exp(), {ia}, [ia](Graph& g, int self, const Matrix& d) {
    g.accumulate(ia, d.cwiseProduct(g.value(self)));
  });
}

Var log(Var a) {
  const int ia = a.id;
  return a.graph->record(a.value().array().log(), {ia}, [ia](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d.array() / g.value(ia).array());
  });
}

Var square(Var a) {
  const int ia = a.id;
  return a.graph->record(a.value().array().square(), {ia}, [ia](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, 2.0 * d.cwiseProduct(g.value(ia)));
  });
}

Var sum(Var a) {
  const int ia = a.id;
  const auto r = a.rows(), c = a.cols();
  return a.graph->record(Matrix::Constant(1, 1, a.value().sum()), {ia}, [ia, r, c](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, Matrix::Constant(r, c, d(0, 0)));
  });
}

Var mean(Var a) {
  throwIf(a.value().size() == 0, "mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sliceRows(Var a, Eigen::Index start, Eigen::Index count) {
  throwIf(start < 0 || count < 0 || start + count > a.rows(), "sliceRows: range out of bounds");
  const int ia = a.id;
  const auto r = a.rows(), c = a.cols();
  return a.graph->record(a.value().middleRows(start, count), {ia}, [ia, r, c, start, count](Graph& g, int, const Matrix& d) {
    Matrix full = Matrix::Zero(r, c);
    full.middleRows(start, count) = d;
    g.accumulate(ia, full);
  });
}

Var sliceCols(Var a, Eigen::Index start, Eigen::Index count) {
  throwIf(start < 0 || count < 0 || start + count > a.cols(), "sliceCols: range out of bounds");
  const int ia = a.id;
  const auto r = a.rows(), c = a.cols();
  return a.graph->record(a.value().middleCols(start, count), {ia}, [ia, r, c, start, count](Graph& g, int, const Matrix& d) {
    Matrix full = Matrix::Zero(r, c);
    full.middleCols(start, count) = d;
    g.accumulate(ia, full);
  });
}

Var concatRows(const std::vector<Var>& parts) {
  throwIf(parts.empty(), "concatRows: nothing to concatenate");
  Graph& g = *parts.front().graph;
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    throwIf(p.graph != &g, "concatRows: operands belong to different graphs");
    throwIf(p.cols() != parts.front().cols(), "concatRows: column counts differ");
    rows += p.rows();
    ids.push_back(p.id);
    sizes.push_back(p.rows());
  }
  Matrix out(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return g.record(std::move(out), ids, [ids, sizes](Graph& g, int, const Matrix& d) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (g.needsGrad(ids[i])) g.accumulate(ids[i], d.middleRows(at, sizes[i]));
      at += sizes[i];
    }
  });
}

Var concatCols(const std::vector<Var>& parts) {
  throwIf(parts.empty(), "concatCols: nothing to concatenate");
  Graph& g = *parts.front().graph;
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    throwIf(p.graph != &g, "concatCols: operands belong to different graphs");
    throwIf(p.rows() != parts.front().rows(), "concatCols: row counts differ");
    cols += p.cols();
    ids.push_back(p.id);
    sizes.push_back(p.cols());
  }
  Matrix out(parts.front().rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return g.record(std::move(out), ids, [ids, sizes](Graph& g, int, const Matrix& d) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      if (g.needsGrad(ids[i])) g.accumulate(ids[i], d.middleCols(at, sizes[i]));
      at += sizes[i];
    }
  });
}

Var shiftRows(Var a, Eigen::Index n) {
  throwIf(n < 0, "shiftRows: negative shift");
  const int ia = a.id;
  const auto r = a.rows();
  Matrix out = Matrix::Zero(r, a.cols());
  if (n < r) out.bottomRows(r - n) = a.value().topRows(r - n);
  return a.graph->record(std::move(out), {ia}, [ia, n, r](Graph& g, int, const Matrix& d) {
    Matrix back = Matrix::Zero(d.rows(), d.cols());
    if (n < r) back.topRows(r - n) = d.bottomRows(r - n);
    g.accumulate(ia, back);
  });
}

Var clampCols(Var a, const Matrix& lo, const Matrix& hi) {
  throwIf(lo.rows() != 1 || hi.rows() != 1 || lo.cols() != a.cols() || hi.cols() != a.cols(), "clampCols: bound shape mismatch");
  const int ia = a.id;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  Matrix pass(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      out(r, c) = std::clamp(x(r, c), lo(0, c), hi(0, c));
      pass(r, c) = x(r, c) > lo(0, c) && x(r, c) < hi(0, c) ? 1.0 : 0.0;
    }
  }
  return a.graph->record(std::move(out), {ia}, [ia, pass](Graph& g, int, const Matrix& d) {
    g.accumulate(ia, d.cwiseProduct(pass));
  });
}

Var layerNormRows(Var a, double eps) {
  const int ia = a.id;
  const Matrix& x = a.value();
  const auto n = static_cast<double>(x.cols());
  const Eigen::VectorXd mu = x.rowwise().mean();
  const Matrix centered = x.colwise() - mu;
  const Eigen::VectorXd invStd = ((centered.array().square().rowwise().sum() / n) + eps).rsqrt();
  Matrix y = centered.array().colwise() * invStd.array();
  return a.graph->record(std::move(y), {ia}, [ia, invStd, n](Graph& g, int self, const Matrix& d) {
    const auto& y = g.value(self);
    const Eigen::VectorXd meanD = d.rowwise().mean();
    const Eigen::VectorXd meanDy = d.cwiseProduct(y).rowwise().sum() / n;
    Matrix dx = d.colwise() - meanD;
    dx -= (y.array().colwise() * meanDy.array()).matrix();
    dx = dx.array().colwise() * invStd.array();
    g.accumulate(ia, dx);
  });
}

}  // namespace skillforge
