#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

namespace skillforge {

using Matrix = Eigen::MatrixXd;

// Trainable tensor. Gradients accumulate across backward passes until zeroed.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zeroGrad() {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
};

class Graph;

// Handle to a node on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const {
    return value().rows();
  }
  Eigen::Index cols() const {
    return value().cols();
  }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
// sweep visits every node after all of its consumers.
class Graph {
 public:
  Var constant(Matrix value);
  Var parameter(Parameter& p);

  const Matrix& value(int id) const {
    return nodes_[id].value;
  }
  // Gradient of the last backward pass with respect to a node, empty if none reached it.
  const Matrix& grad(int id) const {
    return nodes_[id].grad;
  }
  size_t size() const {
    return nodes_.size();
  }

  // Seeds d(out) with `seed` (ones if empty) and accumulates parameter gradients.
  void backward(Var out, const Matrix& seed = {});

  // Called with the node's own id so the output value can be read in place.
  using Backward = std::function<void(Graph&, int self, const Matrix& grad)>;
  Var record(Matrix value, std::vector<int> parents, Backward back);
  void accumulate(int id, const Matrix& g);
  bool needsGrad(int id) const {
    return nodes_[id].needsGrad;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward back;
    Parameter* param = nullptr;
    bool needsGrad = false;
  };
  std::vector<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var addScalar(Var a, double s);
Var matmul(Var a, Var b);
// 1 x n row repeated `rows` times.
Var broadcastRows(Var row, Eigen::Index rows);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var sliceRows(Var a, Eigen::Index start, Eigen::Index count);
Var sliceCols(Var a, Eigen::Index start, Eigen::Index count);
Var concatRows(const std::vector<Var>& parts);
Var concatCols(const std::vector<Var>& parts);
// Row r of the result is row r - n of the input, zero for r < n.
Var shiftRows(Var a, Eigen::Index n);
// Per-row standardization without affine terms.
Var layerNormRows(Var a, double eps = 1e-5);
// Elementwise clamp to per-column bounds (1 x cols each). Gradient passes
// only where the input lies strictly inside.
Var clampCols(Var a, const Matrix& lo, const Matrix& hi);

inline Var operator+(Var a, Var b) {
  return add(a, b);
}
inline Var operator-(Var a, Var b) {
  return sub(a, b);
}
inline Var operator*(Var a, Var b) {
  return mul(a, b);
}
inline Var operator*(double s, Var a) {
  return scale(a, s);
}

}  // namespace skillforge
