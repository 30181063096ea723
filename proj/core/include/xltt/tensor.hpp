#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xltt {

// Dimension mismatch; the message always names the offending shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major real matrix, 64-bit values. A Tensor is a cheap handle to a
// shared node so that tape closures and user code see the same storage.
class Tensor {
 public:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad;  // empty until backward (or grad_buffer) touches it
    bool requires_grad = false;
  };

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false);

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value,
                     bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor row(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->data.size(); }

  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j);
  std::span<const double> values() const { return node_->data; }
  std::span<double> values() { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<double> grad_buffer();
  void zero_grad();

  // Value of a 1x1 tensor.
  double item() const;

  bool all_finite() const;
  std::string shape_str() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of differentiable ops. Each op appends a backward closure;
// backward() replays them once, in reverse, accumulating grads into every
// upstream tensor. Single-writer: one tape must not be mutated concurrently.
class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b);
  // a * b^T without materializing the transpose.
  Tensor matmul_nt(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);
  Tensor row_softmax(const Tensor& a);
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
  Tensor add(const Tensor& a, const Tensor& b);
  // Broadcast a 1xN row over every row of a.
  Tensor add_rowvec(const Tensor& a, const Tensor& r);
  // Broadcast a 1x1 scalar over every element of a.
  Tensor add_scalar(const Tensor& a, const Tensor& s);
  Tensor scale(const Tensor& a, double c);
  Tensor mul(const Tensor& a, const Tensor& b);
  // x * w + b with b a 1xQ row broadcast over rows.
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
  // Per-row standardization (population variance + eps) then gain*x + bias.
  Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-5);
  Tensor gelu(const Tensor& a);
  Tensor sum(const Tensor& a);
  // Mean of rows r0..r1 inclusive, as a 1xN row.
  Tensor mean_rows(const Tensor& a, std::size_t r0, std::size_t r1);
  // Gather rows of table by id; backward scatter-adds.
  Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
  // -log(max(p[gold], 1e-12)) for a 1xN probability row.
  Tensor nll_of_index(const Tensor& probabilities, std::size_t gold);

  // loss must be 1x1. Deterministic: two runs on the same tape (after
  // zero_grads) produce bit-identical grads.
  void backward(const Tensor& loss);

  // Zeroes the grad buffers of every tensor this tape has touched.
  void zero_grads();

  std::size_t num_ops() const { return steps_.size(); }

 private:
  struct Step {
    std::function<void()> back;
  };
  std::vector<Step> steps_;
  std::vector<std::shared_ptr<Tensor::Node>> touched_;

  void record(std::function<void()> back) { steps_.push_back({std::move(back)}); }
  void touch(std::initializer_list<std::shared_ptr<Tensor::Node>> nodes) {
    for (const auto& n : nodes) touched_.push_back(n);
  }
};

// Cosine similarity of two equal-length row vectors. Zero-norm inputs yield 0
// and set *zero_norm when provided (decision: keeps downstream weights total).
double cosine(const Tensor& u, const Tensor& v, bool* zero_norm = nullptr);

}  // namespace xltt
