#include "xltt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace xltt {

namespace {

std::string shape_of(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

// C(+)= A * B, optionally with either side transposed. A is stored ar x ac,
// B is br x bc; logical dims after transposition must chain.
void mm_accum(const std::vector<double>& a, std::size_t ar, std::size_t ac, bool ta,
              const std::vector<double>& b, std::size_t br, std::size_t bc, bool tb,
              std::vector<double>& c) {
  const std::size_t m = ta ? ac : ar;
  const std::size_t k = ta ? ar : ac;
  const std::size_t n = tb ? br : bc;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * ac + i] : a[i * ac + p];
        const double bv = tb ? b[j * bc + p] : b[p * bc + j];
        acc += av * bv;
      }
      c[i * n + j] += acc;
    }
  }
}

constexpr double kProbFloor = 1e-12;

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->rows = rows;
  node_->cols = cols;
  node_->data.assign(rows * cols, 0.0);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  Tensor t(rows, cols, requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c, requires_grad);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged row lengths");
    std::size_t j = 0;
    for (double v : row) t.at(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::row(std::initializer_list<double> values, bool requires_grad) {
  Tensor t(1, values.size(), requires_grad);
  std::size_t j = 0;
  for (double v : values) t.at(0, j++) = v;
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return node_->data[i * node_->cols + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return node_->data[i * node_->cols + j];
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) throw std::logic_error("Tensor::grad: no gradient present");
  return node_->grad;
}

std::span<double> Tensor::grad_buffer() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1)
    throw ShapeError("item: tensor is " + shape_str() + ", expected 1x1");
  return node_->data[0];
}

bool Tensor::all_finite() const {
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_of(rows(), cols()); }

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                     b.shape_str());
  Tensor out(a.rows(), b.cols());
  mm_accum(a.node()->data, a.rows(), a.cols(), false, b.node()->data, b.rows(), b.cols(),
           false, out.node()->data);
  auto an = a.node(), bn = b.node(), on = out.node();
  touch({an, bn, on});
  record([an, bn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    // dA += dC * B^T ; dB += A^T * dC
    mm_accum(on->grad, on->rows, on->cols, false, bn->data, bn->rows, bn->cols, true,
             an->grad);
    mm_accum(an->data, an->rows, an->cols, true, on->grad, on->rows, on->cols, false,
             bn->grad);
  });
  return out;
}

Tensor Tape::matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: inner dimensions disagree, " + a.shape_str() + " vs " +
                     b.shape_str() + "^T");
  Tensor out(a.rows(), b.rows());
  mm_accum(a.node()->data, a.rows(), a.cols(), false, b.node()->data, b.rows(), b.cols(),
           true, out.node()->data);
  auto an = a.node(), bn = b.node(), on = out.node();
  touch({an, bn, on});
  record([an, bn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    // C = A * B^T: dA += dC * B ; dB += dC^T * A
    mm_accum(on->grad, on->rows, on->cols, false, bn->data, bn->rows, bn->cols, false,
             an->grad);
    mm_accum(on->grad, on->rows, on->cols, true, an->data, an->rows, an->cols, false,
             bn->grad);
  });
  return out;
}

Tensor Tape::transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    for (std::size_t i = 0; i < on->rows; ++i)
      for (std::size_t j = 0; j < on->cols; ++j)
        an->grad[j * an->cols + i] += on->grad[i * on->cols + j];
  });
  return out;
}

Tensor Tape::row_softmax(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(a.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= denom;
  }
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    const std::size_t n = on->cols;
    for (std::size_t i = 0; i < on->rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        dot += on->grad[i * n + j] * on->data[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        an->grad[i * n + j] += on->data[i * n + j] * (on->grad[i * n + j] - dot);
    }
  });
  return out;
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts disagree, " + a.shape_str() + " vs " +
                     b.shape_str());
  Tensor out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
  }
  auto an = a.node(), bn = b.node(), on = out.node();
  touch({an, bn, on});
  record([an, bn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    for (std::size_t i = 0; i < on->rows; ++i) {
      for (std::size_t j = 0; j < an->cols; ++j)
        an->grad[i * an->cols + j] += on->grad[i * on->cols + j];
      for (std::size_t j = 0; j < bn->cols; ++j)
        bn->grad[i * bn->cols + j] += on->grad[i * on->cols + an->cols + j];
    }
  });
  return out;
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") out of " + a.shape_str());
  Tensor out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out.at(i, j - begin) = a.at(i, j);
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on, begin] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    for (std::size_t i = 0; i < on->rows; ++i)
      for (std::size_t j = 0; j < on->cols; ++j)
        an->grad[i * an->cols + begin + j] += on->grad[i * on->cols + j];
  });
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("add: shapes disagree, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.node()->data[i] = a.node()->data[i] + b.node()->data[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  touch({an, bn, on});
  record([an, bn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i];
      bn->grad[i] += on->grad[i];
    }
  });
  return out;
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& r) {
  if (r.rows() != 1 || r.cols() != a.cols())
    throw ShapeError("add_rowvec: row vector " + r.shape_str() + " does not broadcast over " +
                     a.shape_str());
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j) + r.at(0, j);
  auto an = a.node(), rn = r.node(), on = out.node();
  touch({an, rn, on});
  record([an, rn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (rn->grad.empty()) rn->grad.assign(rn->data.size(), 0.0);
    for (std::size_t i = 0; i < on->rows; ++i)
      for (std::size_t j = 0; j < on->cols; ++j) {
        an->grad[i * on->cols + j] += on->grad[i * on->cols + j];
        rn->grad[j] += on->grad[i * on->cols + j];
      }
  });
  return out;
}

Tensor Tape::add_scalar(const Tensor& a, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1)
    throw ShapeError("add_scalar: expected 1x1, got " + s.shape_str());
  Tensor out(a.rows(), a.cols());
  const double sv = s.at(0, 0);
  for (std::size_t i = 0; i < a.size(); ++i) out.node()->data[i] = a.node()->data[i] + sv;
  auto an = a.node(), sn = s.node(), on = out.node();
  touch({an, sn, on});
  record([an, sn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (sn->grad.empty()) sn->grad.assign(1, 0.0);
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += on->grad[i];
      sn->grad[0] += on->grad[i];
    }
  });
  return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.node()->data[i] = c * a.node()->data[i];
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on, c] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c * on->grad[i];
  });
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("mul: shapes disagree, " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.node()->data[i] = a.node()->data[i] * b.node()->data[i];
  auto an = a.node(), bn = b.node(), on = out.node();
  touch({an, bn, on});
  record([an, bn, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      an->grad[i] += bn->data[i] * on->grad[i];
      bn->grad[i] += an->data[i] * on->grad[i];
    }
  });
  return out;
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows())
    throw ShapeError("linear: x " + x.shape_str() + " does not chain with w " +
                     w.shape_str());
  if (b.rows() != 1 || b.cols() != w.cols())
    throw ShapeError("linear: bias " + b.shape_str() + " does not match w " +
                     w.shape_str());
  return add_rowvec(matmul(x, w), b);
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                        double eps) {
  const std::size_t n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
    throw ShapeError("layer_norm: gain " + gain.shape_str() + " / bias " +
                     bias.shape_str() + " do not match input " + a.shape_str());
  if (n == 0 || eps <= 0.0) throw ShapeError("layer_norm: need n >= 1 and eps > 0");

  Tensor out(a.rows(), n);
  std::vector<double> xhat(a.size());
  std::vector<double> inv_std(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += a.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = a.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (a.at(i, j) - mean) * inv;
      xhat[i * n + j] = h;
      out.at(i, j) = gain.at(0, j) * h + bias.at(0, j);
    }
  }
  auto an = a.node(), gn = gain.node(), bn = bias.node(), on = out.node();
  touch({an, gn, bn, on});
  record([an, gn, bn, on, xhat = std::move(xhat), inv_std = std::move(inv_std), n] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    if (gn->grad.empty()) gn->grad.assign(gn->data.size(), 0.0);
    if (bn->grad.empty()) bn->grad.assign(bn->data.size(), 0.0);
    for (std::size_t i = 0; i < on->rows; ++i) {
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double dy = on->grad[i * n + j];
        const double dxh = dy * gn->data[j];
        bn->grad[j] += dy;
        gn->grad[j] += dy * xhat[i * n + j];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * xhat[i * n + j];
      }
      mean_dxhat /= static_cast<double>(n);
      mean_dxhat_xhat /= static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double dxh = on->grad[i * n + j] * gn->data[j];
        an->grad[i * n + j] +=
            inv_std[i] * (dxh - mean_dxhat - xhat[i * n + j] * mean_dxhat_xhat);
      }
    }
  });
  return out;
}

Tensor Tape::gelu(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a.node()->data[i];
    out.node()->data[i] = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  }
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const double x = an->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      an->grad[i] += on->grad[i] * (cdf + x * pdf);
    }
  });
  return out;
}

Tensor Tape::sum(const Tensor& a) {
  Tensor out(1, 1);
  double acc = 0.0;
  for (double v : a.node()->data) acc += v;
  out.at(0, 0) = acc;
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[0];
  });
  return out;
}

Tensor Tape::mean_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  if (r0 > r1 || r1 >= a.rows())
    throw ShapeError("mean_rows: row range [" + std::to_string(r0) + "," +
                     std::to_string(r1) + "] out of " + a.shape_str());
  const double cnt = static_cast<double>(r1 - r0 + 1);
  Tensor out(1, a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = r0; i <= r1; ++i) acc += a.at(i, j);
    out.at(0, j) = acc / cnt;
  }
  auto an = a.node(), on = out.node();
  touch({an, on});
  record([an, on, r0, r1, cnt] {
    if (on->grad.empty()) return;
    if (an->grad.empty()) an->grad.assign(an->data.size(), 0.0);
    for (std::size_t j = 0; j < on->cols; ++j)
      for (std::size_t i = r0; i <= r1; ++i)
        an->grad[i * an->cols + j] += on->grad[j] / cnt;
  });
  return out;
}

Tensor Tape::gather_rows(const Tensor& table, const std::vector<int>& ids) {
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
      throw ShapeError("gather_rows: id " + std::to_string(id) + " out of table " +
                       table.shape_str());
  Tensor out(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < table.cols(); ++j)
      out.at(i, j) = table.at(static_cast<std::size_t>(ids[i]), j);
  auto tn = table.node(), on = out.node();
  touch({tn, on});
  record([tn, on, ids] {
    if (on->grad.empty()) return;
    if (tn->grad.empty()) tn->grad.assign(tn->data.size(), 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < on->cols; ++j)
        tn->grad[static_cast<std::size_t>(ids[i]) * tn->cols + j] +=
            on->grad[i * on->cols + j];
  });
  return out;
}

Tensor Tape::nll_of_index(const Tensor& probabilities, std::size_t gold) {
  if (probabilities.rows() != 1)
    throw ShapeError("nll_of_index: expected a 1xN row, got " + probabilities.shape_str());
  if (gold >= probabilities.cols())
    throw std::out_of_range("nll_of_index: index " + std::to_string(gold) +
                            " out of range for " + probabilities.shape_str());
  const double p = std::max(probabilities.at(0, gold), kProbFloor);
  Tensor out(1, 1);
  out.at(0, 0) = -std::log(p);
  auto pn = probabilities.node(), on = out.node();
  touch({pn, on});
  record([pn, on, gold, p] {
    if (on->grad.empty()) return;
    if (pn->grad.empty()) pn->grad.assign(pn->data.size(), 0.0);
    pn->grad[gold] += on->grad[0] * (-1.0 / p);
  });
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + loss.shape_str());
  loss.node()->grad.assign(1, 1.0);
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->back();
}

void Tape::zero_grads() {
  for (const auto& n : touched_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

double cosine(const Tensor& u, const Tensor& v, bool* zero_norm) {
  if (u.rows() != 1 || v.rows() != 1 || u.cols() != v.cols())
    throw ShapeError("cosine: expected matching 1xN rows, got " + u.shape_str() + " vs " +
                     v.shape_str());
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t j = 0; j < u.cols(); ++j) {
    dot += u.at(0, j) * v.at(0, j);
    nu += u.at(0, j) * u.at(0, j);
    nv += v.at(0, j) * v.at(0, j);
  }
  if (zero_norm) *zero_norm = false;
  if (nu == 0.0 || nv == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 0.0;
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace xltt
