#pragma once

// Dense tensors and the small amount of multilinear algebra the model needs.
//
// Storage is column-major over the multi-index (first index fastest), which is
// the inverse lexicographic order used by vec(.).  Every Kronecker identity in
// the sampler, e.g. vec(a o b o c) == kron(c, kron(b, a)), relies on it.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mstr {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

template <typename Scalar>
class DenseTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Vector::Zero(shape_size(shape_));
  }

  DenseTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("DenseTensor: data length " + std::to_string(data_.size()) +
                           " does not match shape product " + std::to_string(shape_size(shape_)));
    }
  }

  static DenseTensor Zero(Shape shape) { return DenseTensor(std::move(shape)); }

  static DenseTensor Constant(Shape shape, Scalar value) {
    DenseTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  template <typename Rng>
  static DenseTensor Random(Shape shape, Rng& rng) {
    DenseTensor t(std::move(shape));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (Index i = 0; i < t.size(); ++i) t.data_[i] = Scalar(unif(rng));
    return t;
  }

  Index order() const { return static_cast<Index>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  Index dim(Index mode) const { return shape_.at(static_cast<std::size_t>(mode)); }
  Index size() const { return data_.size(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  Index linear_index(const std::vector<Index>& idx) const {
    if (static_cast<Index>(idx.size()) != order()) {
      throw DimensionError("DenseTensor: index arity mismatch");
    }
    Index lin = 0;
    Index stride = 1;
    for (std::size_t m = 0; m < shape_.size(); ++m) {
      if (idx[m] < 0 || idx[m] >= shape_[m]) throw DimensionError("DenseTensor: index out of range");
      lin += idx[m] * stride;
      stride *= shape_[m];
    }
    return lin;
  }

  std::vector<Index> multi_index(Index lin) const {
    std::vector<Index> idx(shape_.size());
    for (std::size_t m = 0; m < shape_.size(); ++m) {
      idx[m] = lin % shape_[m];
      lin /= shape_[m];
    }
    return idx;
  }

  Scalar& operator()(const std::vector<Index>& idx) { return data_[linear_index(idx)]; }
  Scalar operator()(const std::vector<Index>& idx) const { return data_[linear_index(idx)]; }

  template <typename... I>
  Scalar& at(I... idx) {
    return (*this)(std::vector<Index>{static_cast<Index>(idx)...});
  }
  template <typename... I>
  Scalar at(I... idx) const {
    return (*this)(std::vector<Index>{static_cast<Index>(idx)...});
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("DenseTensor: order must be at least 1");
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("DenseTensor: non-positive dimension");
    }
  }

  Shape shape_;
  Vector data_;
};

using Tensor = DenseTensor<double>;

namespace detail {

// Sizes of the index blocks before, at and after `mode`.
struct ModeSplit {
  Index left;
  Index mid;
  Index right;
};

inline ModeSplit split_at(const Shape& shape, Index mode) {
  if (mode < 0 || mode >= static_cast<Index>(shape.size())) {
    throw DimensionError("mode " + std::to_string(mode) + " out of range for order " +
                         std::to_string(shape.size()));
  }
  ModeSplit s{1, shape[static_cast<std::size_t>(mode)], 1};
  for (Index m = 0; m < mode; ++m) s.left *= shape[static_cast<std::size_t>(m)];
  for (Index m = mode + 1; m < static_cast<Index>(shape.size()); ++m) {
    s.right *= shape[static_cast<std::size_t>(m)];
  }
  return s;
}

}  // namespace detail

/// Contracts `t` with `v` along `mode` (0-based).  The result has order D-1;
/// contracting a vector (D=1) yields a 1-element tensor holding the inner product.
template <typename Scalar, typename Derived>
DenseTensor<Scalar> mode_n_vec_product(const DenseTensor<Scalar>& t,
                                       const Eigen::MatrixBase<Derived>& v, Index mode) {
  const auto s = detail::split_at(t.shape(), mode);
  if (v.size() != s.mid) {
    throw DimensionError("mode_n_vec_product: vector length " + std::to_string(v.size()) +
                         " != dimension " + std::to_string(s.mid) + " of mode " +
                         std::to_string(mode));
  }
  Shape out_shape;
  for (Index m = 0; m < t.order(); ++m) {
    if (m != mode) out_shape.push_back(t.dim(m));
  }
  if (out_shape.empty()) out_shape.push_back(1);

  typename DenseTensor<Scalar>::Vector out(s.left * s.right);
  using ConstMap = Eigen::Map<const typename DenseTensor<Scalar>::Matrix>;
  for (Index c = 0; c < s.right; ++c) {
    ConstMap block(t.data().data() + c * s.left * s.mid, s.left, s.mid);
    out.segment(c * s.left, s.left).noalias() = block * v.template cast<Scalar>();
  }
  return DenseTensor<Scalar>(std::move(out_shape), std::move(out));
}

/// Mode-n unfolding: the columns are the mode-n fibers, ordered by the
/// remaining indices in column-major order.
template <typename Scalar>
typename DenseTensor<Scalar>::Matrix matricize(const DenseTensor<Scalar>& t, Index mode) {
  const auto s = detail::split_at(t.shape(), mode);
  typename DenseTensor<Scalar>::Matrix out(s.mid, s.left * s.right);
  using ConstMap = Eigen::Map<const typename DenseTensor<Scalar>::Matrix>;
  for (Index c = 0; c < s.right; ++c) {
    ConstMap block(t.data().data() + c * s.left * s.mid, s.left, s.mid);
    out.middleCols(c * s.left, s.left) = block.transpose();
  }
  return out;
}

template <typename Derived>
DenseTensor<typename Derived::Scalar> dematricize(const Eigen::MatrixBase<Derived>& m, Index mode,
                                                  const Shape& shape) {
  using Scalar = typename Derived::Scalar;
  const auto s = detail::split_at(shape, mode);
  if (m.rows() != s.mid || m.cols() != s.left * s.right) {
    throw DimensionError("dematricize: matrix shape does not match target tensor");
  }
  DenseTensor<Scalar> t(shape);
  using Map = Eigen::Map<typename DenseTensor<Scalar>::Matrix>;
  for (Index c = 0; c < s.right; ++c) {
    Map block(t.data().data() + c * s.left * s.mid, s.left, s.mid);
    block = m.middleCols(c * s.left, s.left).transpose();
  }
  return t;
}

template <typename Scalar>
const typename DenseTensor<Scalar>::Vector& vectorize(const DenseTensor<Scalar>& t) {
  return t.data();
}

template <typename Scalar>
DenseTensor<Scalar> as_tensor(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  return DenseTensor<Scalar>(Shape{v.size()}, v);
}

/// Outer product of two tensors; the result's modes are those of `a` followed by those of `b`.
template <typename Scalar>
DenseTensor<Scalar> outer_product(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b) {
  Shape shape = a.shape();
  shape.insert(shape.end(), b.shape().begin(), b.shape().end());
  typename DenseTensor<Scalar>::Vector data(a.size() * b.size());
  for (Index j = 0; j < b.size(); ++j) data.segment(j * a.size(), a.size()) = a.data() * b.data()[j];
  return DenseTensor<Scalar>(std::move(shape), std::move(data));
}

template <typename Scalar>
DenseTensor<Scalar> outer_product(const std::vector<DenseTensor<Scalar>>& operands) {
  if (operands.size() < 2) throw DimensionError("outer_product: need at least two operands");
  DenseTensor<Scalar> acc = operands.front();
  for (std::size_t k = 1; k < operands.size(); ++k) acc = outer_product(acc, operands[k]);
  return acc;
}

template <typename Scalar>
DenseTensor<Scalar> outer_product(
    std::initializer_list<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> vectors) {
  std::vector<DenseTensor<Scalar>> ops;
  for (const auto& v : vectors) ops.push_back(as_tensor(v));
  return outer_product(ops);
}

/// kron(a, b) for column vectors; block j of the result is a[j] * b.
template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, 1> kron(const Eigen::MatrixBase<DA>& a,
                                                           const Eigen::MatrixBase<DB>& b) {
  Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, 1> out(a.size() * b.size());
  for (Index j = 0; j < a.size(); ++j) out.segment(j * b.size(), b.size()) = a(j) * b;
  return out;
}

/// PARAFAC(R) marginals of a D-order tensor stored as factor matrices:
/// factor(h) is n_h x R and its column r is the marginal gamma_h^(r).
template <typename Scalar>
class ParafacMarginals {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ParafacMarginals() = default;

  ParafacMarginals(const Shape& dims, Index rank) : rank_(rank) {
    if (rank <= 0) throw DimensionError("ParafacMarginals: rank must be positive");
    for (Index n : dims) {
      if (n <= 0) throw DimensionError("ParafacMarginals: non-positive mode length");
      factors_.push_back(Matrix::Zero(n, rank));
    }
  }

  explicit ParafacMarginals(std::vector<Matrix> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw DimensionError("ParafacMarginals: no factors");
    rank_ = factors_.front().cols();
    for (const auto& f : factors_) {
      if (f.cols() != rank_ || f.rows() <= 0) {
        throw DimensionError("ParafacMarginals: inconsistent factor matrices");
      }
    }
  }

  Index rank() const { return rank_; }
  Index order() const { return static_cast<Index>(factors_.size()); }
  Index dim(Index mode) const { return factors_.at(static_cast<std::size_t>(mode)).rows(); }
  Shape dims() const {
    Shape s;
    for (const auto& f : factors_) s.push_back(f.rows());
    return s;
  }

  const Matrix& factor(Index mode) const { return factors_.at(static_cast<std::size_t>(mode)); }
  Matrix& factor(Index mode) { return factors_.at(static_cast<std::size_t>(mode)); }

  auto marginal(Index mode, Index r) const { return factor(mode).col(r); }
  auto marginal(Index mode, Index r) { return factor(mode).col(r); }

  /// Number of free reals: R * sum_h n_h.
  Index parameter_count() const {
    Index n = 0;
    for (const auto& f : factors_) n += f.rows();
    return rank_ * n;
  }

 private:
  std::vector<Matrix> factors_;
  Index rank_ = 0;
};

using Marginals = ParafacMarginals<double>;

/// Column-wise Khatri-Rao product of factors [first_mode, last_mode) taken in
/// reverse order, so column r equals vec(gamma_first^(r) o ... o gamma_last-1^(r)).
template <typename Scalar>
typename ParafacMarginals<Scalar>::Matrix rank_one_columns(const ParafacMarginals<Scalar>& m,
                                                           Index first_mode, Index last_mode) {
  if (first_mode < 0 || last_mode > m.order() || first_mode >= last_mode) {
    throw DimensionError("rank_one_columns: invalid mode range");
  }
  typename ParafacMarginals<Scalar>::Matrix out = m.factor(first_mode);
  for (Index h = first_mode + 1; h < last_mode; ++h) {
    const auto& f = m.factor(h);
    typename ParafacMarginals<Scalar>::Matrix next(out.rows() * f.rows(), m.rank());
    for (Index r = 0; r < m.rank(); ++r) next.col(r) = kron(f.col(r), out.col(r));
    out = std::move(next);
  }
  return out;
}

/// Sum of R outer products gamma_1^(r) o ... o gamma_D^(r).
template <typename Scalar>
DenseTensor<Scalar> parafac_reconstruct(const ParafacMarginals<Scalar>& m) {
  const auto cols = rank_one_columns(m, 0, m.order());
  return DenseTensor<Scalar>(m.dims(), cols.rowwise().sum());
}

}  // namespace mstr
