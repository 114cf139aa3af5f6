// Copyright 2026 The xmodal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMODAL_NUMERICS_H_
#define XMODAL_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace xmodal {

// Dense row-major matrix of doubles. Rows are embeddings, frames or samples
// depending on context.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Takes ownership of row-major `data`; throws if the size does not match or
  // any entry is non-finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix FromRows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  Matrix Transpose() const;
  // Rows `indices` in the given order.
  Matrix SelectRows(std::span<const std::size_t> indices) const;
  bool AllFinite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> a);

// log(sum(exp(values))) evaluated after shifting by the maximum.
double LogSumExp(std::span<const double> values);

// (i, j) -> ||a_i - b_j||_2.
Matrix PairwiseEuclidean(const Matrix& a, const Matrix& b);

// (i, j) -> cos(a_i, b_j). Rows whose squared norm does not exceed the
// guard are rejected as "degenerate embedding".
Matrix PairwiseCosine(const Matrix& a, const Matrix& b);

inline constexpr double kCosineGuard = 1e-12;

// xoshiro256** seeded through splitmix64. The integer stream is fully
// specified, so a seed reproduces the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent generator for a named sub-stream of `seed`.
  static Rng Derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller; the second variate is cached.
  double Normal();
  // Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
  std::size_t Index(std::size_t n);

  // Fisher-Yates shuffle driven by Index().
  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = Index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct values from [0, n) in random order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Matrix of i.i.d. standard normal entries.
Matrix RandomNormal(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace xmodal

#endif  // XMODAL_NUMERICS_H_
