#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "otmetrics/error.hpp"

namespace otmetrics {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transposed() const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using CostMatrix = Matrix;
using Point = std::vector<double>;

struct DiscreteDistribution {
  std::vector<Point> support;
  std::vector<double> mass;

  std::size_t size() const noexcept { return mass.size(); }

  // Validates and rescales `mass` to sum to one.
  static DiscreteDistribution normalized(std::vector<Point> support, std::vector<double> mass);
  static DiscreteDistribution uniform(std::vector<Point> support);
};

struct TransportPlan {
  Matrix flow;
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& detail)
      : Error(ErrorClass::kSchema, "DimensionMismatch", detail) {}
};

class InvalidDistribution : public Error {
 public:
  explicit InvalidDistribution(const std::string& detail)
      : Error(ErrorClass::kNumeric, "InvalidDistribution", detail) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& detail)
      : Error(ErrorClass::kNumeric, "NumericalFailure", detail) {}
};

class DegenerateKernel : public Error {
 public:
  explicit DegenerateKernel(const std::string& detail)
      : Error(ErrorClass::kNumeric, "DegenerateKernel", detail) {}
};

class SupportMismatch : public Error {
 public:
  explicit SupportMismatch(const std::string& detail)
      : Error(ErrorClass::kSchema, "SupportMismatch", detail) {}
};

// entries(i, j) = ||x_i - y_j||_2
CostMatrix cost_matrix(std::span<const Point> xs, std::span<const Point> ys);

struct EmdResult {
  double cost = 0.0;
  TransportPlan plan;
  // Dual certificate: u_i + v_j <= C_ij, gap = cost - (a.u + b.v).
  std::vector<double> source_potential;
  std::vector<double> target_potential;
  double duality_gap = 0.0;
  double dual_infeasibility = 0.0;
  std::size_t pivots = 0;
};

// Exact optimal transport by the transportation simplex: north-west-corner
// start, Bland's entering/leaving rule, supplies perturbed by 1e-12*(i+1) to
// avoid degenerate pivots. The final basis is re-solved on the unperturbed
// masses, so the reported plan and cost carry no perturbation.
//
// The problem is put in a canonical orientation before solving, which makes
// emd_exact(a, b, C) and emd_exact(b, a, C^T) bit-identical.
EmdResult emd_exact(std::span<const double> a, std::span<const double> b, const CostMatrix& cost);
EmdResult emd_exact(const DiscreteDistribution& a, const DiscreteDistribution& b,
                    const CostMatrix& cost);

struct SinkhornResult {
  double cost = 0.0;
  TransportPlan plan;
  bool converged = false;
  std::size_t iterations = 0;
  // Sum of absolute row- and column-marginal violations of the returned plan.
  double marginal_error = 0.0;
};

// Log-domain Sinkhorn. Stops when marginal_error < tol or after max_iter
// iterations; cost = <C, plan>.
SinkhornResult sinkhorn(std::span<const double> a, std::span<const double> b,
                        const CostMatrix& cost, double epsilon, std::size_t max_iter, double tol);
SinkhornResult sinkhorn(const DiscreteDistribution& a, const DiscreteDistribution& b,
                        const CostMatrix& cost, double epsilon, std::size_t max_iter, double tol);

struct BarycenterResult {
  DiscreteDistribution distribution;
  bool converged = false;
  std::size_t iterations = 0;
};

// Entropic Wasserstein barycenter on a fixed shared support by iterative
// Bregman projections (log domain), Euclidean ground cost. When a single input
// carries all the weight it is returned unchanged.
BarycenterResult barycenter_fixed_support(std::span<const DiscreteDistribution> dists,
                                          std::span<const double> weights, double epsilon,
                                          std::size_t max_iter, double tol);

// log(sum_i exp(x_i)); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> xs);

}  // namespace otmetrics
