#include "otmetrics/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace otmetrics {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPerturbation = 1e-12;

std::vector<double> normalized_masses(std::span<const double> m, const char* side) {
  if (m.empty()) throw InvalidDistribution(std::string(side) + " distribution has empty support");
  double sum = 0.0;
  for (double x : m) {
    if (!std::isfinite(x) || x < 0.0) {
      throw InvalidDistribution(std::string(side) + " masses must be finite and non-negative");
    }
    sum += x;
  }
  if (!(sum > 0.0)) throw InvalidDistribution(std::string(side) + " masses sum to zero");
  std::vector<double> out(m.begin(), m.end());
  for (auto& x : out) x /= sum;
  return out;
}

void check_cost(const CostMatrix& c, std::size_t n, std::size_t m) {
  if (c.rows() != n || c.cols() != m) {
    throw ShapeMismatch("cost matrix is " + std::to_string(c.rows()) + "x" +
                        std::to_string(c.cols()) + ", masses need " + std::to_string(n) + "x" +
                        std::to_string(m));
  }
  for (double x : c.data()) {
    if (!std::isfinite(x)) throw InvalidDistribution("cost matrix has non-finite entries");
  }
}

std::vector<std::size_t> positive_indices(const std::vector<double>& m) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

// Transportation simplex on a compact problem (all masses strictly positive).
// Nodes 0..n-1 are sources, n..n+m-1 are sinks; the basis is a spanning tree.
class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, std::vector<double> supply, std::vector<double> demand)
      : c_(cost),
        n_(supply.size()),
        m_(demand.size()),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        basic_(n_ * m_, 0),
        flow_(n_ * m_, 0.0),
        row_adj_(n_),
        col_adj_(m_),
        u_(n_, 0.0),
        v_(m_, 0.0) {
    double cmax = 0.0;
    for (double x : c_.data()) cmax = std::max(cmax, std::fabs(x));
    price_tol_ = 1e-11 * (1.0 + cmax);
  }

  std::size_t solve() {
    std::vector<double> s = supply_;
    std::vector<double> d = demand_;
    double added = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      s[i] += kPerturbation * static_cast<double>(i + 1);
      added += kPerturbation * static_cast<double>(i + 1);
    }
    d[m_ - 1] += added;
    perturbation_total_ = added;
    north_west_corner(s, d);

    const std::size_t max_pivots = 50 * (n_ + m_) * (n_ + m_) + 1000;
    std::size_t pivots = 0;
    for (;;) {
      compute_potentials();
      std::size_t enter = n_ * m_;
      for (std::size_t cell = 0; cell < n_ * m_ && enter == n_ * m_; ++cell) {
        if (basic_[cell]) continue;
        const std::size_t i = cell / m_, j = cell % m_;
        if (c_(i, j) - u_[i] - v_[j] < -price_tol_) enter = cell;
      }
      if (enter == n_ * m_) break;
      if (++pivots > max_pivots) {
        throw NumericalFailure("transportation simplex exceeded " + std::to_string(max_pivots) +
                               " pivots");
      }
      pivot(enter);
    }
    compute_potentials();
    resolve_flows();
    return pivots;
  }

  double flow(std::size_t i, std::size_t j) const { return flow_[i * m_ + j]; }
  const std::vector<double>& u() const { return u_; }
  const std::vector<double>& v() const { return v_; }

 private:
  void add_basic(std::size_t i, std::size_t j, double x) {
    basic_[i * m_ + j] = 1;
    flow_[i * m_ + j] = x;
    row_adj_[i].push_back(j);
    col_adj_[j].push_back(i);
  }

  void remove_basic(std::size_t i, std::size_t j) {
    basic_[i * m_ + j] = 0;
    flow_[i * m_ + j] = 0.0;
    row_adj_[i].erase(std::find(row_adj_[i].begin(), row_adj_[i].end(), j));
    col_adj_[j].erase(std::find(col_adj_[j].begin(), col_adj_[j].end(), i));
  }

  // Exactly n+m-1 basic cells; each step retires one row or one column.
  void north_west_corner(std::vector<double> s, std::vector<double> d) {
    std::size_t i = 0, j = 0;
    for (;;) {
      const double x = std::min(s[i], d[j]);
      add_basic(i, j, x);
      s[i] -= x;
      d[j] -= x;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (i == n_ - 1) {
        ++j;
      } else if (j == m_ - 1) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void compute_potentials() {
    std::vector<char> seen(n_ + m_, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    u_[0] = 0.0;
    std::size_t reached = 1;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node < n_) {
        for (std::size_t j : row_adj_[node]) {
          if (seen[n_ + j]) continue;
          seen[n_ + j] = 1;
          v_[j] = c_(node, j) - u_[node];
          queue.push_back(n_ + j);
          ++reached;
        }
      } else {
        const std::size_t j = node - n_;
        for (std::size_t i : col_adj_[j]) {
          if (seen[i]) continue;
          seen[i] = 1;
          u_[i] = c_(i, j) - v_[j];
          queue.push_back(i);
          ++reached;
        }
      }
    }
    if (reached != n_ + m_) throw NumericalFailure("simplex basis is not a spanning tree");
  }

  void pivot(std::size_t enter) {
    const std::size_t ei = enter / m_, ej = enter % m_;
    // Tree path from sink ej back to source ei.
    std::vector<std::size_t> parent(n_ + m_, n_ + m_);
    std::vector<char> seen(n_ + m_, 0);
    std::deque<std::size_t> queue{ei};
    seen[ei] = 1;
    const std::size_t target = n_ + ej;
    while (!queue.empty() && !seen[target]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node < n_) {
        for (std::size_t j : row_adj_[node]) {
          if (seen[n_ + j]) continue;
          seen[n_ + j] = 1;
          parent[n_ + j] = node;
          queue.push_back(n_ + j);
        }
      } else {
        for (std::size_t i : col_adj_[node - n_]) {
          if (seen[i]) continue;
          seen[i] = 1;
          parent[i] = node;
          queue.push_back(i);
        }
      }
    }
    if (!seen[target]) throw NumericalFailure("entering cell has no cycle in the basis tree");

    // Edges along the path alternate -, +, -, ..., - starting at the sink.
    std::vector<std::size_t> cycle;
    for (std::size_t node = target; node != ei; node = parent[node]) {
      const std::size_t p = parent[node];
      cycle.push_back(node < n_ ? node * m_ + (p - n_) : p * m_ + (node - n_));
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = n_ * m_;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const double f = flow_[cycle[k]];
      if (f < theta || (f == theta && cycle[k] < leave)) {
        theta = f;
        leave = cycle[k];
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      flow_[cycle[k]] += (k % 2 == 0) ? -theta : theta;
    }
    remove_basic(leave / m_, leave % m_);
    add_basic(ei, ej, theta);
  }

  // Recomputes basic flows for the unperturbed masses by peeling tree leaves.
  void resolve_flows() {
    const std::size_t nodes = n_ + m_;
    std::vector<double> rest(nodes);
    for (std::size_t i = 0; i < n_; ++i) rest[i] = supply_[i];
    for (std::size_t j = 0; j < m_; ++j) rest[n_ + j] = demand_[j];
    std::vector<std::size_t> degree(nodes);
    for (std::size_t i = 0; i < n_; ++i) degree[i] = row_adj_[i].size();
    for (std::size_t j = 0; j < m_; ++j) degree[n_ + j] = col_adj_[j].size();
    std::vector<char> assigned(n_ * m_, 0);
    std::deque<std::size_t> leaves;
    for (std::size_t x = 0; x < nodes; ++x) {
      if (degree[x] == 1) leaves.push_back(x);
    }
    std::size_t done = 0;
    // Dropping the perturbation moves each basic flow by at most its total.
    const double neg_tol = 2.0 * perturbation_total_ + 1e-10;
    while (!leaves.empty()) {
      const std::size_t x = leaves.front();
      leaves.pop_front();
      if (degree[x] != 1) continue;
      std::size_t cell = n_ * m_, other = nodes;
      if (x < n_) {
        for (std::size_t j : row_adj_[x]) {
          if (!assigned[x * m_ + j]) {
            cell = x * m_ + j;
            other = n_ + j;
          }
        }
      } else {
        for (std::size_t i : col_adj_[x - n_]) {
          if (!assigned[i * m_ + (x - n_)]) {
            cell = i * m_ + (x - n_);
            other = i;
          }
        }
      }
      double f = rest[x];
      if (f < 0.0) {
        if (f < -neg_tol) throw NumericalFailure("optimal basis infeasible for unperturbed masses");
        f = 0.0;
      }
      flow_[cell] = f;
      assigned[cell] = 1;
      rest[x] = 0.0;
      rest[other] -= f;
      degree[x] = 0;
      if (--degree[other] == 1) leaves.push_back(other);
      ++done;
    }
    if (done != n_ + m_ - 1) throw NumericalFailure("could not resolve basic flows");
  }

  const Matrix& c_;
  std::size_t n_, m_;
  std::vector<double> supply_, demand_;
  std::vector<char> basic_;
  std::vector<double> flow_;
  std::vector<std::vector<std::size_t>> row_adj_, col_adj_;
  std::vector<double> u_, v_;
  double price_tol_ = 0.0;
  double perturbation_total_ = 0.0;
};

// True when (b, a, C^T) is lexicographically smaller than (a, b, C).
bool should_transpose(const std::vector<double>& a, const std::vector<double>& b,
                      const CostMatrix& c) {
  if (a.size() != b.size()) return a.size() > b.size();
  if (a != b) return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      if (c(i, j) != c(j, i)) return c(j, i) < c(i, j);
    }
  }
  return false;
}

EmdResult emd_canonical(const std::vector<double>& a, const std::vector<double>& b,
                        const CostMatrix& c) {
  const std::size_t n = a.size(), m = b.size();
  const auto rows = positive_indices(a);
  const auto cols = positive_indices(b);

  std::vector<double> supply, demand;
  for (auto i : rows) supply.push_back(a[i]);
  for (auto j : cols) demand.push_back(b[j]);
  const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_d = std::accumulate(demand.begin(), demand.end(), 0.0);
  demand.back() += total_s - total_d;
  if (demand.back() < 0.0) demand.back() = 0.0;

  Matrix compact(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) compact(r, k) = c(rows[r], cols[k]);
  }
  TransportSimplex simplex(compact, supply, demand);

  EmdResult res;
  res.pivots = simplex.solve();
  res.plan.flow = Matrix(n, m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) res.plan.flow(rows[r], cols[k]) = simplex.flow(r, k);
  }

  // Potentials for every point; zero-mass points get the tightest feasible value.
  constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> u(n, kUnset), v(m, kUnset);
  for (std::size_t r = 0; r < rows.size(); ++r) u[rows[r]] = simplex.u()[r];
  for (std::size_t k = 0; k < cols.size(); ++k) v[cols[k]] = simplex.v()[k];
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(u[i])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (auto j : cols) best = std::min(best, c(i, j) - v[j]);
    u[i] = best;
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!std::isnan(v[j])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::min(best, c(i, j) - u[i]);
    v[j] = best;
  }

  double cost = 0.0, cmax = 0.0, infeas = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost += c(i, j) * res.plan.flow(i, j);
      cmax = std::max(cmax, std::fabs(c(i, j)));
      infeas = std::max(infeas, u[i] + v[j] - c(i, j));
    }
  }
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) dual += a[i] * u[i];
  for (std::size_t j = 0; j < m; ++j) dual += b[j] * v[j];

  res.cost = cost;
  res.source_potential = std::move(u);
  res.target_potential = std::move(v);
  res.duality_gap = cost - dual;
  res.dual_infeasibility = infeas;
  if (std::fabs(res.duality_gap) > 1e-7 * (1.0 + std::fabs(cost)) ||
      infeas > 1e-9 * (1.0 + cmax)) {
    throw NumericalFailure("optimality certificate failed (gap " + std::to_string(res.duality_gap) +
                           ", dual infeasibility " + std::to_string(infeas) + ")");
  }
  return res;
}

}  // namespace

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

DiscreteDistribution DiscreteDistribution::normalized(std::vector<Point> support,
                                                      std::vector<double> mass) {
  if (support.size() != mass.size()) {
    throw ShapeMismatch("support has " + std::to_string(support.size()) + " points but " +
                        std::to_string(mass.size()) + " masses");
  }
  auto m = normalized_masses(mass, "input");
  for (const auto& p : support) {
    if (p.size() != support.front().size()) throw ShapeMismatch("support points differ in dimension");
    for (double x : p) {
      if (!std::isfinite(x)) throw InvalidDistribution("support point has non-finite component");
    }
  }
  return {std::move(support), std::move(m)};
}

DiscreteDistribution DiscreteDistribution::uniform(std::vector<Point> support) {
  std::vector<double> mass(support.size(), 1.0);
  return normalized(std::move(support), std::move(mass));
}

CostMatrix cost_matrix(std::span<const Point> xs, std::span<const Point> ys) {
  CostMatrix c(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (xs[i].size() != ys[j].size()) {
        throw ShapeMismatch("point dimensions differ: " + std::to_string(xs[i].size()) + " vs " +
                            std::to_string(ys[j].size()));
      }
      double s = 0.0;
      for (std::size_t d = 0; d < xs[i].size(); ++d) {
        const double diff = xs[i][d] - ys[j][d];
        s += diff * diff;
      }
      c(i, j) = std::sqrt(s);
    }
  }
  return c;
}

EmdResult emd_exact(std::span<const double> a, std::span<const double> b, const CostMatrix& cost) {
  auto na = normalized_masses(a, "source");
  auto nb = normalized_masses(b, "target");
  check_cost(cost, na.size(), nb.size());
  if (!should_transpose(na, nb, cost)) return emd_canonical(na, nb, cost);

  auto t = emd_canonical(nb, na, cost.transposed());
  EmdResult res;
  res.cost = t.cost;
  res.plan.flow = t.plan.flow.transposed();
  res.source_potential = std::move(t.target_potential);
  res.target_potential = std::move(t.source_potential);
  res.duality_gap = t.duality_gap;
  res.dual_infeasibility = t.dual_infeasibility;
  res.pivots = t.pivots;
  return res;
}

EmdResult emd_exact(const DiscreteDistribution& a, const DiscreteDistribution& b,
                    const CostMatrix& cost) {
  return emd_exact(std::span<const double>(a.mass), std::span<const double>(b.mass), cost);
}

double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

SinkhornResult sinkhorn(std::span<const double> a_in, std::span<const double> b_in,
                        const CostMatrix& cost, double epsilon, std::size_t max_iter, double tol) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidConfig("sinkhorn epsilon must be a positive finite number");
  }
  if (!(tol > 0.0)) throw InvalidConfig("sinkhorn tolerance must be positive");
  const auto a_full = normalized_masses(a_in, "source");
  const auto b_full = normalized_masses(b_in, "target");
  check_cost(cost, a_full.size(), b_full.size());
  const auto rows = positive_indices(a_full);
  const auto cols = positive_indices(b_full);
  const std::size_t n = rows.size(), m = cols.size();

  // Scaled costs C/eps and log-masses on the compact problem.
  Matrix ce(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < m; ++k) ce(r, k) = cost(rows[r], cols[k]) / epsilon;
  }
  std::vector<double> loga(n), logb(m), a(n), b(m);
  for (std::size_t r = 0; r < n; ++r) {
    a[r] = a_full[rows[r]];
    loga[r] = std::log(a[r]);
  }
  for (std::size_t k = 0; k < m; ++k) {
    b[k] = b_full[cols[k]];
    logb[k] = std::log(b[k]);
  }

  // Dual potentials divided by eps; start at the normalized kernel K / sum(K).
  std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  {
    std::vector<double> all;
    all.reserve(n * m);
    for (double x : ce.data()) all.push_back(-x);
    const double lz = log_sum_exp(all);
    if (!std::isfinite(lz)) throw DegenerateKernel("kernel is identically zero");
    std::fill(f.begin(), f.end(), -lz);
  }

  auto marginal_error = [&]() {
    double err = 0.0;
    std::vector<double> col(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double row = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double p = std::exp(f[r] + g[k] - ce(r, k));
        row += p;
        col[k] += p;
      }
      err += std::fabs(row - a[r]);
    }
    for (std::size_t k = 0; k < m; ++k) err += std::fabs(col[k] - b[k]);
    return err;
  };

  SinkhornResult res;
  double err = marginal_error();
  while (!(err < tol) && res.iterations < max_iter) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = 0; k < m; ++k) buf[k] = g[k] - ce(r, k);
      f[r] = loga[r] - log_sum_exp(std::span<const double>(buf.data(), m));
    }
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t r = 0; r < n; ++r) buf[r] = f[r] - ce(r, k);
      g[k] = logb[k] - log_sum_exp(std::span<const double>(buf.data(), n));
    }
    ++res.iterations;
    for (double x : f) {
      if (!std::isfinite(x)) throw DegenerateKernel("row scaling underflowed in log domain");
    }
    for (double x : g) {
      if (!std::isfinite(x)) throw DegenerateKernel("column scaling underflowed in log domain");
    }
    err = marginal_error();
  }
  res.converged = err < tol;
  res.marginal_error = err;

  res.plan.flow = Matrix(a_full.size(), b_full.size());
  double c_sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      const double p = std::exp(f[r] + g[k] - ce(r, k));
      res.plan.flow(rows[r], cols[k]) = p;
      c_sum += cost(rows[r], cols[k]) * p;
    }
  }
  res.cost = c_sum;
  return res;
}

SinkhornResult sinkhorn(const DiscreteDistribution& a, const DiscreteDistribution& b,
                        const CostMatrix& cost, double epsilon, std::size_t max_iter, double tol) {
  return sinkhorn(std::span<const double>(a.mass), std::span<const double>(b.mass), cost, epsilon,
                  max_iter, tol);
}

BarycenterResult barycenter_fixed_support(std::span<const DiscreteDistribution> dists,
                                          std::span<const double> weights, double epsilon,
                                          std::size_t max_iter, double tol) {
  if (dists.empty()) throw InvalidConfig("barycenter needs at least one distribution");
  if (weights.size() != dists.size()) {
    throw InvalidConfig("barycenter weights and distributions differ in count");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidConfig("barycenter epsilon must be a positive finite number");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidConfig("barycenter weights must be non-negative");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-9) throw InvalidConfig("barycenter weights must sum to one");
  const auto& support = dists.front().support;
  for (const auto& d : dists) {
    if (d.support != support || d.mass.size() != support.size()) {
      throw SupportMismatch("barycenter inputs must share one support list");
    }
  }

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] > 0.0) active.push_back(k);
  }
  if (active.size() == 1) {
    const auto& only = dists[active.front()];
    return {DiscreteDistribution::normalized(only.support, only.mass), true, 0};
  }

  const std::size_t s = support.size();
  const CostMatrix c = cost_matrix(support, support);
  Matrix ce(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) ce(i, j) = c(i, j) / epsilon;
  }

  struct Input {
    double weight;
    std::vector<std::size_t> idx;  // points with positive mass
    std::vector<double> logb;
    std::vector<double> phi;       // log u on idx
    std::vector<double> psi;       // log v on the full support
    std::vector<double> ell;       // log K^T u on the full support
  };
  std::vector<Input> in;
  for (auto k : active) {
    const auto mass = normalized_masses(dists[k].mass, "barycenter input");
    Input x{weights[k], positive_indices(mass), {}, {}, std::vector<double>(s, 0.0),
            std::vector<double>(s, 0.0)};
    for (auto i : x.idx) x.logb.push_back(std::log(mass[i]));
    x.phi.resize(x.idx.size());
    in.push_back(std::move(x));
  }

  std::vector<double> logp(s), p(s), prev(s, -1.0), buf(s);
  BarycenterResult res;
  while (res.iterations < max_iter) {
    ++res.iterations;
    std::fill(logp.begin(), logp.end(), 0.0);
    for (auto& x : in) {
      for (std::size_t r = 0; r < x.idx.size(); ++r) {
        const std::size_t i = x.idx[r];
        for (std::size_t j = 0; j < s; ++j) buf[j] = x.psi[j] - ce(i, j);
        x.phi[r] = x.logb[r] - log_sum_exp(buf);
      }
      for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t r = 0; r < x.idx.size(); ++r) buf[r] = x.phi[r] - ce(x.idx[r], j);
        x.ell[j] = log_sum_exp(std::span<const double>(buf.data(), x.idx.size()));
        logp[j] += x.weight * x.ell[j];
      }
    }
    for (auto& x : in) {
      for (std::size_t j = 0; j < s; ++j) x.psi[j] = logp[j] - x.ell[j];
    }
    const double lz = log_sum_exp(logp);
    if (!std::isfinite(lz)) throw DegenerateKernel("barycenter mass underflowed in log domain");
    double delta = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      p[j] = std::exp(logp[j] - lz);
      delta = std::max(delta, std::fabs(p[j] - prev[j]));
    }
    prev = p;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  res.distribution = DiscreteDistribution::normalized(support, p);
  return res;
}

}  // namespace otmetrics
