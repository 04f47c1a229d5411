#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "delaynet/errors.hpp"
#include "delaynet/network.hpp"
#include "delaynet/optimizer.hpp"
#include "test_support.hpp"

using namespace delaynet;

namespace {

EpidemicNetwork path3(double tau = 0.3) {
  return EpidemicNetwork(3, {{0, 1, 1.0}, {1, 2, 1.0}}, 0.3, {1.0, 1.0, 1.0}, tau, {1.0, 1.0, 1.0});
}

bool in_box(const OptimizationProblem& prob, std::span<const double> w) {
  const auto eig = eigendecompose(system_matrix_entries(prob.base.with_weights(w)));
  return check_stability(eig.values, prob.tau, prob.epsilon).stable && eig.values.back() < -prob.epsilon;
}

// Random strictly feasible point: Dirichlet-like weights on the budget.
std::vector<double> random_interior_point(std::mt19937_64& rng, const OptimizationProblem& prob) {
  std::exponential_distribution<double> expo(1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> w(prob.base.edge_count());
    double total = 0.0;
    for (auto& x : w) total += (x = 0.05 + expo(rng));
    for (auto& x : w) x *= prob.budget / total;
    if (in_box(prob, w)) return w;
  }
  FAIL("no interior point found");
  return {};
}

void check_result_invariants(const OptimizationProblem& prob, const OptimizationResult& r) {
  for (double w : r.weights) CHECK(w >= -1e-10);
  if (!r.weights.empty()) {
    double total = 0.0;
    for (double w : r.weights) total += w;
    CHECK(std::abs(total - prob.budget) <= 1e-8 * prob.budget);
  }
  CHECK(r.feasibility.feasible);
  CHECK(r.feasibility.margin_upper >= -1e-8);
  CHECK(r.feasibility.margin_lower >= -1e-8);
  CHECK(std::abs(smooth_objective(r.weights, prob) - r.objective) <= 1e-9 * std::max(1.0, std::abs(r.objective)));
  CHECK(r.kkt_residual <= 1e-6);
}

// Affine matrix inequality F0 + sum_k x_k F_k >= 0.
struct AffineLmi {
  Matrix f0;
  std::vector<Matrix> fk;
};

// Explicit epigraph program solved with a standard log-det barrier method:
// variables are the edge weights, the symmetric matrices X1 and X2 and (for
// the robust problem) the epigraph scalar x; the inverse terms are bounded
// below through their Schur complements.
class EpigraphOracle {
 public:
  explicit EpigraphOracle(const OptimizationProblem& prob) : prob_(prob) {
    n_ = prob.base.node_count();
    m_ = prob.base.edge_count();
    pairs_.clear();
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) pairs_.push_back({i, j});
    x1_ = m_;
    x2_ = m_ + pairs_.size();
    t_index_ = m_ + 2 * pairs_.size();
    vars_ = t_index_ + (prob.kind == ProblemKind::Robust ? 1 : 0);
    build();
  }

  // Returns the minimal epigraph objective and the weights attaining it.
  std::pair<double, std::vector<double>> solve() const {
    std::vector<double> x = initial_point();
    double t = 1.0;
    double nu = 0.0;
    for (const auto& l : lmis_) nu += static_cast<double>(l.f0.rows());
    while (nu / t > 1e-10) {
      centering(x, t);
      t *= 8.0;
    }
    centering(x, t);
    double value = constant_;
    for (std::size_t k = 0; k < vars_; ++k) value += cost_[k] * x[k];
    return {value, std::vector<double>(x.begin(), x.begin() + static_cast<long>(m_))};
  }

 private:
  Matrix system_part(std::size_t e) const {
    const auto& edge = prob_.base.edges()[e];
    Matrix a(n_, n_);
    a(edge.i, edge.j) = a(edge.j, edge.i) = prob_.base.beta();
    return a;
  }

  Matrix unit_sym(std::size_t p) const {
    Matrix a(n_, n_);
    a(pairs_[p].first, pairs_[p].second) = a(pairs_[p].second, pairs_[p].first) = 1.0;
    return a;
  }

  static Matrix block(const Matrix& tl, const Matrix& tr, const Matrix& br) {
    const std::size_t n = tl.rows();
    Matrix out(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        out(i, j) = tl(i, j);
        out(i, n + j) = tr(i, j);
        out(n + j, i) = tr(i, j);
        out(n + i, n + j) = br(i, j);
      }
    return out;
  }

  void build() {
    const double tau = prob_.tau;
    const double eps = prob_.epsilon;
    const Matrix zero(n_, n_);
    const Matrix eye = Matrix::identity(n_);
    Matrix neg_delta(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) neg_delta(i, i) = -prob_.base.delta()[i];

    const auto empty = [&](std::size_t size) { return std::vector<Matrix>(vars_, Matrix(size, size)); };
    AffineLmi schur1{block(zero, eye, add(zero, neg_delta, -1.0)), empty(2 * n_)};
    Matrix half_pi = eye;
    for (std::size_t i = 0; i < n_; ++i) half_pi(i, i) = std::numbers::pi / 2;
    AffineLmi schur2{block(zero, eye, add(half_pi, neg_delta, tau)), empty(2 * n_)};
    AffineLmi upper{add(add(zero, neg_delta, -1.0), eye, -eps), empty(n_)};
    std::vector<AffineLmi> lower;
    if (tau > 0.0) {
      Matrix bound = eye;
      for (std::size_t i = 0; i < n_; ++i) bound(i, i) = delay_bound(tau);
      lower.push_back({add(bound, neg_delta), empty(n_)});
    }
    for (std::size_t e = 0; e < m_; ++e) {
      const Matrix a = system_part(e);
      schur1.fk[e] = block(zero, zero, add(zero, a, -1.0));
      schur2.fk[e] = block(zero, zero, add(zero, a, tau));
      upper.fk[e] = add(zero, a, -1.0);
      for (auto& l : lower) l.fk[e] = a;
    }
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      schur1.fk[x1_ + p] = block(unit_sym(p), zero, zero);
      schur2.fk[x2_ + p] = block(unit_sym(p), zero, zero);
    }
    lmis_ = {schur1, schur2, upper};
    for (auto& l : lower) lmis_.push_back(l);
    for (std::size_t e = 0; e < m_; ++e) {
      AffineLmi positive{Matrix(1, 1), empty(1)};
      positive.fk[e](0, 0) = 1.0;
      lmis_.push_back(positive);
    }

    // Linear cost and constant.
    cost_.assign(vars_, 0.0);
    const double c1 = kApproxC1, c0 = kApproxC0;
    const auto add_node_cost = [&](std::vector<double>& cost, double& constant, const Matrix& c, double scale) {
      for (std::size_t p = 0; p < pairs_.size(); ++p) {
        const auto [i, j] = pairs_[p];
        const double weight = (i == j ? 1.0 : 2.0) * c(i, j);
        cost[x1_ + p] += scale * 0.5 * weight;
        cost[x2_ + p] += scale * (2.0 * tau / std::numbers::pi) * weight;
      }
      for (std::size_t e = 0; e < m_; ++e)
        cost[e] += scale * -0.5 * c1 * tau * tau * trace_product(c, system_part(e));
      constant += scale * (-0.5 * c1 * tau * tau * trace_product(c, neg_delta) + 0.25 * c0 * tau * trace(c));
    };
    if (prob_.kind == ProblemKind::Optimal) {
      std::vector<double> s2;
      for (double s : prob_.noise.sigma) s2.push_back(s * s);
      add_node_cost(cost_, constant_, Matrix::diagonal(s2), 1.0);
    } else {
      cost_[t_index_] = 1.0;
      // x - n * zeta_i(X1, X2, w) >= 0 for every node.
      for (std::size_t i = 0; i < n_; ++i) {
        Matrix c(n_, n_);
        c(i, i) = 1.0;
        std::vector<double> row(vars_, 0.0);
        double constant = 0.0;
        add_node_cost(row, constant, c, static_cast<double>(n_));
        AffineLmi epi{Matrix(1, 1, -constant), empty(1)};
        for (std::size_t k = 0; k < vars_; ++k) epi.fk[k](0, 0) = -row[k];
        epi.fk[t_index_](0, 0) = 1.0;
        lmis_.push_back(epi);
      }
    }
  }

  Matrix evaluate(const AffineLmi& l, std::span<const double> x) const {
    Matrix f = l.f0;
    for (std::size_t k = 0; k < vars_; ++k)
      if (x[k] != 0.0 && max_abs(l.fk[k]) > 0.0) f = add(f, l.fk[k], x[k]);
    return f;
  }

  // Barrier value, or +inf outside the domain.
  double barrier(std::span<const double> x) const {
    double v = 0.0;
    for (const auto& l : lmis_) {
      const auto eig = eigendecompose(evaluate(l, x));
      for (double lam : eig.values) {
        if (!(lam > 0.0)) return std::numeric_limits<double>::infinity();
        v -= std::log(lam);
      }
    }
    return v;
  }

  std::vector<double> initial_point() const {
    std::vector<double> x(vars_, 0.0);
    const std::vector<double> w(m_, prob_.budget / static_cast<double>(m_));
    std::copy(w.begin(), w.end(), x.begin());
    const auto sys = assemble_system_matrix(prob_.base.with_weights(w));
    const double tau = prob_.tau;
    const Matrix inv1 = matrix_function(sys, [](double l) { return -1.0 / l + 1.0; });
    const Matrix inv2 = matrix_function(sys, [tau](double l) { return 1.0 / (std::numbers::pi / 2 + tau * l) + 1.0; });
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      x[x1_ + p] = inv1(pairs_[p].first, pairs_[p].second);
      x[x2_ + p] = inv2(pairs_[p].first, pairs_[p].second);
    }
    if (prob_.kind == ProblemKind::Robust) {
      x[t_index_] = 1.0;
      while (!std::isfinite(barrier(x))) x[t_index_] *= 2.0;
    }
    return x;
  }

  void centering(std::vector<double>& x, double t) const {
    for (int it = 0; it < 200; ++it) {
      std::vector<double> grad(vars_, 0.0);
      Matrix hess(vars_, vars_);
      for (std::size_t k = 0; k < vars_; ++k) grad[k] = t * cost_[k];
      for (const auto& l : lmis_) {
        const auto eig = eigendecompose(evaluate(l, x));
        const Matrix inv = matrix_function(eig, [](double v) { return 1.0 / v; });
        std::vector<std::size_t> active;
        std::vector<Matrix> g;
        for (std::size_t k = 0; k < vars_; ++k)
          if (max_abs(l.fk[k]) > 0.0) {
            active.push_back(k);
            g.push_back(multiply(inv, l.fk[k]));
          }
        for (std::size_t a = 0; a < active.size(); ++a) {
          grad[active[a]] -= trace(g[a]);
          for (std::size_t b = 0; b < active.size(); ++b) hess(active[a], active[b]) += trace_product(g[a], g[b]);
        }
      }
      Matrix kkt(vars_ + 1, vars_ + 1);
      std::vector<double> rhs(vars_ + 1, 0.0);
      for (std::size_t r = 0; r < vars_; ++r) {
        for (std::size_t c = 0; c < vars_; ++c) kkt(r, c) = hess(r, c);
        rhs[r] = -grad[r];
      }
      // The budget row is scaled to the Hessian so that pivoting stays sane
      // as the Schur blocks approach singularity.
      const double row_scale = std::max(1.0, max_abs(hess));
      for (std::size_t e = 0; e < m_; ++e) kkt(e, vars_) = kkt(vars_, e) = row_scale;
      std::vector<double> step;
      try {
        step = delaynet::solve(kkt, rhs);
      } catch (const SingularityError&) {
        for (std::size_t r = 0; r < vars_; ++r) kkt(r, r) += 1e-12 * row_scale;
        step = delaynet::solve(kkt, rhs);
      }
      double decrement = 0.0;
      for (std::size_t k = 0; k < vars_; ++k) decrement -= grad[k] * step[k];
      if (decrement / 2.0 <= 1e-12) return;
      const auto merit = [&](std::span<const double> y) {
        double v = barrier(y);
        for (std::size_t k = 0; k < vars_; ++k) v += t * cost_[k] * y[k];
        return v;
      };
      const double current = merit(x);
      double s = 1.0;
      std::vector<double> trial(vars_);
      for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
        for (std::size_t k = 0; k < vars_; ++k) trial[k] = x[k] + s * step[k];
        const double v = merit(trial);
        if (std::isfinite(v) && v <= current - 0.01 * s * decrement) break;
      }
      x = trial;
    }
  }

  const OptimizationProblem& prob_;
  std::size_t n_ = 0, m_ = 0, x1_ = 0, x2_ = 0, t_index_ = 0, vars_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<AffineLmi> lmis_;
  std::vector<double> cost_;
  double constant_ = 0.0;
};

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(31);
    for (ProblemKind kind : {ProblemKind::Optimal, ProblemKind::Robust}) {
      int checked = 0;
      for (int trial = 0; trial < 40; ++trial) {
        const auto net = trial % 4 == 0 ? build_three_star_fixture() : testing::random_stable_network(rng);
        if (net.edge_count() < 2) continue;
        const auto prob = make_problem(net, kind);
        const auto w = random_interior_point(rng, prob);
        const auto g = gradient_objective(w, prob);
        for (std::size_t e = 0; e < w.size(); ++e) {
          const double h = 1e-5 * std::max(1.0, w[e]);
          auto up = w, down = w;
          up[e] += h;
          down[e] -= h;
          if (!in_box(prob, up) || !in_box(prob, down)) continue;
          const double fd = (smooth_objective(up, prob) - smooth_objective(down, prob)) / (2.0 * h);
          if (kind == ProblemKind::Robust) {
            // Skip points where the max switches node inside the stencil.
            const auto gu = gradient_objective(up, prob), gd = gradient_objective(down, prob);
            if (std::abs(gu[e] - gd[e]) > 1e-3 * std::max(1.0, std::abs(g[e]))) continue;
          }
          CHECK(std::abs(fd - g[e]) <= 1e-5 * std::max(1e-3, std::abs(g[e])));
          ++checked;
        }
      }
      CHECK(checked > 50);
    }
  }

  TEST_CASE("zero delay drops the X2 gradient term") {
    const auto net = path3(0.0);
    const auto prob = make_problem(net, ProblemKind::Optimal);
    const std::vector<double> w{0.7, 1.3};
    const auto g = gradient_objective(w, prob);
    // Only -1/2 Tr[C A^{-1}] remains: gradient is beta * [A^{-1} C A^{-1}]_ab.
    const auto sys = assemble_system_matrix(net.with_weights(w));
    const Matrix inv = matrix_function(sys, [](double l) { return -1.0 / l; });
    const Matrix p1 = multiply(inv, inv);
    CHECK(g[0] == doctest::Approx(net.beta() * p1(0, 1)).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(net.beta() * p1(1, 2)).epsilon(1e-12));
  }

  TEST_CASE("symmetric edges have equal gradients") {
    const auto prob = make_problem(path3(), ProblemKind::Optimal);
    const auto g = gradient_objective(std::vector<double>{1.0, 1.0}, prob);
    CHECK(g[0] == doctest::Approx(g[1]).epsilon(1e-13));
  }

  TEST_CASE("single edge carries the whole budget") {
    const auto net = load_network_file(testing::fixture_path("two_node.json"));
    for (ProblemKind kind : {ProblemKind::Optimal, ProblemKind::Robust}) {
      const auto prob = make_problem(net, kind, 1.5);
      const auto r = solve(prob);
      REQUIRE(r.weights.size() == 1);
      CHECK(r.weights[0] == 1.5);
      check_result_invariants(prob, r);
    }
  }

  TEST_CASE("node without edges returns the baseline") {
    const auto net = load_network_file(testing::fixture_path("single_stable.json"));
    const auto prob = make_problem(net, ProblemKind::Robust, 1.0);
    const auto r = solve(prob);
    CHECK(r.weights.empty());
    const auto eta = approx_centrality(assemble_system_matrix(net), net.tau());
    CHECK(r.objective == doctest::Approx(eta[0]).epsilon(1e-14));
    CHECK(r.exact_rho == r.baseline_rho);
  }

  TEST_CASE("three-node path agrees with a dense grid search") {
    const auto net = path3();
    for (ProblemKind kind : {ProblemKind::Optimal, ProblemKind::Robust}) {
      const auto prob = make_problem(net, kind);
      const auto r = solve(prob);
      check_result_invariants(prob, r);
      double best = std::numeric_limits<double>::infinity();
      double best_w = 0.0;
      const double c = prob.budget;
      for (int k = 0; k <= 20000; ++k) {
        const double w1 = c * k / 20000.0;
        const std::vector<double> w{w1, c - w1};
        if (!in_box(prob, w)) continue;
        const double v = smooth_objective(w, prob);
        if (v < best) best = v, best_w = w1;
      }
      // Refine around the best grid point.
      double lo = std::max(0.0, best_w - c / 20000.0), hi = std::min(c, best_w + c / 20000.0);
      for (int it = 0; it < 100; ++it) {
        const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
        const double fa = smooth_objective(std::vector<double>{a, c - a}, prob);
        const double fb = smooth_objective(std::vector<double>{b, c - b}, prob);
        (fa < fb ? hi : lo) = fa < fb ? b : a;
      }
      best = std::min(best, smooth_objective(std::vector<double>{lo, c - lo}, prob));
      CHECK(std::abs(r.objective - best) <= 1e-5 * std::max(1.0, best));
      CHECK(r.weights[0] == doctest::Approx(c / 2).epsilon(1e-6));
      CHECK(r.weights[1] == doctest::Approx(c / 2).epsilon(1e-6));
      if (kind == ProblemKind::Robust) CHECK(r.worst_node == 1);
    }
  }

  TEST_CASE("inner worst case examples") {
    const auto a = inner_worst_case(std::vector<double>{0.2, 0.5, 0.3});
    CHECK(a.index == 1);
    CHECK(a.value == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(a.sigma_squared == std::vector<double>{0.0, 3.0, 0.0});
    const auto tie = inner_worst_case(std::vector<double>{0.4, 0.4, 0.4, 0.4});
    CHECK(tie.index == 0);
    CHECK(tie.value == doctest::Approx(1.6).epsilon(1e-15));
    CHECK_THROWS_AS(inner_worst_case(std::vector<double>{}), InputError);
    CHECK_THROWS_AS(inner_worst_case(std::vector<double>{1.0, std::nan("")}), InputError);
  }

  TEST_CASE("inner worst case agrees with vertex enumeration") {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> eta(6);
      for (auto& v : eta) v = u(rng);
      const double n = 6.0;
      std::size_t best = 0;
      double best_value = -1.0;
      for (std::size_t v = 0; v < 6; ++v) {
        double value = 0.0;
        for (std::size_t i = 0; i < 6; ++i) value += eta[i] * (i == v ? n : 0.0);
        if (value > best_value) best_value = value, best = v;
      }
      const auto r = inner_worst_case(eta);
      CHECK(r.index == best);
      CHECK(r.value == best_value);
    }
  }

  TEST_CASE("smooth objective is midpoint convex") {
    std::mt19937_64 rng(33);
    const auto net = build_three_star_fixture();
    for (ProblemKind kind : {ProblemKind::Optimal, ProblemKind::Robust}) {
      const auto prob = make_problem(net, kind);
      for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_interior_point(rng, prob), b = random_interior_point(rng, prob);
        std::vector<double> mid(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) mid[k] = 0.5 * (a[k] + b[k]);
        const double fa = smooth_objective(a, prob), fb = smooth_objective(b, prob);
        CHECK(smooth_objective(mid, prob) <= 0.5 * (fa + fb) + 1e-9);
      }
    }
  }

  TEST_CASE("explicit epigraph program agrees on four-node instances") {
    std::mt19937_64 rng(34);
    testing::RandomNetworkOptions opts;
    opts.min_nodes = opts.max_nodes = 4;
    opts.edge_probability = 1.0;
    for (int trial = 0; trial < 6; ++trial) {
      const auto net = testing::random_stable_network(rng, opts);
      for (ProblemKind kind : {ProblemKind::Optimal, ProblemKind::Robust}) {
        CAPTURE(trial);
        const auto prob = make_problem(net, kind);
        const auto r = solve(prob);
        const auto [value, weights] = EpigraphOracle(prob).solve();
        CHECK(std::abs(r.objective - value) <= 1e-5 * std::max(1.0, std::abs(value)));
        CHECK(std::abs(smooth_objective(weights, prob) - value) <= 1e-5 * std::max(1.0, std::abs(value)));
      }
    }
  }

  TEST_CASE("random instances: feasibility, baseline and min-max dominance") {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 10; ++trial) {
      const auto net = testing::random_stable_network(rng);
      if (net.edge_count() < 2) continue;
      const auto opt_prob = make_problem(net, ProblemKind::Optimal);
      const auto rob_prob = make_problem(net, ProblemKind::Robust);
      const auto opt = solve(opt_prob);
      const auto rob = solve(rob_prob);
      check_result_invariants(opt_prob, opt);
      check_result_invariants(rob_prob, rob);
      CHECK(opt.exact_rho <= opt.baseline_rho * (1.0 + 1e-9));
      CHECK(rob.exact_rho <= rob.baseline_rho * (1.0 + 1e-9));
      const double opt_worst = exact_worst_case_rho(assemble_system_matrix(net.with_weights(opt.weights)), net.tau());
      CHECK(rob.exact_rho <= opt_worst + 1e-6);
    }
  }

  TEST_CASE("infeasible budget is rejected with the violated bound") {
    const auto prob = make_problem(build_three_star_fixture(), ProblemKind::Optimal, 500.0);
    CHECK_THROWS_AS(solve(prob), InfeasibleError);
    try {
      solve(prob);
    } catch (const InfeasibleError& e) {
      CHECK(std::string(e.what()).find("lambda_max") != std::string::npos);
    }
  }

  TEST_CASE("testing-error noise is not an optimization target") {
    auto prob = make_problem(path3(), ProblemKind::Optimal);
    prob.noise.kind = NoiseKind::TestingError;
    CHECK_THROWS_AS(solve(prob), InputError);
    auto bad = make_problem(path3(), ProblemKind::Optimal, -1.0);
    CHECK_THROWS_AS(solve(bad), InputError);
  }

  TEST_CASE("uniform ceiling sits on the upper spectral bound") {
    const auto net = build_three_star_fixture();
    const double c = uniform_budget_ceiling(net);
    const std::vector<double> w(net.edge_count(), c / net.edge_count());
    const double lmax = eigendecompose(system_matrix_entries(net.with_weights(w))).values.back();
    CHECK(lmax == doctest::Approx(-kDefaultEpsilon).epsilon(1e-9));
  }

  TEST_CASE("sweep row at the baseline budget matches direct solves") {
    const auto net = build_three_star_fixture();
    const std::vector<double> budgets{net.total_weight()};
    const auto rows = sweep_budget(net, budgets);
    REQUIRE(rows.size() == 1);
    const auto& row = rows.front();
    CHECK(row.feasible);
    const auto opt = solve(make_problem(net, ProblemKind::Optimal));
    const auto rob = solve(make_problem(net, ProblemKind::Robust));
    CHECK(row.rho_opt_uniform == doctest::Approx(opt.exact_rho).epsilon(1e-12));
    CHECK(row.rho_rob_worst == doctest::Approx(rob.exact_rho).epsilon(1e-12));
    CHECK(row.rho_orig_uniform == doctest::Approx(opt.baseline_rho).epsilon(1e-12));
    CHECK(row.rho_rob_worst <= row.rho_opt_worst + 1e-6);
    const std::string csv = sweep_csv(rows);
    CHECK(csv.rfind("c,rho_orig_uniform,rho_opt_uniform,rho_rob_uniform,rho_orig_worst,rho_opt_worst,rho_rob_worst,feasible\n",
                    0) == 0);
  }

  TEST_CASE("sweep flags infeasible budgets without aborting") {
    const auto net = build_three_star_fixture();
    const std::vector<double> budgets{10.0, 500.0};
    const auto rows = sweep_budget(net, budgets);
    CHECK(rows[0].feasible);
    CHECK_FALSE(rows[1].feasible);
    CHECK(std::isnan(rows[1].rho_opt_uniform));
  }
}
