#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "delaynet/errors.hpp"
#include "delaynet/network.hpp"
#include "delaynet/performance.hpp"
#include "test_support.hpp"

using namespace delaynet;

namespace {

SystemMatrix scalar_system(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return SystemMatrix::from_matrix(m);
}

NoiseModel noise_of(const EpidemicNetwork& net, NoiseKind kind) {
  return {kind, std::vector<double>(net.sigma().begin(), net.sigma().end())};
}

}  // namespace

TEST_SUITE("performance") {
  TEST_CASE("single node, no delay") {
    const auto sys = scalar_system(-1.0);
    const NoiseModel noise{NoiseKind::ModelingError, {1.0}};
    CHECK(performance_closed_form(sys, noise, 0.0).rho_ss == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(performance_frequency_oracle(sys, noise, 0.0) - 0.5) <= 1e-6);
  }

  TEST_CASE("single node with delay") {
    const auto sys = scalar_system(-1.0);
    const NoiseModel noise{NoiseKind::ModelingError, {1.0}};
    const double expected = std::cos(0.5) / (2.0 * (1.0 - std::sin(0.5)));
    const double rho = performance_closed_form(sys, noise, 0.5).rho_ss;
    CHECK(rho == doctest::Approx(expected).epsilon(1e-15));
    CHECK(rho == doctest::Approx(0.842898).epsilon(1e-6));
    CHECK(std::abs(performance_frequency_oracle(sys, noise, 0.5) - expected) <= 1e-5);
  }

  TEST_CASE("two-node oracle equivalence") {
    const auto net = load_network_file(testing::fixture_path("two_node.json")).with_tau(0.4);
    const auto sys = assemble_system_matrix(net);
    for (auto kind : {NoiseKind::ModelingError, NoiseKind::TestingError}) {
      const auto noise = noise_of(net, kind);
      const double closed = performance_closed_form(sys, noise, net.tau()).rho_ss;
      CHECK(testing::relative_error(performance_frequency_oracle(sys, noise, net.tau()), closed) <= 1e-6);
    }
  }

  TEST_CASE("random oracle equivalence") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 8; ++trial) {
      const auto net = testing::random_stable_network(rng);
      const auto sys = assemble_system_matrix(net);
      for (auto kind : {NoiseKind::ModelingError, NoiseKind::TestingError}) {
        const auto noise = noise_of(net, kind);
        const double closed = performance_closed_form(sys, noise, net.tau()).rho_ss;
        CHECK(testing::relative_error(performance_frequency_oracle(sys, noise, net.tau()), closed) <= 1e-6);
      }
    }
  }

  TEST_CASE("per-mode terms sum to rho and are positive") {
    std::mt19937_64 rng(22);
    const auto net = testing::random_stable_network(rng);
    const auto sys = assemble_system_matrix(net);
    const auto perf = performance_closed_form(sys, noise_of(net, NoiseKind::ModelingError), net.tau());
    double total = 0.0;
    for (double t : perf.per_mode) {
      CHECK(t >= 0.0);
      total += t;
    }
    CHECK(total == doctest::Approx(perf.rho_ss).epsilon(1e-14));
    CHECK(perf.rho_ss > 0.0);
  }

  TEST_CASE("centrality decomposition identity") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
      const auto net = testing::random_stable_network(rng);
      const auto sys = assemble_system_matrix(net);
      for (auto kind : {NoiseKind::ModelingError, NoiseKind::TestingError}) {
        const auto eta = centrality(sys, kind, net.tau());
        double total = 0.0;
        for (std::size_t i = 0; i < net.node_count(); ++i) {
          CHECK(eta.eta[i] > 0.0);
          total += eta.eta[i] * net.sigma()[i] * net.sigma()[i];
        }
        const double rho = performance_closed_form(sys, noise_of(net, kind), net.tau()).rho_ss;
        CHECK(std::abs(total - rho) <= 1e-9 * rho);
      }
    }
  }

  TEST_CASE("centrality is the derivative with respect to the noise variance") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 10; ++trial) {
      const auto net = testing::random_stable_network(rng);
      const auto sys = assemble_system_matrix(net);
      for (auto kind : {NoiseKind::ModelingError, NoiseKind::TestingError}) {
        const auto eta = centrality(sys, kind, net.tau());
        for (std::size_t i = 0; i < net.node_count(); ++i) {
          auto noise = noise_of(net, kind);
          const double s2 = noise.sigma[i] * noise.sigma[i];
          const double h = 1e-4 * s2;
          noise.sigma[i] = std::sqrt(s2 + h);
          const double up = performance_closed_form(sys, noise, net.tau()).rho_ss;
          noise.sigma[i] = std::sqrt(s2 - h);
          const double down = performance_closed_form(sys, noise, net.tau()).rho_ss;
          CHECK(testing::relative_error((up - down) / (2.0 * h), eta.eta[i]) <= 1e-6);
        }
      }
    }
  }

  TEST_CASE("single-node centrality") {
    const auto sys = scalar_system(-1.0);
    CHECK(centrality(sys, NoiseKind::ModelingError, 0.0).eta[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(centrality(sys, NoiseKind::TestingError, 0.0).eta[0] == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("fixture hubs outrank leaves") {
    const auto net = build_three_star_fixture();
    const auto eta = centrality(assemble_system_matrix(net), NoiseKind::ModelingError, net.tau()).eta;
    const double hub_min = std::min({eta[0], eta[1], eta[14]});
    for (std::size_t i = 0; i < eta.size(); ++i)
      if (i != 0 && i != 1 && i != 14) CHECK(eta[i] < hub_min);
    CHECK(eta[1] > eta[0]);
    CHECK(eta[1] > eta[14]);
  }

  TEST_CASE("performance is nondecreasing in the delay") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 10; ++trial) {
      const auto net = testing::random_stable_network(rng);
      const auto sys = assemble_system_matrix(net);
      const double tau_max = delay_bound(1.0) / -sys.lambda_min();
      const auto noise = noise_of(net, NoiseKind::ModelingError);
      double previous = 0.0;
      for (int k = 0; k < 40; ++k) {
        const double rho = performance_closed_form(sys, noise, 0.99 * tau_max * k / 40.0).rho_ss;
        CHECK(rho >= previous * (1.0 - 1e-14));
        previous = rho;
      }
    }
  }

  TEST_CASE("zero delay equals the delay-free H2 value") {
    std::mt19937_64 rng(26);
    const auto net = testing::random_stable_network(rng);
    const auto sys = assemble_system_matrix(net);
    const auto noise = noise_of(net, NoiseKind::ModelingError);
    const Matrix inv = matrix_function(sys, [](double l) { return -1.0 / l; });
    const Matrix bbt = Matrix::diagonal([&] {
      std::vector<double> s2;
      for (double s : noise.sigma) s2.push_back(s * s);
      return s2;
    }());
    const double h2 = 0.5 * trace_product(bbt, inv);
    CHECK(performance_closed_form(sys, noise, 0.0).rho_ss == doctest::Approx(h2).epsilon(1e-12));
    CHECK(performance_approx(sys, noise, 0.0) == doctest::Approx(h2).epsilon(1e-12));
  }

  TEST_CASE("approximation: scalar evaluation") {
    const auto sys = scalar_system(-1.0);
    const NoiseModel noise{NoiseKind::ModelingError, {1.0}};
    const double tau = 0.5;
    const double expected =
        0.5 * (1.0 + (4.0 * tau / std::numbers::pi) / (std::numbers::pi / 2 - tau) - kApproxC1 * tau * tau * -1.0 +
               0.5 * kApproxC0 * tau);
    const double approx = performance_approx(sys, noise, tau);
    CHECK(approx == doctest::Approx(expected).epsilon(1e-14));
    const double exact = performance_closed_form(sys, noise, tau).rho_ss;
    MESSAGE("scalar approximation relative error: " << testing::relative_error(approx, exact));
    CHECK(testing::relative_error(approx, exact) < 0.1);
  }

  TEST_CASE("approximation within 10% on random networks") {
    std::mt19937_64 rng(27);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto net = testing::random_stable_network(rng);
      const auto sys = assemble_system_matrix(net);
      const auto noise = noise_of(net, NoiseKind::ModelingError);
      const double err = testing::relative_error(performance_approx(sys, noise, net.tau()),
                                                 performance_closed_form(sys, noise, net.tau()).rho_ss);
      worst = std::max(worst, err);
    }
    MESSAGE("worst relative error: " << worst);
    CHECK(worst < 0.1);
  }

  TEST_CASE("unstable systems are refused") {
    const NoiseModel noise{NoiseKind::ModelingError, {1.0}};
    CHECK_THROWS_AS(performance_closed_form(scalar_system(-2.0), noise, 1.0), StabilityError);
    CHECK_THROWS_AS(performance_closed_form(scalar_system(0.5), noise, 0.0), StabilityError);
    CHECK_THROWS_AS(centrality(scalar_system(-2.0), NoiseKind::ModelingError, 1.0), StabilityError);
  }

  TEST_CASE("noise kind parsing") {
    CHECK(parse_noise_kind("model") == NoiseKind::ModelingError);
    CHECK(parse_noise_kind("test") == NoiseKind::TestingError);
    CHECK_THROWS_AS(parse_noise_kind("link"), InputError);
  }
}
