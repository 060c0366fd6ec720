#include "doctest.h"

#include "mllkm/sdca.hpp"

#include "oracles.hpp"

#include <random>

using namespace mllkm;

namespace {

struct Instance {
  Vector y;
  SquareMatrix K;
};

Instance random_instance(unsigned seed, Eigen::Index n) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal;
  const Eigen::Index rank = 1 + static_cast<Eigen::Index>(gen() % static_cast<unsigned>(n));
  Eigen::MatrixXd A(n, rank);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) A(i, j) = normal(gen);
  Instance inst{Vector(n), A * A.transpose()};
  for (Eigen::Index i = 0; i < n; ++i) inst.y[i] = gen() % 2 == 0 ? 1.0 : -1.0;
  return inst;
}

}  // namespace

TEST_CASE("single sample hand trace") {
  SquareMatrix K(1, 1);
  K << 1.0;
  Vector y(1);
  y << 1.0;
  SdcaConfig config;
  config.C = 10.0;
  config.epochs = 2;
  config.stall_tolerance.reset();
  const DualState s = sdca(y, K, config);
  CHECK(s.alpha[0] == 1.0);
  CHECK(s.yhat[0] == 1.0);
  CHECK(s.epochs == 2);
}

TEST_CASE("identity gram saturates both margins") {
  const SquareMatrix K = SquareMatrix::Identity(2, 2);
  Vector y(2);
  y << 1.0, -1.0;
  SdcaConfig config;
  config.C = 1.0;
  const DualState s = sdca(y, K, config);
  CHECK(s.alpha[0] == doctest::Approx(1.0));
  CHECK(s.alpha[1] == doctest::Approx(1.0));
  CHECK(s.support_count() == 2);
}

TEST_CASE("dual_objective") {
  SquareMatrix K(1, 1);
  K << 1.0;
  Vector y(1);
  y << 1.0;
  CHECK(dual_objective(Vector::Zero(1), y, K) == 0.0);
  CHECK(dual_objective(Vector::Ones(1), y, K) == doctest::Approx(0.5));

  const Instance inst = random_instance(3, 6);
  Vector alpha(6);
  alpha << 0.1, 0.5, 0.0, 1.2, 0.3, 0.7;
  const std::vector<Eigen::Index> perm = {4, 2, 5, 0, 3, 1};
  SquareMatrix Kp(6, 6);
  Vector yp(6);
  Vector ap(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    yp[i] = inst.y[perm[i]];
    ap[i] = alpha[perm[i]];
    for (Eigen::Index j = 0; j < 6; ++j) Kp(i, j) = inst.K(perm[i], perm[j]);
  }
  CHECK(dual_objective(ap, yp, Kp) == doctest::Approx(dual_objective(alpha, inst.y, inst.K)).epsilon(1e-12));
}

TEST_CASE("decision_values") {
  Vector y(1);
  y << 1.0;
  Eigen::MatrixXd cross(1, 2);
  cross << 0.25, -2.0;
  CHECK(decision_values(Vector::Zero(1), y, cross).isZero());
  Vector alpha(1);
  alpha << 3.0;
  const Vector v = decision_values(alpha, y, cross);
  CHECK(v[0] == doctest::Approx(0.75));
  CHECK(v[1] == doctest::Approx(-6.0));

  const Instance inst = random_instance(8, 12);
  SdcaConfig config;
  config.C = 2.0;
  const DualState s = sdca(inst.y, inst.K, config);
  CHECK((decision_values(s.alpha, inst.y, inst.K) - s.yhat).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("solver properties on random instances") {
  for (unsigned seed = 0; seed < 40; ++seed) {
    const Eigen::Index n = 2 + seed % 29;
    const Instance inst = random_instance(seed, n);
    SdcaConfig config;
    config.C = 0.1 * (1 + seed % 7);
    config.epochs = 200;
    config.seed = seed;
    config.stall_tolerance = 1e-6;
    config.track_objective = true;
    const DualState s = sdca(inst.y, inst.K, config);
    CAPTURE(seed);
    CHECK(s.alpha.minCoeff() >= 0.0);
    CHECK(s.alpha.maxCoeff() <= config.C);
    for (std::size_t e = 1; e < s.objective_trace.size(); ++e) {
      CHECK(s.objective_trace[e] >= s.objective_trace[e - 1] - 1e-10);
    }
    const Vector fresh = inst.K * s.alpha.cwiseProduct(inst.y);
    CHECK((fresh - s.yhat).cwiseAbs().maxCoeff() <= 1e-8);
    if (s.stalled) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double g = 1.0 - inst.y[i] * fresh[i];
        if (s.alpha[i] <= 0.0) CHECK(g <= 1e-6 + 1e-9);
        else if (s.alpha[i] >= config.C) CHECK(g >= -1e-6 - 1e-9);
        else CHECK(std::abs(g) <= 1e-6 + 1e-9);
      }
      // The stalled point is near the independently computed optimum.
      const auto exact = oracle::solve_svm(inst.y, inst.K, config.C);
      CHECK(dual_objective(s.alpha, inst.y, inst.K) <= exact.value + 1e-9 * (1.0 + std::abs(exact.value)));
      CHECK(dual_objective(s.alpha, inst.y, inst.K) >= exact.value - 1e-4 * (1.0 + std::abs(exact.value)));
    }
  }
}

TEST_CASE("determinism and warm start") {
  const Instance inst = random_instance(21, 15);
  SdcaConfig config;
  config.C = 1.0;
  config.seed = 9;
  const DualState a = sdca(inst.y, inst.K, config);
  const DualState b = sdca(inst.y, inst.K, config);
  CHECK(a.alpha == b.alpha);
  CHECK(a.yhat == b.yhat);

  config.epochs = 500;
  config.stall_tolerance = 1e-9;
  const DualState solved = sdca(inst.y, inst.K, config);
  const DualState resumed = sdca(inst.y, inst.K, config, &solved);
  CHECK(resumed.epochs <= 1);
  CHECK((resumed.alpha - solved.alpha).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("zero diagonal coordinates go to a bound and are flagged") {
  SquareMatrix K = SquareMatrix::Zero(3, 3);
  K(0, 0) = 1.0;
  K(2, 2) = 2.0;
  Vector y(3);
  y << 1.0, -1.0, 1.0;
  SdcaConfig config;
  config.C = 5.0;
  const DualState s = sdca(y, K, config);
  CHECK(s.alpha[1] == 5.0);
  CHECK(s.zero_diagonal == 1);
  CHECK(s.stalled);
  const auto exact = oracle::solve_svm(y, K, config.C);
  CHECK(dual_objective(s.alpha, y, K) == doctest::Approx(exact.value).epsilon(1e-9));
  CHECK(s.alpha[0] == doctest::Approx(1.0));
  CHECK(s.alpha[2] == doctest::Approx(0.5));
}

TEST_CASE("restricted update variant stays feasible") {
  const Instance inst = random_instance(30, 10);
  SdcaConfig config;
  config.C = 1.0;
  config.restricted_update = true;
  config.stall_tolerance.reset();
  const DualState s = sdca(inst.y, inst.K, config);
  CHECK(s.alpha.minCoeff() >= 0.0);
  CHECK(s.alpha.maxCoeff() <= 1.0);
}

TEST_CASE("config validation") {
  SdcaConfig config;
  config.C = 0.0;
  CHECK_THROWS(config.validate());
  config.C = 1.0;
  config.epochs = 0;
  CHECK_THROWS(config.validate());
  const SquareMatrix K = SquareMatrix::Identity(2, 2);
  Vector y(3);
  y << 1, -1, 1;
  CHECK_THROWS(sdca(y, K, SdcaConfig{}));
}
