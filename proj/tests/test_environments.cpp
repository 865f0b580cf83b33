#include <doctest.h>

#include <random>
#include <set>

#include "latentbandit/belief.hpp"
#include "latentbandit/environments.hpp"
#include "latentbandit/reference_models.hpp"

using namespace latentbandit;

TEST_CASE("build_transition_kernel examples") {
  TransitionGraphSpec two;
  two.num_states = 2;
  two.stay_prob = 0.995;
  const auto k = build_transition_kernel(two);
  Eigen::Matrix2d expect;
  expect << 0.995, 0.005, 0.005, 0.995;
  CHECK((k.matrix() - expect).cwiseAbs().maxCoeff() < 1e-15);

  for (auto kind : {GraphKind::kTwoBranch, GraphKind::kSkipChain}) {
    TransitionGraphSpec g;
    g.kind = kind;
    g.num_states = 5;
    g.root = 4;
    const auto edges = graph_edges(g);
    const auto kernel = build_transition_kernel(g);
    CAPTURE(to_string(kind));
    for (Index i = 0; i < 5; ++i) {
      CHECK(kernel.matrix().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (Index j = 0; j < 5; ++j) {
        if (i == j) continue;
        CHECK((kernel(i, j) > 0.0) == edges(i, j));
      }
    }
    CHECK(kernel(4, 4) == 0.0);
    for (Index j = 0; j < 5; ++j) CHECK_FALSE(edges(j, 4));
  }

  TransitionGraphSpec r;
  r.num_states = 5;
  r.stay_prob = 0.95;
  r.off_diagonal = OffDiagonal::kRandomNonuniform;
  r.seed = 17;
  const auto a = build_transition_kernel(r);
  const auto b = build_transition_kernel(r);
  CHECK(a.matrix() == b.matrix());
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(a.matrix().row(i).sum() - 1.0) <= 1e-12);
  r.seed = 18;
  CHECK(build_transition_kernel(r).matrix() != a.matrix());

  CHECK(graph_kind_from_string(to_string(GraphKind::kSkipChain)) == GraphKind::kSkipChain);
  CHECK_THROWS(graph_kind_from_string("ring"));
}

TEST_CASE("env_step examples") {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, 3.0, 4.0;
  const RewardModel tight(m, Eigen::MatrixXd::Constant(2, 2, 1e-12));
  const auto id = TransitionKernel::identity(2);
  const std::vector<Index> arms = {0, 1};
  EnvState env{1, 0, {}};
  for (int t = 0; t < 1000; ++t) {
    const auto out = env_step(env, id, tight, 0, arms, t % 2, rng);
    CHECK(std::abs(out.reward - out.chosen_mean) <= 1e-9);
    CHECK(out.true_state == 1);
    CHECK(out.optimal_mean == 4.0);
  }
  CHECK(env.time == 1000);

  const std::vector<Index> only = {1};
  CHECK_THROWS_AS(env_step(env, id, tight, 0, only, 0, rng), ProtocolViolation);
}

TEST_CASE("fixed schedule changes the state exactly at the listed steps") {
  std::mt19937_64 rng(4);
  TransitionGraphSpec spec;
  spec.num_states = 2;
  const auto kernel = build_transition_kernel(spec);
  EnvState env{0, 0, {200, 400}};
  validate_env_state(env, 2);
  std::vector<Index> states;
  for (int t = 0; t < 600; ++t) {
    states.push_back(env.true_state);
    advance_state(env, kernel, rng);
  }
  for (int t = 1; t < 600; ++t) CHECK((states[t] != states[t - 1]) == (t == 200 || t == 400));

  EnvState bad{0, 0, {400, 200}};
  CHECK_THROWS(validate_env_state(bad, 2));
  EnvState out_of_range{3, 0, {}};
  CHECK_THROWS(validate_env_state(out_of_range, 2));
}

TEST_CASE("sample_arm_set examples") {
  std::mt19937_64 rng(5);
  const auto full = sample_arm_set(7, 7, rng);
  CHECK(full == std::vector<Index>{0, 1, 2, 3, 4, 5, 6});

  for (int i = 0; i < 100; ++i) {
    const auto s = sample_arm_set(1132, 20, rng);
    CHECK(s.size() == 20);
    CHECK(std::set<Index>(s.begin(), s.end()).size() == 20);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(s.back() < 1132);
  }

  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 20; ++i) CHECK(sample_arm_set(50, 5, a) == sample_arm_set(50, 5, b));
  CHECK_THROWS(sample_arm_set(3, 4, rng));
}

TEST_CASE("property: empirical transitions match the kernel within 3 standard errors") {
  TransitionGraphSpec spec;
  spec.num_states = 5;
  spec.stay_prob = 0.9;
  spec.off_diagonal = OffDiagonal::kRandomNonuniform;
  spec.seed = 3;
  const auto kernel = build_transition_kernel(spec);
  std::mt19937_64 rng(12);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(5, 5);
  EnvState env{0, 0, {}};
  for (int t = 0; t < 1000000; ++t) {
    const Index from = env.true_state;
    advance_state(env, kernel, rng);
    counts(from, env.true_state) += 1.0;
  }
  for (Index i = 0; i < 5; ++i) {
    const double n = counts.row(i).sum();
    for (Index j = 0; j < 5; ++j) {
      const double p = kernel(i, j);
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(counts(i, j) / n - p) <= 3.0 * se + 1e-15);
    }
  }
}

TEST_CASE("property: empirical dwell time matches the geometric mean") {
  TransitionGraphSpec spec;
  spec.num_states = 2;
  spec.stay_prob = 0.995;
  const auto kernel = build_transition_kernel(spec);
  CHECK(expected_dwell_time(kernel, BeliefState::point_mass(2, 0), 1e9) == doctest::Approx(200.0).epsilon(1e-12));

  std::mt19937_64 rng(21);
  EnvState env{0, 0, {}};
  long segments = 0, steps = 0, run = 1;
  while (segments < 10000) {
    const Index before = env.true_state;
    advance_state(env, kernel, rng);
    if (env.true_state == before) {
      ++run;
    } else {
      ++segments;
      steps += run;
      run = 1;
    }
  }
  CHECK(std::abs(steps / double(segments) - 200.0) <= 0.05 * 200.0);
}
