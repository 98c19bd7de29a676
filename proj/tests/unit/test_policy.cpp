#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "ventrl/policy.hpp"

using namespace ventrl;
using namespace ventrl::policy;

namespace {

mdp::StateVector random_state(Rng& rng) {
  mdp::StateVector s{};
  for (auto& v : s) v = rng.uniform(0.0, 100.0);
  return s;
}

// Q-function over encoded pairs fit to an arbitrary scoring rule
fqi::QFunction q_from_rule(std::span<const mdp::StateVector> states,
                           const std::function<double(const mdp::StateVector&, mdp::Action)>& rule,
                           std::uint64_t seed = 1) {
  std::vector<double> X;
  std::vector<double> y;
  for (const auto& s : states) {
    for (int a = 0; a < mdp::kNumActions; ++a) {
      const auto e = fqi::encode(s, mdp::action_from_index(a));
      X.insert(X.end(), e.begin(), e.end());
      y.push_back(rule(s, mdp::action_from_index(a)));
    }
  }
  ml::TreeEnsembleParams p;
  p.n_trees = 40;
  p.min_leaf = 1;
  p.seed = seed;
  fqi::QFunction q;
  q.regressor = ml::et_fit(X, states.size() * mdp::kNumActions, fqi::kEncodingDim, y, p);
  q.gamma = 0.9;
  return q;
}

}  // namespace

TEST_CASE("a Q-function favoring one action yields a constant policy") {
  Rng rng(3);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 40; ++i) states.push_back(random_state(rng));
  const auto q = q_from_rule(states, [](const mdp::StateVector&, mdp::Action a) {
    return a == mdp::Action{0, 0} ? 1.0 : 0.0;
  });
  PolicyParams params;
  params.n_trees = 20;
  const PolicyModel pol = extract_policy(q, states, params);
  for (int i = 0; i < 10; ++i) {
    const auto rec = recommend(pol, random_state(rng));
    CHECK(rec.action == mdp::Action{0, 0});
    CHECK(rec.probabilities[0] == doctest::Approx(1.0));
  }
  // constant labels leave nothing to split on
  for (double w : pol.importances) CHECK(w == 0.0);
}

TEST_CASE("threshold-separable labels are learned nearly perfectly") {
  Rng rng(5);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 300; ++i) states.push_back(random_state(rng));
  const auto peep = mdp::signal_feature_index(Signal::peep_set);
  const auto q = q_from_rule(states, [&](const mdp::StateVector& s, mdp::Action a) {
    const mdp::Action want = s[peep] > 50.0 ? mdp::Action{1, 2} : mdp::Action{0, 1};
    return a == want ? 1.0 : 0.0;
  });
  PolicyParams params;
  params.n_trees = 50;
  params.min_leaf = 1;
  const PolicyModel pol = extract_policy(q, states, params);

  std::size_t hits = 0;
  for (const auto& s : states) {
    const mdp::Action want = s[peep] > 50.0 ? mdp::Action{1, 2} : mdp::Action{0, 1};
    if (recommend(pol, s).action == want) ++hits;
  }
  CHECK(static_cast<double>(hits) / states.size() >= 0.99);
}

TEST_CASE("extraction is deterministic per seed") {
  Rng rng(7);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 60; ++i) states.push_back(random_state(rng));
  const auto q = q_from_rule(states, [](const mdp::StateVector& s, mdp::Action a) {
    return s[0] * a.sed_level - a.vent_bit;
  });
  PolicyParams params;
  params.seed = 42;
  const PolicyModel a = extract_policy(q, states, params);
  const PolicyModel b = extract_policy(q, states, params, /*threads=*/2);
  CHECK(a.importances == b.importances);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_state(rng);
    CHECK(recommend(a, s).action == recommend(b, s).action);
  }
}

TEST_CASE("recommendation probabilities sum to one and argmax matches") {
  Rng rng(11);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 80; ++i) states.push_back(random_state(rng));
  const auto q = q_from_rule(states, [](const mdp::StateVector& s, mdp::Action a) {
    return std::sin(s[5] * 0.1) + 0.3 * a.sed_level * (s[8] > 50.0 ? 1.0 : -1.0) +
           0.2 * a.vent_bit;
  });
  const PolicyModel pol = extract_policy(q, states, PolicyParams{});
  for (int i = 0; i < 40; ++i) {
    const auto s = random_state(rng);
    const auto rec = recommend(pol, s);
    CHECK(std::accumulate(rec.probabilities.begin(), rec.probabilities.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mdp::action_index(rec.action) == pol.classifier.predict_class(s));
  }
}

TEST_CASE("distillation fidelity on training states") {
  Rng rng(13);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 400; ++i) states.push_back(random_state(rng));
  const auto q = q_from_rule(states, [](const mdp::StateVector& s, mdp::Action a) {
    // a few regions with different preferred actions
    const int region = (s[5] > 50.0 ? 1 : 0) + (s[8] > 50.0 ? 2 : 0);
    return a == mdp::action_from_index(region * 2) ? 1.0 : 0.0;
  });
  PolicyParams params;
  params.n_trees = 100;
  params.min_leaf = 1;
  const PolicyModel pol = extract_policy(q, states, params);
  std::size_t agree = 0;
  for (const auto& s : states) {
    if (recommend(pol, s).action == fqi::greedy_action(q, s)) ++agree;
  }
  CHECK(static_cast<double>(agree) / states.size() >= 0.95);
}

TEST_CASE("feature importances are ranked, named, and length 32") {
  Rng rng(17);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 250; ++i) states.push_back(random_state(rng));
  const auto ph = mdp::signal_feature_index(Signal::arterial_ph);
  const auto q = q_from_rule(states, [&](const mdp::StateVector& s, mdp::Action a) {
    const mdp::Action want = s[ph] > 50.0 ? mdp::Action{0, 0} : mdp::Action{1, 3};
    return a == want ? 1.0 : 0.0;
  });
  PolicyParams params;
  params.min_leaf = 1;
  const PolicyModel pol = extract_policy(q, states, params);
  const auto ranked = feature_importances(pol);
  REQUIRE(ranked.size() == mdp::kStateDim);
  CHECK(ranked.front().first == "arterial_ph");
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    CHECK(ranked[i - 1].second >= ranked[i].second);
  }
  double total = 0.0;
  for (const auto& [name, w] : ranked) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("importance ranking survives uniform row duplication") {
  Rng rng(19);
  std::vector<mdp::StateVector> states;
  for (int i = 0; i < 150; ++i) states.push_back(random_state(rng));
  const auto q = q_from_rule(states, [](const mdp::StateVector& s, mdp::Action a) {
    const mdp::Action want = s[10] > 50.0 ? mdp::Action{1, 1} : mdp::Action{0, 2};
    return a == want ? 1.0 : 0.0;
  });
  std::vector<mdp::StateVector> doubled = states;
  doubled.insert(doubled.end(), states.begin(), states.end());

  PolicyParams params;
  params.min_leaf = 1;
  const PolicyModel a = extract_policy(q, states, params);
  const PolicyModel b = extract_policy(q, doubled, params);
  CHECK(feature_importances(a).front().first == feature_importances(b).front().first);
  const auto sum = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
  };
  CHECK(sum(a.importances) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sum(b.importances) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("empty state list is rejected") {
  fqi::QFunction q;
  CHECK_THROWS_AS(extract_policy(q, {}, PolicyParams{}), ValidationError);
}
