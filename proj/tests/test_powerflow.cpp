#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace gridrl;
using gridrl::testing::fixture_chronics;
using gridrl::testing::fixture_spec;
using gridrl::testing::oracle_dc_flows;

namespace {

Generator gen(const std::string& id, const std::string& sub, double p_max) {
  Generator g;
  g.id = id;
  g.substation_id = sub;
  g.p_max = p_max;
  return g;
}

Line line(const std::string& id, const std::string& a, const std::string& b, double x, double r = 0.0) {
  Line l;
  l.id = id;
  l.from_substation_id = a;
  l.to_substation_id = b;
  l.reactance = x;
  l.resistance = r;
  l.thermal_limit = 100.0;
  return l;
}

GridSpec two_bus() {
  GridSpec s;
  s.substations = {{"A"}, {"B"}};
  s.generators = {gen("g", "A", 50)};
  s.loads = {{"d", "B"}};
  s.lines = {line("ab", "A", "B", 0.1)};
  s.slack_generator = "g";
  resolve(s);
  return s;
}

GridSpec triangle() {
  GridSpec s;
  s.substations = {{"s0"}, {"s1"}, {"s2"}};
  s.generators = {gen("g", "s0", 50)};
  s.loads = {{"d1", "s1"}, {"d2", "s2"}};
  s.lines = {line("l01", "s0", "s1", 0.1), line("l02", "s0", "s2", 0.1), line("l12", "s1", "s2", 0.1)};
  s.slack_generator = "g";
  resolve(s);
  return s;
}

Injections fixture_injections(int chronic, int t) {
  const auto& c = *fixture_chronics().at(chronic);
  return {c.gen_p.row(t).transpose(), c.load_p.row(t).transpose()};
}

// Replays the two-pass loss correction with the pseudo-inverse oracle.
Eigen::VectorXd oracle_island_flows(const GridSpec& spec, const GridState& state, const Injections& inj,
                                    const PowerFlowResult& res, const std::vector<ElectricalNode>& island) {
  auto local = [&](int sub, BusAssignment bus) {
    for (std::size_t i = 0; i < island.size(); ++i) {
      if (island[i] == ElectricalNode{sub, bus}) return static_cast<int>(i);
    }
    return -1;
  };
  const auto n = static_cast<int>(island.size());
  std::vector<std::pair<int, int>> ends;
  std::vector<double> x, r;
  std::vector<int> ids;
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& a = state.line_assignment[l];
    if (!a.conducting()) continue;
    const int i = local(spec.lines[l].from, a.origin);
    if (i < 0) continue;
    ends.push_back({i, local(spec.lines[l].to, a.extremity)});
    x.push_back(spec.lines[l].reactance);
    r.push_back(spec.lines[l].resistance);
    ids.push_back(l);
  }
  const double base = spec.base_power;
  int slack_node = -1;
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  for (int g = 0; g < spec.n_gen(); ++g) {
    const int i = connected(state.gen_assignment[g]) ? local(spec.generators[g].substation, state.gen_assignment[g]) : -1;
    if (i < 0) continue;
    if (std::find(res.island_slack.begin(), res.island_slack.end(), g) != res.island_slack.end()) {
      slack_node = i;
    } else {
      p(i) += inj.gen_p(g) / base;
    }
  }
  for (int d = 0; d < spec.n_load(); ++d) {
    const int i = connected(state.load_assignment[d]) ? local(spec.loads[d].substation, state.load_assignment[d]) : -1;
    if (i >= 0) p(i) -= inj.load_p(d) / base;
  }
  REQUIRE(slack_node >= 0);
  auto balanced = [&](Eigen::VectorXd q) {
    q(slack_node) = 0.0;
    q(slack_node) = -q.sum();
    return q;
  };
  const Eigen::VectorXd f0 = oracle_dc_flows(n, ends, x, balanced(p));
  Eigen::VectorXd p2 = p;
  for (std::size_t k = 0; k < ends.size(); ++k) {
    const double loss = r[k] * f0(static_cast<Eigen::Index>(k)) * f0(static_cast<Eigen::Index>(k));
    p2(ends[k].first) -= 0.5 * loss;
    p2(ends[k].second) -= 0.5 * loss;
  }
  const Eigen::VectorXd f1 = oracle_dc_flows(n, ends, x, balanced(p2));
  Eigen::VectorXd out = Eigen::VectorXd::Constant(spec.n_line(), std::nan(""));
  for (std::size_t k = 0; k < ids.size(); ++k) out(ids[k]) = f1(static_cast<Eigen::Index>(k)) * base;
  return out;
}

}  // namespace

TEST_CASE("two buses, one lossless line") {
  const GridSpec spec = two_bus();
  const PowerFlowResult res = solve(spec, default_state(spec), {Eigen::VectorXd::Constant(1, 10.0), Eigen::VectorXd::Constant(1, 10.0)});
  CHECK_FALSE(res.diverged);
  CHECK(res.line_flow(0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(res.total_loss == 0.0);
  CHECK(res.slack_p == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(res.unserved.empty());
}

TEST_CASE("symmetric triangle matches the hand solution") {
  const GridSpec spec = triangle();
  Injections inj{Eigen::VectorXd::Constant(1, 9.0), Eigen::Vector2d(4.5, 4.5)};
  const PowerFlowResult res = solve(spec, default_state(spec), inj);
  CHECK(std::abs(res.line_flow(0) - 4.5) <= 1e-6);
  CHECK(std::abs(res.line_flow(1) - 4.5) <= 1e-6);
  CHECK(std::abs(res.line_flow(2)) <= 1e-6);

  // 2x2 reduced system with slack angle 0: B = [[20,-10],[-10,20]] p.u.
  Eigen::Matrix2d b;
  b << 20, -10, -10, 20;
  const Eigen::Vector2d theta = b.lu().solve(Eigen::Vector2d(-0.045, -0.045));
  CHECK(std::abs((0.0 - theta(0)) / 0.1 * 100 - res.line_flow(0)) <= 1e-9);
}

TEST_CASE("3-bus case with unequal loads and resistance") {
  GridSpec spec = triangle();
  spec.lines[0].resistance = 0.02;
  spec.lines[2].reactance = 0.2;
  resolve(spec);
  Injections inj{Eigen::VectorXd::Constant(1, 0.0), Eigen::Vector2d(6.0, 3.0)};
  const PowerFlowResult res = solve(spec, default_state(spec), inj);
  // lossless pass: theta = B^-1 p with B = [[15,-5],[-5,15]]
  Eigen::Matrix2d b;
  b << 15, -5, -5, 15;
  const Eigen::Vector2d t0 = b.lu().solve(Eigen::Vector2d(-0.06, -0.03));
  const double f01 = -t0(0) / 0.1;
  const double loss = 0.02 * f01 * f01;
  const Eigen::Vector2d t1 = b.lu().solve(Eigen::Vector2d(-0.06 - 0.5 * loss, -0.03));
  CHECK(std::abs(res.line_flow(0) - (-t1(0) / 0.1) * 100) <= 1e-6);
  CHECK(std::abs(res.line_flow(1) - (-t1(1) / 0.1) * 100) <= 1e-6);
  CHECK(std::abs(res.line_flow(2) - (t1(0) - t1(1)) / 0.2 * 100) <= 1e-6);
  CHECK(std::abs(res.total_loss - loss * 100) <= 1e-9);
  CHECK(std::abs(res.slack_p - (9.0 + loss * 100)) <= 1e-9);
}

TEST_CASE("islanded load is unserved without divergence") {
  const auto& spec = *fixture_spec();
  GridState s = default_state(spec);
  for (int l = 0; l < spec.n_line(); ++l) {
    if (spec.lines[l].from == 2 || spec.lines[l].to == 2) {
      s.line_assignment[l] = {BusAssignment::kDisconnected, BusAssignment::kDisconnected};
    }
  }
  const PowerFlowResult res = solve(spec, s, fixture_injections(0, 0));
  CHECK_FALSE(res.diverged);
  REQUIRE(res.unserved.size() == 1);
  CHECK(res.unserved[0] == spec.load_index("load_2"));
  CHECK(res.load_served(spec.load_index("load_2")) == 0.0);
}

TEST_CASE("bad injections") {
  const auto& spec = *fixture_spec();
  Injections inj = fixture_injections(0, 0);
  inj.load_p(0) = std::nan("");
  CHECK_THROWS_AS(solve(spec, default_state(spec), inj), ArgumentError);
  inj.load_p.resize(2);
  CHECK_THROWS_AS(solve(spec, default_state(spec), inj), ArgumentError);
}

TEST_CASE("slack limits") {
  const GridSpec spec = two_bus();
  const GridState s = default_state(spec);
  auto with_load = [&](double mw) {
    return solve(spec, s, {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, mw)});
  };
  CHECK(apply_slack_limits(spec, with_load(20.0)));
  CHECK(apply_slack_limits(spec, with_load(50.0)));
  CHECK_FALSE(apply_slack_limits(spec, with_load(55.0)));
}

TEST_CASE("conservation and oracle agreement on random topologies") {
  const auto& spec = *fixture_spec();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> chronic(0, 19);
  std::uniform_int_distribution<int> step(0, 2015);
  int solved_islands = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const GridState s = gridrl::testing::random_topology(spec, rng, 0.2);
    const Injections inj = fixture_injections(chronic(rng), step(rng));
    const PowerFlowResult res = solve(spec, s, inj);
    REQUIRE_FALSE(res.diverged);
    for (const auto& island : islands(spec, s)) {
      double gen = 0.0, load = 0.0, loss = 0.0;
      bool has_gen = false;
      for (int g = 0; g < spec.n_gen(); ++g) {
        if (!connected(s.gen_assignment[g])) continue;
        const ElectricalNode n{spec.generators[g].substation, s.gen_assignment[g]};
        if (std::find(island.begin(), island.end(), n) == island.end()) continue;
        gen += res.gen_p(g);
        has_gen = true;
      }
      if (!has_gen) continue;
      for (int d = 0; d < spec.n_load(); ++d) {
        if (!connected(s.load_assignment[d])) continue;
        const ElectricalNode n{spec.loads[d].substation, s.load_assignment[d]};
        if (std::find(island.begin(), island.end(), n) != island.end()) load += res.load_served(d);
      }
      for (int l = 0; l < spec.n_line(); ++l) {
        const auto& a = s.line_assignment[l];
        if (!a.conducting()) continue;
        const ElectricalNode n{spec.lines[l].from, a.origin};
        if (std::find(island.begin(), island.end(), n) != island.end()) loss += res.line_loss(l);
      }
      REQUIRE(std::abs(gen - load - loss) <= 1e-8);

      const Eigen::VectorXd oracle = oracle_island_flows(spec, s, inj, res, island);
      for (int l = 0; l < spec.n_line(); ++l) {
        if (!std::isnan(oracle(l))) REQUIRE(std::abs(oracle(l) - res.line_flow(l)) <= 1e-6);
      }
      ++solved_islands;
    }
  }
  CHECK(solved_islands > 500);
}

TEST_CASE("reversing a line negates its flow") {
  const GridSpec spec = *fixture_spec();
  const Injections inj = fixture_injections(4, 200);
  const PowerFlowResult ref = solve(spec, default_state(spec), inj);
  for (int l = 0; l < spec.n_line(); ++l) {
    GridSpec flipped = spec;
    std::swap(flipped.lines[l].from_substation_id, flipped.lines[l].to_substation_id);
    resolve(flipped);
    const PowerFlowResult res = solve(flipped, default_state(flipped), inj);
    CHECK(res.line_flow(l) == doctest::Approx(-ref.line_flow(l)).epsilon(1e-12));
    for (int k = 0; k < spec.n_line(); ++k) {
      if (k != l) CHECK(res.line_flow(k) == doctest::Approx(ref.line_flow(k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("lossless flows scale linearly with injections") {
  GridSpec spec = *fixture_spec();
  for (auto& l : spec.lines) l.resistance = 0.0;
  resolve(spec);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const GridState s = gridrl::testing::random_topology(spec, rng, 0.1);
    const Injections inj = fixture_injections(trial % 20, (trial * 37) % 2016);
    const double alpha = 0.25 + 0.05 * trial;
    const PowerFlowResult a = solve(spec, s, inj);
    const PowerFlowResult b = solve(spec, s, {alpha * inj.gen_p, alpha * inj.load_p});
    for (int l = 0; l < spec.n_line(); ++l) {
      CHECK(std::abs(b.line_flow(l) - alpha * a.line_flow(l)) <= 1e-9 * (1.0 + std::abs(alpha * a.line_flow(l))));
    }
  }
}

TEST_CASE("parallel lines split the flow evenly") {
  const auto& spec = *fixture_spec();
  const PowerFlowResult res = solve(spec, default_state(spec), fixture_injections(0, 100));
  const int a = spec.line_index("line_3_4_a");
  const int b = spec.line_index("line_3_4_b");
  CHECK(res.line_flow(a) == doctest::Approx(res.line_flow(b)).epsilon(1e-12));
}
