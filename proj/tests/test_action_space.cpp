#include <doctest.h>

#include <random>

#include "support.hpp"

using namespace gridrl;
using gridrl::testing::fixture_chronics;
using gridrl::testing::fixture_spec;

TEST_CASE("fixture layout") {
  const ActionLayout lay = layout(*fixture_spec());
  CHECK(lay.dims == std::vector<int>{4, 4, 3, 3, 3, 6, 6, 6, 6, 6, 6, 6, 6});
  CHECK(lay.total() == 65);
  CHECK(lay.offsets[5] == 17);
  CHECK(lay == layout(*fixture_spec()));
  CHECK(lay.element_class(1) == ElementClass::kGenerator);
  CHECK(lay.element_class(2) == ElementClass::kLoad);
  CHECK(lay.element_class(12) == ElementClass::kLine);
  CHECK(lay.class_index(12) == 7);
}

TEST_CASE("grid without lines has no six-way entries") {
  GridSpec spec;
  spec.substations = {{"a"}};
  Generator g;
  g.id = "g";
  g.substation_id = "a";
  g.p_max = 10;
  spec.generators = {g};
  spec.loads = {{"d", "a"}};
  spec.slack_generator = "g";
  resolve(spec);
  const ActionLayout lay = layout(spec);
  CHECK(lay.dims == std::vector<int>{4, 3});
  CHECK(lay.total() == 7);
}

TEST_CASE("masks") {
  const auto& spec = *fixture_spec();
  const ActionLayout lay = layout(spec);
  GridState s = default_state(spec);

  SUBCASE("fresh state opens everything") {
    const ActionMask m = compute_mask(spec, s, lay);
    CHECK(std::all_of(m.valid.begin(), m.valid.end(), [](auto v) { return v == 1; }));
  }
  SUBCASE("line in cooldown") {
    s.line_cooldown[3] = 2;
    const ActionMask m = compute_mask(spec, s, lay);
    const int e = lay.n_gen + lay.n_load + 3;
    for (int c = 0; c < 6; ++c) CHECK(m.allowed(lay, e, c) == (c == choice::kLineDoNothing));
    const int others = static_cast<int>(std::count(m.valid.begin(), m.valid.end(), 1));
    CHECK(others == 65 - 5);
  }
  SUBCASE("substation in cooldown") {
    s.sub_cooldown[1] = 1;
    const ActionMask m = compute_mask(spec, s, lay);
    for (int e = 0; e < lay.n_elements(); ++e) {
      const int i = lay.class_index(e);
      bool touches = false;
      switch (lay.element_class(e)) {
        case ElementClass::kGenerator: touches = spec.generators[i].substation == 1; break;
        case ElementClass::kLoad: touches = spec.loads[i].substation == 1; break;
        case ElementClass::kLine: touches = spec.lines[i].from == 1 || spec.lines[i].to == 1; break;
      }
      for (int c = 0; c < lay.dims[e]; ++c) {
        CHECK(m.allowed(lay, e, c) == (!touches || c == lay.do_nothing[e]));
      }
    }
  }
  SUBCASE("maintenance, reconnection and attack lock a line") {
    s.maintenance_remaining[0] = 5;
    s.reconnection_timer[1] = 5;
    s.attack_timer[2] = 5;
    const ActionMask m = compute_mask(spec, s, lay);
    for (int l = 0; l < 3; ++l) {
      const auto support = masked_sample_support(lay, m)[lay.n_gen + lay.n_load + l];
      CHECK(support == std::vector<int>{choice::kLineDoNothing});
    }
  }
}

TEST_CASE("decode") {
  const auto& spec = *fixture_spec();
  const ActionLayout lay = layout(spec);
  GridState s = default_state(spec);

  const DecodedAction noop = decode(spec, s, lay, TopoAction::do_nothing(lay));
  CHECK(noop.delta.empty());
  CHECK(noop.action_class == ActionClass::kLegal);

  std::vector<int> c = lay.do_nothing;
  c[0] = choice::kGenBusbar2;
  const DecodedAction move = decode(spec, s, lay, TopoAction(lay, c));
  REQUIRE(move.delta.size() == 1);
  CHECK(move.delta[0].kind == ElementKind::kGenerator);
  CHECK(move.delta[0].before == BusAssignment::kBusbar1);
  CHECK(move.delta[0].after == BusAssignment::kBusbar2);
  CHECK(move.action_class == ActionClass::kLegal);

  // already on busbar 1: no change, still legal even when locked
  c = lay.do_nothing;
  c[0] = choice::kGenBusbar1;
  s.sub_cooldown[0] = 2;
  const DecodedAction same = decode(spec, s, lay, TopoAction(lay, c));
  CHECK(same.delta.empty());
  CHECK(same.action_class == ActionClass::kLegal);

  s = default_state(spec);
  const int line = 4;
  s.line_assignment[line] = {BusAssignment::kDisconnected, BusAssignment::kDisconnected};
  s.reconnection_timer[line] = 6;
  c = lay.do_nothing;
  c[lay.n_gen + lay.n_load + line] = choice::kLineBus11;
  const DecodedAction reconnect = decode(spec, s, lay, TopoAction(lay, c));
  CHECK(reconnect.action_class == ActionClass::kIllegal);
  CHECK(reconnect.delta.size() == 2);

  c = lay.do_nothing;
  c[lay.n_gen + lay.n_load + 1] = choice::kLineBus21;
  s = default_state(spec);
  const DecodedAction split = decode(spec, s, lay, TopoAction(lay, c));
  REQUIRE(split.delta.size() == 1);
  CHECK(split.delta[0].kind == ElementKind::kLineOrigin);
}

TEST_CASE("malformed action indices are rejected at construction") {
  const ActionLayout lay = layout(*fixture_spec());
  std::vector<int> c = lay.do_nothing;
  c[2] = 3;
  CHECK_THROWS_AS(TopoAction(lay, c), AmbiguousActionError);
  c[2] = -1;
  CHECK_THROWS_AS(TopoAction(lay, c), AmbiguousActionError);
  c.pop_back();
  CHECK_THROWS_AS(TopoAction(lay, c), AmbiguousActionError);
}

TEST_CASE("sample support stays inside the mask") {
  const ActionLayout lay = layout(*fixture_spec());
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    ActionMask m;
    m.valid.resize(lay.total());
    for (auto& v : m.valid) v = coin(rng) ? 1 : 0;
    for (int e = 0; e < lay.n_elements(); ++e) m.valid[lay.offsets[e] + lay.do_nothing[e]] = 1;
    const auto support = masked_sample_support(lay, m);
    for (int e = 0; e < lay.n_elements(); ++e) {
      CHECK(std::find(support[e].begin(), support[e].end(), lay.do_nothing[e]) != support[e].end());
      for (int c : support[e]) CHECK(m.allowed(lay, e, c));
    }
  }
  ActionMask open;
  open.valid.assign(lay.total(), 1);
  CHECK(masked_sample_support(lay, open)[12] == std::vector<int>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("supported actions decode legal in reachable states") {
  const auto spec = fixture_spec();
  const ActionLayout lay = layout(*spec);
  Environment env(spec, gridrl::testing::short_config(200));
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int episode = 0; checked < 3000; ++episode) {
    env.reset(full_view(fixture_chronics().at(episode % 20)), episode);
    while (!env.done()) {
      const ActionMask m = env.mask();
      REQUIRE(decode(*spec, env.state(), lay, TopoAction::do_nothing(lay)).delta.empty());
      const TopoAction a = gridrl::testing::random_supported_action(lay, m, rng);
      REQUIRE(decode(*spec, env.state(), lay, a).action_class == ActionClass::kLegal);
      ++checked;
      env.step(gridrl::testing::sparse_supported_action(lay, m, rng, 0.05));
    }
  }
}
