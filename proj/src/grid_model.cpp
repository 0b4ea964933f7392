#include "gridrl/grid_model.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gridrl {

namespace {

constexpr std::array<const char*, kNumGenTypes> kGenTypeNames = {"solar", "wind", "hydro",
                                                                 "thermal", "nuclear"};

template <typename Range>
int find_id(const Range& items, const std::string& id) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

template <typename Range>
void check_unique(const Range& items, const std::string& cls, std::vector<Violation>& out) {
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) out.push_back({cls + " " + item.id, "duplicate id"});
  }
}

// Union-find over node keys.
struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::string to_string(GenType type) { return kGenTypeNames[static_cast<int>(type)]; }

GenType gen_type_from_string(const std::string& name) {
  for (int i = 0; i < kNumGenTypes; ++i) {
    if (name == kGenTypeNames[i]) return static_cast<GenType>(i);
  }
  throw SpecificationError("unknown gen_type '" + name + "'");
}

int GridSpec::generator_index(const std::string& id) const { return find_id(generators, id); }
int GridSpec::load_index(const std::string& id) const { return find_id(loads, id); }
int GridSpec::line_index(const std::string& id) const { return find_id(lines, id); }
int GridSpec::substation_index(const std::string& id) const { return find_id(substations, id); }

std::vector<Violation> validate_spec(const GridSpec& spec) {
  std::vector<Violation> out;
  check_unique(spec.substations, "substation", out);
  check_unique(spec.generators, "generator", out);
  check_unique(spec.loads, "load", out);
  check_unique(spec.lines, "line", out);

  auto known_sub = [&](const std::string& id) { return spec.substation_index(id) >= 0; };
  for (const auto& g : spec.generators) {
    if (!known_sub(g.substation_id)) out.push_back({"generator " + g.id, "unknown substation"});
    if (!(g.p_min <= g.p_max)) out.push_back({"generator " + g.id, "p_min > p_max"});
  }
  for (const auto& l : spec.loads) {
    if (!known_sub(l.substation_id)) out.push_back({"load " + l.id, "unknown substation"});
  }
  for (const auto& l : spec.lines) {
    if (!known_sub(l.from_substation_id) || !known_sub(l.to_substation_id)) {
      out.push_back({"line " + l.id, "unknown substation"});
    }
    if (!(l.reactance > 0.0)) out.push_back({"line " + l.id, "reactance must be > 0"});
    if (!(l.resistance >= 0.0)) out.push_back({"line " + l.id, "resistance must be >= 0"});
    if (!(l.thermal_limit > 0.0)) out.push_back({"line " + l.id, "thermal_limit must be > 0"});
  }
  // The slack is named once at top level; a duplicated id in the
  // generator list would make two generators match it.
  const auto slack_count = std::count_if(spec.generators.begin(), spec.generators.end(),
                                         [&](const Generator& g) { return g.id == spec.slack_generator; });
  if (slack_count != 1) out.push_back({"slack_generator " + spec.slack_generator, "slack count"});
  if (!(spec.base_power > 0.0)) out.push_back({"base_power", "must be > 0"});
  return out;
}

void resolve(GridSpec& spec) {
  const auto report = validate_spec(spec);
  if (!report.empty()) {
    std::ostringstream msg;
    msg << "invalid grid spec:";
    for (const auto& v : report) msg << " [" << v.element << ": " << v.rule << "]";
    throw SpecificationError(msg.str());
  }
  for (auto& g : spec.generators) g.substation = spec.substation_index(g.substation_id);
  for (auto& l : spec.loads) l.substation = spec.substation_index(l.substation_id);
  for (auto& l : spec.lines) {
    l.from = spec.substation_index(l.from_substation_id);
    l.to = spec.substation_index(l.to_substation_id);
  }
  spec.slack = spec.generator_index(spec.slack_generator);
}

GridSpec parse_grid_spec(const std::string& json_text) {
  using nlohmann::json;
  GridSpec spec;
  try {
    const json doc = json::parse(json_text);
    for (const auto& s : doc.at("substations")) spec.substations.push_back({s.at("id").get<std::string>()});
    for (const auto& g : doc.at("generators")) {
      Generator gen;
      gen.id = g.at("id").get<std::string>();
      gen.substation_id = g.at("substation_id").get<std::string>();
      gen.p_min = g.at("p_min").get<double>();
      gen.p_max = g.at("p_max").get<double>();
      gen.max_ramp_up = g.value("max_ramp_up", 0.0);
      gen.max_ramp_down = g.value("max_ramp_down", 0.0);
      gen.min_uptime = g.value("min_uptime", 0.0);
      gen.min_downtime = g.value("min_downtime", 0.0);
      gen.cost_per_mw = g.value("cost_per_mw", 0.0);
      gen.startup_cost = g.value("startup_cost", 0.0);
      gen.shutdown_cost = g.value("shutdown_cost", 0.0);
      gen.gen_type = gen_type_from_string(g.value("gen_type", std::string("thermal")));
      spec.generators.push_back(std::move(gen));
    }
    for (const auto& l : doc.at("loads")) {
      spec.loads.push_back({l.at("id").get<std::string>(), l.at("substation_id").get<std::string>()});
    }
    for (const auto& l : doc.at("lines")) {
      Line line;
      line.id = l.at("id").get<std::string>();
      line.from_substation_id = l.at("from_substation_id").get<std::string>();
      line.to_substation_id = l.at("to_substation_id").get<std::string>();
      line.reactance = l.at("reactance").get<double>();
      line.resistance = l.value("resistance", 0.0);
      line.thermal_limit = l.at("thermal_limit").get<double>();
      spec.lines.push_back(std::move(line));
    }
    spec.slack_generator = doc.at("slack_generator").get<std::string>();
    spec.base_power = doc.value("base_power", 100.0);
  } catch (const nlohmann::json::exception& e) {
    throw SpecificationError(std::string("malformed grid file: ") + e.what());
  }
  return spec;
}

GridSpec load_grid_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecificationError("cannot open grid file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  GridSpec spec = parse_grid_spec(buf.str());
  resolve(spec);
  return spec;
}

std::string grid_spec_to_json(const GridSpec& spec) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["substations"] = ordered_json::array();
  for (const auto& s : spec.substations) doc["substations"].push_back({{"id", s.id}});
  doc["generators"] = ordered_json::array();
  for (const auto& g : spec.generators) {
    doc["generators"].push_back({{"id", g.id},
                                 {"substation_id", g.substation_id},
                                 {"p_min", g.p_min},
                                 {"p_max", g.p_max},
                                 {"max_ramp_up", g.max_ramp_up},
                                 {"max_ramp_down", g.max_ramp_down},
                                 {"min_uptime", g.min_uptime},
                                 {"min_downtime", g.min_downtime},
                                 {"cost_per_mw", g.cost_per_mw},
                                 {"startup_cost", g.startup_cost},
                                 {"shutdown_cost", g.shutdown_cost},
                                 {"gen_type", to_string(g.gen_type)}});
  }
  doc["loads"] = ordered_json::array();
  for (const auto& l : spec.loads) doc["loads"].push_back({{"id", l.id}, {"substation_id", l.substation_id}});
  doc["lines"] = ordered_json::array();
  for (const auto& l : spec.lines) {
    doc["lines"].push_back({{"id", l.id},
                            {"from_substation_id", l.from_substation_id},
                            {"to_substation_id", l.to_substation_id},
                            {"reactance", l.reactance},
                            {"resistance", l.resistance},
                            {"thermal_limit", l.thermal_limit}});
  }
  doc["slack_generator"] = spec.slack_generator;
  doc["base_power"] = spec.base_power;
  return doc.dump(2) + "\n";
}

GridState default_state(const GridSpec& spec) {
  GridState s;
  s.gen_assignment.assign(spec.n_gen(), BusAssignment::kBusbar1);
  s.load_assignment.assign(spec.n_load(), BusAssignment::kBusbar1);
  s.line_assignment.assign(spec.n_line(), LineAssignment{});
  s.line_cooldown.assign(spec.n_line(), 0);
  s.sub_cooldown.assign(spec.n_sub(), 0);
  s.overflow_counter.assign(spec.n_line(), 0);
  s.reconnection_timer.assign(spec.n_line(), 0);
  s.maintenance_remaining.assign(spec.n_line(), 0);
  s.maintenance_next.assign(spec.n_line(), 0);
  s.maintenance_duration.assign(spec.n_line(), 0);
  s.attack_timer.assign(spec.n_line(), 0);
  return s;
}

void check_consistent(const GridSpec& spec, const GridState& state) {
  const auto nl = static_cast<std::size_t>(spec.n_line());
  const bool ok = state.gen_assignment.size() == static_cast<std::size_t>(spec.n_gen()) &&
                  state.load_assignment.size() == static_cast<std::size_t>(spec.n_load()) &&
                  state.line_assignment.size() == nl && state.line_cooldown.size() == nl &&
                  state.sub_cooldown.size() == static_cast<std::size_t>(spec.n_sub()) &&
                  state.overflow_counter.size() == nl && state.reconnection_timer.size() == nl &&
                  state.maintenance_remaining.size() == nl && state.maintenance_next.size() == nl &&
                  state.maintenance_duration.size() == nl && state.attack_timer.size() == nl;
  if (!ok) throw SpecificationError("grid state does not match grid spec element counts");
}

std::vector<std::string> state_violations(const GridSpec& spec, const GridState& state) {
  check_consistent(spec, state);
  std::vector<std::string> out;
  auto nonneg = [&](const std::vector<int>& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0) out.push_back(std::string(name) + "[" + std::to_string(i) + "] < 0");
    }
  };
  nonneg(state.line_cooldown, "line_cooldown");
  nonneg(state.sub_cooldown, "sub_cooldown");
  nonneg(state.overflow_counter, "overflow_counter");
  nonneg(state.reconnection_timer, "reconnection_timer");
  nonneg(state.maintenance_remaining, "maintenance_remaining");
  nonneg(state.maintenance_next, "maintenance_next");
  nonneg(state.maintenance_duration, "maintenance_duration");
  nonneg(state.attack_timer, "attack_timer");
  if (state.opponent_cooldown < 0) out.push_back("opponent_cooldown < 0");
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& a = state.line_assignment[l];
    const bool locked = state.reconnection_timer[l] > 0 || state.attack_timer[l] > 0 ||
                        state.maintenance_remaining[l] > 0;
    if (locked && (connected(a.origin) || connected(a.extremity))) {
      out.push_back("line " + spec.lines[l].id + " locked but connected");
    }
    if (!a.conducting() && state.overflow_counter[l] != 0) {
      out.push_back("line " + spec.lines[l].id + " disconnected with overflow counter");
    }
  }
  return out;
}

void apply_delta(GridState& state, const TopologyDelta& delta) {
  for (const auto& c : delta) {
    switch (c.kind) {
      case ElementKind::kGenerator:
        state.gen_assignment.at(c.element) = c.after;
        break;
      case ElementKind::kLoad:
        state.load_assignment.at(c.element) = c.after;
        break;
      case ElementKind::kLineOrigin:
        state.line_assignment.at(c.element).origin = c.after;
        break;
      case ElementKind::kLineExtremity:
        state.line_assignment.at(c.element).extremity = c.after;
        break;
    }
  }
}

TopologyDelta inverse(const TopologyDelta& delta) {
  TopologyDelta out(delta.rbegin(), delta.rend());
  for (auto& c : out) std::swap(c.before, c.after);
  return out;
}

std::vector<ElectricalNode> electrical_nodes(const GridSpec& spec, const GridState& state) {
  check_consistent(spec, state);
  std::set<ElectricalNode> nodes;
  for (int g = 0; g < spec.n_gen(); ++g) {
    if (connected(state.gen_assignment[g])) nodes.insert({spec.generators[g].substation, state.gen_assignment[g]});
  }
  for (int d = 0; d < spec.n_load(); ++d) {
    if (connected(state.load_assignment[d])) nodes.insert({spec.loads[d].substation, state.load_assignment[d]});
  }
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& a = state.line_assignment[l];
    if (connected(a.origin)) nodes.insert({spec.lines[l].from, a.origin});
    if (connected(a.extremity)) nodes.insert({spec.lines[l].to, a.extremity});
  }
  return {nodes.begin(), nodes.end()};
}

std::vector<std::vector<ElectricalNode>> islands(const GridSpec& spec, const GridState& state) {
  const auto nodes = electrical_nodes(spec, state);
  DisjointSets sets(2 * spec.n_sub());
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& a = state.line_assignment[l];
    if (!a.conducting()) continue;
    sets.unite(ElectricalNode{spec.lines[l].from, a.origin}.key(), ElectricalNode{spec.lines[l].to, a.extremity}.key());
  }
  std::map<int, std::vector<ElectricalNode>> groups;
  for (const auto& n : nodes) groups[sets.find(n.key())].push_back(n);
  std::vector<std::vector<ElectricalNode>> out;
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

}  // namespace gridrl
