#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridrl {

/// Raised when a caller refers to elements or states that do not match a GridSpec.
class SpecificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GenType { kSolar, kWind, kHydro, kThermal, kNuclear };
inline constexpr int kNumGenTypes = 5;

std::string to_string(GenType type);
GenType gen_type_from_string(const std::string& name);

struct Substation {
  std::string id;
};

struct Generator {
  std::string id;
  std::string substation_id;
  double p_min = 0.0;
  double p_max = 0.0;
  double max_ramp_up = 0.0;
  double max_ramp_down = 0.0;
  double min_uptime = 0.0;
  double min_downtime = 0.0;
  double cost_per_mw = 0.0;
  double startup_cost = 0.0;
  double shutdown_cost = 0.0;
  GenType gen_type = GenType::kThermal;
  int substation = -1;  // resolved index
};

struct Load {
  std::string id;
  std::string substation_id;
  int substation = -1;
};

struct Line {
  std::string id;
  std::string from_substation_id;
  std::string to_substation_id;
  double reactance = 0.0;   // p.u.
  double resistance = 0.0;  // p.u.
  double thermal_limit = 0.0;  // MW
  int from = -1;
  int to = -1;
};

/// Immutable description of a grid. Element order is the order of the
/// source document; every per-element vector in the library uses it.
struct GridSpec {
  std::vector<Substation> substations;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<Line> lines;
  std::string slack_generator;
  double base_power = 100.0;
  int slack = -1;  // resolved index

  int n_sub() const { return static_cast<int>(substations.size()); }
  int n_gen() const { return static_cast<int>(generators.size()); }
  int n_load() const { return static_cast<int>(loads.size()); }
  int n_line() const { return static_cast<int>(lines.size()); }

  int generator_index(const std::string& id) const;
  int load_index(const std::string& id) const;
  int line_index(const std::string& id) const;
  int substation_index(const std::string& id) const;
};

struct Violation {
  std::string element;
  std::string rule;
};

/// Checks every GridSpec invariant and reports each breach separately.
std::vector<Violation> validate_spec(const GridSpec& spec);

/// Resolves substation/slack ids into indices. Throws SpecificationError
/// if validate_spec reports anything.
void resolve(GridSpec& spec);

GridSpec load_grid_spec(const std::filesystem::path& path);
GridSpec parse_grid_spec(const std::string& json_text);
std::string grid_spec_to_json(const GridSpec& spec);

enum class BusAssignment : std::uint8_t { kDisconnected = 0, kBusbar1 = 1, kBusbar2 = 2 };

inline bool connected(BusAssignment b) { return b != BusAssignment::kDisconnected; }

struct LineAssignment {
  BusAssignment origin = BusAssignment::kBusbar1;
  BusAssignment extremity = BusAssignment::kBusbar1;

  bool conducting() const { return connected(origin) && connected(extremity); }
  bool operator==(const LineAssignment&) const = default;
};

/// Dynamic topology and rule timers. All vectors are indexed by element
/// position in the GridSpec.
struct GridState {
  std::vector<BusAssignment> gen_assignment;
  std::vector<BusAssignment> load_assignment;
  std::vector<LineAssignment> line_assignment;
  std::vector<int> line_cooldown;
  std::vector<int> sub_cooldown;
  std::vector<int> overflow_counter;
  std::vector<int> reconnection_timer;
  std::vector<int> maintenance_remaining;  // > 0 while maintenance is active
  std::vector<int> maintenance_next;       // steps until the next scheduled start
  std::vector<int> maintenance_duration;   // duration of that next maintenance, 0 if none
  std::vector<int> attack_timer;
  int opponent_cooldown = 0;
  int step_index = 0;

  bool operator==(const GridState&) const = default;
};

/// Everything on busbar 1, all lines conducting, timers zero.
GridState default_state(const GridSpec& spec);

/// Throws SpecificationError when vector sizes disagree with the grid spec.
void check_consistent(const GridSpec& spec, const GridState& state);

/// Human-readable breaches of the GridState invariants; empty when sound.
std::vector<std::string> state_violations(const GridSpec& spec, const GridState& state);

enum class ElementKind : std::uint8_t { kGenerator, kLoad, kLineOrigin, kLineExtremity };

struct AssignmentChange {
  ElementKind kind;
  int element;
  BusAssignment before;
  BusAssignment after;
};

using TopologyDelta = std::vector<AssignmentChange>;

void apply_delta(GridState& state, const TopologyDelta& delta);
TopologyDelta inverse(const TopologyDelta& delta);

/// A (substation, busbar) pair with at least one connected element.
struct ElectricalNode {
  int substation;
  BusAssignment bus;

  int key() const { return substation * 2 + (bus == BusAssignment::kBusbar2 ? 1 : 0); }
  bool operator==(const ElectricalNode&) const = default;
  auto operator<=>(const ElectricalNode& o) const { return key() <=> o.key(); }
};

/// Live electrical nodes, sorted by (substation, busbar).
std::vector<ElectricalNode> electrical_nodes(const GridSpec& spec, const GridState& state);

/// Connected components of the live nodes through conducting lines. Each
/// component is sorted; components are ordered by their first node.
std::vector<std::vector<ElectricalNode>> islands(const GridSpec& spec, const GridState& state);

}  // namespace gridrl
