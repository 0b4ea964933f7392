#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/grid_model.hpp"

namespace gridrl {

/// Choice indices of the per-element categorical action space.
namespace choice {
inline constexpr int kGenDisconnect = 0;
inline constexpr int kGenDoNothing = 1;
inline constexpr int kGenBusbar1 = 2;
inline constexpr int kGenBusbar2 = 3;

inline constexpr int kLoadDoNothing = 0;
inline constexpr int kLoadBusbar1 = 1;
inline constexpr int kLoadBusbar2 = 2;

inline constexpr int kLineDisconnect = 0;
inline constexpr int kLineDoNothing = 1;
inline constexpr int kLineBus11 = 2;
inline constexpr int kLineBus12 = 3;
inline constexpr int kLineBus21 = 4;
inline constexpr int kLineBus22 = 5;
}  // namespace choice

enum class ElementClass : std::uint8_t { kGenerator, kLoad, kLine };

/// Per-element dimensions in fixed order: generators, loads, lines.
struct ActionLayout {
  std::vector<int> dims;
  std::vector<int> offsets;  // start of each element in the flattened choice vector
  std::vector<int> do_nothing;
  int n_gen = 0;
  int n_load = 0;
  int n_line = 0;

  int n_elements() const { return static_cast<int>(dims.size()); }
  int total() const { return offsets.empty() ? 0 : offsets.back() + dims.back(); }
  ElementClass element_class(int e) const;
  /// Position of element e within its own class.
  int class_index(int e) const;
  bool operator==(const ActionLayout&) const = default;
};

ActionLayout layout(const GridSpec& spec);

/// Validity of every (element, choice) pair, flattened like the layout.
/// true = selectable.
struct ActionMask {
  std::vector<std::uint8_t> valid;

  bool allowed(const ActionLayout& lay, int element, int c) const { return valid[lay.offsets[element] + c] != 0; }
};

class AmbiguousActionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One choice index per element. Construction rejects out-of-range indices.
class TopoAction {
 public:
  TopoAction() = default;
  TopoAction(const ActionLayout& lay, std::vector<int> choices);

  static TopoAction do_nothing(const ActionLayout& lay);

  const std::vector<int>& choices() const { return choices_; }
  int operator[](int e) const { return choices_[e]; }
  int size() const { return static_cast<int>(choices_.size()); }
  bool operator==(const TopoAction&) const = default;

 private:
  std::vector<int> choices_;
};

enum class ActionClass : std::uint8_t { kLegal, kIllegal, kAmbiguous, kErroneous };

std::string to_string(ActionClass c);
ActionClass action_class_from_string(const std::string& s);

/// True when the element can only take do-nothing in this state.
bool element_locked(const GridSpec& spec, const GridState& state, const ActionLayout& lay, int e);

ActionMask compute_mask(const GridSpec& spec, const GridState& state, const ActionLayout& lay);

struct DecodedAction {
  TopologyDelta delta;
  ActionClass action_class = ActionClass::kLegal;
  std::vector<int> changed_elements;  // elements whose assignment differs
};

DecodedAction decode(const GridSpec& spec, const GridState& state, const ActionLayout& lay, const TopoAction& action);

/// Selectable choice indices per element; do-nothing is always present.
std::vector<std::vector<int>> masked_sample_support(const ActionLayout& lay, const ActionMask& mask);

}  // namespace gridrl
