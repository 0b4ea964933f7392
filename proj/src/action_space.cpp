#include "gridrl/action_space.hpp"

namespace gridrl {

namespace {

constexpr int kGenDims = 4;
constexpr int kLoadDims = 3;
constexpr int kLineDims = 6;

BusAssignment bus_of(int busbar) { return busbar == 1 ? BusAssignment::kBusbar1 : BusAssignment::kBusbar2; }

}  // namespace

ElementClass ActionLayout::element_class(int e) const {
  if (e < n_gen) return ElementClass::kGenerator;
  if (e < n_gen + n_load) return ElementClass::kLoad;
  return ElementClass::kLine;
}

int ActionLayout::class_index(int e) const {
  if (e < n_gen) return e;
  if (e < n_gen + n_load) return e - n_gen;
  return e - n_gen - n_load;
}

ActionLayout layout(const GridSpec& spec) {
  ActionLayout lay;
  lay.n_gen = spec.n_gen();
  lay.n_load = spec.n_load();
  lay.n_line = spec.n_line();
  auto push = [&](int dim, int noop) {
    lay.offsets.push_back(lay.dims.empty() ? 0 : lay.offsets.back() + lay.dims.back());
    lay.dims.push_back(dim);
    lay.do_nothing.push_back(noop);
  };
  for (int g = 0; g < lay.n_gen; ++g) push(kGenDims, choice::kGenDoNothing);
  for (int d = 0; d < lay.n_load; ++d) push(kLoadDims, choice::kLoadDoNothing);
  for (int l = 0; l < lay.n_line; ++l) push(kLineDims, choice::kLineDoNothing);
  return lay;
}

TopoAction::TopoAction(const ActionLayout& lay, std::vector<int> choices) : choices_(std::move(choices)) {
  if (static_cast<int>(choices_.size()) != lay.n_elements()) {
    throw AmbiguousActionError("action has " + std::to_string(choices_.size()) + " entries, layout has " +
                               std::to_string(lay.n_elements()));
  }
  for (int e = 0; e < lay.n_elements(); ++e) {
    if (choices_[e] < 0 || choices_[e] >= lay.dims[e]) {
      throw AmbiguousActionError("choice " + std::to_string(choices_[e]) + " out of range for element " +
                                 std::to_string(e));
    }
  }
}

TopoAction TopoAction::do_nothing(const ActionLayout& lay) { return TopoAction(lay, lay.do_nothing); }

std::string to_string(ActionClass c) {
  switch (c) {
    case ActionClass::kLegal: return "legal";
    case ActionClass::kIllegal: return "illegal";
    case ActionClass::kAmbiguous: return "ambiguous";
    case ActionClass::kErroneous: return "erroneous";
  }
  return "unknown";
}

ActionClass action_class_from_string(const std::string& s) {
  if (s == "legal") return ActionClass::kLegal;
  if (s == "illegal") return ActionClass::kIllegal;
  if (s == "ambiguous") return ActionClass::kAmbiguous;
  if (s == "erroneous") return ActionClass::kErroneous;
  throw std::invalid_argument("unknown action class '" + s + "'");
}

bool element_locked(const GridSpec& spec, const GridState& state, const ActionLayout& lay, int e) {
  const int i = lay.class_index(e);
  switch (lay.element_class(e)) {
    case ElementClass::kGenerator:
      return state.sub_cooldown[spec.generators[i].substation] > 0;
    case ElementClass::kLoad:
      return state.sub_cooldown[spec.loads[i].substation] > 0;
    case ElementClass::kLine:
      return state.line_cooldown[i] > 0 || state.reconnection_timer[i] > 0 || state.attack_timer[i] > 0 ||
             state.maintenance_remaining[i] > 0 || state.sub_cooldown[spec.lines[i].from] > 0 ||
             state.sub_cooldown[spec.lines[i].to] > 0;
  }
  return true;
}

ActionMask compute_mask(const GridSpec& spec, const GridState& state, const ActionLayout& lay) {
  check_consistent(spec, state);
  ActionMask mask;
  mask.valid.assign(lay.total(), 1);
  for (int e = 0; e < lay.n_elements(); ++e) {
    if (!element_locked(spec, state, lay, e)) continue;
    for (int c = 0; c < lay.dims[e]; ++c) mask.valid[lay.offsets[e] + c] = c == lay.do_nothing[e] ? 1 : 0;
  }
  return mask;
}

DecodedAction decode(const GridSpec& spec, const GridState& state, const ActionLayout& lay, const TopoAction& action) {
  check_consistent(spec, state);
  if (action.size() != lay.n_elements()) throw AmbiguousActionError("action does not match layout");
  DecodedAction out;
  for (int e = 0; e < lay.n_elements(); ++e) {
    const int c = action[e];
    const int i = lay.class_index(e);
    const std::size_t before = out.delta.size();
    auto change = [&](ElementKind kind, BusAssignment from, BusAssignment to) {
      if (from != to) out.delta.push_back({kind, i, from, to});
    };
    switch (lay.element_class(e)) {
      case ElementClass::kGenerator: {
        const BusAssignment cur = state.gen_assignment[i];
        if (c == choice::kGenDisconnect) change(ElementKind::kGenerator, cur, BusAssignment::kDisconnected);
        if (c == choice::kGenBusbar1) change(ElementKind::kGenerator, cur, BusAssignment::kBusbar1);
        if (c == choice::kGenBusbar2) change(ElementKind::kGenerator, cur, BusAssignment::kBusbar2);
        break;
      }
      case ElementClass::kLoad: {
        const BusAssignment cur = state.load_assignment[i];
        if (c == choice::kLoadBusbar1) change(ElementKind::kLoad, cur, BusAssignment::kBusbar1);
        if (c == choice::kLoadBusbar2) change(ElementKind::kLoad, cur, BusAssignment::kBusbar2);
        break;
      }
      case ElementClass::kLine: {
        const LineAssignment cur = state.line_assignment[i];
        if (c == choice::kLineDoNothing) break;
        LineAssignment target{BusAssignment::kDisconnected, BusAssignment::kDisconnected};
        if (c >= choice::kLineBus11) {
          const int k = c - choice::kLineBus11;  // 0:(1,1) 1:(1,2) 2:(2,1) 3:(2,2)
          target = {bus_of(k / 2 + 1), bus_of(k % 2 + 1)};
        }
        change(ElementKind::kLineOrigin, cur.origin, target.origin);
        change(ElementKind::kLineExtremity, cur.extremity, target.extremity);
        break;
      }
    }
    if (out.delta.size() != before) {
      out.changed_elements.push_back(e);
      if (element_locked(spec, state, lay, e)) out.action_class = ActionClass::kIllegal;
    }
  }
  return out;
}

std::vector<std::vector<int>> masked_sample_support(const ActionLayout& lay, const ActionMask& mask) {
  std::vector<std::vector<int>> support(lay.n_elements());
  for (int e = 0; e < lay.n_elements(); ++e) {
    for (int c = 0; c < lay.dims[e]; ++c) {
      if (mask.allowed(lay, e, c) || c == lay.do_nothing[e]) support[e].push_back(c);
    }
  }
  return support;
}

}  // namespace gridrl
