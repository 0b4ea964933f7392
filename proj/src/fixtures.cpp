#include "gridrl/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace gridrl {

namespace {

struct ChronicPlan {
  double peak;       // MW of total demand at the daily maximum
  double solar_cap;  // MW of solar at clear-sky noon
  std::vector<Maintenance> maintenance;
};

// Line 1 (sub 0 -> sub 2) is the critical corridor: losing it at night is
// harmless, losing it at the evening peak overloads three other lines.
constexpr int kCriticalLine = 1;

ChronicPlan plan_for(int id) {
  ChronicPlan p{280.0 + 4.0 * (id % 5), 60.0 + 15.0 * (id % 4), {}};
  auto night_window = [](int day) { return Maintenance{kCriticalLine, day * kStepsPerDay + 24, 36}; };
  switch (id) {
    case 2:
      p.maintenance = {night_window(1)};
      break;
    case 5:
      p.maintenance = {night_window(3)};
      break;
    case 8:
      p.maintenance = {night_window(0), night_window(4)};
      break;
    case 11:
      p.maintenance = {night_window(2), night_window(5)};
      break;
    case 14:
      p.maintenance = {night_window(1), {0, 4 * kStepsPerDay + 30, 24}};
      break;
    case 4:
      p.maintenance = {{6, kStepsPerDay + 100, 48}};
      break;
    case 9:
      p.maintenance = {{0, 2 * kStepsPerDay + 20, 30}};
      break;
    case kHardChronic:
      p.maintenance = {night_window(1)};
      break;
    case kCalmChronic:
      p.peak = 255.0;
      p.solar_cap = 50.0;
      break;
    default:
      break;
  }
  return p;
}

// Demand shape in [0.6, 1]: minimum at 05:00, maximum at 17:00.
double demand_shape(double hour) {
  return 0.6 + 0.4 * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (hour - 5.0) / 24.0));
}

double solar_shape(double hour) {
  if (hour < 6.0 || hour > 18.0) return 0.0;
  return std::sin(std::numbers::pi * (hour - 6.0) / 12.0);
}

}  // namespace

std::vector<int> fixture_train_ids() {
  std::vector<int> ids;
  for (int i = 0; i < kFixtureChronics; ++i) {
    if (i != kHardChronic && i != kCalmChronic) ids.push_back(i);
  }
  return ids;
}

std::vector<int> fixture_test_ids() { return {kHardChronic, kCalmChronic}; }

GridSpec case5_grid() {
  GridSpec spec;
  for (int s = 0; s < 5; ++s) spec.substations.push_back({"sub_" + std::to_string(s)});
  Generator thermal;
  thermal.id = "gen_0_thermal";
  thermal.substation_id = "sub_0";
  thermal.p_min = 0.0;
  thermal.p_max = 400.0;
  thermal.max_ramp_up = 50.0;
  thermal.max_ramp_down = 50.0;
  thermal.min_uptime = 12;
  thermal.min_downtime = 12;
  thermal.cost_per_mw = 45.0;
  thermal.startup_cost = 100.0;
  thermal.shutdown_cost = 20.0;
  thermal.gen_type = GenType::kThermal;
  Generator solar;
  solar.id = "gen_1_solar";
  solar.substation_id = "sub_1";
  solar.p_min = 0.0;
  solar.p_max = 150.0;
  solar.max_ramp_up = 150.0;
  solar.max_ramp_down = 150.0;
  solar.cost_per_mw = 0.0;
  solar.gen_type = GenType::kSolar;
  spec.generators = {thermal, solar};
  spec.loads = {{"load_2", "sub_2"}, {"load_3", "sub_3"}, {"load_4", "sub_4"}};

  struct Row {
    const char* id;
    int from;
    int to;
    double x;
    double limit;
  };
  const Row rows[] = {{"line_0_1", 0, 1, 0.06, 100.0}, {"line_0_2", 0, 2, 0.05, 160.0},
                      {"line_0_3", 0, 3, 0.08, 125.0}, {"line_1_2", 1, 2, 0.06, 70.0},
                      {"line_1_4", 1, 4, 0.07, 85.0},  {"line_2_3", 2, 3, 0.05, 40.0},
                      {"line_3_4_a", 3, 4, 0.08, 15.0}, {"line_3_4_b", 3, 4, 0.08, 15.0}};
  for (const auto& r : rows) {
    Line l;
    l.id = r.id;
    l.from_substation_id = "sub_" + std::to_string(r.from);
    l.to_substation_id = "sub_" + std::to_string(r.to);
    l.reactance = r.x;
    l.resistance = r.x / 5.0;
    l.thermal_limit = r.limit;
    spec.lines.push_back(l);
  }
  spec.slack_generator = thermal.id;
  spec.base_power = 100.0;
  resolve(spec);
  return spec;
}

std::vector<Chronic> case5_chronics(const GridSpec& spec, std::uint64_t seed, int length) {
  const double share[] = {0.40, 0.35, 0.25};
  const double phase[] = {0.0, 0.5, -0.5};  // hours
  std::vector<Chronic> out;
  for (int id = 0; id < kFixtureChronics; ++id) {
    std::mt19937_64 rng(seed + 7919ULL * static_cast<std::uint64_t>(id));
    std::normal_distribution<double> noise(0.0, 1.0);
    const ChronicPlan plan = plan_for(id);
    Chronic c;
    c.id = id;
    c.gen_p = Eigen::MatrixXd::Zero(length, spec.n_gen());
    c.load_p = Eigen::MatrixXd::Zero(length, spec.n_load());
    c.price = Eigen::VectorXd::Zero(length);
    c.maintenance = plan.maintenance;
    for (auto& m : c.maintenance) m.duration = std::min(m.duration, length - m.start);

    std::vector<double> drift(spec.n_load(), 0.0);
    double cloud = 0.0;
    double day_scale = 1.0;
    for (int t = 0; t < length; ++t) {
      const int day = t / kStepsPerDay;
      const double hour = static_cast<double>(t % kStepsPerDay) / 12.0;
      if (t % kStepsPerDay == 0) day_scale = (day % 7 >= 5 ? 0.9 : 1.0) * (1.0 + 0.015 * noise(rng));
      double total = 0.0;
      for (int d = 0; d < spec.n_load(); ++d) {
        drift[d] = 0.98 * drift[d] + 0.004 * noise(rng);
        const double p = plan.peak * share[d] * day_scale * demand_shape(hour + phase[d]) * (1.0 + drift[d]);
        c.load_p(t, d) = std::max(0.0, p);
        total += c.load_p(t, d);
      }
      cloud = std::clamp(0.97 * cloud + 0.03 * noise(rng), -0.5, 0.5);
      const double sun = plan.solar_cap * solar_shape(hour) * (0.8 + 0.4 * cloud);
      c.gen_p(t, 1) = std::clamp(sun, 0.0, spec.generators[1].p_max);
      c.gen_p(t, 0) = std::clamp(total - c.gen_p(t, 1), 0.0, spec.generators[0].p_max);
      c.price(t) = 25.0 + 30.0 * demand_shape(hour) + std::abs(2.0 * noise(rng));
    }
    out.push_back(std::move(c));
  }
  return out;
}

void write_fixture_bundle(const std::filesystem::path& out, std::uint64_t seed) {
  const GridSpec spec = case5_grid();
  std::filesystem::create_directories(out / "chronics");
  {
    std::ofstream os(out / "grid.json");
    os << grid_spec_to_json(spec) << "\n";
  }
  for (const auto& c : case5_chronics(spec, seed)) write_chronic(out / "chronics" / std::to_string(c.id), spec, c);
}

}  // namespace gridrl
