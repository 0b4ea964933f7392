#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gridrl/chronics.hpp"
#include "gridrl/grid_model.hpp"

namespace gridrl {

/// Held-out chronics of the fixture bundle.
inline constexpr int kHardChronic = 17;  // maintenance DoNothing cannot recover from
inline constexpr int kCalmChronic = 19;
inline constexpr int kFixtureChronics = 20;
inline constexpr std::uint64_t kFixtureSeed = 20240607;

std::vector<int> fixture_train_ids();
std::vector<int> fixture_test_ids();

/// Five substations, a thermal slack unit, one solar unit, three loads and
/// eight lines (one parallel pair). Sized so that every line is near 80%
/// of its rating at the evening peak.
GridSpec case5_grid();

/// Twenty synthetic weeks: daily load and solar shapes with seeded noise,
/// plus maintenance windows on a few chronics.
std::vector<Chronic> case5_chronics(const GridSpec& spec, std::uint64_t seed = kFixtureSeed,
                                    int length = kDefaultChronicLength);

/// Writes `<out>/grid.json` and `<out>/chronics/<id>/*.csv`.
void write_fixture_bundle(const std::filesystem::path& out, std::uint64_t seed = kFixtureSeed);

}  // namespace gridrl
