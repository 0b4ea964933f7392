#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridrl/grid_model.hpp"

namespace gridrl {

inline constexpr int kStepsPerDay = 288;
inline constexpr int kDefaultChronicLength = 2016;
inline constexpr int kDefaultHorizon = 864;
inline constexpr int kMaxStartOffsetDays = 4;

class ChronicError : public std::runtime_error {
 public:
  enum class Kind { kMissingFile, kHeaderMismatch, kNonNumeric, kNegativeLoad, kShape, kOutOfBounds };
  ChronicError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Maintenance {
  int line = -1;
  int start = 0;  // chronic step
  int duration = 0;
};

/// Generation, load and price series for one scenario family. Rows are
/// 5-minute steps; columns follow GridSpec element order.
struct Chronic {
  int id = 0;
  int step_minutes = 5;
  Eigen::MatrixXd gen_p;   // length x n_gen, MW
  Eigen::MatrixXd load_p;  // length x n_load, MW
  Eigen::VectorXd price;   // length, currency/MWh
  std::vector<Maintenance> maintenance;

  int length() const { return static_cast<int>(price.size()); }
};

std::vector<std::string> chronic_violations(const GridSpec& spec, const Chronic& chronic);

/// Reads `prod_p.csv`, `load_p.csv`, `prices.csv` and the optional
/// `maintenance.csv` from `dir`. Columns are bound to the grid spec by header id.
Chronic load_chronic(const std::filesystem::path& dir, const GridSpec& spec, int id = 0);

void write_chronic(const std::filesystem::path& dir, const GridSpec& spec, const Chronic& chronic);

/// `<root>/<id>` for each id, loaded in the given order.
std::vector<std::shared_ptr<const Chronic>> load_chronics(const std::filesystem::path& root, const GridSpec& spec,
                                                          const std::vector<int>& ids);

struct Scenario {
  int chronic_id = 0;
  int start_offset_days = 0;
  int horizon = kDefaultHorizon;

  bool operator==(const Scenario&) const = default;
};

/// Read-only window over a chronic. Step t of the view is step offset + t
/// of the chronic.
class ChronicView {
 public:
  ChronicView() = default;
  ChronicView(std::shared_ptr<const Chronic> chronic, int offset, int horizon);

  int offset() const { return offset_; }
  int horizon() const { return horizon_; }
  const Chronic& chronic() const { return *chronic_; }
  bool empty() const { return chronic_ == nullptr; }

  Eigen::VectorXd gen_p(int t) const { return chronic_->gen_p.row(offset_ + t).transpose(); }
  Eigen::VectorXd load_p(int t) const { return chronic_->load_p.row(offset_ + t).transpose(); }
  double price(int t) const { return chronic_->price(offset_ + t); }

  /// Maintenance windows re-expressed in view steps; windows that end
  /// before the view starts are dropped.
  std::vector<Maintenance> maintenance() const;

 private:
  std::shared_ptr<const Chronic> chronic_;
  int offset_ = 0;
  int horizon_ = 0;
};

ChronicView slice(std::shared_ptr<const Chronic> chronic, const Scenario& scenario);

/// The whole chronic as one view.
ChronicView full_view(std::shared_ptr<const Chronic> chronic);

/// Uniform over (chronic, start offset) pairs.
Scenario sample_scenario(std::mt19937_64& rng, const std::vector<int>& train_chronics,
                         int horizon = kDefaultHorizon);

}  // namespace gridrl
