#include "gridrl/chronics.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gridrl {

namespace {

using Kind = ChronicError::Kind;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::string& file, int row, int col) {
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ChronicError(Kind::kNonNumeric, file + ": non-numeric cell '" + cell + "' at row " +
                                              std::to_string(row) + ", column " + std::to_string(col));
  }
  return value;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

RawTable read_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ChronicError(Kind::kMissingFile, "missing file " + path.string());
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) throw ChronicError(Kind::kShape, path.string() + ": empty file");
  t.header = split_csv(line);
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv(line);
    if (cells.size() != t.header.size()) {
      throw ChronicError(Kind::kShape, path.string() + ": row " + std::to_string(row) + " has " +
                                           std::to_string(cells.size()) + " cells, header has " +
                                           std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table read_table(const std::filesystem::path& path) {
  RawTable raw = read_raw(path);
  Table t{std::move(raw.header), {}};
  t.rows.reserve(raw.rows.size());
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    std::vector<double> values(raw.rows[r].size());
    for (std::size_t c = 0; c < values.size(); ++c) {
      values[c] = parse_cell(raw.rows[r][c], path.filename().string(), static_cast<int>(r + 1), static_cast<int>(c));
    }
    t.rows.push_back(std::move(values));
  }
  return t;
}

// Maps header columns to element positions; every element must appear once.
template <typename IndexFn>
std::vector<int> bind_header(const Table& t, int n_elements, IndexFn index_of, const std::string& file) {
  if (static_cast<int>(t.header.size()) != n_elements) {
    throw ChronicError(Kind::kHeaderMismatch, file + ": header has " + std::to_string(t.header.size()) +
                                                  " columns, grid has " + std::to_string(n_elements) + " elements");
  }
  std::vector<int> column_of(n_elements, -1);
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const int idx = index_of(t.header[c]);
    if (idx < 0) throw ChronicError(Kind::kHeaderMismatch, file + ": unknown element id '" + t.header[c] + "'");
    if (column_of[idx] >= 0) throw ChronicError(Kind::kHeaderMismatch, file + ": duplicate id '" + t.header[c] + "'");
    column_of[idx] = static_cast<int>(c);
  }
  return column_of;
}

Eigen::MatrixXd to_matrix(const Table& t, const std::vector<int>& column_of) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(column_of.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t e = 0; e < column_of.size(); ++e) m(r, e) = t.rows[r][column_of[e]];
  }
  return m;
}

}  // namespace

std::vector<std::string> chronic_violations(const GridSpec& spec, const Chronic& c) {
  std::vector<std::string> out;
  if (c.gen_p.cols() != spec.n_gen()) out.push_back("gen_p width does not match generator count");
  if (c.load_p.cols() != spec.n_load()) out.push_back("load_p width does not match load count");
  if (c.gen_p.rows() != c.length() || c.load_p.rows() != c.length()) out.push_back("series lengths differ");
  if (!out.empty()) return out;
  for (int t = 0; t < c.length(); ++t) {
    for (int g = 0; g < spec.n_gen(); ++g) {
      if (!(c.gen_p(t, g) >= 0.0 && c.gen_p(t, g) <= spec.generators[g].p_max)) {
        out.push_back("gen_p out of [0, p_max] at row " + std::to_string(t + 1) + ", generator " +
                      spec.generators[g].id);
      }
    }
    for (int d = 0; d < spec.n_load(); ++d) {
      if (!(c.load_p(t, d) >= 0.0)) {
        out.push_back("negative load at row " + std::to_string(t + 1) + ", load " + spec.loads[d].id);
      }
    }
    if (!(c.price(t) > 0.0)) out.push_back("nonpositive price at row " + std::to_string(t + 1));
  }
  for (const auto& m : c.maintenance) {
    if (m.line < 0 || m.line >= spec.n_line() || m.start < 0 || m.duration <= 0) {
      out.push_back("malformed maintenance entry");
    }
  }
  return out;
}

Chronic load_chronic(const std::filesystem::path& dir, const GridSpec& spec, int id) {
  Chronic c;
  c.id = id;
  const Table prod = read_table(dir / "prod_p.csv");
  const Table load = read_table(dir / "load_p.csv");
  const Table prices = read_table(dir / "prices.csv");

  c.gen_p = to_matrix(prod, bind_header(prod, spec.n_gen(), [&](const std::string& s) { return spec.generator_index(s); },
                                        "prod_p.csv"));
  c.load_p = to_matrix(load, bind_header(load, spec.n_load(), [&](const std::string& s) { return spec.load_index(s); },
                                         "load_p.csv"));
  if (prices.header.size() != 1 || prices.header[0] != "price") {
    throw ChronicError(Kind::kHeaderMismatch, "prices.csv: expected single column 'price'");
  }
  c.price.resize(static_cast<Eigen::Index>(prices.rows.size()));
  for (std::size_t r = 0; r < prices.rows.size(); ++r) c.price(r) = prices.rows[r][0];

  for (Eigen::Index r = 0; r < c.load_p.rows(); ++r) {
    for (Eigen::Index d = 0; d < c.load_p.cols(); ++d) {
      if (c.load_p(r, d) < 0.0) {
        throw ChronicError(Kind::kNegativeLoad, "load_p.csv: negative load " + std::to_string(c.load_p(r, d)) +
                                                    " at row " + std::to_string(r + 1) + ", column " +
                                                    spec.loads[d].id);
      }
    }
  }
  if (c.gen_p.rows() != c.load_p.rows() || c.gen_p.rows() != c.price.size()) {
    throw ChronicError(Kind::kShape, "prod_p.csv, load_p.csv and prices.csv have different row counts");
  }

  const auto maint_path = dir / "maintenance.csv";
  if (std::filesystem::exists(maint_path)) {
    const RawTable m = read_raw(maint_path);
    if (m.header != std::vector<std::string>{"line_id", "start", "duration"}) {
      throw ChronicError(Kind::kHeaderMismatch, "maintenance.csv: expected columns line_id,start,duration");
    }
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      const auto& cells = m.rows[r];
      const int l = spec.line_index(cells[0]);
      if (l < 0) throw ChronicError(Kind::kHeaderMismatch, "maintenance.csv: unknown line id '" + cells[0] + "'");
      const int row = static_cast<int>(r + 1);
      c.maintenance.push_back({l, static_cast<int>(parse_cell(cells[1], "maintenance.csv", row, 1)),
                               static_cast<int>(parse_cell(cells[2], "maintenance.csv", row, 2))});
    }
  }

  const auto issues = chronic_violations(spec, c);
  if (!issues.empty()) throw ChronicError(Kind::kOutOfBounds, dir.string() + ": " + issues.front());
  return c;
}

void write_chronic(const std::filesystem::path& dir, const GridSpec& spec, const Chronic& c) {
  std::filesystem::create_directories(dir);
  auto write_matrix = [](const std::filesystem::path& path, const std::vector<std::string>& header,
                         const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n" << std::setprecision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) out << (k ? "," : "") << m(r, k);
      out << "\n";
    }
  };
  std::vector<std::string> gen_ids, load_ids;
  for (const auto& g : spec.generators) gen_ids.push_back(g.id);
  for (const auto& l : spec.loads) load_ids.push_back(l.id);
  write_matrix(dir / "prod_p.csv", gen_ids, c.gen_p);
  write_matrix(dir / "load_p.csv", load_ids, c.load_p);
  write_matrix(dir / "prices.csv", {"price"}, c.price);
  const auto maint = dir / "maintenance.csv";
  if (!c.maintenance.empty()) {
    std::ofstream out(maint);
    out << "line_id,start,duration\n";
    for (const auto& m : c.maintenance) out << spec.lines[m.line].id << "," << m.start << "," << m.duration << "\n";
  } else if (std::filesystem::exists(maint)) {
    std::filesystem::remove(maint);
  }
}

std::vector<std::shared_ptr<const Chronic>> load_chronics(const std::filesystem::path& root, const GridSpec& spec,
                                                          const std::vector<int>& ids) {
  std::vector<std::shared_ptr<const Chronic>> out;
  for (int id : ids) out.push_back(std::make_shared<const Chronic>(load_chronic(root / std::to_string(id), spec, id)));
  return out;
}

ChronicView::ChronicView(std::shared_ptr<const Chronic> chronic, int offset, int horizon)
    : chronic_(std::move(chronic)), offset_(offset), horizon_(horizon) {
  if (!chronic_) throw RangeError("null chronic");
  if (offset_ < 0 || horizon_ <= 0 || offset_ + horizon_ > chronic_->length()) {
    throw RangeError("window [" + std::to_string(offset_) + ", " + std::to_string(offset_ + horizon_) +
                     ") exceeds chronic length " + std::to_string(chronic_->length()));
  }
}

std::vector<Maintenance> ChronicView::maintenance() const {
  std::vector<Maintenance> out;
  for (const auto& m : chronic_->maintenance) {
    const int start = m.start - offset_;
    const int end = start + m.duration;
    if (end <= 0 || start >= horizon_) continue;
    out.push_back({m.line, start, m.duration});
  }
  return out;
}

ChronicView slice(std::shared_ptr<const Chronic> chronic, const Scenario& scenario) {
  if (scenario.start_offset_days < 0 || scenario.start_offset_days > kMaxStartOffsetDays) {
    throw RangeError("start offset " + std::to_string(scenario.start_offset_days) + " days out of range");
  }
  return ChronicView(std::move(chronic), scenario.start_offset_days * kStepsPerDay, scenario.horizon);
}

ChronicView full_view(std::shared_ptr<const Chronic> chronic) {
  const int length = chronic->length();
  return ChronicView(std::move(chronic), 0, length);
}

Scenario sample_scenario(std::mt19937_64& rng, const std::vector<int>& train_chronics, int horizon) {
  if (train_chronics.empty()) throw ConfigurationError("no training chronics to sample from");
  const auto n = static_cast<std::uint64_t>(train_chronics.size()) * (kMaxStartOffsetDays + 1);
  std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
  const auto k = pick(rng);
  return Scenario{train_chronics[k / (kMaxStartOffsetDays + 1)], static_cast<int>(k % (kMaxStartOffsetDays + 1)),
                  horizon};
}

}  // namespace gridrl
