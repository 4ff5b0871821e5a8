#include "ctsls/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ctsls/error.hpp"

namespace ctsls {

namespace {

std::size_t min_sample_size(std::size_t p, std::size_t q) { return (1 + q + p) + (2 + p); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

// Columns named <prefix>1, <prefix>2, ... ordered by their numeric suffix.
std::vector<std::string> discover_indexed(const std::vector<std::string>& header, char prefix) {
  std::vector<std::pair<long, std::string>> found;
  for (const auto& name : header) {
    if (name.size() < 2 || name[0] != prefix) continue;
    const std::string_view digits(name.data() + 1, name.size() - 1);
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    long index = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), index);
    found.emplace_back(index, name);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> names;
  for (auto& [_, name] : found) names.push_back(std::move(name));
  return names;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

CensoredSample::CensoredSample(const std::vector<Subject>& subjects, std::size_t p, std::size_t q) {
  const auto n = subjects.size();
  log_time_.resize(static_cast<Eigen::Index>(n));
  event_.resize(n);
  exposure_.resize(static_cast<Eigen::Index>(n));
  confounders_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  instruments_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = subjects[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (s.event != 0 && s.event != 1)
      throw InputError(fmt::format("status outside {{0,1}} at row {}", i + 1));
    if (s.confounders.size() != p || s.instruments.size() != q)
      throw InputError(fmt::format(
          "subject {} has {} confounders and {} instruments; expected p={} and q={}", i + 1,
          s.confounders.size(), s.instruments.size(), p, q));
    log_time_[row] = s.log_time;
    event_[i] = static_cast<std::uint8_t>(s.event);
    exposure_[row] = s.exposure;
    for (std::size_t k = 0; k < p; ++k)
      confounders_(row, static_cast<Eigen::Index>(k)) = s.confounders[k];
    for (std::size_t k = 0; k < q; ++k)
      instruments_(row, static_cast<Eigen::Index>(k)) = s.instruments[k];
  }
  check();
}

CensoredSample::CensoredSample(Eigen::VectorXd log_time, std::vector<std::uint8_t> event,
                               Eigen::VectorXd exposure, Eigen::MatrixXd confounders,
                               Eigen::MatrixXd instruments)
    : log_time_(std::move(log_time)),
      event_(std::move(event)),
      exposure_(std::move(exposure)),
      confounders_(std::move(confounders)),
      instruments_(std::move(instruments)) {
  const auto n = log_time_.size();
  if (static_cast<Eigen::Index>(event_.size()) != n || exposure_.size() != n ||
      confounders_.rows() != n || instruments_.rows() != n)
    throw InputError("column lengths disagree");
  check();
}

void CensoredSample::check() const {
  const auto n = this->n();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (event_[i] > 1) throw InputError(fmt::format("status outside {{0,1}} at row {}", i + 1));
    const bool finite = std::isfinite(log_time_[row]) && std::isfinite(exposure_[row]) &&
                        confounders_.row(row).allFinite() && instruments_.row(row).allFinite();
    if (!finite) throw InputError(fmt::format("non-finite value at row {}", i + 1));
  }
  if (q() < 1) throw InputError("at least one instrument column is required");
  if (event_count() == 0) throw InputError("zero events");
  if (n < min_sample_size(p(), q()))
    throw InputError(fmt::format("n={} is below the {} subjects needed to identify both stages",
                                 n, min_sample_size(p(), q())));
}

Subject CensoredSample::subject(std::size_t i) const {
  const auto row = static_cast<Eigen::Index>(i);
  Subject s;
  s.log_time = log_time_[row];
  s.event = event_[i];
  s.exposure = exposure_[row];
  s.confounders.assign(confounders_.row(row).begin(), confounders_.row(row).end());
  s.instruments.assign(instruments_.row(row).begin(), instruments_.row(row).end());
  return s;
}

std::size_t CensoredSample::event_count() const noexcept {
  return static_cast<std::size_t>(std::count(event_.begin(), event_.end(), std::uint8_t{1}));
}

double CensoredSample::censored_fraction() const noexcept {
  return n() == 0 ? 0.0 : 1.0 - static_cast<double>(event_count()) / static_cast<double>(n());
}

ColumnSpec ColumnSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(fmt::format("schema JSON: {}", e.what()));
  }
  if (!j.is_object()) throw InputError("schema JSON must be an object");
  ColumnSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "time") spec.time = value.get<std::string>();
      else if (key == "status") spec.status = value.get<std::string>();
      else if (key == "exposure") spec.exposure = value.get<std::string>();
      else if (key == "confounders") spec.confounders = value.get<std::vector<std::string>>();
      else if (key == "instruments") spec.instruments = value.get<std::vector<std::string>>();
      else if (key == "raw_time") spec.raw_time = value.get<bool>();
      else throw InputError(fmt::format("schema JSON: unknown key '{}'", key));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("schema JSON: {}", e.what()));
  }
  return spec;
}

ColumnSpec ColumnSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open schema file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

CensoredSample parse_csv(const std::string& text, const ColumnSpec& schema) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      auto line = rest.substr(0, nl);
      if (!trim(line).empty()) lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw InputError("empty CSV: no header row");

  std::vector<std::string> header;
  for (auto f : split_fields(lines.front())) header.emplace_back(f);
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);

  std::map<std::string, std::size_t> index_of;
  for (std::size_t c = 0; c < header.size(); ++c) index_of.emplace(header[c], c);
  auto column = [&](const std::string& name) {
    const auto it = index_of.find(name);
    if (it == index_of.end()) throw InputError(fmt::format("missing column '{}'", name));
    return it->second;
  };

  const auto confounder_names =
      schema.confounders.empty() ? discover_indexed(header, 'd') : schema.confounders;
  const auto instrument_names =
      schema.instruments.empty() ? discover_indexed(header, 'z') : schema.instruments;
  if (instrument_names.empty()) throw InputError("missing column 'z1' (no instrument columns)");

  const auto time_col = column(schema.time);
  const auto status_col = column(schema.status);
  const auto exposure_col = column(schema.exposure);
  std::vector<std::size_t> d_cols, z_cols;
  for (const auto& name : confounder_names) d_cols.push_back(column(name));
  for (const auto& name : instrument_names) z_cols.push_back(column(name));

  const auto p = d_cols.size();
  const auto q = z_cols.size();
  std::vector<Subject> subjects;
  subjects.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != header.size())
      throw InputError(fmt::format("row {} has {} fields; header has {}", r, fields.size(),
                                   header.size()));
    auto cell = [&](std::size_t c) {
      const auto raw = fields[c];
      if (raw.empty()) throw InputError(fmt::format("missing value at row {}, column '{}'", r, header[c]));
      const auto value = parse_double(raw);
      if (!value)
        throw InputError(fmt::format("non-numeric value '{}' at row {}, column '{}'", raw, r, header[c]));
      if (!std::isfinite(*value))
        throw InputError(fmt::format("non-finite value at row {}, column '{}'", r, header[c]));
      return *value;
    };

    Subject s;
    const double status = cell(status_col);
    if (status != 0.0 && status != 1.0)
      throw InputError(fmt::format("status outside {{0,1}} at row {}", r));
    s.event = static_cast<int>(status);
    const double t = cell(time_col);
    if (schema.raw_time) {
      if (t <= 0.0) throw InputError(fmt::format("non-positive raw time at row {}", r));
      s.log_time = std::log(t);
    } else {
      s.log_time = t;
    }
    s.exposure = cell(exposure_col);
    for (auto c : d_cols) s.confounders.push_back(cell(c));
    for (auto c : z_cols) s.instruments.push_back(cell(c));
    subjects.push_back(std::move(s));
  }
  if (std::none_of(subjects.begin(), subjects.end(), [](const Subject& s) { return s.event == 1; }))
    throw InputError("zero events");
  return CensoredSample(subjects, p, q);
}

CensoredSample load_csv(const std::filesystem::path& path, const ColumnSpec& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema);
}

std::string to_csv(const CensoredSample& sample, bool raw_time) {
  std::string out = "time,status,x";
  for (std::size_t k = 1; k <= sample.p(); ++k) out += fmt::format(",d{}", k);
  for (std::size_t k = 1; k <= sample.q(); ++k) out += fmt::format(",z{}", k);
  out += '\n';
  for (std::size_t i = 0; i < sample.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double t = raw_time ? std::exp(sample.log_time()[row]) : sample.log_time()[row];
    out += format_double(t);
    out += sample.event()[i] ? ",1," : ",0,";
    out += format_double(sample.exposure()[row]);
    for (Eigen::Index k = 0; k < sample.confounders().cols(); ++k)
      out += "," + format_double(sample.confounders()(row, k));
    for (Eigen::Index k = 0; k < sample.instruments().cols(); ++k)
      out += "," + format_double(sample.instruments()(row, k));
    out += '\n';
  }
  return out;
}

void write_csv(const CensoredSample& sample, const std::filesystem::path& path, bool raw_time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out << to_csv(sample, raw_time);
  if (!out) throw InputError(fmt::format("write failed for {}", path.string()));
}

std::vector<std::string> validate(const CensoredSample& sample) {
  std::vector<std::string> warnings;
  const auto& t = sample.log_time();
  const double t_max = t.maxCoeff();
  bool event_at_max = false;
  for (std::size_t i = 0; i < sample.n(); ++i)
    if (t[static_cast<Eigen::Index>(i)] == t_max && sample.event()[i]) event_at_max = true;
  if (!event_at_max)
    warnings.emplace_back(
        "improper censoring-distribution tail: the largest observation is censored; "
        "synthetic-outcome integrals are truncated at the largest event time");

  const double cf = sample.censored_fraction();
  if (cf > kHeavyCensoringFraction)
    warnings.push_back(fmt::format(
        "heavy censoring: censored fraction {:.3f} exceeds {:.2f}; finite-sample performance "
        "may deteriorate",
        cf, kHeavyCensoringFraction));

  const auto n = static_cast<Eigen::Index>(sample.n());
  Eigen::MatrixXd design(n, 1 + sample.q() + sample.p());
  design.col(0).setOnes();
  design.middleCols(1, sample.q()) = sample.instruments();
  design.rightCols(sample.p()) = sample.confounders();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    warnings.push_back(fmt::format("first-stage design [1, Z, D] is rank deficient (rank {} of {})",
                                   qr.rank(), design.cols()));
  return warnings;
}

}  // namespace ctsls
