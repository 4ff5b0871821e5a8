#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctsls {

/// One observation: log follow-up time, event flag, exposure, confounders
/// and instruments.
struct Subject {
  double log_time = 0.0;
  int event = 1;  // 1 = event observed, 0 = right-censored
  double exposure = 0.0;
  std::vector<double> confounders;
  std::vector<double> instruments;
};

/// Validated, immutable collection of subjects stored column-wise.
///
/// Construction enforces: finite values, event in {0,1}, consistent p/q,
/// q >= 1, at least one event, and n >= (1+q+p) + (2+p) so that both
/// regression stages are identifiable. Throws InputError otherwise.
class CensoredSample {
 public:
  CensoredSample(const std::vector<Subject>& subjects, std::size_t p, std::size_t q);

  CensoredSample(Eigen::VectorXd log_time, std::vector<std::uint8_t> event,
                 Eigen::VectorXd exposure, Eigen::MatrixXd confounders,
                 Eigen::MatrixXd instruments);

  std::size_t n() const noexcept { return static_cast<std::size_t>(log_time_.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(confounders_.cols()); }
  std::size_t q() const noexcept { return static_cast<std::size_t>(instruments_.cols()); }

  const Eigen::VectorXd& log_time() const noexcept { return log_time_; }
  const std::vector<std::uint8_t>& event() const noexcept { return event_; }
  const Eigen::VectorXd& exposure() const noexcept { return exposure_; }
  /// n x p
  const Eigen::MatrixXd& confounders() const noexcept { return confounders_; }
  /// n x q
  const Eigen::MatrixXd& instruments() const noexcept { return instruments_; }

  std::span<const double> log_time_span() const noexcept {
    return {log_time_.data(), static_cast<std::size_t>(log_time_.size())};
  }

  Subject subject(std::size_t i) const;

  std::size_t event_count() const noexcept;
  double censored_fraction() const noexcept;

 private:
  void check() const;

  Eigen::VectorXd log_time_;
  std::vector<std::uint8_t> event_;
  Eigen::VectorXd exposure_;
  Eigen::MatrixXd confounders_;
  Eigen::MatrixXd instruments_;
};

/// Binding of CSV header names to sample fields.
///
/// Empty `confounders`/`instruments` mean "discover by header": every
/// column named d1, d2, ... (resp. z1, z2, ...) in numeric order.
struct ColumnSpec {
  std::string time = "time";
  std::string status = "status";
  std::string exposure = "x";
  std::vector<std::string> confounders;
  std::vector<std::string> instruments;
  bool raw_time = false;  // times are on the original scale; take logs on load

  /// Reads a schema JSON object. Unknown keys are rejected.
  static ColumnSpec from_json_file(const std::filesystem::path& path);
  static ColumnSpec from_json_text(const std::string& text);
};

CensoredSample load_csv(const std::filesystem::path& path, const ColumnSpec& schema = {});
CensoredSample parse_csv(const std::string& text, const ColumnSpec& schema = {});

/// Writes the default schema (time,status,x,d1..dp,z1..zq) with 17
/// significant digits. With `raw_time` the time column holds exp(log_time).
void write_csv(const CensoredSample& sample, const std::filesystem::path& path,
               bool raw_time = false);
std::string to_csv(const CensoredSample& sample, bool raw_time = false);

inline constexpr double kHeavyCensoringFraction = 0.75;

/// Non-fatal diagnostics for a sample. Never mutates the sample.
std::vector<std::string> validate(const CensoredSample& sample);

}  // namespace ctsls
