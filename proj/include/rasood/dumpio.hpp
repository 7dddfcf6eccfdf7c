#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rasood/analysis.hpp"
#include "rasood/core.hpp"
#include "rasood/enhancers.hpp"
#include "rasood/metrics.hpp"
#include "rasood/scorers.hpp"
#include "rasood/synthlab.hpp"

namespace rasood::io {

// OODA v1 layout, all integers little-endian:
//   magic "OODA" | u32 version | u32 n_samples | u32 n_dims | u8 flags
//   f32 payload, row-major, n_samples * n_dims
//   u32 labels, n_samples        (flags bit0)
//   u8 tag                       (flags bit1)
inline constexpr std::array<char, 4> kMagic = {'O', 'O', 'D', 'A'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 17;
inline constexpr std::uint8_t kFlagLabels = 0x1;
inline constexpr std::uint8_t kFlagTag = 0x2;

struct DumpHeader {
  std::array<char, 4> magic = kMagic;
  std::uint32_t version = kVersion;
  std::uint32_t n_samples = 0;
  std::uint32_t n_dims = 0;
  std::uint8_t flags = 0;
};

/// Writes the tag byte unless write_tag is false.
void write_activation_set(const ActivationSet& set, const std::filesystem::path& path, bool write_tag = true);
ActivationSet read_activation_set(const std::filesystem::path& path);

/// Bytes the dump of `set` will occupy.
std::uint64_t dump_size(const ActivationSet& set, bool write_tag = true);

/// Rectangular numeric CSV, no header, ',' delimiter.
std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path);
ActivationSet read_csv_activation_set(const std::filesystem::path& path, DistTag tag = DistTag::IdTrain);

/// C rows of D weights, then one row of C biases.
LinearHead read_linear_head(const std::filesystem::path& path);
void write_linear_head(const LinearHead& head, std::ostream& out);
void write_linear_head(const LinearHead& head, const std::filesystem::path& path);

/// Profile = 1 x D dump of mu plus "<path>.count" holding count and checksum.
void write_profile(const ReferenceProfile& profile, const std::filesystem::path& path);
ReferenceProfile read_profile(const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

void write_scores_csv(const ScoreSet& s, std::ostream& out);
void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out);
void write_metrics_markdown(const std::vector<MetricRow>& rows, std::ostream& out);
void write_gamma_csv(const GammaCurve& curve, std::ostream& out);
void write_residuals_csv(const ResidualProfile& profile, std::ostream& out);

/// Layer blocks as "# layer <activation>" followed by head-format CSV rows,
/// then "# head" and the classifier block.
void write_toy_network(const ToyNetwork& net, const std::filesystem::path& path);
ToyNetwork read_toy_network(const std::filesystem::path& path);

/// Flat key=value text; '#' starts a comment; blank lines ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct NamedParams {
  std::string name;
  std::map<std::string, std::string> params;
};

struct ExperimentConfig {
  NamedParams enhancer{"identity", {}};
  NamedParams scorer{"ebo", {}};
  std::vector<std::uint64_t> layer_targets;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> paths;  // id, ood, head, profile, train, out
};

/// Recognized keys: enhancer, scorer, layer_targets, seeds, path.<name>,
/// and per-method parameters (percentile_p, temperature, gen_gamma,
/// gen_top_m, mds_ridge, vim_dim, l2_target). Throws ConfigError naming the
/// offending key.
ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);

/// key=value lines describing an enhancer spec (profile stays external).
void write_enhancer_config(const EnhancerSpec& spec, std::ostream& out);

}  // namespace rasood::io
