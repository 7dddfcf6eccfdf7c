#include "rasood/dumpio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rasood::io {

namespace {

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) buf.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read error on '" + path.string() + "'");
  return bytes;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, std::size_t line, std::size_t column) {
  const auto text = trim(cell);
  double v = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                                               ": '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::vector<double>> parse_csv(std::istream& in, bool allow_ragged) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    std::size_t column = 1;
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_cell(rest.substr(0, comma), line_no, column++));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!allow_ragged && !rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::RaggedRows, "line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                                             " cells, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

LinearHead head_from_rows(const std::vector<std::vector<double>>& rows, const std::string& where) {
  if (rows.size() < 3) throw Error(ErrorCode::RaggedRows, where + ": head needs >= 2 weight rows plus a bias row");
  const std::size_t classes = rows.size() - 1;
  const std::size_t dim = rows.front().size();
  Matrix weights(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    if (rows[c].size() != dim) throw Error(ErrorCode::RaggedRows, where + ": weight row " + std::to_string(c));
    std::copy(rows[c].begin(), rows[c].end(), weights.row(c).begin());
  }
  if (rows.back().size() != classes) {
    throw Error(ErrorCode::RaggedRows, where + ": bias row has " + std::to_string(rows.back().size()) +
                                           " entries, expected " + std::to_string(classes));
  }
  return LinearHead(std::move(weights), rows.back());
}

void write_row(std::ostream& out, std::span<const double> row) {
  for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
  out << '\n';
}

}  // namespace

std::uint64_t dump_size(const ActivationSet& set, bool write_tag) {
  std::uint64_t bytes = kHeaderBytes + static_cast<std::uint64_t>(set.size()) * set.dim() * 4;
  if (set.has_labels()) bytes += 4ULL * set.size();
  if (write_tag) bytes += 1;
  return bytes;
}

void write_activation_set(const ActivationSet& set, const std::filesystem::path& path, bool write_tag) {
  constexpr auto kU32Max = std::numeric_limits<std::uint32_t>::max();
  if (set.size() > kU32Max || set.dim() > kU32Max ||
      static_cast<unsigned __int128>(set.size()) * set.dim() * 4 > std::numeric_limits<std::size_t>::max()) {
    throw Error(ErrorCode::DimensionOverflow, "set too large for the v1 dump format");
  }
  std::vector<unsigned char> buf;
  buf.reserve(dump_size(set, write_tag));
  buf.insert(buf.end(), kMagic.begin(), kMagic.end());
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(set.size()));
  put_u32(buf, static_cast<std::uint32_t>(set.dim()));
  std::uint8_t flags = 0;
  if (set.has_labels()) flags |= kFlagLabels;
  if (write_tag) flags |= kFlagTag;
  buf.push_back(flags);
  for (double v : set.data().values()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFiniteInput, "value " + format_double(v) + " overflows float32");
    put_u32(buf, std::bit_cast<std::uint32_t>(f));
  }
  if (set.has_labels())
    for (std::uint32_t label : set.labels()) put_u32(buf, label);
  if (write_tag) buf.push_back(static_cast<unsigned char>(set.tag()));

  auto out = open_out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write error on '" + path.string() + "'");
}

ActivationSet read_activation_set(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string where = "'" + path.string() + "'";
  if (bytes.size() < kHeaderBytes) {
    if (bytes.size() >= 4 && !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
      throw Error(ErrorCode::BadMagic, where);
    }
    throw Error(ErrorCode::TruncatedPayload, where + " is shorter than the header");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error(ErrorCode::BadMagic, where);
  DumpHeader header;
  header.version = get_u32(&bytes[4]);
  header.n_samples = get_u32(&bytes[8]);
  header.n_dims = get_u32(&bytes[12]);
  header.flags = bytes[16];
  if (header.version != kVersion) {
    throw Error(ErrorCode::UnsupportedVersion, where + " has version " + std::to_string(header.version));
  }
  const std::uint64_t n = header.n_samples;
  const std::uint64_t d = header.n_dims;
  std::uint64_t expected = kHeaderBytes + n * d * 4;
  if (header.flags & kFlagLabels) expected += 4 * n;
  if (header.flags & kFlagTag) expected += 1;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::TruncatedPayload, where + " holds " + std::to_string(bytes.size()) +
                                                 " bytes but its header declares " + std::to_string(expected));
  }

  std::vector<double> values(n * d);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::size_t k = 0; k < values.size(); ++k, p += 4) {
    const float f = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(f)) throw Error(ErrorCode::NonFinitePayload, where + " entry " + std::to_string(k));
    values[k] = static_cast<double>(f);
  }
  std::optional<std::vector<std::uint32_t>> labels;
  if (header.flags & kFlagLabels) {
    labels.emplace(n);
    for (auto& label : *labels) {
      label = get_u32(p);
      p += 4;
    }
  }
  DistTag tag = DistTag::IdTrain;
  if (header.flags & kFlagTag) {
    if (*p > static_cast<unsigned char>(DistTag::Ood)) {
      throw Error(ErrorCode::InvalidArgument, where + " has unknown tag byte " + std::to_string(*p));
    }
    tag = static_cast<DistTag>(*p);
  }
  return ActivationSet(Matrix(n, d, std::move(values)), tag, std::move(labels));
}

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  return parse_csv(in, false);
}

ActivationSet read_csv_activation_set(const std::filesystem::path& path, DistTag tag) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "'" + path.string() + "' has no rows");
  return ActivationSet(Matrix::from_rows(rows), tag);
}

LinearHead read_linear_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  return head_from_rows(parse_csv(in, true), path.string());
}

void write_linear_head(const LinearHead& head, std::ostream& out) {
  for (std::size_t c = 0; c < head.num_classes(); ++c) write_row(out, head.weights().row(c));
  write_row(out, head.bias());
}

void write_linear_head(const LinearHead& head, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_linear_head(head, out);
}

void write_profile(const ReferenceProfile& profile, const std::filesystem::path& path) {
  write_activation_set(ActivationSet(Matrix(1, profile.dim(), profile.mu()), DistTag::IdTrain), path);
  auto out = open_out(path.string() + ".count");
  out << "count=" << profile.count() << '\n';
  out << "checksum=" << std::hex << std::setw(16) << std::setfill('0') << profile.source_checksum() << '\n';
}

ReferenceProfile read_profile(const std::filesystem::path& path) {
  const ActivationSet dump = read_activation_set(path);
  if (dump.size() != 1) throw Error(ErrorCode::InvalidArgument, "profile dump must hold exactly one row");
  const auto kv = KeyValueConfig::load(path.string() + ".count");
  const std::uint64_t count = kv.get_uint("count", 0);
  std::uint64_t sum = 0;
  const std::string hex = kv.get_or("checksum", "0");
  const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), sum, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size()) {
    throw Error(ErrorCode::ConfigError, "checksum: '" + hex + "' is not hexadecimal");
  }
  const auto row = dump.row(0);
  return ReferenceProfile(std::vector<double>(row.begin(), row.end()), count, sum);
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_scores_csv(const ScoreSet& s, std::ostream& out) {
  out << "score,is_id\n";
  for (std::size_t i = 0; i < s.size(); ++i) out << format_double(s.scores[i]) << ',' << (s.is_id[i] ? 1 : 0) << '\n';
}

void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "method,dataset,auroc,fpr95,aupr\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.dataset << ',' << format_double(r.auroc) << ',' << format_double(r.fpr95) << ','
        << format_double(r.aupr) << '\n';
  }
}

void write_metrics_markdown(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "| method | dataset | AUROC | FPR@95 | AUPR |\n|---|---|---|---|---|\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << "| " << r.method << " | " << r.dataset << " | " << 100.0 * r.auroc << " | " << 100.0 * r.fpr95 << " | "
        << 100.0 * r.aupr << " |\n";
  }
  out << std::defaultfloat;
}

void write_gamma_csv(const GammaCurve& curve, std::ostream& out) {
  out << "p,gamma,stderr\n";
  for (std::size_t k = 0; k < curve.percentiles.size(); ++k) {
    out << format_double(curve.percentiles[k]) << ',' << format_double(curve.gamma[k]) << ','
        << format_double(curve.std_error[k]) << '\n';
  }
}

void write_residuals_csv(const ResidualProfile& profile, std::ostream& out) {
  out << "rank,ood_mean,residual\n";
  for (std::size_t j = 0; j < profile.residual.size(); ++j) {
    out << j << ',' << format_double(profile.ood_mean_ranked[j]) << ',' << format_double(profile.residual[j]) << '\n';
  }
}

void write_toy_network(const ToyNetwork& net, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& layer : net.layers()) {
    out << "# layer " << to_string(layer.activation) << '\n';
    for (std::size_t r = 0; r < layer.out_dim(); ++r) write_row(out, layer.weights.row(r));
    write_row(out, layer.bias);
  }
  out << "# head\n";
  write_linear_head(net.head(), out);
}

ToyNetwork read_toy_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  struct Block {
    std::string manifest;
    std::string body;
  };
  std::vector<Block> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      blocks.push_back({std::string(trim(std::string_view(line).substr(1))), {}});
    } else if (!trim(line).empty()) {
      if (blocks.empty()) throw Error(ErrorCode::ConfigError, "network file must start with a manifest line");
      blocks.back().body += line + '\n';
    }
  }
  if (blocks.size() < 2 || blocks.back().manifest != "head") {
    throw Error(ErrorCode::ConfigError, "network file needs layer blocks followed by '# head'");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < blocks.size(); ++k) {
    const auto& manifest = blocks[k].manifest;
    if (manifest.rfind("layer ", 0) != 0) throw Error(ErrorCode::ConfigError, "bad manifest '" + manifest + "'");
    std::istringstream body(blocks[k].body);
    const auto rows = parse_csv(body, true);
    if (rows.size() < 2) throw Error(ErrorCode::RaggedRows, "layer " + std::to_string(k) + " block too short");
    const std::vector<std::vector<double>> weight_rows(rows.begin(), rows.end() - 1);
    DenseLayer layer{Matrix::from_rows(weight_rows), rows.back(), parse_layer_activation(manifest.substr(6))};
    if (layer.bias.size() != layer.out_dim()) throw Error(ErrorCode::RaggedRows, "layer bias length");
    layers.push_back(std::move(layer));
  }
  std::istringstream head_body(blocks.back().body);
  return ToyNetwork(std::move(layers), head_from_rows(parse_csv(head_body, true), path.string()));
}

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + " is not key=value");
    }
    const std::string key(trim(view.substr(0, eq)));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + " has an empty key");
    cfg.values_[key] = std::string(trim(view.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
  return parse(in);
}

std::string KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, key + ": missing");
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not a number");
  }
  return v;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ConfigError, key + ": '" + s + "' is not a non-negative integer");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error(ErrorCode::ConfigError, key + ": '" + it->second + "' is not a boolean");
}

std::vector<std::uint64_t> KeyValueConfig::get_uint_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  const auto it = values_.find(key);
  if (it == values_.end() || trim(it->second).empty()) return out;
  std::string_view rest(it->second);
  while (true) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw Error(ErrorCode::ConfigError, key + ": '" + std::string(item) + "' is not a non-negative integer");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

namespace {

const std::vector<std::string>& enhancer_keys() {
  static const std::vector<std::string> keys = {"percentile_p", "l2_target", "react_threshold_c"};
  return keys;
}

const std::vector<std::string>& scorer_keys() {
  static const std::vector<std::string> keys = {"temperature", "gen_gamma", "gen_top_m", "mds_ridge", "vim_dim"};
  return keys;
}

}  // namespace

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv.values()) {
    if (key == "enhancer") {
      parse_enhancer_kind(value);
      cfg.enhancer.name = value;
    } else if (key == "scorer") {
      parse_scorer_kind(value);
      cfg.scorer.name = value;
    } else if (key == "layer_targets") {
      cfg.layer_targets = kv.get_uint_list(key);
    } else if (key == "seeds") {
      cfg.seeds = kv.get_uint_list(key);
    } else if (key.rfind("path.", 0) == 0) {
      if (value.empty()) throw Error(ErrorCode::ConfigError, key + ": path must be non-empty");
      cfg.paths[key.substr(5)] = value;
    } else if (std::find(enhancer_keys().begin(), enhancer_keys().end(), key) != enhancer_keys().end()) {
      kv.get_double(key, 0.0);
      cfg.enhancer.params[key] = value;
    } else if (std::find(scorer_keys().begin(), scorer_keys().end(), key) != scorer_keys().end()) {
      kv.get_double(key, 0.0);
      cfg.scorer.params[key] = value;
    } else {
      throw Error(ErrorCode::ConfigError, key + ": unknown key");
    }
  }
  return cfg;
}

void write_enhancer_config(const EnhancerSpec& spec, std::ostream& out) {
  out << "enhancer=" << to_string(spec.kind()) << '\n';
  switch (spec.kind()) {
    case EnhancerKind::React:
      out << "percentile_p=" << format_double(spec.percentile_p()) << '\n';
      out << "react_threshold_c=" << format_double(spec.react_threshold()) << '\n';
      break;
    case EnhancerKind::AshP:
    case EnhancerKind::AshB:
    case EnhancerKind::AshS:
    case EnhancerKind::Scale:
    case EnhancerKind::Dice: out << "percentile_p=" << format_double(spec.percentile_p()) << '\n'; break;
    case EnhancerKind::L2Norm: out << "l2_target=" << format_double(spec.l2_target()) << '\n'; break;
    default: break;
  }
}

}  // namespace rasood::io
