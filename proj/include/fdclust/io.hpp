#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fdclust/dataset.hpp"
#include "fdclust/error.hpp"
#include "fdclust/fmi.hpp"
#include "fdclust/fpca.hpp"
#include "fdclust/fsmi.hpp"

namespace fdclust::io {

inline constexpr int kFormatVersion = 1;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "dataio", "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "dataio", "cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error(ErrorCode::io_failure, "dataio", "write to '" + path + "' failed");
}

/// Shortest form that still round-trips is not required; 17 significant
/// digits always does.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  // drop trailing blank lines only
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline double parse_double(std::string_view field, std::size_t row, std::size_t col) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw Error(ErrorCode::malformed_number, "dataio",
                "row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + std::string(field) + "'");
  return value;
}

inline std::vector<double> parse_row(std::string_view line, std::size_t row) {
  std::vector<double> values;
  std::size_t col = 1, start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    values.push_back(parse_double(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start),
                                  row, col));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
    ++col;
  }
  return values;
}

}  // namespace detail

/// Parses the wide layout: row 1 is the grid, every further row one curve.
inline std::pair<Vector, Matrix> parse_wide_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines.front()).empty())
    throw Error(ErrorCode::empty_file, "dataio", "no grid row found");
  const auto grid_values = detail::parse_row(lines.front(), 1);
  const auto m = static_cast<Eigen::Index>(grid_values.size());
  Vector grid = Eigen::Map<const Vector>(grid_values.data(), m);
  for (Eigen::Index l = 1; l < m; ++l)
    if (!(grid[l] > grid[l - 1]))
      throw Error(ErrorCode::non_increasing_grid, "dataio",
                  "row 1, column " + std::to_string(l + 1) + ": " + format_double(grid[l]) + " does not exceed " +
                      format_double(grid[l - 1]));

  Matrix curves(static_cast<Eigen::Index>(lines.size() - 1), m);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto row = detail::parse_row(lines[r], r + 1);
    if (static_cast<Eigen::Index>(row.size()) != m)
      throw Error(ErrorCode::ragged_row, "dataio",
                  "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields, grid has " +
                      std::to_string(m));
    for (Eigen::Index l = 0; l < m; ++l) curves(static_cast<Eigen::Index>(r - 1), l) = row[static_cast<std::size_t>(l)];
  }
  return {std::move(grid), std::move(curves)};
}

/// One integer per line.
inline Labels parse_labels(std::string_view text) {
  Labels labels;
  const auto lines = detail::split_lines(text);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto field = detail::trim(lines[r]);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
      throw Error(ErrorCode::malformed_number, "dataio", "label line " + std::to_string(r + 1) + ": '" + std::string(field) + "'");
    if (value < 1)
      throw Error(ErrorCode::malformed_number, "dataio", "label line " + std::to_string(r + 1) + ": labels must be >= 1");
    labels.push_back(value);
  }
  return labels;
}

inline Labels load_labels(const std::string& path) { return parse_labels(read_file(path)); }

inline FunctionalDataset load_dataset(const std::string& path, const std::optional<std::string>& labels_path = std::nullopt) {
  auto [grid, curves] = parse_wide_csv(read_file(path));
  std::optional<Labels> labels;
  if (labels_path) labels = load_labels(*labels_path);
  return FunctionalDataset(std::move(grid), std::move(curves), std::move(labels));
}

inline std::string format_rows(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string format_labels(const Labels& labels) {
  std::string out;
  for (int y : labels) out += std::to_string(y) + '\n';
  return out;
}

inline std::string format_wide_csv(const FunctionalDataset& data) {
  return format_rows(data.grid().transpose()) + format_rows(data.curves());
}

inline void save_dataset(const FunctionalDataset& data, const std::string& path,
                         const std::optional<std::string>& labels_path = std::nullopt) {
  write_file(path, format_wide_csv(data));
  if (labels_path) {
    if (!data.labels()) throw Error(ErrorCode::invalid_argument, "dataio", "dataset carries no labels to save");
    write_file(*labels_path, format_labels(*data.labels()));
  }
}

inline void save_matrix(const Matrix& m, const std::string& path) { write_file(path, format_rows(m)); }
inline void save_labels(const Labels& labels, const std::string& path) { write_file(path, format_labels(labels)); }

// ---------------------------------------------------------------- models

using json = nlohmann::json;

namespace detail {

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const json& field(const json& doc, const char* name) {
  if (!doc.is_object() || !doc.contains(name))
    throw Error(ErrorCode::schema_mismatch, "dataio", std::string("missing field '") + name + "'");
  return doc.at(name);
}

inline double number(const json& doc, const char* name) {
  const auto& f = field(doc, name);
  if (!f.is_number()) throw Error(ErrorCode::schema_mismatch, "dataio", std::string("field '") + name + "' is not a number");
  return f.get<double>();
}

inline int integer(const json& doc, const char* name) {
  const auto& f = field(doc, name);
  if (!f.is_number_integer())
    throw Error(ErrorCode::schema_mismatch, "dataio", std::string("field '") + name + "' is not an integer");
  return f.get<int>();
}

inline Vector vector(const json& doc, const char* name, std::optional<Eigen::Index> size = std::nullopt) {
  const auto& f = field(doc, name);
  if (!f.is_array()) throw Error(ErrorCode::schema_mismatch, "dataio", std::string("field '") + name + "' is not an array");
  Vector v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (!f[k].is_number())
      throw Error(ErrorCode::schema_mismatch, "dataio", std::string("field '") + name + "' has a non-numeric entry");
    v[static_cast<Eigen::Index>(k)] = f[k].get<double>();
  }
  if (size && v.size() != *size)
    throw Error(ErrorCode::schema_mismatch, "dataio",
                std::string("field '") + name + "' has length " + std::to_string(v.size()) + ", expected " +
                    std::to_string(*size));
  return v;
}

inline Matrix matrix(const json& doc, const char* name, Eigen::Index rows, Eigen::Index cols) {
  const auto& f = field(doc, name);
  const auto bad = [&] {
    return Error(ErrorCode::schema_mismatch, "dataio",
                 std::string("field '") + name + "' is not a " + std::to_string(rows) + "x" + std::to_string(cols) + " array");
  };
  if (!f.is_array() || static_cast<Eigen::Index>(f.size()) != rows) throw bad();
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = f[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw bad();
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) throw bad();
      m(i, j) = x.get<double>();
    }
  }
  return m;
}

}  // namespace detail

inline json to_json(const KLModel& m) {
  return {{"grid", detail::to_json(m.grid)},
          {"weights", detail::to_json(m.weights)},
          {"mean", detail::to_json(m.mean)},
          {"eigenfunctions", detail::to_json(m.eigenfunctions)},
          {"eigenvalues", detail::to_json(m.eigenvalues)},
          {"q", m.q}};
}

inline json to_json(const fmi::FmiModel& m) {
  return {{"alpha", detail::to_json(m.alpha)},
          {"bias", detail::to_json(m.bias)},
          {"lambda", m.lambda},
          {"objective", m.objective},
          {"C", m.num_clusters()},
          {"q", m.dimension()}};
}

inline json to_json(const fsmi::FsmiModel& m) {
  return {{"train_scores", detail::to_json(m.train_scores)},
          {"v", m.v},
          {"sigma", detail::to_json(m.sigma)},
          {"eigvals", detail::to_json(m.eigvals)},
          {"eigvecs", detail::to_json(m.eigvecs)},
          {"priors", detail::to_json(m.priors)},
          {"sigma_floored", m.sigma_floored},
          {"C", m.num_clusters()},
          {"q", m.dimension()}};
}

inline KLModel kl_from_json(const json& doc) {
  KLModel m;
  m.grid = detail::vector(doc, "grid");
  const auto grid_size = m.grid.size();
  m.weights = detail::vector(doc, "weights", grid_size);
  m.mean = detail::vector(doc, "mean", grid_size);
  m.eigenvalues = detail::vector(doc, "eigenvalues");
  m.eigenfunctions = detail::matrix(doc, "eigenfunctions", grid_size, m.eigenvalues.size());
  m.q = detail::integer(doc, "q");
  if (m.q < 1 || m.q > m.eigenvalues.size())
    throw Error(ErrorCode::schema_mismatch, "dataio", "q=" + std::to_string(m.q) + " outside [1, q_max]");
  return m;
}

inline fmi::FmiModel fmi_from_json(const json& doc) {
  fmi::FmiModel m;
  const int c = detail::integer(doc, "C"), q = detail::integer(doc, "q");
  if (c < 2 || q < 1) throw Error(ErrorCode::schema_mismatch, "dataio", "fmi model needs C >= 2 and q >= 1");
  m.alpha = detail::matrix(doc, "alpha", c, q);
  m.bias = detail::vector(doc, "bias", c);
  m.lambda = detail::number(doc, "lambda");
  m.objective = detail::number(doc, "objective");
  return m;
}

inline fsmi::FsmiModel fsmi_from_json(const json& doc) {
  fsmi::FsmiModel m;
  const int c = detail::integer(doc, "C"), q = detail::integer(doc, "q");
  if (c < 2 || q < 1) throw Error(ErrorCode::schema_mismatch, "dataio", "fsmi model needs C >= 2 and q >= 1");
  const auto& scores = detail::field(doc, "train_scores");
  if (!scores.is_array()) throw Error(ErrorCode::schema_mismatch, "dataio", "field 'train_scores' is not an array");
  const auto n = static_cast<Eigen::Index>(scores.size());
  m.train_scores = detail::matrix(doc, "train_scores", n, q);
  m.v = detail::integer(doc, "v");
  m.sigma = detail::vector(doc, "sigma", n);
  m.eigvals = detail::vector(doc, "eigvals", c);
  m.eigvecs = detail::matrix(doc, "eigvecs", n, c);
  m.priors = detail::vector(doc, "priors", c);
  const auto& floored = detail::field(doc, "sigma_floored");
  if (!floored.is_boolean()) throw Error(ErrorCode::schema_mismatch, "dataio", "field 'sigma_floored' is not a boolean");
  m.sigma_floored = floored.get<bool>();
  if (m.v < 1 || m.v > n - 1) throw Error(ErrorCode::schema_mismatch, "dataio", "v outside [1, n-1]");
  return m;
}

/// A persisted model: a bare KL expansion, or a clustering model that
/// optionally carries the expansion used to produce its scores.
struct ModelDocument {
  std::optional<KLModel> kl;
  std::variant<std::monostate, fmi::FmiModel, fsmi::FsmiModel> model;

  std::string kind() const {
    if (std::holds_alternative<fmi::FmiModel>(model)) return "fmi";
    if (std::holds_alternative<fsmi::FsmiModel>(model)) return "fsmi";
    return "kl";
  }
};

inline json to_json(const ModelDocument& doc) {
  json out{{"format_version", kFormatVersion}, {"kind", doc.kind()}};
  if (const auto* m = std::get_if<fmi::FmiModel>(&doc.model)) {
    out["model"] = to_json(*m);
  } else if (const auto* m = std::get_if<fsmi::FsmiModel>(&doc.model)) {
    out["model"] = to_json(*m);
  } else if (!doc.kl) {
    throw Error(ErrorCode::invalid_argument, "dataio", "empty model document");
  }
  if (doc.kl) out["kl"] = to_json(*doc.kl);
  return out;
}

inline ModelDocument model_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::schema_mismatch, "dataio", "model document is not an object");
  const int version = detail::integer(doc, "format_version");
  if (version != kFormatVersion)
    throw Error(ErrorCode::version_mismatch, "dataio",
                "format_version " + std::to_string(version) + " unsupported (expected " + std::to_string(kFormatVersion) + ")");
  const auto& kind_field = detail::field(doc, "kind");
  if (!kind_field.is_string()) throw Error(ErrorCode::schema_mismatch, "dataio", "field 'kind' is not a string");
  const auto kind = kind_field.get<std::string>();

  ModelDocument out;
  if (kind == "kl") {
    out.kl = kl_from_json(detail::field(doc, "kl"));
    return out;
  }
  if (kind != "fmi" && kind != "fsmi") throw Error(ErrorCode::kind_mismatch, "dataio", "unknown model kind '" + kind + "'");
  if (doc.contains("kl")) out.kl = kl_from_json(doc.at("kl"));
  if (kind == "fmi")
    out.model = fmi_from_json(detail::field(doc, "model"));
  else
    out.model = fsmi_from_json(detail::field(doc, "model"));
  return out;
}

inline void save_model(const ModelDocument& doc, const std::string& path) { write_file(path, to_json(doc).dump(1) + "\n"); }

inline ModelDocument load_model(const std::string& path) {
  const auto text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::schema_mismatch, "dataio", "'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace fdclust::io
