#include "censored/data_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace censored {

CensoredMatrix::CensoredMatrix(RowMatrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ValidationError("censored matrix needs at least one sample and one feature");
  }
  if (mask_.rows() != values_.rows() || mask_.cols() != values_.cols()) {
    throw ValidationError("mask is " + std::to_string(mask_.rows()) + "x" +
                          std::to_string(mask_.cols()) + " but values are " +
                          std::to_string(values_.rows()) + "x" +
                          std::to_string(values_.cols()));
  }
  for (Index k = 0; k < values_.rows(); ++k) {
    for (Index i = 0; i < values_.cols(); ++i) {
      const auto m = mask_(k, i);
      if (m > 1) {
        throw ValidationError("mask entry (" + std::to_string(k) + "," +
                              std::to_string(i) + ") is not 0/1");
      }
      if (m == 0) {
        values_(k, i) = kMissing;
      } else if (!std::isfinite(values_(k, i))) {
        throw ValidationError("observed entry (" + std::to_string(k) + "," +
                              std::to_string(i) + ") is not finite");
      }
    }
  }
}

CensoredMatrix CensoredMatrix::fully_observed(const Matrix& values) {
  return CensoredMatrix(values, Mask::Ones(values.rows(), values.cols()));
}

std::optional<double> CensoredMatrix::at(Index k, Index i) const {
  if (!observed(k, i)) return std::nullopt;
  return values_(k, i);
}

Index CensoredMatrix::observed_count() const {
  return mask_.cast<Index>().sum();
}

LabeledDataset::LabeledDataset(CensoredMatrix d, Vector y, std::vector<std::string> names)
    : design(std::move(d)), labels(std::move(y)), feature_names(std::move(names)) {
  if (labels.size() != design.n_samples()) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match sample count " +
                          std::to_string(design.n_samples()));
  }
  if (!labels.allFinite()) throw ValidationError("labels must be finite");
  if (feature_names.empty()) feature_names = default_feature_names(design.n_features());
  if (static_cast<Index>(feature_names.size()) != design.n_features()) {
    throw ValidationError("feature name count does not match feature count");
  }
}

double observed_fraction(const CensoredMatrix& m) {
  return static_cast<double>(m.observed_count()) /
         static_cast<double>(m.n_samples() * m.n_features());
}

std::vector<std::string> default_feature_names(Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_real(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawTable read_raw(std::istream& in) {
  RawTable t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cells = split(view);
    if (!have_header) {
      for (auto c : cells) t.header.emplace_back(c);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       t.rows.size() + 1);
    }
    std::vector<std::string> row;
    row.reserve(cells.size());
    for (auto c : cells) row.emplace_back(c);
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("missing header row", 0);
  return t;
}

CensoredMatrix matrix_from_cells(const RawTable& t, std::size_t n_cols) {
  const auto n = static_cast<Index>(t.rows.size());
  if (n == 0) throw ValidationError("no data rows");
  RowMatrix values(n, static_cast<Index>(n_cols));
  Mask mask(n, static_cast<Index>(n_cols));
  for (Index k = 0; k < n; ++k) {
    const auto& row = t.rows[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < n_cols; ++i) {
      const auto col = static_cast<Index>(i);
      if (is_missing_token(row[i])) {
        values(k, col) = kMissing;
        mask(k, col) = 0;
        continue;
      }
      const auto v = parse_real(row[i]);
      if (!v) {
        throw ParseError("column '" + t.header[i] + "': cannot parse '" + row[i] + "'",
                         static_cast<std::size_t>(k) + 1);
      }
      values(k, col) = *v;
      mask(k, col) = 1;
    }
  }
  return CensoredMatrix(std::move(values), std::move(mask));
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

bool is_missing_token(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return true;
  return cell.size() == 2 && (cell[0] == 'N' || cell[0] == 'n') &&
         (cell[1] == 'A' || cell[1] == 'a');
}

LabeledDataset read_dataset(std::istream& in) {
  const auto raw = read_raw(in);
  if (raw.header.size() < 2 || raw.header.back() != "y") {
    throw ParseError("header must name at least one feature followed by 'y'", 0);
  }
  const auto p = raw.header.size() - 1;
  auto design = matrix_from_cells(raw, p);
  Vector y(static_cast<Index>(raw.rows.size()));
  for (std::size_t k = 0; k < raw.rows.size(); ++k) {
    const auto& cell = raw.rows[k][p];
    if (is_missing_token(cell)) {
      throw ValidationError("row " + std::to_string(k + 1) + ": label 'y' is missing");
    }
    const auto v = parse_real(cell);
    if (!v) throw ParseError("column 'y': cannot parse '" + cell + "'", k + 1);
    y(static_cast<Index>(k)) = *v;
  }
  std::vector<std::string> names(raw.header.begin(), raw.header.end() - 1);
  return LabeledDataset(std::move(design), std::move(y), std::move(names));
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_dataset(in);
}

CensoredMatrix read_matrix(std::istream& in, std::vector<std::string>* header) {
  const auto raw = read_raw(in);
  if (header) *header = raw.header;
  return matrix_from_cells(raw, raw.header.size());
}

CensoredMatrix load_matrix(const std::filesystem::path& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_matrix(in, header);
}

std::string format_real(double v) {
  if (std::isnan(v)) return "NA";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_cell(const Cell& c) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "NA"; }
    std::string operator()(long long v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_real(v); }
    std::string operator()(const std::string& v) const { return v; }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
  };
  return std::visit(Visitor{}, c);
}

void write_table(const Table& table, std::ostream& out) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& rec = table.rows[r];
    bool same = rec.size() == table.schema.size();
    for (std::size_t j = 0; same && j < rec.size(); ++j) same = rec[j].name == table.schema[j];
    if (!same) {
      throw ValidationError("record " + std::to_string(r) + " does not match the table schema");
    }
  }
  for (std::size_t j = 0; j < table.schema.size(); ++j) {
    out << (j ? "," : "") << table.schema[j];
  }
  out << '\n';
  for (const auto& rec : table.rows) {
    for (std::size_t j = 0; j < rec.size(); ++j) out << (j ? "," : "") << format_cell(rec[j].value);
    out << '\n';
  }
}

void save_table(const Table& table, const std::filesystem::path& path) {
  // Validate before touching the file so a bad table leaves nothing behind.
  std::ostringstream buf;
  write_table(table, buf);
  auto out = open_for_write(path);
  out << buf.str();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_matrix(const CensoredMatrix& m, const std::filesystem::path& path,
                 const std::vector<std::string>& names, const Vector* labels) {
  const auto header = names.empty() ? default_feature_names(m.n_features()) : names;
  if (static_cast<Index>(header.size()) != m.n_features()) {
    throw ValidationError("feature name count does not match feature count");
  }
  if (labels && labels->size() != m.n_samples()) {
    throw ValidationError("label count does not match sample count");
  }
  auto out = open_for_write(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (labels) out << ",y";
  out << '\n';
  for (Index k = 0; k < m.n_samples(); ++k) {
    for (Index i = 0; i < m.n_features(); ++i) {
      out << (i ? "," : "") << (m.observed(k, i) ? format_real(m.values()(k, i)) : "NA");
    }
    if (labels) out << ',' << format_real((*labels)(k));
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_dense(const Matrix& m, const std::filesystem::path& path,
                const std::vector<std::string>& names) {
  save_matrix(CensoredMatrix::fully_observed(m), path, names);
}

}  // namespace censored
