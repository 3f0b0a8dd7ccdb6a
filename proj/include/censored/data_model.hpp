#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace censored {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Binary observation filter, 1 = observed. Row-major, n x p.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Sorted, duplicate-free feature indices (0-based).
using IndexSet = std::vector<Index>;

/// Sentinel stored at censored positions. Never compared numerically.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed feature matrix together with its censorship filter.
///
/// values(k, i) is finite exactly when mask(k, i) == 1; every other entry
/// holds kMissing. Immutable after construction.
class CensoredMatrix {
 public:
  /// Validates the mask/value invariant. Values at masked positions are
  /// overwritten with the sentinel, so callers may pass a full matrix.
  CensoredMatrix(RowMatrix values, Mask mask);

  /// Builds a fully observed matrix.
  static CensoredMatrix fully_observed(const Matrix& values);

  Index n_samples() const noexcept { return values_.rows(); }
  Index n_features() const noexcept { return values_.cols(); }

  bool observed(Index k, Index i) const { return mask_(k, i) != 0; }
  std::optional<double> at(Index k, Index i) const;

  const RowMatrix& values() const noexcept { return values_; }
  const Mask& mask() const noexcept { return mask_; }

  /// Number of observed entries.
  Index observed_count() const;

 private:
  RowMatrix values_;
  Mask mask_;
};

struct LabeledDataset {
  LabeledDataset(CensoredMatrix design, Vector labels,
                 std::vector<std::string> feature_names = {});

  CensoredMatrix design;
  Vector labels;
  std::vector<std::string> feature_names;
};

/// Fraction of observed entries, in [0, 1].
double observed_fraction(const CensoredMatrix& m);

bool is_missing_token(std::string_view cell);

/// Reads a dataset whose final column is `y`. Missing design cells are `NA`
/// (any case) or empty.
LabeledDataset load_dataset(const std::filesystem::path& path);
LabeledDataset read_dataset(std::istream& in);

/// Reads a CSV where every column is a (possibly censored) feature.
CensoredMatrix load_matrix(const std::filesystem::path& path,
                           std::vector<std::string>* header = nullptr);
CensoredMatrix read_matrix(std::istream& in, std::vector<std::string>* header = nullptr);

/// Shortest decimal string that parses back to the same double.
std::string format_real(double v);

/// A single CSV cell: missing, integer, real, text or boolean.
using Cell = std::variant<std::monostate, long long, double, std::string, bool>;

struct Field {
  std::string name;
  Cell value;
};
using Record = std::vector<Field>;

/// Records sharing a declared column schema.
struct Table {
  std::vector<std::string> schema;
  std::vector<Record> rows;
};

std::string format_cell(const Cell& c);

/// Writes a header row followed by one line per record, in schema order.
/// Throws ValidationError if a record's field names differ from the schema.
void save_table(const Table& table, const std::filesystem::path& path);
void write_table(const Table& table, std::ostream& out);

/// Emits a censored matrix (and optional labels as a trailing `y` column).
void save_matrix(const CensoredMatrix& m, const std::filesystem::path& path,
                 const std::vector<std::string>& names = {},
                 const Vector* labels = nullptr);
void save_dense(const Matrix& m, const std::filesystem::path& path,
                const std::vector<std::string>& names = {});

/// Default feature names x1..xp.
std::vector<std::string> default_feature_names(Index p);

}  // namespace censored
