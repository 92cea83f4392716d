#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kronsc/kron.hpp"

namespace kronsc {

using Labels = std::vector<int>;

/// D x N dataset, one point per column.
class DataMatrix {
 public:
  DataMatrix() = default;
  /// Throws ShapeError on non-finite entries. When `normalized` is set the
  /// columns must already have unit norm.
  explicit DataMatrix(Matrix points, bool normalized = false);

  const Matrix& points() const { return points_; }
  Index dims() const { return points_.rows(); }
  Index count() const { return points_.cols(); }
  bool normalized() const { return normalized_; }

 private:
  Matrix points_;
  bool normalized_ = false;
};

struct SyntheticSpec {
  int n_subspaces = 5;
  int sub_dim = 6;
  int ambient_dim = 9;
  int points_per_subspace = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledData {
  DataMatrix data;
  Labels labels;
};

/// Union of random linear subspaces; points sampled on the unit sphere of
/// each subspace, stored contiguously by subspace.
LabeledData generate_synthetic(const SyntheticSpec& spec);

/// Loads an IDX3 image file and matching IDX1 label file. Pixels are scaled
/// to [0, 1] and each image is vectorized column-major.
LabeledData load_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes 8-bit images (D = rows * cols pixels per column, values in [0, 1]
/// that map exactly to bytes) and labels in IDX format.
void write_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const DataMatrix& data, const Labels& truth, int rows, int cols);

DataMatrix normalize_columns(const DataMatrix& x);

/// Returns the columns listed in `indices`, in order.
DataMatrix select_columns(const DataMatrix& x, std::span<const Index> indices);

struct PaddingPlan {
  Index original_count = 0;
  Index padded_count = 0;
  std::vector<Index> pad_indices;  ///< source column of each appended duplicate
};

struct ShapePlan {
  FactorShape shape;
  PaddingPlan padding;
};

/// Smallest N' >= N that splits into k square factors, each within a factor
/// of 4 of N'^(1/k). Padding duplicates columns sampled uniformly with `seed`.
ShapePlan plan_factor_shape(Index n, int k, std::uint64_t seed = 0);

/// Appends the duplicates described by `plan`.
DataMatrix apply_padding(const DataMatrix& x, const PaddingPlan& plan);
Labels apply_padding(const Labels& labels, const PaddingPlan& plan);

/// CSV with one point per row; when `labels` is non-null a final label column.
void write_points_csv(const std::filesystem::path& path, const DataMatrix& x, const Labels* labels);

struct CsvPoints {
  DataMatrix data;
  Labels labels;  ///< empty unless the file had a label column
};

/// Reads points written by write_points_csv. With `has_labels` the last
/// column is parsed as an integer label.
CsvPoints read_points_csv(const std::filesystem::path& path, bool has_labels);

void write_labels_csv(const std::filesystem::path& path, const Labels& labels);
Labels read_labels_csv(const std::filesystem::path& path);

}  // namespace kronsc
