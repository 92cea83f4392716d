#include "kronsc/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "kronsc/errors.hpp"

namespace kronsc {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& file) {
  if (offset + 4 > buf.size()) {
    throw FormatError(file + ": truncated header", offset);
  }
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                  static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes.data(), bytes.size());
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const std::filesystem::path& path, std::size_t line_no) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) {
    tok.remove_suffix(1);
  }
  T value{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw FormatError(path.string() + ": bad number '" + std::string(tok) + "' on line " +
                          std::to_string(line_no),
                      line_no);
  }
  return value;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

DataMatrix::DataMatrix(Matrix points, bool normalized)
    : points_(std::move(points)), normalized_(normalized) {
  require_finite(points_, "DataMatrix");
  if (normalized_) {
    for (Index j = 0; j < points_.cols(); ++j) {
      if (std::abs(points_.col(j).norm() - 1.0) > 1e-10) {
        throw ShapeError("DataMatrix: column " + std::to_string(j) +
                         " is flagged normalized but does not have unit norm");
      }
    }
  }
}

void SyntheticSpec::validate() const {
  if (n_subspaces < 1 || sub_dim < 1 || ambient_dim < 1 || points_per_subspace < 1) {
    throw ConfigError("synthetic spec: all counts must be >= 1");
  }
  if (sub_dim > ambient_dim) {
    throw ConfigError("synthetic spec: subspace dimension " + std::to_string(sub_dim) +
                      " exceeds ambient dimension " + std::to_string(ambient_dim));
  }
}

LabeledData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    }
    return m;
  };

  const Index total = Index{spec.n_subspaces} * spec.points_per_subspace;
  Matrix points(spec.ambient_dim, total);
  Labels labels;
  labels.reserve(static_cast<std::size_t>(total));
  Index col = 0;
  for (int s = 0; s < spec.n_subspaces; ++s) {
    const Matrix raw = gaussian(spec.ambient_dim, spec.sub_dim);
    Eigen::HouseholderQR<Matrix> qr(raw);
    const Matrix basis = qr.householderQ() * Matrix::Identity(spec.ambient_dim, spec.sub_dim);
    for (int i = 0; i < spec.points_per_subspace; ++i) {
      Vector x;
      do {
        x = basis * gaussian(spec.sub_dim, 1);
      } while (x.norm() == 0.0);
      points.col(col++) = x.normalized();
      labels.push_back(s);
    }
  }
  return {DataMatrix(std::move(points), true), std::move(labels)};
}

LabeledData load_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  if (img.empty()) throw FormatError(img_name + ": empty file", 0);
  if (lab.empty()) throw FormatError(lab_name + ": empty file", 0);
  if (read_be32(img, 0, img_name) != kIdxImagesMagic) {
    throw FormatError(img_name + ": bad magic number, expected 0x00000803", 0);
  }
  if (read_be32(lab, 0, lab_name) != kIdxLabelsMagic) {
    throw FormatError(lab_name + ": bad magic number, expected 0x00000801", 0);
  }
  const std::size_t count = read_be32(img, 4, img_name);
  const std::size_t rows = read_be32(img, 8, img_name);
  const std::size_t cols = read_be32(img, 12, img_name);
  const std::size_t label_count = read_be32(lab, 4, lab_name);
  if (count != label_count) {
    throw FormatError("image count " + std::to_string(count) + " does not match label count " +
                          std::to_string(label_count),
                      4);
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw FormatError(img_name + ": truncated pixel data", img.size());
  }
  if (lab.size() < 8 + count) {
    throw FormatError(lab_name + ": truncated label data", lab.size());
  }

  Matrix points(static_cast<Index>(pixels), static_cast<Index>(count));
  Labels truth(count);
  for (std::size_t n = 0; n < count; ++n) {
    const unsigned char* src = img.data() + 16 + n * pixels;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        points(static_cast<Index>(c * rows + r), static_cast<Index>(n)) = src[r * cols + c] / 255.0;
      }
    }
    truth[n] = lab[8 + n];
  }
  return {DataMatrix(std::move(points)), std::move(truth)};
}

void write_idx_images(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const DataMatrix& data, const Labels& truth, int rows, int cols) {
  const Matrix& x = data.points();
  if (x.rows() != Index{rows} * cols) {
    throw ShapeError("write_idx_images: point dimension does not equal rows * cols");
  }
  if (static_cast<Index>(truth.size()) != x.cols()) {
    throw ShapeError("write_idx_images: label count does not match point count");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IoError("cannot write IDX files");
  put_be32(img, kIdxImagesMagic);
  put_be32(img, static_cast<std::uint32_t>(x.cols()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  std::vector<char> buf(static_cast<std::size_t>(rows) * cols);
  for (Index n = 0; n < x.cols(); ++n) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double v = std::clamp(x(Index{c} * rows + r, n), 0.0, 1.0);
        buf[static_cast<std::size_t>(r) * cols + c] = static_cast<char>(std::lround(v * 255.0));
      }
    }
    img.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  put_be32(lab, kIdxLabelsMagic);
  put_be32(lab, static_cast<std::uint32_t>(truth.size()));
  for (int l : truth) lab.put(static_cast<char>(l));
}

DataMatrix normalize_columns(const DataMatrix& x) {
  Matrix out = x.points();
  std::vector<std::size_t> zero;
  for (Index j = 0; j < out.cols(); ++j) {
    const double n = out.col(j).norm();
    if (n == 0.0) {
      zero.push_back(static_cast<std::size_t>(j));
    } else {
      out.col(j) /= n;
    }
  }
  if (!zero.empty()) {
    std::string list;
    for (std::size_t i = 0; i < zero.size() && i < 10; ++i) {
      list += (i ? "," : "") + std::to_string(zero[i]);
    }
    if (zero.size() > 10) list += ",...";
    throw DegenerateDataError("normalize_columns: zero columns at " + list, std::move(zero));
  }
  return DataMatrix(std::move(out), true);
}

DataMatrix select_columns(const DataMatrix& x, std::span<const Index> indices) {
  Matrix out(x.dims(), static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.col(static_cast<Index>(i)) = x.points().col(indices[i]);
  }
  return DataMatrix(std::move(out), x.normalized());
}

namespace {

// Non-decreasing factorizations of n into exactly k factors within [lo, hi].
void enumerate_factorizations(Index n, int k, Index min_factor, double lo, double hi,
                              std::vector<Index>& cur, std::vector<std::vector<Index>>& out) {
  if (k == 1) {
    if (n >= min_factor && n >= lo && n <= hi) {
      cur.push_back(n);
      out.push_back(cur);
      cur.pop_back();
    }
    return;
  }
  for (Index f = std::max<Index>(min_factor, 1); f <= n && f <= hi; ++f) {
    if (n % f != 0 || f < lo) continue;
    cur.push_back(f);
    enumerate_factorizations(n / f, k - 1, f, lo, hi, cur, out);
    cur.pop_back();
  }
}

}  // namespace

ShapePlan plan_factor_shape(Index n, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("plan_factor_shape: k must be >= 2");
  if (n < 1) throw ConfigError("plan_factor_shape: N must be >= 1");

  for (Index candidate = n;; ++candidate) {
    const double root = std::pow(static_cast<double>(candidate), 1.0 / k);
    const double lo = root / 4.0 - 1e-9;
    const double hi = root * 4.0 + 1e-9;
    std::vector<Index> cur;
    std::vector<std::vector<Index>> found;
    enumerate_factorizations(candidate, k, 1, lo, hi, cur, found);
    if (found.empty()) continue;

    // Most balanced: smallest largest/smallest ratio; ties go to the first found.
    const auto best = std::min_element(found.begin(), found.end(), [](const auto& a, const auto& b) {
      return static_cast<double>(a.back()) / a.front() < static_cast<double>(b.back()) / b.front();
    });
    ShapePlan plan;
    plan.shape = FactorShape::square(*best);
    plan.padding.original_count = n;
    plan.padding.padded_count = candidate;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (Index i = n; i < candidate; ++i) plan.padding.pad_indices.push_back(pick(rng));
    return plan;
  }
}

DataMatrix apply_padding(const DataMatrix& x, const PaddingPlan& plan) {
  if (x.count() != plan.original_count) {
    throw ShapeError("apply_padding: data has " + std::to_string(x.count()) +
                     " columns, plan expects " + std::to_string(plan.original_count));
  }
  if (plan.pad_indices.empty()) return x;
  Matrix out(x.dims(), plan.padded_count);
  out.leftCols(x.count()) = x.points();
  for (std::size_t i = 0; i < plan.pad_indices.size(); ++i) {
    out.col(x.count() + static_cast<Index>(i)) = x.points().col(plan.pad_indices[i]);
  }
  return DataMatrix(std::move(out), x.normalized());
}

Labels apply_padding(const Labels& labels, const PaddingPlan& plan) {
  if (static_cast<Index>(labels.size()) != plan.original_count) {
    throw ShapeError("apply_padding: label count does not match plan");
  }
  Labels out = labels;
  for (Index src : plan.pad_indices) out.push_back(labels[static_cast<std::size_t>(src)]);
  return out;
}

void write_points_csv(const std::filesystem::path& path, const DataMatrix& x, const Labels* labels) {
  if (labels && static_cast<Index>(labels->size()) != x.count()) {
    throw ShapeError("write_points_csv: label count does not match point count");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const Matrix& m = x.points();
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i) out << ',';
      out << format_double(m(i, j));
    }
    if (labels) out << ',' << (*labels)[static_cast<std::size_t>(j)];
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

CsvPoints read_points_csv(const std::filesystem::path& path, bool has_labels) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto toks = split(line, ',');
    if (has_labels) {
      if (toks.size() < 2) {
        throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                              " has no label column",
                          line_no);
      }
      labels.push_back(parse_number<int>(toks.back(), path, line_no));
      toks.pop_back();
    }
    if (width == 0) width = toks.size();
    if (toks.size() != width) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(toks.size()) + " values, expected " +
                            std::to_string(width),
                        line_no);
    }
    std::vector<double> row;
    row.reserve(toks.size());
    for (auto t : toks) row.push_back(parse_number<double>(t, path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows", 0);
  Matrix m(static_cast<Index>(width), static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t i = 0; i < width; ++i) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
  }
  return {DataMatrix(std::move(m)), std::move(labels)};
}

void write_labels_csv(const std::filesystem::path& path, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
}

Labels read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Labels out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    // Accept either a bare label or a points row whose last column is the label.
    const auto toks = split(line, ',');
    out.push_back(parse_number<int>(toks.back(), path, line_no));
  }
  return out;
}

}  // namespace kronsc
