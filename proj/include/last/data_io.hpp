#ifndef LAST_DATA_IO_HPP_
#define LAST_DATA_IO_HPP_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "last/rng.hpp"
#include "last/types.hpp"

namespace last {

namespace detail {

inline std::vector<unsigned char> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                               const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(path + ": truncated at offset " + std::to_string(offset) +
                     " (expected 4 more bytes)");
  }
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

// Binary view of multiclass ids: with exactly two classes the larger id maps
// to +1; with more, the lowest class id maps to +1 and the rest to -1.
inline IntVector default_binary_labels(const std::vector<int>& class_ids) {
  std::set<int> distinct(class_ids.begin(), class_ids.end());
  IntVector labels(static_cast<Eigen::Index>(class_ids.size()));
  if (distinct.size() == 2) {
    int hi = *distinct.rbegin();
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
      labels[static_cast<Eigen::Index>(i)] = class_ids[i] == hi ? 1 : -1;
    }
  } else {
    int lo = *distinct.begin();
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
      labels[static_cast<Eigen::Index>(i)] = class_ids[i] == lo ? 1 : -1;
    }
  }
  return labels;
}

}  // namespace detail

//! Big-endian IDX image/label pair. Pixels are scaled to [0, 1] and each
//! image is flattened row-major into one column.
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  auto img = detail::read_binary_file(images_path);
  auto lab = detail::read_binary_file(labels_path);

  std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != 0x00000803) {
    std::ostringstream os;
    os << images_path << ": bad image magic 0x" << std::hex << std::setw(8) << std::setfill('0')
       << img_magic << " at offset 0 (expected 0x00000803)";
    throw ParseError(os.str());
  }
  std::uint32_t count = detail::read_be32(img, 4, images_path);
  std::uint32_t rows = detail::read_be32(img, 8, images_path);
  std::uint32_t cols = detail::read_be32(img, 12, images_path);
  if (count == 0 || rows == 0 || cols == 0) {
    throw ParseError(images_path + ": zero dimension in header");
  }
  std::size_t expected = 16 + static_cast<std::size_t>(count) * rows * cols;
  if (img.size() != expected) {
    throw ParseError(images_path + ": file is " + std::to_string(img.size()) +
                     " bytes, header implies " + std::to_string(expected));
  }

  std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801) {
    std::ostringstream os;
    os << labels_path << ": bad label magic 0x" << std::hex << std::setw(8) << std::setfill('0')
       << lab_magic << " at offset 0 (expected 0x00000801)";
    throw ParseError(os.str());
  }
  std::uint32_t lab_count = detail::read_be32(lab, 4, labels_path);
  if (lab_count != count) {
    throw ParseError(labels_path + ": " + std::to_string(lab_count) + " labels for " +
                     std::to_string(count) + " images");
  }
  if (lab.size() != 8 + static_cast<std::size_t>(lab_count)) {
    throw ParseError(labels_path + ": file is " + std::to_string(lab.size()) +
                     " bytes, header implies " + std::to_string(8 + lab_count));
  }

  LabeledDataset data;
  auto dim = static_cast<Eigen::Index>(rows) * static_cast<Eigen::Index>(cols);
  data.features.resize(dim, count);
  data.class_ids.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::size_t base = 16 + static_cast<std::size_t>(i) * rows * cols;
    for (Eigen::Index p = 0; p < dim; ++p) {
      data.features(p, i) = static_cast<double>(img[base + static_cast<std::size_t>(p)]) / 255.0;
    }
    data.class_ids[i] = lab[8 + i];
  }
  data.labels = detail::default_binary_labels(data.class_ids);
  return data;
}

//! CSV with one sample per row; label_col picks the class column (negative
//! means the last column). An optional header row is detected by
//! non-numeric cells and skipped.
inline LabeledDataset load_csv(const std::string& path, int label_col = -1) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  auto parse_cell = [](const std::string& cell, double& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end != '\0') {
      if (!std::isspace(static_cast<unsigned char>(*end))) return false;
      ++end;
    }
    return true;
  };

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();

    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_cell(cells[c], values[c])) {
        numeric = false;
        if (!rows.empty() || line_no > 1) {
          throw ParseError(path + ": line " + std::to_string(line_no) + ", column " +
                           std::to_string(c + 1) + ": non-numeric value '" + cells[c] + "'");
        }
        break;
      }
    }
    if (!numeric) continue;  // header row
    if (expected_fields == 0) {
      expected_fields = values.size();
      if (expected_fields < 2) {
        throw ParseError(path + ": line " + std::to_string(line_no) +
                         ": need at least one feature and one label column");
      }
    } else if (values.size() != expected_fields) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected_fields) + " fields, got " +
                       std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");

  auto cols = static_cast<int>(expected_fields);
  int lcol = label_col < 0 ? cols - 1 : label_col;
  if (lcol >= cols) {
    throw std::invalid_argument(path + ": label column " + std::to_string(label_col) +
                                " out of range for " + std::to_string(cols) + " columns");
  }
  LabeledDataset data;
  data.features.resize(cols - 1, static_cast<Eigen::Index>(rows.size()));
  data.class_ids.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index f = 0;
    for (int c = 0; c < cols; ++c) {
      if (c == lcol) {
        data.class_ids[i] = static_cast<int>(std::llround(rows[i][static_cast<std::size_t>(c)]));
      } else {
        data.features(f++, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(c)];
      }
    }
  }
  data.labels = detail::default_binary_labels(data.class_ids);
  return data;
}

//! One sample per row, features first and the class id last, full precision.
inline void save_csv(const std::string& path, const LabeledDataset& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index r = 0; r < data.dim(); ++r) out << data.features(r, i) << ',';
    int cls = data.class_ids.empty() ? data.labels[i] : data.class_ids[static_cast<std::size_t>(i)];
    out << cls << '\n';
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

//! One encoded sample per row (used for feature exports).
inline void write_features_csv(const std::string& path, const Matrix& features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      out << features(r, i) << (r + 1 == features.rows() ? '\n' : ',');
    }
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

//! Binary PGM (P5) image scaled to [0, 1].
inline Matrix load_pgm(const std::string& path) {
  auto bytes = detail::read_binary_file(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) {
    skip_space();
    std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) {
      throw ParseError(path + ": expected " + std::string(what) + " at offset " +
                       std::to_string(pos));
    }
    return value;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ParseError(path + ": not a binary PGM (missing P5 magic at offset 0)");
  }
  pos = 2;
  long width = read_int("width");
  long height = read_int("height");
  long maxval = read_int("maxval");
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw ParseError(path + ": invalid PGM header (" + std::to_string(width) + "x" +
                     std::to_string(height) + ", maxval " + std::to_string(maxval) + ")");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ParseError(path + ": missing whitespace after header at offset " + std::to_string(pos));
  }
  ++pos;
  int bpp = maxval > 255 ? 2 : 1;
  std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                     static_cast<std::size_t>(bpp);
  if (bytes.size() - pos < need) {
    throw ParseError(path + ": pixel data truncated at offset " + std::to_string(bytes.size()) +
                     " (need " + std::to_string(pos + need) + " bytes)");
  }
  Matrix image(height, width);
  for (long r = 0; r < height; ++r) {
    for (long c = 0; c < width; ++c) {
      std::size_t at = pos + static_cast<std::size_t>(r * width + c) * static_cast<std::size_t>(bpp);
      long value = bpp == 1 ? bytes[at]
                            : (static_cast<long>(bytes[at]) << 8 | static_cast<long>(bytes[at + 1]));
      image(r, c) = static_cast<double>(value) / static_cast<double>(maxval);
    }
  }
  return image;
}

struct PreprocessSpec {
  bool zero_mean = true;
  bool unit_norm = true;
};

//! Per-sample centering and scaling: subtract the mean, then divide by the
//! Euclidean norm unless it is below 1e-12. Applying it twice is a no-op.
inline LabeledDataset preprocess(const LabeledDataset& data, const PreprocessSpec& spec = {}) {
  data.validate();
  LabeledDataset out = data;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    auto col = out.features.col(i);
    if (spec.zero_mean) col.array() -= col.mean();
    if (spec.unit_norm) {
      double norm = col.norm();
      if (norm >= 1e-12) col /= norm;
    }
  }
  return out;
}

//! Random distinct patches from a grayscale image, flattened row-major and
//! scaled to unit norm. All patches carry the given binary label.
inline LabeledDataset extract_patches(const Matrix& image, int patch, int count,
                                      std::uint64_t seed, int label) {
  if (label != 1 && label != -1) throw std::invalid_argument("extract_patches: label must be -1 or +1");
  if (patch < 1) throw std::invalid_argument("extract_patches: patch size must be >= 1");
  if (count < 1) throw std::invalid_argument("extract_patches: need at least one patch");
  if (image.rows() < patch || image.cols() < patch) {
    throw std::invalid_argument("extract_patches: patch does not fit the image");
  }
  Eigen::Index hr = image.rows() - patch + 1;
  Eigen::Index wc = image.cols() - patch + 1;
  Eigen::Index positions = hr * wc;
  if (count > positions) {
    throw std::invalid_argument("extract_patches: requested " + std::to_string(count) +
                                " patches, image has " + std::to_string(positions) +
                                " distinct positions");
  }
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(static_cast<int>(positions), count);
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(patch) * patch, count);
  out.labels = IntVector::Constant(count, label);
  out.class_ids.assign(static_cast<std::size_t>(count), label);
  for (int i = 0; i < count; ++i) {
    Eigen::Index r = picks[static_cast<std::size_t>(i)] / wc;
    Eigen::Index c = picks[static_cast<std::size_t>(i)] % wc;
    Eigen::Index f = 0;
    for (int pr = 0; pr < patch; ++pr) {
      for (int pc = 0; pc < patch; ++pc) {
        out.features(f++, i) = image(r + pr, c + pc);
      }
    }
    double norm = out.features.col(i).norm();
    if (norm >= 1e-12) out.features.col(i) /= norm;
  }
  return out;
}

enum class SynthKind { xor4, gaussians2, separable };

//! Two-dimensional synthetic sets:
//!  - xor4: four Gaussian blobs at (+-1, +-1); diagonal pairs share a label.
//!  - gaussians2: one blob per class at (-1, 0) and (+1, 0).
//!  - separable: two clamped-noise blobs with a guaranteed margin >= 4*noise.
inline LabeledDataset synth_generate(SynthKind kind, int m, double noise, std::uint64_t seed) {
  if (m < 4) throw std::invalid_argument("synth_generate: need at least four samples");
  if (!(noise >= 0)) throw std::invalid_argument("synth_generate: noise must be >= 0");
  Rng rng(seed);
  LabeledDataset data;
  data.features.resize(2, m);
  data.labels.resize(m);
  data.class_ids.resize(static_cast<std::size_t>(m));
  if (kind == SynthKind::xor4) {
    const double cx[4] = {1, -1, 1, -1};
    const double cy[4] = {1, -1, -1, 1};
    const int lab[4] = {1, 1, -1, -1};
    for (int i = 0; i < m; ++i) {
      int blob = i % 4;
      data.features(0, i) = cx[blob] + noise * rng.normal();
      data.features(1, i) = cy[blob] + noise * rng.normal();
      data.labels[i] = lab[blob];
    }
  } else if (kind == SynthKind::gaussians2) {
    for (int i = 0; i < m; ++i) {
      int label = i % 2 == 0 ? 1 : -1;
      data.features(0, i) = static_cast<double>(label) + noise * rng.normal();
      data.features(1, i) = noise * rng.normal();
      data.labels[i] = label;
    }
  } else {
    double center = 0.5 + 4.0 * noise;
    auto clamped = [&] {
      double z = noise * rng.normal();
      return std::min(std::max(z, -2.0 * noise), 2.0 * noise);
    };
    for (int i = 0; i < m; ++i) {
      int label = i % 2 == 0 ? 1 : -1;
      data.features(0, i) = static_cast<double>(label) * center + clamped();
      data.features(1, i) = clamped();
      data.labels[i] = label;
    }
  }
  for (int i = 0; i < m; ++i) data.class_ids[static_cast<std::size_t>(i)] = data.labels[i];
  return data;
}

//! Column-wise concatenation; class ids survive only if both sides have them.
inline LabeledDataset concat_datasets(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("concat_datasets: dimension mismatch");
  LabeledDataset out;
  out.features.resize(a.dim(), a.size() + b.size());
  out.features << a.features, b.features;
  out.labels.resize(a.size() + b.size());
  out.labels << a.labels, b.labels;
  if (!a.class_ids.empty() && !b.class_ids.empty()) {
    out.class_ids = a.class_ids;
    out.class_ids.insert(out.class_ids.end(), b.class_ids.begin(), b.class_ids.end());
  }
  return out;
}

//! First count samples of a dataset (deterministic truncation helper).
inline LabeledDataset head_samples(const LabeledDataset& data, Eigen::Index count) {
  if (count < 1 || count > data.size()) {
    throw std::invalid_argument("head_samples: count out of range");
  }
  LabeledDataset out;
  out.features = data.features.leftCols(count);
  out.labels = data.labels.head(count);
  if (!data.class_ids.empty()) {
    out.class_ids.assign(data.class_ids.begin(), data.class_ids.begin() + count);
  }
  return out;
}

}  // namespace last

#endif  // LAST_DATA_IO_HPP_
