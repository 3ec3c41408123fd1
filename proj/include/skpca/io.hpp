#pragma once

// Dataset ingestion (CSV and IDX) and the binary model file.
//
// Model file layout, all numbers little-endian with explicit widths:
//
//   "SKPCA"  u8 version  u8 flags(bit0: exact potential)
//   f64 sigma_sq  u32 q  u32 dim  u64 n_train  f64 threshold  f64 grand_mean
//   f64 potential_error_bound
//   u64 r, then r x { i64 id, u64 train_index, f64 row_mean, dim x f64 }
//   u64 nnz, then nnz x { u32 point, u32 pc, f64 value }
//   u64 p, then p x { f64 weight, dim x f64 }
//   u32 dropped count, then u32 each
//   u32 metadata length, utf-8 bytes
//   u32 crc32 of everything above

#include "skpca/detector.hpp"
#include "skpca/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace skpca {

struct LabeledRows {
    RowMatrix rows;
    std::vector<std::string> labels;
    std::vector<std::string> feature_names;
};

struct DatasetSpec {
    enum class Format { csv, idx };
    Format format = Format::csv;
    std::filesystem::path data;    // CSV file or IDX images
    std::filesystem::path labels;  // IDX labels
    std::string label_column = "label";
    std::string inlier_label = "0";   // comma-separated list
    std::string outlier_label = "*";  // comma-separated list, "*" = every non-inlier label
    SplitCounts counts;
    std::uint64_t seed = 0;
};

/// Header row required. When label_column is empty, every column is a feature
/// and labels are left empty.
LabeledRows read_csv(const std::filesystem::path& path, const std::string& label_column);
void write_csv(const std::filesystem::path& path, const LabeledRows& data,
               const std::string& label_column);

/// Pixels scaled to [0, 1]; labels are the decimal class indices.
LabeledRows read_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Splits rows into inlier and outlier pools by label selector.
DatasetPool make_pool(const LabeledRows& data, const std::string& inlier_label,
                      const std::string& outlier_label);

LabeledRows read_dataset(const DatasetSpec& spec);
DatasetPool load_pool(const DatasetSpec& spec);

Split load_csv(const std::filesystem::path& path, const DatasetSpec& spec);
Split load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const DatasetSpec& spec);

inline constexpr std::uint8_t kModelVersion = 1;

std::string encode_model(const DetectorModel& model, const std::string& metadata = {});
DetectorModel decode_model(const std::string& bytes, std::string* metadata = nullptr);

void save_model(const DetectorModel& model, const std::filesystem::path& path,
                const std::string& metadata = {});
DetectorModel load_model(const std::filesystem::path& path, std::string* metadata = nullptr);

/// Writes through a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace skpca
