// Feature archives, few-shot sampling, crop/frame grouping and random projection.
//
// An archive is a pair of files sharing a stem: `<stem>.npy` holds the N x d
// float32 feature rows, `<stem>.json` the manifest
//   {"labels": [...], "class_names": [...], "group_ids": [...],
//    "split": "train"|"val"|"test", "source_model": "..."}
// where labels and group_ids are omitted when absent. Prototype archives use
// the same layout with one row per class name.
#pragma once

#include "lfa/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lfa {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Manifest {
    std::optional<std::vector<int>> labels;
    std::vector<std::string> class_names;
    std::optional<std::vector<std::int64_t>> group_ids;
    Split split = Split::train;
    std::string source_model;
};

struct Archive {
    FeatureMatrix features;
    Manifest manifest;

    /// Throws MissingLabels when the manifest carries no labels.
    LabeledFeatures labeled() const;
};

/// "<stem>.npy" and "<stem>.json" for a stem or for either file name.
std::filesystem::path archive_array_path(const std::filesystem::path& path);
std::filesystem::path archive_manifest_path(const std::filesystem::path& path);

/// Serialized manifest (compact JSON, fixed key order, trailing newline).
std::string encode_manifest(const Manifest& manifest);
Manifest decode_manifest(const std::string& text);

/// Writes both files; identical inputs give byte-identical files. Throws IoFailure.
void write_archive(const std::filesystem::path& path, const Matrix& features, const Manifest& manifest);

/// Reads, validates and normalizes an archive. Errors: ArchiveNotFound,
/// BadMagic, HeaderParse, ShapeMismatch, LabelOutOfRange, ZeroRow.
Archive read_archive(const std::filesystem::path& path);

/// Reads a prototype archive (row count must equal the number of class names).
PrototypeMatrix read_prototypes(const std::filesystem::path& path);
void write_prototypes(const std::filesystem::path& path, const PrototypeMatrix& y, const std::string& source_model);

/// Exactly `shots` items per class, drawn without replacement, ordered by class
/// then draw order. When group ids are present an item is a whole group (all
/// crops of one image) and `shots` counts groups. Throws InsufficientSamples.
LabeledFeatures few_shot_sample(const LabeledFeatures& data, Index classes, int shots, Rng& rng);

enum class GroupMode { max, mean, expand };

/// max / mean: one row per group (first-appearance order), elementwise
/// reduction then renormalization; expand returns the input. Throws MissingGroups.
FeatureMatrix group_aggregate(const FeatureMatrix& x, GroupMode mode);
/// Same, carrying the label of each group's first row.
LabeledFeatures group_aggregate(const LabeledFeatures& x, GroupMode mode);

/// x * G with G_ij ~ N(0, 1 / d_out), rows renormalized. A zero input row
/// surfaces as ZeroRow.
Matrix random_projection(const Matrix& x, Index d_out, Rng& rng);

}  // namespace lfa
