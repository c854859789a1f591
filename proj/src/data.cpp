#include "lfa/data.hpp"

#include "lfa/kernels.hpp"
#include "lfa/npy.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>

namespace lfa {

using json = nlohmann::ordered_json;

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw Error("HeaderParse", "unknown split '" + std::string(name) + "'");
}

namespace {

std::filesystem::path stem_of(const std::filesystem::path& path) {
    const auto ext = path.extension();
    if (ext == ".npy" || ext == ".json") {
        return std::filesystem::path(path).replace_extension();
    }
    return path;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("ArchiveNotFound", path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("IoFailure", "cannot write " + path.string());
    }
}

}  // namespace

std::filesystem::path archive_array_path(const std::filesystem::path& path) {
    return std::filesystem::path(stem_of(path)) += ".npy";
}

std::filesystem::path archive_manifest_path(const std::filesystem::path& path) {
    return std::filesystem::path(stem_of(path)) += ".json";
}

LabeledFeatures Archive::labeled() const {
    if (!manifest.labels) {
        throw Error("MissingLabels", "archive manifest has no labels");
    }
    return {features, *manifest.labels};
}

std::string encode_manifest(const Manifest& manifest) {
    json j = json::object();
    if (manifest.labels) {
        j["labels"] = *manifest.labels;
    }
    j["class_names"] = manifest.class_names;
    if (manifest.group_ids) {
        j["group_ids"] = *manifest.group_ids;
    }
    j["split"] = std::string(to_string(manifest.split));
    j["source_model"] = manifest.source_model;
    return j.dump() + "\n";
}

Manifest decode_manifest(const std::string& text) {
    Manifest m;
    try {
        const json j = json::parse(text);
        if (!j.is_object()) {
            throw Error("HeaderParse", "manifest must be a JSON object");
        }
        if (j.contains("labels") && !j.at("labels").is_null()) {
            m.labels = j.at("labels").get<std::vector<int>>();
        }
        m.class_names = j.at("class_names").get<std::vector<std::string>>();
        if (j.contains("group_ids") && !j.at("group_ids").is_null()) {
            m.group_ids = j.at("group_ids").get<std::vector<std::int64_t>>();
        }
        m.split = parse_split(j.value("split", std::string("train")));
        m.source_model = j.value("source_model", std::string());
    } catch (const json::exception& e) {
        throw Error("HeaderParse", std::string("manifest: ") + e.what());
    }
    return m;
}

void write_archive(const std::filesystem::path& path, const Matrix& features, const Manifest& manifest) {
    if (manifest.labels) {
        require_shape(static_cast<Index>(manifest.labels->size()) == features.rows(), "labels length != rows");
    }
    if (manifest.group_ids) {
        require_shape(static_cast<Index>(manifest.group_ids->size()) == features.rows(), "group_ids length != rows");
    }
    write_file(archive_array_path(path), npy::encode(features, npy::Dtype::f4));
    write_file(archive_manifest_path(path), encode_manifest(manifest));
}

Archive read_archive(const std::filesystem::path& path) {
    const Matrix raw = npy::decode(read_file(archive_array_path(path)));
    Manifest manifest = decode_manifest(read_file(archive_manifest_path(path)));
    if (manifest.labels) {
        require_shape(static_cast<Index>(manifest.labels->size()) == raw.rows(),
                      "manifest has " + std::to_string(manifest.labels->size()) + " labels for " +
                          std::to_string(raw.rows()) + " rows");
        const auto classes = static_cast<int>(manifest.class_names.size());
        for (std::size_t i = 0; i < manifest.labels->size(); ++i) {
            const int label = (*manifest.labels)[i];
            if (label < 0 || label >= classes) {
                throw Error("LabelOutOfRange", "label " + std::to_string(label) + " at row " + std::to_string(i) +
                                                   " with " + std::to_string(classes) + " classes");
            }
        }
    }
    FeatureMatrix features = FeatureMatrix::from_raw(raw, manifest.group_ids);
    return {std::move(features), std::move(manifest)};
}

PrototypeMatrix read_prototypes(const std::filesystem::path& path) {
    const Matrix raw = npy::decode(read_file(archive_array_path(path)));
    const Manifest manifest = decode_manifest(read_file(archive_manifest_path(path)));
    require_shape(static_cast<Index>(manifest.class_names.size()) == raw.rows(),
                  "prototype archive has " + std::to_string(raw.rows()) + " rows for " +
                      std::to_string(manifest.class_names.size()) + " class names");
    return PrototypeMatrix::from_raw(raw, manifest.class_names);
}

void write_prototypes(const std::filesystem::path& path, const PrototypeMatrix& y, const std::string& source_model) {
    Manifest m;
    m.class_names = y.class_names();
    m.source_model = source_model;
    write_archive(path, y.data(), m);
}

namespace {

// Sampling units: one per row, or one per group id (first-appearance order).
struct Units {
    std::vector<std::vector<Index>> rows;
    std::vector<int> label;
};

Units make_units(const LabeledFeatures& data) {
    Units u;
    const auto& groups = data.features.group_ids();
    if (!groups) {
        for (Index i = 0; i < data.features.rows(); ++i) {
            u.rows.push_back({i});
            u.label.push_back(data.labels[static_cast<std::size_t>(i)]);
        }
        return u;
    }
    std::map<std::int64_t, std::size_t> slot;
    for (Index i = 0; i < data.features.rows(); ++i) {
        const auto g = (*groups)[static_cast<std::size_t>(i)];
        auto [it, inserted] = slot.try_emplace(g, u.rows.size());
        if (inserted) {
            u.rows.emplace_back();
            u.label.push_back(data.labels[static_cast<std::size_t>(i)]);
        }
        u.rows[it->second].push_back(i);
    }
    return u;
}

}  // namespace

LabeledFeatures few_shot_sample(const LabeledFeatures& data, Index classes, int shots, Rng& rng) {
    data.validate(classes);
    if (shots < 1) {
        throw Error("InvalidConfig", "shots must be >= 1");
    }
    const Units units = make_units(data);
    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(classes));
    for (std::size_t u = 0; u < units.label.size(); ++u) {
        per_class[static_cast<std::size_t>(units.label[u])].push_back(u);
    }
    std::vector<Index> picked;
    for (Index c = 0; c < classes; ++c) {
        auto& pool = per_class[static_cast<std::size_t>(c)];
        if (pool.size() < static_cast<std::size_t>(shots)) {
            throw Error("InsufficientSamples", "class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                                                   " items, needs " + std::to_string(shots));
        }
        // Partial Fisher-Yates: position s receives the s-th draw.
        for (std::size_t s = 0; s < static_cast<std::size_t>(shots); ++s) {
            const auto r = s + static_cast<std::size_t>(rng.below(pool.size() - s));
            std::swap(pool[s], pool[r]);
            for (Index row : units.rows[pool[s]]) {
                picked.push_back(row);
            }
        }
    }
    return data.select(picked);
}

namespace {

struct GroupIndex {
    std::vector<std::vector<Index>> members;
    std::vector<std::int64_t> ids;
};

GroupIndex index_groups(const FeatureMatrix& x) {
    if (!x.group_ids()) {
        throw Error("MissingGroups", "aggregation needs group ids");
    }
    GroupIndex gi;
    std::map<std::int64_t, std::size_t> slot;
    for (Index i = 0; i < x.rows(); ++i) {
        const auto g = (*x.group_ids())[static_cast<std::size_t>(i)];
        auto [it, inserted] = slot.try_emplace(g, gi.members.size());
        if (inserted) {
            gi.members.emplace_back();
            gi.ids.push_back(g);
        }
        gi.members[it->second].push_back(i);
    }
    return gi;
}

}  // namespace

FeatureMatrix group_aggregate(const FeatureMatrix& x, GroupMode mode) {
    if (mode == GroupMode::expand) {
        return x;
    }
    const GroupIndex gi = index_groups(x);
    Matrix out(static_cast<Index>(gi.members.size()), x.dim());
    for (std::size_t g = 0; g < gi.members.size(); ++g) {
        const auto& rows = gi.members[g];
        RowVector acc = x.data().row(rows.front());
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (mode == GroupMode::max) {
                acc = acc.cwiseMax(x.data().row(rows[r]));
            } else {
                acc += x.data().row(rows[r]);
            }
        }
        if (rows.size() > 1) {
            const double norm = acc.norm();
            if (norm < kZeroNormTol) {
                throw Error("ZeroRow", "group " + std::to_string(gi.ids[g]) + " aggregates to zero");
            }
            acc /= norm;
        }
        out.row(static_cast<Index>(g)) = acc;
    }
    // Single-member groups keep their row exactly.
    return FeatureMatrix::from_unit_rows(std::move(out), gi.ids);
}

LabeledFeatures group_aggregate(const LabeledFeatures& x, GroupMode mode) {
    if (mode == GroupMode::expand) {
        return x;
    }
    const GroupIndex gi = index_groups(x.features);
    std::vector<int> labels;
    labels.reserve(gi.members.size());
    for (const auto& rows : gi.members) {
        labels.push_back(x.labels[static_cast<std::size_t>(rows.front())]);
    }
    return {group_aggregate(x.features, mode), std::move(labels)};
}

Matrix random_projection(const Matrix& x, Index d_out, Rng& rng) {
    if (d_out < 1) {
        throw Error("InvalidConfig", "projection dimension must be >= 1");
    }
    const Matrix g = gaussian_matrix(x.cols(), d_out, 1.0 / std::sqrt(static_cast<double>(d_out)), rng);
    return l2_normalize_rows(kernels::matmul(x, g));
}

}  // namespace lfa
