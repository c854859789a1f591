#include "lfa/data.hpp"
#include "lfa/npy.hpp"

#include "doctest.h"
#include "support.hpp"

#include <fstream>
#include <iterator>
#include <set>

using namespace lfa;
using lfa::test::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

std::string error_name(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.name();
    }
    return "";
}

// A v1.0 header exactly as numpy writes it.
std::string numpy_header(const std::string& dict) {
    std::string h = dict;
    while ((10 + h.size() + 1) % 64 != 0) h += ' ';
    h += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(h.size() & 0xff);
    out += static_cast<char>(h.size() >> 8);
    return out + h;
}

Matrix sample_matrix() {
    Matrix m(2, 3);
    m << 1, 2.5, -3, 4, 5, 6.125;
    return m;
}

}  // namespace

TEST_CASE("npy encode matches the numpy layout") {
    const std::string f8 = npy::encode(sample_matrix(), npy::Dtype::f8);
    const std::string header = numpy_header("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }");
    CHECK(f8.substr(0, header.size()) == header);
    CHECK(f8.size() == header.size() + 6 * 8);
    CHECK(header.size() % 64 == 0);
    const std::string f4 = npy::encode(sample_matrix(), npy::Dtype::f4);
    CHECK(f4.size() == header.size() + 6 * 4);
    CHECK(npy::decode(f8) == sample_matrix());
    CHECK(npy::decode(f4) == sample_matrix());
}

TEST_CASE("npy decode accepts version 2 headers") {
    const std::string v1 = npy::encode(sample_matrix(), npy::Dtype::f8);
    const std::size_t hlen = static_cast<unsigned char>(v1[8]) | (static_cast<unsigned char>(v1[9]) << 8);
    std::string v2 = "\x93NUMPY";
    v2 += '\x02';
    v2 += '\x00';
    v2 += static_cast<char>(hlen & 0xff);
    v2 += static_cast<char>(hlen >> 8);
    v2 += '\x00';
    v2 += '\x00';
    v2 += v1.substr(10);
    CHECK(npy::decode(v2) == sample_matrix());
}

TEST_CASE("npy malformed inputs are rejected by name") {
    std::string good = npy::encode(sample_matrix(), npy::Dtype::f8);
    std::string bad_magic = good;
    bad_magic[1] = 'X';
    CHECK(error_name([&] { npy::decode(bad_magic); }) == "BadMagic");
    CHECK(error_name([&] { npy::decode("\x93NU"); }) == "BadMagic");

    CHECK(error_name([&] { npy::decode(numpy_header("{'descr': '<f8', 'shape': (2, 3), }")); }) == "HeaderParse");
    CHECK(error_name([&] { npy::decode(numpy_header("not a dict")); }) == "HeaderParse");
    CHECK(error_name([&] {
              npy::decode(numpy_header("{'descr': '<i4', 'fortran_order': False, 'shape': (2, 3), }") +
                          std::string(24, '\0'));
          }) == "UnsupportedDtype");
    CHECK(error_name([&] {
              npy::decode(numpy_header("{'descr': '>f8', 'fortran_order': False, 'shape': (2, 3), }") +
                          std::string(48, '\0'));
          }) == "UnsupportedDtype");
    CHECK(error_name([&] {
              npy::decode(numpy_header("{'descr': '<f8', 'fortran_order': True, 'shape': (2, 3), }") +
                          std::string(48, '\0'));
          }) != "");
    CHECK(error_name([&] { npy::decode(good.substr(0, good.size() - 8)); }) == "ShapeMismatch");
    CHECK(error_name([&] { npy::load("/nonexistent/lfa.npy"); }) == "ArchiveNotFound");
}

TEST_CASE("manifest encoding") {
    Manifest m;
    m.class_names = {"cat", "dog"};
    m.labels = std::vector<int>{1, 0};
    m.split = Split::test;
    m.source_model = "synthetic";
    const std::string text = encode_manifest(m);
    CHECK(text == "{\"labels\":[1,0],\"class_names\":[\"cat\",\"dog\"],\"split\":\"test\",\"source_model\":\"synthetic\"}\n");
    const Manifest back = decode_manifest(text);
    CHECK(back.labels == m.labels);
    CHECK(back.class_names == m.class_names);
    CHECK_FALSE(back.group_ids.has_value());
    CHECK(back.split == Split::test);
    CHECK(error_name([] { decode_manifest("{"); }) == "HeaderParse");
    CHECK(error_name([] { parse_split("holdout"); }) != "");
}

TEST_CASE("archive round trip is lossless and byte-deterministic") {
    TempDir dir("archive");
    Rng rng(71);
    const Matrix raw = gaussian_matrix(9, 5, 1.0, rng);
    Manifest m;
    m.class_names = {"a", "b", "c"};
    m.labels = std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2};
    m.group_ids = std::vector<std::int64_t>{0, 0, 1, 2, 3, 4, 5, 6, 7};
    m.source_model = "test";
    write_archive(dir / "a", raw, m);
    write_archive(dir / "b.npy", raw, m);
    CHECK(slurp(dir / "a.npy") == slurp(dir / "b.npy"));
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));

    const Archive back = read_archive(dir / "a.json");
    const Matrix widened = raw.cast<float>().cast<double>();
    CHECK(back.features.data() == l2_normalize_rows(widened));
    CHECK(back.manifest.labels == m.labels);
    CHECK(back.manifest.group_ids == m.group_ids);
    CHECK(back.labeled().labels == *m.labels);

    write_archive(dir / "c", back.features.data(), back.manifest);
    // Writing narrows to float32 again.
    CHECK((read_archive(dir / "c").features.data() - back.features.data()).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("archive validation errors") {
    TempDir dir("archive_err");
    Rng rng(72);
    Manifest m;
    m.class_names = {"a", "b"};
    m.labels = std::vector<int>{0, 2};
    write_archive(dir / "range", gaussian_matrix(2, 3, 1.0, rng), m);
    CHECK(error_name([&] { read_archive(dir / "range"); }) == "LabelOutOfRange");

    m.labels = std::vector<int>{0};
    CHECK(error_name([&] { write_archive(dir / "count", gaussian_matrix(2, 3, 1.0, rng), m); }) == "ShapeMismatch");
    write_archive(dir / "count", gaussian_matrix(1, 3, 1.0, rng), m);
    dump(dir / "count.npy", npy::encode(gaussian_matrix(2, 3, 1.0, rng), npy::Dtype::f4));
    CHECK(error_name([&] { read_archive(dir / "count"); }) == "ShapeMismatch");

    m.labels.reset();
    write_archive(dir / "nolabels", gaussian_matrix(2, 3, 1.0, rng), m);
    const Archive unlabeled = read_archive(dir / "nolabels");
    CHECK(slurp(dir / "nolabels.json").find("labels") == std::string::npos);
    CHECK(slurp(dir / "nolabels.json").find("group_ids") == std::string::npos);
    CHECK(error_name([&] { unlabeled.labeled(); }) == "MissingLabels");

    const std::string bytes = slurp(dir / "nolabels.npy");
    dump(dir / "nolabels.npy", bytes.substr(0, bytes.size() - 4));
    CHECK(error_name([&] { read_archive(dir / "nolabels"); }) == "ShapeMismatch");

    write_archive(dir / "zero", Matrix::Zero(2, 3), m);
    CHECK(error_name([&] { read_archive(dir / "zero"); }) == "ZeroRow");
    CHECK(error_name([&] { read_archive(dir / "missing"); }) == "ArchiveNotFound");
}

TEST_CASE("prototype archives") {
    TempDir dir("protos");
    Rng rng(73);
    const auto y = PrototypeMatrix::from_raw(gaussian_matrix(3, 4, 1.0, rng), {"x", "y", "z"});
    write_prototypes(dir / "p", y, "text-encoder");
    const PrototypeMatrix back = read_prototypes(dir / "p");
    CHECK(back.class_names() == y.class_names());
    CHECK((back.data() - y.data()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("few_shot_sample") {
    Rng rng(74);
    const LabeledFeatures data{FeatureMatrix::from_raw(gaussian_matrix(12, 3, 1.0, rng)),
                               {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2}};
    Rng a(5);
    const LabeledFeatures all = few_shot_sample(data, 3, 4, a);
    CHECK(all.labels == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
    std::set<std::vector<double>> rows_in, rows_out;
    for (Index i = 0; i < 12; ++i) {
        rows_in.insert({data.features.data()(i, 0), data.features.data()(i, 1), data.features.data()(i, 2)});
        rows_out.insert({all.features.data()(i, 0), all.features.data()(i, 1), all.features.data()(i, 2)});
    }
    CHECK(rows_in == rows_out);

    Rng b(6);
    Rng c(6);
    CHECK(few_shot_sample(data, 3, 2, b).features.data() == few_shot_sample(data, 3, 2, c).features.data());
    Rng d(7);
    CHECK(error_name([&] { few_shot_sample(data, 3, 5, d); }) == "InsufficientSamples");

    // Groups: shots count whole groups, and every crop of a group comes along.
    const LabeledFeatures grouped{
        FeatureMatrix::from_raw(gaussian_matrix(8, 3, 1.0, rng), std::vector<std::int64_t>{0, 0, 1, 1, 2, 2, 3, 3}),
        {0, 0, 0, 0, 1, 1, 1, 1}};
    Rng e(8);
    const LabeledFeatures g = few_shot_sample(grouped, 2, 1, e);
    REQUIRE(g.features.rows() == 4);
    const auto& ids = *g.features.group_ids();
    CHECK(ids[0] == ids[1]);
    CHECK(ids[2] == ids[3]);
    Rng f(9);
    CHECK(error_name([&] { few_shot_sample(grouped, 2, 3, f); }) == "InsufficientSamples");
}

TEST_CASE("group_aggregate") {
    Rng rng(75);
    const auto singles = FeatureMatrix::from_raw(gaussian_matrix(4, 3, 1.0, rng), std::vector<std::int64_t>{3, 1, 2, 0});
    CHECK(group_aggregate(singles, GroupMode::max).data() == singles.data());

    Matrix pair(2, 2);
    pair << 1, 0, 0, 1;
    const auto grouped = FeatureMatrix::from_raw(pair, std::vector<std::int64_t>{7, 7});
    const Matrix maxed = group_aggregate(grouped, GroupMode::max).data();
    CHECK(maxed.rows() == 1);
    CHECK(maxed(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(maxed(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    const std::vector<std::int64_t> ids{5, 2, 5, 9, 2, 5};
    const auto x = FeatureMatrix::from_raw(gaussian_matrix(6, 4, 1.0, rng), ids);
    const Matrix mean = group_aggregate(x, GroupMode::mean).data();
    REQUIRE(mean.rows() == 3);
    const std::vector<std::int64_t> order{5, 2, 9};
    for (std::size_t g = 0; g < order.size(); ++g) {
        RowVector acc = RowVector::Zero(4);
        int count = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] == order[g]) {
                acc += x.data().row(static_cast<Index>(i));
                ++count;
            }
        }
        acc /= count;
        acc.normalize();
        CHECK((mean.row(static_cast<Index>(g)) - acc).cwiseAbs().maxCoeff() < 1e-12);
    }

    const LabeledFeatures labeled{x, {0, 1, 0, 2, 1, 0}};
    CHECK(group_aggregate(labeled, GroupMode::max).labels == std::vector<int>{0, 1, 2});
    CHECK(group_aggregate(labeled, GroupMode::expand).features.rows() == 6);
    const auto plain = FeatureMatrix::from_raw(gaussian_matrix(2, 3, 1.0, rng));
    CHECK(error_name([&] { group_aggregate(plain, GroupMode::mean); }) == "MissingGroups");
}

TEST_CASE("random_projection") {
    Rng rng(76);
    const Matrix x = lfa::test::random_unit_rows(10, 64, rng);
    Rng a(3);
    Rng b(3);
    CHECK(random_projection(x, 64, a) == random_projection(x, 64, b));

    // Cosines survive a wide projection approximately.
    Rng c(4);
    const Matrix p = random_projection(x, 4096, c);
    const Matrix before = x * x.transpose();
    const Matrix after = p * p.transpose();
    CHECK((before - after).cwiseAbs().maxCoeff() < 0.1);
    for (Index i = 0; i < p.rows(); ++i) CHECK(p.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));

    Matrix with_zero = x;
    with_zero.row(3).setZero();
    Rng d(5);
    CHECK(error_name([&] { random_projection(with_zero, 16, d); }) == "ZeroRow");
}
