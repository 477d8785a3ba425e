#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "semap/errors.hpp"
#include "semap/ply_io.hpp"

using namespace semap;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/semap_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

LabeledPointCloud random_cloud(int n, bool with_labels, bool with_colors, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-10.0f, 10.0f);
    LabeledPointCloud cloud;
    cloud.points.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        // float-representable coordinates so the 32-bit file round-trips
        // without rounding
        cloud.points.col(i) = Eigen::Vector3d(u(rng), u(rng), u(rng));
        if (with_labels) {
            cloud.labels.push_back(static_cast<std::uint16_t>(rng() % 5));
        }
        if (with_colors) {
            cloud.colors.push_back({static_cast<std::uint8_t>(rng() % 256),
                                    static_cast<std::uint8_t>(rng() % 256),
                                    static_cast<std::uint8_t>(rng() % 256)});
        }
    }
    return cloud;
}

}  // namespace

TEST_CASE("binary PLY round trip preserves coordinates, labels, and colors") {
    const LabeledPointCloud cloud = random_cloud(257, true, true, 11);
    TempFile f("roundtrip.ply");
    save_ply(cloud, f.path);
    const LabeledPointCloud back = load_ply(f.path);
    REQUIRE(back.n() == cloud.n());
    CHECK(back.points == cloud.points);  // float32-representable, hence bit-exact
    CHECK(back.labels == cloud.labels);
    CHECK(back.colors == cloud.colors);
}

TEST_CASE("empty cloud round-trips") {
    LabeledPointCloud cloud;
    cloud.points.resize(3, 0);
    TempFile f("empty.ply");
    save_ply(cloud, f.path);
    const LabeledPointCloud back = load_ply(f.path);
    CHECK(back.n() == 0);
    CHECK(!back.has_labels());
    CHECK(!back.has_colors());
}

TEST_CASE("the unlabeled sentinel survives the file format") {
    LabeledPointCloud cloud;
    cloud.points.resize(3, 3);
    cloud.points << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    cloud.labels = {1, 2, kUnlabeled};
    TempFile f("sentinel.ply");
    save_ply(cloud, f.path);
    const LabeledPointCloud back = load_ply(f.path);
    REQUIRE(back.has_labels());
    CHECK(back.labels == std::vector<std::uint16_t>{1, 2, kUnlabeled});
    CHECK(!back.is_labeled(2));
    CHECK(back.is_labeled(0));
}

TEST_CASE("ascii PLY with extra properties and doubles parses") {
    TempFile f("ascii.ply");
    write_text(f.path,
               "ply\n"
               "format ascii 1.0\n"
               "comment made by hand\n"
               "element vertex 2\n"
               "property double x\n"
               "property double y\n"
               "property double z\n"
               "property float confidence\n"
               "property ushort label\n"
               "end_header\n"
               "0.5 -1.25 3.0 0.9 4\n"
               "1.5 2.5 -0.125 0.1 65535\n");
    const LabeledPointCloud cloud = load_ply(f.path);
    REQUIRE(cloud.n() == 2);
    CHECK(cloud.points(0, 0) == 0.5);
    CHECK(cloud.points(1, 0) == -1.25);
    CHECK(cloud.points(2, 1) == -0.125);
    CHECK(cloud.labels == std::vector<std::uint16_t>{4, kUnlabeled});
}

TEST_CASE("file without a label property loads as fully unlabeled") {
    TempFile f("nolabel.ply");
    write_text(f.path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n1 2 3\n");
    const LabeledPointCloud cloud = load_ply(f.path);
    CHECK(cloud.n() == 1);
    CHECK(!cloud.has_labels());
}

TEST_CASE("trailing face elements are tolerated") {
    TempFile f("faces.ply");
    write_text(f.path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "element face 1\nproperty list uchar int vertex_indices\n"
               "end_header\n1 2 3\n3 0 0 0\n");
    const LabeledPointCloud cloud = load_ply(f.path);
    CHECK(cloud.n() == 1);
}

TEST_CASE("malformed PLY inputs raise parse errors with byte offsets") {
    TempFile f("bad.ply");

    SUBCASE("wrong magic") {
        write_text(f.path, "obj\nformat ascii 1.0\nend_header\n");
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("unsupported format") {
        write_text(f.path, "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
        try {
            load_ply(f.path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() == 4);  // the format line starts after "ply\n"
        }
    }
    SUBCASE("list property on the vertex element") {
        write_text(f.path,
                   "ply\nformat ascii 1.0\nelement vertex 1\n"
                   "property list uchar float weights\nend_header\n");
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("missing coordinate properties") {
        write_text(f.path,
                   "ply\nformat ascii 1.0\nelement vertex 1\n"
                   "property float x\nproperty float y\nend_header\n1 2\n");
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("truncated binary body") {
        LabeledPointCloud cloud = random_cloud(4, false, false, 3);
        save_ply(cloud, f.path);
        std::ifstream in(f.path, std::ios::binary);
        std::string contents((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
        in.close();
        write_text(f.path, contents.substr(0, contents.size() - 5));
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("truncated ascii body") {
        write_text(f.path,
                   "ply\nformat ascii 1.0\nelement vertex 2\n"
                   "property float x\nproperty float y\nproperty float z\n"
                   "end_header\n1 2 3\n4 5\n");
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("header cut off mid-way") {
        write_text(f.path, "ply\nformat ascii 1.0\nelement vertex 2\n");
        CHECK_THROWS_AS(load_ply(f.path), ParseError);
    }
    SUBCASE("missing file is an input error, not a parse error") {
        CHECK_THROWS_AS(load_ply("/tmp/definitely_missing.ply"), InputError);
    }
}
