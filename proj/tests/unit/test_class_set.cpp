#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "semap/class_set.hpp"
#include "semap/errors.hpp"

using namespace semap;

namespace {

/// Temp file path that cleans itself up.
struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/semap_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("class set preserves order and resolves ids") {
    const ClassSet cs({{5, "floor", {10, 20, 30}}, {2, "wall", {1, 2, 3}}, {9, "box", {4, 5, 6}}});
    CHECK(cs.size() == 3);
    CHECK(cs.at(0).name == "floor");
    CHECK(cs.index_of(5) == 0);
    CHECK(cs.index_of(2) == 1);
    CHECK(cs.index_of(9) == 2);
    CHECK(!cs.index_of(7).has_value());
    CHECK(cs.contains(2));
    CHECK(!cs.contains(0));
}

TEST_CASE("class set rejects duplicates and degenerate sizes") {
    CHECK_THROWS_AS(ClassSet({{1, "a", {}}, {1, "b", {}}}), InputError);
    CHECK_THROWS_AS(ClassSet({{1, "only", {}}}), InputError);
    CHECK_THROWS_AS(ClassSet(std::vector<ClassInfo>{}), InputError);
}

TEST_CASE("class set JSON round trip") {
    const ClassSet cs({{1, "floor", {120, 90, 60}}, {2, "wall", {200, 200, 200}}});
    const ClassSet back = ClassSet::parse_json(cs.to_json());
    CHECK(back == cs);

    TempFile f("classes.json");
    cs.save_json(f.path);
    CHECK(ClassSet::load_json(f.path) == cs);
}

TEST_CASE("class set JSON accepts missing color and rejects malformed input") {
    const ClassSet cs = ClassSet::parse_json(
        R"([{"id": 1, "name": "a"}, {"id": 2, "name": "b", "color": [9, 8, 7]}])");
    CHECK(cs.at(0).color == std::array<std::uint8_t, 3>{128, 128, 128});
    CHECK(cs.at(1).color == std::array<std::uint8_t, 3>{9, 8, 7});

    CHECK_THROWS_AS(ClassSet::parse_json("not json"), ParseError);
    CHECK_THROWS_AS(ClassSet::parse_json(R"({"id": 1})"), ParseError);
    CHECK_THROWS_AS(ClassSet::parse_json(R"([{"id": 1}])"), ParseError);
    CHECK_THROWS_AS(ClassSet::parse_json(R"([{"id": 70000, "name": "x"}])"), ParseError);
    CHECK_THROWS_AS(ClassSet::parse_json(R"([{"id": 65535, "name": "x"}])"), ParseError);
    CHECK_THROWS_AS(
        ClassSet::parse_json(R"([{"id": 1, "name": "x", "color": [0, 0]}])"), ParseError);
    CHECK_THROWS_AS(
        ClassSet::parse_json(R"([{"id": 1, "name": "x", "color": [0, 0, 300]}])"), ParseError);
}

TEST_CASE("class set load reports missing files") {
    CHECK_THROWS_AS(ClassSet::load_json("/tmp/definitely_missing_classes.json"), InputError);
}
