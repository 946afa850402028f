#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "pointkan/data.hpp"
#include "pointkan/rng.hpp"

using namespace pointkan;
namespace fs = std::filesystem;

namespace {

const char* kTetrahedron =
    "OFF\n"
    "4 4 6\n"
    "0 0 0\n"
    "1 0 0\n"
    "0 1 0\n"
    "0 0 1\n"
    "3 0 1 2\n"
    "3 0 1 3\n"
    "3 0 2 3\n"
    "3 1 2 3\n";

fs::path temp_dir(const char* leaf) {
    const fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("parse_off on a unit tetrahedron") {
    const Mesh m = parse_off(kTetrahedron);
    CHECK(m.vertices.size() == 4);
    CHECK(m.faces.size() == 4);
    CHECK(m.vertices[3][2] == 1.0);
    CHECK(m.faces[0][0] == 0);
    CHECK(m.faces[3][2] == 3);
}

TEST_CASE("parse_off fan-triangulates a quad") {
    const Mesh m = parse_off(
        "OFF\n"
        "4 1 0\n"
        "0 0 0\n"
        "1 0 0\n"
        "1 1 0\n"
        "0 1 0\n"
        "4 0 1 2 3\n");
    CHECK(m.vertices.size() == 4);
    REQUIRE(m.faces.size() == 2);
    CHECK(m.faces[0] == std::array<std::uint32_t, 3>{0, 1, 2});
    CHECK(m.faces[1] == std::array<std::uint32_t, 3>{0, 2, 3});
}

TEST_CASE("parse_off accepts the fused-header quirk") {
    const Mesh m = parse_off(
        "OFF3 1 0\n"
        "0 0 0\n"
        "1 0 0\n"
        "0 1 0\n"
        "3 0 1 2\n");
    CHECK(m.vertices.size() == 3);
    CHECK(m.faces.size() == 1);
}

TEST_CASE("parse_off skips comments and blank lines") {
    const Mesh m = parse_off(
        "# generated fixture\n"
        "OFF\n"
        "\n"
        "3 1 0  # counts\n"
        "0 0 0\n"
        "1 0 0\n"
        "0 1 0\n"
        "3 0 1 2\n"
        "\n");
    CHECK(m.vertices.size() == 3);
}

TEST_CASE("parse_off rejects malformed input with line numbers") {
    SUBCASE("missing header") {
        CHECK_THROWS_WITH_AS(parse_off("3 1 0\n0 0 0\n"), doctest::Contains("line 1"),
                             OffParseError);
    }
    SUBCASE("bad counts") {
        CHECK_THROWS_WITH_AS(parse_off("OFF\n3 x 0\n"), doctest::Contains("line 2"),
                             OffParseError);
    }
    SUBCASE("vertex index out of range") {
        const char* text =
            "OFF\n"
            "3 1 0\n"
            "0 0 0\n"
            "1 0 0\n"
            "0 1 0\n"
            "3 0 1 9\n";
        CHECK_THROWS_WITH_AS(parse_off(text), doctest::Contains("line 6"), OffParseError);
        CHECK_THROWS_WITH_AS(parse_off(text), doctest::Contains("out of range"), OffParseError);
    }
    SUBCASE("arity below three") {
        const char* text =
            "OFF\n"
            "3 1 0\n"
            "0 0 0\n"
            "1 0 0\n"
            "0 1 0\n"
            "2 0 1\n";
        CHECK_THROWS_WITH_AS(parse_off(text), doctest::Contains("arity"), OffParseError);
    }
    SUBCASE("truncated vertex list") {
        CHECK_THROWS_WITH_AS(parse_off("OFF\n4 1 0\n0 0 0\n"),
                             doctest::Contains("unexpected end"), OffParseError);
    }
}

TEST_CASE("sample_surface keeps samples inside a single triangle") {
    Mesh m;
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 3, 0}};
    m.faces = {{0, 1, 2}};
    Rng rng(5);
    const Tensor pts = sample_surface(m, 500, rng);
    for (std::size_t i = 0; i < 500; ++i) {
        const double x = pts.at(i, std::size_t{0});
        const double y = pts.at(i, std::size_t{1});
        // barycentric for this right triangle: u = x/2, v = y/3
        const double u = x / 2.0;
        const double v = y / 3.0;
        CHECK(u >= 0.0);
        CHECK(v >= 0.0);
        CHECK(u + v <= 1.0 + 1e-9);
        CHECK(pts.at(i, std::size_t{2}) == 0.0);
    }
}

TEST_CASE("sample_surface selects triangles proportionally to area") {
    Mesh m;
    // area 1 and area 3 triangles, separated in z
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 5}, {3, 0, 5}, {0, 2, 5}};
    m.faces = {{0, 1, 2}, {3, 4, 5}};
    Rng rng(7);
    const Tensor pts = sample_surface(m, 10000, rng);
    std::size_t large = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
        if (pts.at(i, std::size_t{2}) > 2.5) ++large;
    }
    const double frac = static_cast<double>(large) / 10000.0;
    CHECK(frac == doctest::Approx(0.75).epsilon(0.04));
}

TEST_CASE("sample_surface is deterministic per seed and rejects empty meshes") {
    const Mesh m = parse_off(kTetrahedron);
    Rng a(11);
    Rng b(11);
    const Tensor p1 = sample_surface(m, 64, a);
    const Tensor p2 = sample_surface(m, 64, b);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);

    Mesh degenerate;
    degenerate.vertices = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
    degenerate.faces = {{0, 1, 2}};
    Rng c(13);
    CHECK_THROWS_AS(sample_surface(degenerate, 8, c), std::runtime_error);
}

TEST_CASE("normalize_sphere frozen example and postconditions") {
    Tensor pts({2, 3}, {0, 0, 0, 2, 0, 0});
    normalize_sphere(pts);
    CHECK(pts.at(std::size_t{0}, std::size_t{0}) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(pts.at(std::size_t{1}, std::size_t{0}) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(17);
    Tensor cloud({50, 3});
    for (std::size_t i = 0; i < cloud.size(); ++i) cloud[i] = rng.uniform(-4.0, 9.0);
    normalize_sphere(cloud);
    double centroid[3] = {0, 0, 0};
    double max_norm = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        double s = 0.0;
        for (std::size_t a = 0; a < 3; ++a) {
            centroid[a] += cloud.at(i, a);
            s += cloud.at(i, a) * cloud.at(i, a);
        }
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    for (double c : centroid) CHECK(std::abs(c / 50.0) < 1e-6);
    CHECK(std::abs(max_norm - 1.0) < 1e-9);

    // idempotence
    Tensor again = cloud;
    normalize_sphere(again);
    for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(std::abs(again[i] - cloud[i]) < 1e-12);
}

TEST_CASE("normalize_sphere rejects coincident points") {
    Tensor pts({3, 3});
    pts.fill(2.5);
    CHECK_THROWS_AS(normalize_sphere(pts), std::runtime_error);
}

TEST_CASE("augment stays inside the documented ranges and is seed-deterministic") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        // probe points recover the affine map: p=(0,0,0) gives the shift,
        // p=(1,1,1) gives scale+shift
        Tensor pts({2, 3}, {0, 0, 0, 1, 1, 1});
        Rng rng(seed);
        augment(pts, rng);
        for (std::size_t a = 0; a < 3; ++a) {
            const double shift = pts.at(std::size_t{0}, a);
            const double scale = pts.at(std::size_t{1}, a) - shift;
            CHECK(shift >= -0.2);
            CHECK(shift <= 0.2);
            CHECK(scale >= 2.0 / 3.0 - 1e-12);
            CHECK(scale <= 1.5 + 1e-12);
        }
    }
    Tensor a({2, 3}, {0, 0, 0, 1, 1, 1});
    Tensor b = a;
    Rng r1(99);
    Rng r2(99);
    augment(a, r1);
    augment(b, r2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("synth_dataset balance, labels, and determinism") {
    const Dataset ds = synth_dataset(50, 64, 21);
    CHECK(ds.size() == 200);
    CHECK(ds.num_classes() == 4);
    std::size_t counts[4] = {0, 0, 0, 0};
    for (const PointCloud& c : ds.clouds) {
        REQUIRE(c.label >= 0);
        REQUIRE(c.label < 4);
        ++counts[c.label];
        CHECK(c.points.dim(0) == 64);
    }
    for (std::size_t c : counts) CHECK(c == 50);

    const Dataset again = synth_dataset(50, 64, 21);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.clouds[i].points.size(); ++j) {
            CHECK(ds.clouds[i].points[j] == again.clouds[i].points[j]);
        }
    }
}

TEST_CASE("synth sphere points lie on a thin shell") {
    const Dataset ds = synth_dataset(3, 256, 23, 1);  // spheres only
    for (const PointCloud& c : ds.clouds) {
        // radial band [0.98, 1.02] before normalization; centering around the
        // sample centroid (magnitude ~1/sqrt(N)) widens it by roughly 2/sqrt(N)
        for (std::size_t i = 0; i < c.points.dim(0); ++i) {
            double s = 0.0;
            for (std::size_t a = 0; a < 3; ++a) s += c.points.at(i, a) * c.points.at(i, a);
            const double r = std::sqrt(s);
            CHECK(r > 0.8);
            CHECK(r <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("cache round-trip is bit-exact") {
    const fs::path dir = temp_dir("pointkan_test_cache");
    const Dataset ds = synth_dataset(5, 32, 29);
    const fs::path p1 = dir / "a.kdc";
    const fs::path p2 = dir / "b.kdc";
    write_cache(p1, ds);
    const Dataset loaded = read_cache(p1);
    REQUIRE(loaded.size() == ds.size());
    write_cache(p2, loaded);
    CHECK(read_bytes(p1) == read_bytes(p2));

    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(loaded.clouds[i].label == ds.clouds[i].label);
    }
}

TEST_CASE("cache reader rejects corruption") {
    const fs::path dir = temp_dir("pointkan_test_cache_bad");
    const Dataset ds = synth_dataset(2, 8, 31);
    const fs::path p = dir / "c.kdc";
    write_cache(p, ds);
    std::string bytes = read_bytes(p);

    SUBCASE("magic") {
        bytes[0] = 'Z';
        const fs::path bad = dir / "bad.kdc";
        std::ofstream(bad, std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(read_cache(bad), doctest::Contains("magic"), std::runtime_error);
    }
    SUBCASE("truncated") {
        bytes.resize(bytes.size() - 5);
        const fs::path bad = dir / "short.kdc";
        std::ofstream(bad, std::ios::binary)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(read_cache(bad), doctest::Contains("truncated"), std::runtime_error);
    }
}

TEST_CASE("convert_tree maps sorted class names to labels") {
    const fs::path root = temp_dir("pointkan_test_tree");
    const fs::path out = temp_dir("pointkan_test_tree_out");
    for (const char* cls : {"zebra", "anchor"}) {
        for (const char* split : {"train", "test"}) {
            fs::create_directories(root / cls / split);
        }
    }
    auto write_off = [&](const fs::path& p) { std::ofstream(p) << kTetrahedron; };
    write_off(root / "anchor" / "train" / "a1.off");
    write_off(root / "anchor" / "train" / "a2.off");
    write_off(root / "anchor" / "test" / "a3.off");
    write_off(root / "zebra" / "train" / "z1.off");
    write_off(root / "zebra" / "test" / "z2.off");

    const ConvertStats stats = convert_tree(root, out, 32, 7);
    CHECK(stats.classes == 2);
    CHECK(stats.train_meshes == 3);
    CHECK(stats.test_meshes == 2);

    const Dataset train = read_cache(out / "train.kdc");
    REQUIRE(train.size() == 3);
    CHECK(train.clouds[0].label == 0);  // anchor sorts first
    CHECK(train.clouds[2].label == 1);

    std::ifstream cf(out / "classes.txt");
    std::string first, second;
    std::getline(cf, first);
    std::getline(cf, second);
    CHECK(first == "anchor");
    CHECK(second == "zebra");

    // deterministic per seed
    const fs::path out2 = temp_dir("pointkan_test_tree_out2");
    convert_tree(root, out2, 32, 7);
    CHECK(read_bytes(out / "train.kdc") == read_bytes(out2 / "train.kdc"));
    CHECK(read_bytes(out / "test.kdc") == read_bytes(out2 / "test.kdc"));

    CHECK_THROWS_AS(convert_tree(root / "missing", out, 32, 7), std::runtime_error);
}
