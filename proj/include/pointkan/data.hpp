#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pointkan/rng.hpp"
#include "pointkan/tensor.hpp"

namespace pointkan {

// Triangle mesh as parsed from an OFF file (polygons fan-triangulated).
struct Mesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
};

struct PointCloud {
    Tensor points;  // (N, 3)
    int label = 0;
};

struct Dataset {
    std::vector<PointCloud> clouds;

    std::size_t size() const { return clouds.size(); }
    int num_classes() const;
};

class OffParseError : public std::runtime_error {
public:
    OffParseError(std::size_t line, const std::string& what)
        : std::runtime_error("OFF parse error at line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// ASCII OFF reader. Accepts the fused-header form ("OFF490 518 0" on one
// line), '#' comments, and polygon faces of arity >= 3.
Mesh parse_off(std::string_view text);
Mesh load_off(const std::filesystem::path& path);

// Area-weighted i.i.d. surface sampling; position inside the chosen triangle
// uses the (u, v) reflection trick. Deterministic per rng state.
Tensor sample_surface(const Mesh& mesh, std::size_t n, Rng& rng);

// Center at the centroid, then scale so the farthest point sits on the unit
// sphere. Errors when every point coincides.
void normalize_sphere(Tensor& points);

// Train-time augmentation: per-axis scale ~ U[2/3, 3/2], then per-axis shift
// ~ U[-0.2, 0.2]. Draw order is scale x,y,z then shift x,y,z.
void augment(Tensor& points, Rng& rng);

// Labeled synthetic shapes (sphere, cube, cylinder, torus), normalized and
// class-balanced; per-cloud substreams make the result independent of
// generation order.
Dataset synth_dataset(std::size_t num_per_class, std::size_t n_points, std::uint64_t seed,
                      std::size_t num_classes = 4);

extern const char* const kSynthClassNames[4];

// Binary cloud cache ("KDC1", f32 little-endian payload). Write/read
// round-trips bit-exactly.
void write_cache(const std::filesystem::path& path, const Dataset& ds);
Dataset read_cache(const std::filesystem::path& path);

// ModelNet-style tree (class/train|test/*.off) -> train/test caches plus a
// classes.txt mapping (index = sorted class-name order).
struct ConvertStats {
    std::size_t classes = 0;
    std::size_t train_meshes = 0;
    std::size_t test_meshes = 0;
};
ConvertStats convert_tree(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                          std::size_t points, std::uint64_t seed);

}  // namespace pointkan
