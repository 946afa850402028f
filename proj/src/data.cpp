#include "pointkan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pointkan/util.hpp"

namespace pointkan {

int Dataset::num_classes() const {
    int max_label = -1;
    for (const PointCloud& c : clouds) max_label = std::max(max_label, c.label);
    return max_label + 1;
}

// --- OFF parsing ---

namespace {

struct OffLine {
    std::size_t number = 0;  // 1-based position in the original text
    std::string text;
};

std::vector<OffLine> meaningful_lines(std::string_view text) {
    std::vector<OffLine> out;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        ++lineno;
        const std::size_t hash = raw.find('#');
        if (hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::size_t b = 0;
        std::size_t e = raw.size();
        while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (e > b) out.push_back({lineno, std::string(raw.substr(b, e - b))});
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return out;
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

long parse_count(const std::string& tok, std::size_t line, const char* what) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        throw OffParseError(line, std::string("invalid ") + what + " '" + tok + "'");
    }
    if (used != tok.size() || v < 0) {
        throw OffParseError(line, std::string("invalid ") + what + " '" + tok + "'");
    }
    return v;
}

double parse_real(const std::string& tok, std::size_t line) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw OffParseError(line, "invalid coordinate '" + tok + "'");
    }
    if (used != tok.size()) throw OffParseError(line, "invalid coordinate '" + tok + "'");
    return v;
}

}  // namespace

Mesh parse_off(std::string_view text) {
    const std::vector<OffLine> lines = meaningful_lines(text);
    if (lines.empty()) throw OffParseError(1, "empty file");

    std::size_t cursor = 0;
    std::vector<std::string> counts_toks;
    std::size_t counts_line = lines[0].number;

    std::vector<std::string> first = tokens(lines[0].text);
    if (first.empty() || first[0].rfind("OFF", 0) != 0) {
        throw OffParseError(lines[0].number, "missing OFF header");
    }
    if (first[0] == "OFF" && first.size() == 1) {
        // header alone; counts on the next line
        ++cursor;
        if (cursor >= lines.size()) throw OffParseError(lines[0].number, "missing counts line");
        counts_toks = tokens(lines[cursor].text);
        counts_line = lines[cursor].number;
        ++cursor;
    } else {
        // fused form: "OFF490 518 0" or "OFF 490 518 0"
        first[0].erase(0, 3);
        if (first[0].empty()) first.erase(first.begin());
        counts_toks = first;
        counts_line = lines[0].number;
        ++cursor;
    }

    if (counts_toks.size() != 3) {
        throw OffParseError(counts_line, "expected 'V F E' counts, got " +
                                             std::to_string(counts_toks.size()) + " fields");
    }
    const long nv = parse_count(counts_toks[0], counts_line, "vertex count");
    const long nf = parse_count(counts_toks[1], counts_line, "face count");
    parse_count(counts_toks[2], counts_line, "edge count");  // ignored

    Mesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long v = 0; v < nv; ++v) {
        if (cursor >= lines.size()) {
            throw OffParseError(lines.back().number, "unexpected end of file in vertex list");
        }
        const OffLine& ln = lines[cursor++];
        const std::vector<std::string> toks = tokens(ln.text);
        if (toks.size() != 3) {
            throw OffParseError(ln.number, "expected 3 vertex coordinates, got " +
                                               std::to_string(toks.size()));
        }
        mesh.vertices.push_back(
            {parse_real(toks[0], ln.number), parse_real(toks[1], ln.number),
             parse_real(toks[2], ln.number)});
    }

    for (long fi = 0; fi < nf; ++fi) {
        if (cursor >= lines.size()) {
            throw OffParseError(lines.back().number, "unexpected end of file in face list");
        }
        const OffLine& ln = lines[cursor++];
        const std::vector<std::string> toks = tokens(ln.text);
        if (toks.empty()) throw OffParseError(ln.number, "empty face line");
        const long arity = parse_count(toks[0], ln.number, "face arity");
        if (arity < 3) {
            throw OffParseError(ln.number, "face arity " + std::to_string(arity) + " < 3");
        }
        if (toks.size() != static_cast<std::size_t>(arity) + 1) {
            throw OffParseError(ln.number, "face lists " + std::to_string(toks.size() - 1) +
                                               " indices, arity says " + std::to_string(arity));
        }
        std::vector<std::uint32_t> poly(static_cast<std::size_t>(arity));
        for (long a = 0; a < arity; ++a) {
            const long idx = parse_count(toks[static_cast<std::size_t>(a) + 1], ln.number,
                                         "vertex index");
            if (idx >= nv) {
                throw OffParseError(ln.number, "vertex index " + std::to_string(idx) +
                                                   " out of range [0, " + std::to_string(nv) + ")");
            }
            poly[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(idx);
        }
        for (std::size_t a = 1; a + 1 < poly.size(); ++a) {
            mesh.faces.push_back({poly[0], poly[a], poly[a + 1]});
        }
    }

    if (cursor != lines.size()) {
        throw OffParseError(lines[cursor].number, "trailing content after face list");
    }
    return mesh;
}

Mesh load_off(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_off: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return parse_off(text);
    } catch (const OffParseError& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

// --- sampling and normalization ---

Tensor sample_surface(const Mesh& mesh, std::size_t n, Rng& rng) {
    std::vector<double> cumulative;
    cumulative.reserve(mesh.faces.size());
    double total = 0.0;
    for (const auto& face : mesh.faces) {
        const auto& a = mesh.vertices[face[0]];
        const auto& b = mesh.vertices[face[1]];
        const auto& c = mesh.vertices[face[2]];
        const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
        const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
        const double cx = uy * vz - uz * vy;
        const double cy = uz * vx - ux * vz;
        const double cz = ux * vy - uy * vx;
        total += 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw std::runtime_error("sample_surface: mesh has zero surface area");

    Tensor out({n, 3});
    for (std::size_t s = 0; s < n; ++s) {
        const double r = rng.uniform() * total;
        const std::size_t t = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
        const auto& face = mesh.faces[std::min(t, mesh.faces.size() - 1)];
        const auto& a = mesh.vertices[face[0]];
        const auto& b = mesh.vertices[face[1]];
        const auto& c = mesh.vertices[face[2]];
        double u = rng.uniform();
        double v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        double* p = out.data() + s * 3;
        for (int d = 0; d < 3; ++d) {
            p[d] = a[d] + u * (b[d] - a[d]) + v * (c[d] - a[d]);
        }
    }
    return out;
}

void normalize_sphere(Tensor& points) {
    if (points.rank() != 2 || points.dim(1) != 3 || points.dim(0) == 0) {
        throw std::invalid_argument("normalize_sphere: expected nonempty (N, 3) tensor");
    }
    const std::size_t n = points.dim(0);
    double centroid[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) centroid[d] += points[i * 3 + d];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    double max_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double v = points[i * 3 + d] - centroid[d];
            s += v * v;
        }
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    if (max_norm < 1e-12) {
        throw std::runtime_error("normalize_sphere: all points coincide");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) {
            points[i * 3 + d] = (points[i * 3 + d] - centroid[d]) / max_norm;
        }
    }
}

void augment(Tensor& points, Rng& rng) {
    double scale[3];
    double shift[3];
    for (double& s : scale) s = rng.uniform(2.0 / 3.0, 3.0 / 2.0);
    for (double& t : shift) t = rng.uniform(-0.2, 0.2);
    const std::size_t n = points.dim(0);
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 3; ++d) {
            points[i * 3 + d] = points[i * 3 + d] * scale[d] + shift[d];
        }
    }
}

// --- synthetic shapes ---

const char* const kSynthClassNames[4] = {"sphere", "cube", "cylinder", "torus"};

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kJitter = 0.02;

void unit_direction(Rng& rng, double* out) {
    double norm = 0.0;
    do {
        for (int d = 0; d < 3; ++d) out[d] = rng.normal();
        norm = std::sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2]);
    } while (norm < 1e-9);
    for (int d = 0; d < 3; ++d) out[d] /= norm;
}

void gen_sphere(Rng& rng, double* p) {
    double dir[3];
    unit_direction(rng, dir);
    const double r = 1.0 + rng.uniform(-kJitter, kJitter);
    for (int d = 0; d < 3; ++d) p[d] = r * dir[d];
}

void gen_cube(Rng& rng, double* p) {
    // faces of [-1, 1]^3 plus jitter along the face normal
    const std::size_t face = rng.below(6);
    const int axis = static_cast<int>(face / 2);
    const double sign = (face % 2 == 0) ? 1.0 : -1.0;
    double uv[2] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    int c = 0;
    for (int d = 0; d < 3; ++d) {
        p[d] = (d == axis) ? sign * (1.0 + rng.uniform(-kJitter, kJitter)) : uv[c++];
    }
}

void gen_cylinder(Rng& rng, double* p) {
    // radius 1, height 2: lateral area 4*pi, two caps of pi each
    const double pick = rng.uniform() * 6.0;
    if (pick < 4.0) {
        const double theta = rng.uniform() * kTwoPi;
        const double r = 1.0 + rng.uniform(-kJitter, kJitter);
        p[0] = r * std::cos(theta);
        p[1] = r * std::sin(theta);
        p[2] = rng.uniform(-1.0, 1.0);
    } else {
        const double z = (pick < 5.0) ? 1.0 : -1.0;
        const double theta = rng.uniform() * kTwoPi;
        const double r = std::sqrt(rng.uniform());  // uniform over the disc
        p[0] = r * std::cos(theta);
        p[1] = r * std::sin(theta);
        p[2] = z + rng.uniform(-kJitter, kJitter);
    }
}

void gen_torus(Rng& rng, double* p) {
    const double major = 1.0;
    const double minor = 0.4;
    // tube angle needs density proportional to (major + minor*cos), via rejection
    double tube = 0.0;
    for (;;) {
        tube = rng.uniform() * kTwoPi;
        const double accept = (major + minor * std::cos(tube)) / (major + minor);
        if (rng.uniform() < accept) break;
    }
    const double ring = rng.uniform() * kTwoPi;
    const double r = minor + rng.uniform(-kJitter, kJitter);
    const double cx = major + r * std::cos(tube);
    p[0] = cx * std::cos(ring);
    p[1] = cx * std::sin(ring);
    p[2] = r * std::sin(tube);
}

}  // namespace

Dataset synth_dataset(std::size_t num_per_class, std::size_t n_points, std::uint64_t seed,
                      std::size_t num_classes) {
    if (num_classes < 1 || num_classes > 4) {
        throw std::invalid_argument("synth_dataset: num_classes must be in [1, 4]");
    }
    Dataset ds;
    ds.clouds.reserve(num_per_class * num_classes);
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        for (std::size_t s = 0; s < num_per_class; ++s) {
            Rng rng(Rng::mix(seed, cls * num_per_class + s));
            Tensor pts({n_points, 3});
            for (std::size_t i = 0; i < n_points; ++i) {
                double* p = pts.data() + i * 3;
                switch (cls) {
                    case 0: gen_sphere(rng, p); break;
                    case 1: gen_cube(rng, p); break;
                    case 2: gen_cylinder(rng, p); break;
                    default: gen_torus(rng, p); break;
                }
            }
            normalize_sphere(pts);
            ds.clouds.push_back({std::move(pts), static_cast<int>(cls)});
        }
    }
    return ds;
}

// --- binary cache ---

namespace {

constexpr char kCacheMagic[4] = {'K', 'D', 'C', '1'};

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

}  // namespace

void write_cache(const std::filesystem::path& path, const Dataset& ds) {
    std::string out;
    out.append(kCacheMagic, 4);
    put_u32_le(out, static_cast<std::uint32_t>(ds.clouds.size()));
    for (const PointCloud& c : ds.clouds) {
        if (c.label < 0) throw std::invalid_argument("write_cache: negative label");
        put_u32_le(out, static_cast<std::uint32_t>(c.label));
        const std::size_t n = c.points.dim(0);
        put_u32_le(out, static_cast<std::uint32_t>(n));
        for (std::size_t i = 0; i < n * 3; ++i) {
            put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(c.points[i])));
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_cache: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_cache: write failed for " + path.string());
}

Dataset read_cache(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_cache: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    auto need = [&](std::size_t pos, std::size_t n) {
        if (pos + n > bytes.size()) {
            throw std::runtime_error("read_cache: truncated file " + path.string());
        }
    };
    need(0, 8);
    if (std::memcmp(bytes.data(), kCacheMagic, 4) != 0) {
        throw std::runtime_error("read_cache: bad magic in " + path.string());
    }
    const std::uint32_t count = get_u32_le(bytes.data() + 4);
    std::size_t pos = 8;

    Dataset ds;
    ds.clouds.reserve(count);
    for (std::uint32_t c = 0; c < count; ++c) {
        need(pos, 8);
        const std::uint32_t label = get_u32_le(bytes.data() + pos);
        const std::uint32_t n = get_u32_le(bytes.data() + pos + 4);
        pos += 8;
        need(pos, static_cast<std::size_t>(n) * 12);
        Tensor pts({n, 3});
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * 3; ++i) {
            pts[i] = static_cast<double>(
                std::bit_cast<float>(get_u32_le(bytes.data() + pos + i * 4)));
        }
        pos += static_cast<std::size_t>(n) * 12;
        ds.clouds.push_back({std::move(pts), static_cast<int>(label)});
    }
    if (pos != bytes.size()) {
        throw std::runtime_error("read_cache: trailing bytes in " + path.string());
    }
    return ds;
}

// --- ModelNet-style conversion ---

ConvertStats convert_tree(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                          std::size_t points, std::uint64_t seed) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) {
        throw std::runtime_error("convert_tree: not a directory: " + root.string());
    }

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) {
        throw std::runtime_error("convert_tree: no class directories under " + root.string());
    }

    struct Job {
        fs::path file;
        int label;
        bool train;
    };
    std::vector<Job> jobs;
    for (std::size_t cls = 0; cls < classes.size(); ++cls) {
        for (const char* split : {"train", "test"}) {
            const fs::path dir = root / classes[cls] / split;
            if (!fs::is_directory(dir)) continue;
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.is_regular_file() && entry.path().extension() == ".off") {
                    files.push_back(entry.path());
                }
            }
            std::sort(files.begin(), files.end());
            for (const fs::path& file : files) {
                jobs.push_back({file, static_cast<int>(cls), std::string(split) == "train"});
            }
        }
    }
    if (jobs.empty()) {
        throw std::runtime_error("convert_tree: no .off files under " + root.string());
    }

    // Per-file substreams keep output independent of worker scheduling.
    std::vector<PointCloud> converted(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        try {
            const Mesh mesh = load_off(jobs[i].file);
            Rng rng(Rng::mix(seed, i));
            Tensor pts = sample_surface(mesh, points, rng);
            normalize_sphere(pts);
            converted[i] = {std::move(pts), jobs[i].label};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (const std::string& err : errors) {
        if (!err.empty()) throw std::runtime_error(err);
    }

    Dataset train_ds;
    Dataset test_ds;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        (jobs[i].train ? train_ds : test_ds).clouds.push_back(std::move(converted[i]));
    }

    fs::create_directories(out_dir);
    write_cache(out_dir / "train.kdc", train_ds);
    write_cache(out_dir / "test.kdc", test_ds);
    std::ofstream cf(out_dir / "classes.txt", std::ios::trunc);
    if (!cf) throw std::runtime_error("convert_tree: cannot write classes.txt");
    for (const std::string& c : classes) cf << c << "\n";

    return {classes.size(), train_ds.size(), test_ds.size()};
}

}  // namespace pointkan
