#include "roiattn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "roiattn/common.hpp"

namespace roiattn {

namespace {

double box_overlap(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (double(a.area()) + double(b.area()) - inter);
}

struct ShapeSpec {
    int cls;
    double cx, cy;
    double r;        // primary radius
    double aspect;   // ellipse only
    bool wide;       // ellipse orientation
    double phase;    // rosette lobe rotation
    float color[3];
};

BoxXYXY shape_box(const ShapeSpec& s) {
    double hx = s.r, hy = s.r;
    if (s.cls == 3) {
        hx = s.wide ? s.r : s.r / s.aspect;
        hy = s.wide ? s.r / s.aspect : s.r;
    }
    BoxXYXY b;
    b.x1 = float(std::max(0.0, s.cx - hx));
    b.y1 = float(std::max(0.0, s.cy - hy));
    b.x2 = float(std::min(double(kImageSize), s.cx + hx));
    b.y2 = float(std::min(double(kImageSize), s.cy + hy));
    return b;
}

// Signed coverage in [0,1] of pixel center (px, py); ~1 inside, 0 outside,
// a one-pixel soft edge in between.
double shape_coverage(const ShapeSpec& s, double px, double py) {
    const double dx = px - s.cx;
    const double dy = py - s.cy;
    double edge;  // positive inside, in pixels
    switch (s.cls) {
        case 0: {  // disc
            edge = s.r - std::sqrt(dx * dx + dy * dy);
            break;
        }
        case 1: {  // ring
            const double rad = std::sqrt(dx * dx + dy * dy);
            edge = std::min(s.r - rad, rad - 0.55 * s.r);
            break;
        }
        case 2: {  // five-lobed rosette
            const double rad = std::sqrt(dx * dx + dy * dy);
            const double theta = std::atan2(dy, dx);
            const double rim = s.r * (0.55 + 0.45 * std::cos(5.0 * theta + s.phase));
            edge = rim - rad;
            break;
        }
        default: {  // axis-aligned ellipse
            const double a = s.wide ? s.r : s.r / s.aspect;
            const double b = s.wide ? s.r / s.aspect : s.r;
            const double q = std::sqrt((dx / a) * (dx / a) + (dy / b) * (dy / b));
            edge = (1.0 - q) * std::min(a, b);
            break;
        }
    }
    return std::clamp(edge + 0.5, 0.0, 1.0);
}

}  // namespace

SyntheticScene generate_scene(uint64_t seed) {
    Rng rng(seed);
    SyntheticScene scene;
    scene.seed = seed;

    const int n = kImageSize;
    std::vector<float> img(size_t(3) * n * n);

    // Low-frequency value noise on an 8×8 lattice, bilinearly upsampled.
    const int g = 8;
    std::vector<double> lattice(size_t(3) * g * g);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    double base[3];
    for (int c = 0; c < 3; ++c) base[c] = rng.uniform(0.20, 0.45);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < n; ++y) {
            const double gy = double(y) / n * (g - 1);
            const int y0 = int(gy);
            const int y1 = std::min(y0 + 1, g - 1);
            const double ty = gy - y0;
            for (int x = 0; x < n; ++x) {
                const double gx = double(x) / n * (g - 1);
                const int x0 = int(gx);
                const int x1 = std::min(x0 + 1, g - 1);
                const double tx = gx - x0;
                const double v00 = lattice[(size_t(c) * g + y0) * g + x0];
                const double v01 = lattice[(size_t(c) * g + y0) * g + x1];
                const double v10 = lattice[(size_t(c) * g + y1) * g + x0];
                const double v11 = lattice[(size_t(c) * g + y1) * g + x1];
                const double low = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                                   ty * ((1 - tx) * v10 + tx * v11);
                img[(size_t(c) * n + y) * n + x] = float(base[c] + 0.08 * low);
            }
        }
    }

    // Place 1-6 objects, rejecting heavy overlap; the first always lands.
    const int target = rng.uniform_int(1, 6);
    std::vector<ShapeSpec> shapes;
    for (int i = 0; i < int(target); ++i) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            ShapeSpec s;
            s.cls = rng.uniform_int(0, kNumClasses - 1);
            s.r = rng.uniform(9.0, 22.0);
            s.aspect = rng.uniform(1.7, 2.6);
            s.wide = rng.uniform() < 0.5;
            s.phase = rng.uniform(0.0, 2.0 * M_PI);
            const double margin = s.r + 2.0;
            s.cx = rng.uniform(margin, kImageSize - margin);
            s.cy = rng.uniform(margin, kImageSize - margin);
            for (int c = 0; c < 3; ++c) s.color[c] = float(rng.uniform(0.55, 0.95));

            const BoxXYXY candidate = shape_box(s);
            bool ok = true;
            for (const ShapeSpec& prev : shapes) {
                if (box_overlap(candidate, shape_box(prev)) > 0.25) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                shapes.push_back(s);
                break;
            }
        }
    }

    for (const ShapeSpec& s : shapes) {
        const BoxXYXY b = shape_box(s);
        const int x_lo = std::max(0, int(std::floor(b.x1)) - 1);
        const int x_hi = std::min(n - 1, int(std::ceil(b.x2)) + 1);
        const int y_lo = std::max(0, int(std::floor(b.y1)) - 1);
        const int y_hi = std::min(n - 1, int(std::ceil(b.y2)) + 1);
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const double cov = shape_coverage(s, x + 0.5, y + 0.5);
                if (cov <= 0.0) continue;
                for (int c = 0; c < 3; ++c) {
                    float& px = img[(size_t(c) * n + y) * n + x];
                    px = float((1.0 - cov) * px + cov * s.color[c]);
                }
            }
        }
        scene.objects.push_back({s.cls, b});
    }

    // Pixel-level noise over everything, then clamp.
    for (auto& v : img) {
        v = std::clamp(v + float(rng.uniform(-0.02, 0.02)), 0.0f, 1.0f);
    }

    scene.image = Tensor::from_values({3, n, n}, std::move(img));
    return scene;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("write_ppm: expected 3×H×W image, got " + shape_str(image.shape()));
    }
    const int h = image.dim(1), w = image.dim(2);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = image.at({c, y, x});
                const int byte = int(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
                row[size_t(x) * 3 + c] = static_cast<unsigned char>(byte);
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<SceneObject>& objects) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    char line[128];
    for (const SceneObject& o : objects) {
        std::snprintf(line, sizeof(line), "%d %.4f %.4f %.4f %.4f\n", o.cls, o.box.x1,
                      o.box.y1, o.box.x2, o.box.y2);
        os << line;
    }
}

void dump_scenes(const std::filesystem::path& dir, int count, uint64_t base_seed) {
    std::filesystem::create_directories(dir);
    char name[64];
    for (int i = 0; i < count; ++i) {
        const SyntheticScene scene = generate_scene(mix_seed(base_seed, uint64_t(i)));
        std::snprintf(name, sizeof(name), "scene_%05d", i);
        write_ppm(dir / (std::string(name) + ".ppm"), scene.image);
        write_annotations(dir / (std::string(name) + ".txt"), scene.objects);
    }
}

}  // namespace roiattn
