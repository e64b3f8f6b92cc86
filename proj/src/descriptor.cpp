#include "reid/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reid/errors.hpp"

namespace reid {

void DescriptorConfig::validate() const {
    if (num_stripes < 1) throw ConfigError("num_stripes must be >= 1");
    if (hue_bins < 1 || sat_bins < 1 || val_bins < 1) {
        throw ConfigError("histogram bin counts must be >= 1");
    }
    if (texture_threshold < 0.0) throw ConfigError("texture_threshold must be >= 0");
    if (subwindow < 1) throw ConfigError("subwindow must be >= 1");
    if (subwindow_stride < 1) throw ConfigError("subwindow_stride must be >= 1");
}

Hsv rgb_to_hsv(uint8_t r8, uint8_t g8, uint8_t b8) {
    double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = std::max({r, g, b});
    double mn = std::min({r, g, b});
    double delta = mx - mn;

    Hsv out;
    out.v = mx;
    out.s = (mx > 0.0) ? delta / mx : 0.0;
    if (delta == 0.0 || out.s == 0.0) {
        out.h = 0.0;
        return out;
    }
    double h;
    if (mx == r) {
        h = 60.0 * ((g - b) / delta);
    } else if (mx == g) {
        h = 60.0 * ((b - r) / delta + 2.0);
    } else {
        h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
    return out;
}

int local_texture_code(const std::array<double, 9>& window, double threshold) {
    // Row-major neighborhood positions, read clockwise from the top-left.
    static constexpr int kClockwise[8] = {0, 1, 2, 5, 8, 7, 6, 3};
    double center = window[4];
    int code = 0;
    int scale = 1;
    for (int k = 0; k < 8; ++k) {
        double n = window[kClockwise[k]];
        int digit = 0;
        if (n > center + threshold) {
            digit = 1;
        } else if (n < center - threshold) {
            digit = 2;
        }
        code += digit * scale;
        scale *= 3;
    }
    return code;
}

int fold_texture_code(int code) {
    if (code < 0 || code >= 6561) throw UsageError("texture code out of range");
    int digits[8];
    for (int k = 0; k < 8; ++k) {
        digits[k] = code % 3;
        code /= 3;
    }
    // Clockwise digit order: TL T TR R BR B BL L.
    int top = digits[1];
    int bottom = digits[5];
    int sides = (digits[3] + digits[7]) % 3;
    int corners = (digits[0] + digits[2] + digits[4] + digits[6]) % 3;
    return top + 3 * bottom + 9 * sides + 27 * corners;
}

namespace {

size_t hsv_bin(const Hsv& hsv, const DescriptorConfig& cfg) {
    size_t hb = std::min(static_cast<size_t>(hsv.h / 360.0 * cfg.hue_bins),
                         cfg.hue_bins - 1);
    size_t sb = std::min(static_cast<size_t>(hsv.s * cfg.sat_bins), cfg.sat_bins - 1);
    size_t vb = std::min(static_cast<size_t>(hsv.v * cfg.val_bins), cfg.val_bins - 1);
    return (hb * cfg.sat_bins + sb) * cfg.val_bins + vb;
}

}  // namespace

std::vector<double> extract_handcrafted(const Image& image,
                                        const DescriptorConfig& cfg) {
    cfg.validate();
    size_t height = static_cast<size_t>(image.height);
    size_t width = static_cast<size_t>(image.width);
    if (image.height <= 0 || image.width <= 0 ||
        cfg.subwindow > std::min(height, width)) {
        throw ShapeError("image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) +
                         " is smaller than subwindow " + std::to_string(cfg.subwindow));
    }
    if (cfg.num_stripes > height) {
        throw ShapeError("image height " + std::to_string(image.height) +
                         " cannot hold " + std::to_string(cfg.num_stripes) + " stripes");
    }

    size_t stripe_h = height / cfg.num_stripes;
    size_t hsv_bins = cfg.hue_bins * cfg.sat_bins * cfg.val_bins;
    size_t block = cfg.stripe_dim();

    std::vector<double> out(cfg.descriptor_dim(), 0.0);
    std::vector<double> hist(block);
    std::vector<double> gray(stripe_h * cfg.subwindow);

    for (size_t s = 0; s < cfg.num_stripes; ++s) {
        size_t y0 = s * stripe_h;
        double* pooled = out.data() + s * block;
        for (size_t x0 = 0; x0 + cfg.subwindow <= width; x0 += cfg.subwindow_stride) {
            std::fill(hist.begin(), hist.end(), 0.0);
            for (size_t y = 0; y < stripe_h; ++y) {
                for (size_t x = 0; x < cfg.subwindow; ++x) {
                    int iy = static_cast<int>(y0 + y);
                    int ix = static_cast<int>(x0 + x);
                    uint8_t r = image.at(iy, ix, 0);
                    uint8_t g = image.at(iy, ix, 1);
                    uint8_t b = image.at(iy, ix, 2);
                    hist[hsv_bin(rgb_to_hsv(r, g, b), cfg)] += 1.0;
                    gray[y * cfg.subwindow + x] =
                        (static_cast<double>(r) + g + b) / (3.0 * 255.0);
                }
            }
            if (stripe_h >= 3 && cfg.subwindow >= 3) {
                for (size_t y = 1; y + 1 < stripe_h; ++y) {
                    for (size_t x = 1; x + 1 < cfg.subwindow; ++x) {
                        std::array<double, 9> nbhd;
                        for (int dy = -1; dy <= 1; ++dy) {
                            for (int dx = -1; dx <= 1; ++dx) {
                                nbhd[static_cast<size_t>((dy + 1) * 3 + (dx + 1))] =
                                    gray[(y + dy) * cfg.subwindow + (x + dx)];
                            }
                        }
                        int code = local_texture_code(nbhd, cfg.texture_threshold);
                        hist[hsv_bins + fold_texture_code(code)] += 1.0;
                    }
                }
            }
            for (size_t k = 0; k < block; ++k) {
                pooled[k] = std::max(pooled[k], hist[k]);
            }
        }
    }

    double norm_sq = 0.0;
    for (double& v : out) {
        v = std::log1p(v);
        norm_sq += v * v;
    }
    double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
        for (double& v : out) v /= norm;
    }
    return out;
}

}  // namespace reid
