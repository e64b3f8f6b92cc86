#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "reid/image.hpp"

namespace reid {

struct DescriptorConfig {
    size_t num_stripes = 8;
    size_t hue_bins = 8;
    size_t sat_bins = 8;
    size_t val_bins = 8;
    double texture_threshold = 0.03;  // grayscale units, range [0, 1]
    size_t subwindow = 10;            // sliding window width in pixels
    size_t subwindow_stride = 5;

    void validate() const;
    size_t stripe_dim() const { return hue_bins * sat_bins * val_bins + 81; }
    size_t descriptor_dim() const { return num_stripes * stripe_dim(); }
};

struct Hsv {
    double h;  // degrees in [0, 360)
    double s;  // [0, 1]
    double v;  // [0, 1]
};

// Hexcone conversion; hue is 0 whenever saturation is 0.
Hsv rgb_to_hsv(uint8_t r, uint8_t g, uint8_t b);

// Ternary 3x3 code. Input is the grayscale neighborhood in row-major order
// (center at index 4). Each neighbor contributes a base-3 digit, clockwise
// from the top-left corner: 0 within +-threshold of the center, 1 above, 2
// below. Result lies in [0, 6561).
int local_texture_code(const std::array<double, 9>& window, double threshold);

// Folds a full ternary code onto 81 bins. The left/right digit pair and the
// four corner digits are collapsed through mod-3 sums, which keeps the fold
// invariant under horizontal mirroring.
int fold_texture_code(int code);

// Striped descriptor: per stripe a window of the stripe's full height and
// `subwindow` width slides horizontally by `subwindow_stride`; each window
// yields a joint HSV histogram plus a folded texture-code histogram, pooled
// across positions by elementwise max. Stripe blocks are concatenated, then
// log(1+x) and L2 normalization are applied to the whole vector.
std::vector<double> extract_handcrafted(const Image& image,
                                        const DescriptorConfig& cfg);

}  // namespace reid
