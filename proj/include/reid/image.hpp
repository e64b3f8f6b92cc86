#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reid/dataset.hpp"

namespace reid {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;

    Image() = default;
    Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0) {}

    uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

struct ImageCorpus {
    std::vector<Image> images;
    std::vector<int64_t> ids;
    std::vector<int64_t> cameras;

    size_t size() const { return images.size(); }
};

// Person-like synthetic renders: per-identity torso and leg colors, a global
// per-camera brightness offset, per-pixel noise. One image per record of the
// corresponding feature dataset (same id/camera labeling scheme).
ImageCorpus generate_synthetic_images(const SyntheticSpec& spec, int image_height,
                                      int image_width, uint64_t seed);

void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// Writes {id:04}_{camera:02}_{index:04}.ppm files plus manifest.csv into dir.
void save_corpus(const ImageCorpus& corpus, const std::filesystem::path& dir);
ImageCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace reid
