#include "reid/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace reid {

namespace {

uint8_t clamp_byte(double v) {
    double r = std::round(v);
    if (r < 0.0) return 0;
    if (r > 255.0) return 255;
    return static_cast<uint8_t>(r);
}

std::string corpus_filename(int64_t id, int64_t camera, size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld_%02lld_%04zu.ppm",
                  static_cast<long long>(id), static_cast<long long>(camera), index);
    return std::string(buf);
}

}  // namespace

ImageCorpus generate_synthetic_images(const SyntheticSpec& spec, int image_height,
                                      int image_width, uint64_t seed) {
    spec.validate();
    if (image_height < 8 || image_width < 8) {
        throw ConfigError("image dimensions must be at least 8x8");
    }
    Rng rng(seed);

    struct Outfit {
        double torso[3];
        double legs[3];
    };
    std::vector<Outfit> outfits(spec.num_identities);
    for (auto& o : outfits) {
        for (double& v : o.torso) v = rng.uniform(20.0, 236.0);
        for (double& v : o.legs) v = rng.uniform(20.0, 236.0);
    }
    std::vector<double> brightness(spec.num_cameras);
    for (double& b : brightness) b = rng.gaussian(0.0, spec.camera_shift_stddev);

    ImageCorpus corpus;
    corpus.images.reserve(spec.num_identities * spec.records_per_identity);
    int torso_end = image_height / 2;
    for (size_t i = 0; i < spec.num_identities; ++i) {
        for (size_t k = 0; k < spec.records_per_identity; ++k) {
            int64_t camera = static_cast<int64_t>(k % spec.num_cameras);
            Image img(image_height, image_width);
            const Outfit& o = outfits[i];
            double shift = brightness[static_cast<size_t>(camera)];
            for (int y = 0; y < image_height; ++y) {
                const double* base = (y < torso_end) ? o.torso : o.legs;
                for (int x = 0; x < image_width; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        double noise = rng.gaussian(0.0, spec.intra_class_stddev);
                        img.at(y, x, c) = clamp_byte(base[c] + shift + noise);
                    }
                }
            }
            corpus.images.push_back(std::move(img));
            corpus.ids.push_back(static_cast<int64_t>(i));
            corpus.cameras.push_back(camera);
        }
    }
    return corpus;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
    if (image.height <= 0 || image.width <= 0 ||
        image.pixels.size() != static_cast<size_t>(image.height) * image.width * 3) {
        throw ShapeError("malformed image for " + path.string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P6" || maxval != 255 || width <= 0 || height <= 0) {
        throw ParseError("unsupported PPM header in " + path.string());
    }
    in.get();  // single whitespace after maxval
    Image img(height, width);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
        throw ParseError("truncated PPM data in " + path.string());
    }
    return img;
}

void save_corpus(const ImageCorpus& corpus, const std::filesystem::path& dir) {
    if (corpus.images.size() != corpus.ids.size() ||
        corpus.images.size() != corpus.cameras.size()) {
        throw ShapeError("corpus label arrays out of sync");
    }
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
    if (!manifest) throw IoError("cannot open for writing: " + (dir / "manifest.csv").string());
    manifest << "filename,id,camera\n";
    std::map<int64_t, size_t> next_index;
    for (size_t i = 0; i < corpus.images.size(); ++i) {
        size_t index = next_index[corpus.ids[i]]++;
        std::string name = corpus_filename(corpus.ids[i], corpus.cameras[i], index);
        write_ppm(corpus.images[i], dir / name);
        manifest << name << ',' << corpus.ids[i] << ',' << corpus.cameras[i] << '\n';
    }
    if (!manifest) throw IoError("write failed: " + (dir / "manifest.csv").string());
}

ImageCorpus load_corpus(const std::filesystem::path& dir) {
    std::filesystem::path manifest_path = dir / "manifest.csv";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + manifest_path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty manifest: " + manifest_path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "filename,id,camera") {
        throw ParseError("bad manifest header in " + manifest_path.string());
    }
    ImageCorpus corpus;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = manifest_path.string() + ":" + std::to_string(line_no);
        std::vector<std::string> cells = split_string(line, ',');
        if (cells.size() != 3) throw ParseError(where + ": expected 3 columns");
        corpus.images.push_back(read_ppm(dir / cells[0]));
        corpus.ids.push_back(parse_int_strict(cells[1], where));
        corpus.cameras.push_back(parse_int_strict(cells[2], where));
    }
    if (corpus.images.empty()) throw ParseError("no entries in " + manifest_path.string());
    return corpus;
}

}  // namespace reid
