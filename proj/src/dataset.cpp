#include "lbpnet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lbpnet/errors.hpp"

namespace lbpnet {

namespace fs = std::filesystem;

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

FeatureMap bytes_to_map(const std::uint8_t* src, int c, int h, int w) {
    FeatureMap m(c, h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = src[i] / 255.0;
    return m;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kRgbToYuv = {{{0.299, 0.587, 0.114},
                             {-0.168736, -0.331264, 0.5},
                             {0.5, -0.418688, -0.081312}}};

Mat3 invert(const Mat3& m) {
    const double a = m[0][0], b = m[0][1], c = m[0][2];
    const double d = m[1][0], e = m[1][1], f = m[1][2];
    const double g = m[2][0], h = m[2][1], i = m[2][2];
    const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    return {{{(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det},
             {(f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det},
             {(d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det}}};
}

FeatureMap apply3(const FeatureMap& in, const Mat3& m, const char* what) {
    if (in.channels() != 3) throw ShapeError(std::string(what) + ": expected 3 channels");
    FeatureMap out(3, in.height(), in.width());
    const auto p0 = in.plane(0), p1 = in.plane(1), p2 = in.plane(2);
    for (int r = 0; r < 3; ++r) {
        auto dst = out.plane(r);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = m[r][0] * p0[i] + m[r][1] * p1[i] + m[r][2] * p2[i];
    }
    return out;
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0)); }

void skip_pnm_space(std::istream& in) {
    for (;;) {
        int ch = in.peek();
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            return;
        }
    }
}

}  // namespace

Dataset Dataset::head(std::size_t count) const {
    Dataset d;
    d.split = split;
    d.classes = classes;
    const std::size_t n = std::min(count, size());
    d.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(n));
    d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    return d;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_idx(const fs::path& images_path, const fs::path& labels_path, Split split) {
    const auto img = read_file_bytes(images_path);
    const auto lab = read_file_bytes(labels_path);
    if (img.size() >= 4 && read_be32(img, 0) != kIdxImageMagic) {
        throw BadMagicError(images_path.string() + ": not an IDX3 unsigned-byte image file");
    }
    if (lab.size() >= 4 && read_be32(lab, 0) != kIdxLabelMagic) {
        throw BadMagicError(labels_path.string() + ": not an IDX1 unsigned-byte label file");
    }
    if (img.size() < 16) throw TruncatedFileError(images_path.string() + ": shorter than the IDX3 header");
    if (lab.size() < 8) throw TruncatedFileError(labels_path.string() + ": shorter than the IDX1 header");
    const std::uint32_t count = read_be32(img, 4);
    const std::uint32_t rows = read_be32(img, 8);
    const std::uint32_t cols = read_be32(img, 12);
    const std::uint32_t label_count = read_be32(lab, 4);
    if (count != label_count) {
        throw CountMismatchError("IDX image count " + std::to_string(count) + " != label count " +
                                 std::to_string(label_count));
    }
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (img.size() < 16 + pixels * count) throw TruncatedFileError(images_path.string() + ": truncated pixel data");
    if (lab.size() < 8 + static_cast<std::size_t>(count)) throw TruncatedFileError(labels_path.string() + ": truncated labels");

    Dataset ds;
    ds.split = split;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        ds.images.push_back(bytes_to_map(img.data() + 16 + i * pixels, 1, static_cast<int>(rows), static_cast<int>(cols)));
        ds.labels.push_back(lab[8 + i]);
    }
    return ds;
}

void pad_images(Dataset& ds, int size) {
    for (auto& im : ds.images) {
        if (im.height() == size && im.width() == size) continue;
        if (im.height() > size || im.width() > size) throw ShapeError("pad_images: image larger than target");
        const int top = (size - im.height()) / 2;
        const int left = (size - im.width()) / 2;
        FeatureMap out(im.channels(), size, size);
        for (int c = 0; c < im.channels(); ++c)
            for (int y = 0; y < im.height(); ++y)
                for (int x = 0; x < im.width(); ++x) out.at(c, y + top, x + left) = im.at(c, y, x);
        im = std::move(out);
    }
}

Dataset load_mnist(const fs::path& root, Split split) {
    const std::string prefix = split == Split::train ? "train" : "t10k";
    Dataset ds = load_idx(root / (prefix + "-images-idx3-ubyte"), root / (prefix + "-labels-idx1-ubyte"), split);
    pad_images(ds, 32);
    return ds;
}

Dataset load_cifar10(const std::vector<fs::path>& batches, Split split, ColorMode color) {
    constexpr std::size_t kRecord = 3073;
    Dataset ds;
    ds.split = split;
    for (const auto& path : batches) {
        const auto bytes = read_file_bytes(path);
        if (bytes.size() % kRecord != 0) {
            throw TruncatedFileError(path.string() + ": size is not a multiple of 3073-byte records");
        }
        for (std::size_t off = 0; off < bytes.size(); off += kRecord) {
            if (bytes[off] > 9) throw CorruptFileError(path.string() + ": label out of range");
            FeatureMap rgb = bytes_to_map(bytes.data() + off + 1, 3, 32, 32);
            if (color == ColorMode::yuv) {
                // Stored as 8-bit with chroma offset by one half.
                const FeatureMap yuv = rgb_to_yuv(rgb);
                for (int c = 0; c < 3; ++c) {
                    const double shift = c == 0 ? 0.0 : 0.5;
                    auto src = yuv.plane(c);
                    auto dst = rgb.plane(c);
                    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = quantize(src[i] + shift) / 255.0;
                }
            }
            ds.images.push_back(std::move(rgb));
            ds.labels.push_back(bytes[off]);
        }
    }
    return ds;
}

Dataset load_csv(const fs::path& path, int channels, int height, int width, Split split) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const std::size_t expected = static_cast<std::size_t>(channels) * height * width;
    Dataset ds;
    ds.split = split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<int> values;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stoi(cell));
            } catch (const std::exception&) {
                throw CorruptFileError(path.string() + ":" + std::to_string(line_no) + ": not an integer");
            }
        }
        if (values.size() != expected + 1) {
            throw CountMismatchError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(expected + 1) + " fields");
        }
        FeatureMap m(channels, height, width);
        for (std::size_t i = 0; i < expected; ++i) {
            if (values[i + 1] < 0 || values[i + 1] > 255) throw CorruptFileError(path.string() + ": pixel out of range");
            m.data()[i] = values[i + 1] / 255.0;
        }
        ds.images.push_back(std::move(m));
        ds.labels.push_back(values[0]);
    }
    return ds;
}

FeatureMap rgb_to_yuv(const FeatureMap& rgb) { return apply3(rgb, kRgbToYuv, "rgb_to_yuv"); }

FeatureMap yuv_to_rgb(const FeatureMap& yuv) {
    static const Mat3 inverse = invert(kRgbToYuv);
    return apply3(yuv, inverse, "yuv_to_rgb");
}

BinaryMap to_pixel_bytes(const FeatureMap& image) {
    BinaryMap out(image.channels(), image.height(), image.width());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = image.data()[i];
        if (!(v >= 0.0 && v <= 1.0)) throw NumericError("to_pixel_bytes: value outside [0, 1]");
        out.data()[i] = static_cast<std::uint16_t>(std::round(v * 255.0));
    }
    return out;
}

FeatureMap from_pixel_bytes(const BinaryMap& bytes) {
    FeatureMap out(bytes.channels(), bytes.height(), bytes.width());
    for (std::size_t i = 0; i < bytes.size(); ++i) out.data()[i] = bytes.data()[i] / 255.0;
    return out;
}

BinaryMap read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "P5") {
        channels = 1;
    } else if (magic == "P6") {
        channels = 3;
    } else {
        throw BadMagicError(path.string() + ": not a binary PGM/PPM file");
    }
    int w = 0, h = 0, maxval = 0;
    skip_pnm_space(in);
    in >> w;
    skip_pnm_space(in);
    in >> h;
    skip_pnm_space(in);
    in >> maxval;
    if (!in || w <= 0 || h <= 0) throw CorruptFileError(path.string() + ": bad PNM header");
    if (maxval != 255) throw CorruptFileError(path.string() + ": only maxval 255 is supported");
    in.get();
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw TruncatedFileError(path.string() + ": truncated pixels");
    BinaryMap out(channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.at(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * channels + c];
    return out;
}

void write_pnm(const fs::path& path, const BinaryMap& image) {
    if (image.channels() != 1 && image.channels() != 3) throw ShapeError("write_pnm: need 1 or 3 channels");
    std::string header = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width()) +
                         " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c)
                bytes.push_back(static_cast<std::uint8_t>(std::min<std::uint16_t>(image.at(c, y, x), 255)));
    write_file_bytes(path, bytes);
}

}  // namespace lbpnet
