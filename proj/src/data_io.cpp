#include "capspoe/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

namespace capspoe {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string(what) + ": cannot open: " + path);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

std::uint8_t quantize(double v) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(q);
}

} // namespace

Tensor load_idx(const std::string& path) {
    std::vector<std::uint8_t> buf = read_file(path, "idx");
    if (buf.size() < 4) throw TruncatedError("idx: file shorter than the magic");
    if (buf[0] != 0 || buf[1] != 0) throw BadMagicError("idx: bad magic bytes");
    if (buf[2] != 0x08) throw BadMagicError("idx: unsupported element type (want unsigned byte)");
    std::size_t ndim = buf[3];
    if (ndim == 0) throw DimensionError("idx: zero-dimensional tensor");
    if (buf.size() < 4 + 4 * ndim) throw TruncatedError("idx: truncated dimension list");

    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
        std::uint32_t e = (static_cast<std::uint32_t>(buf[4 + 4 * d]) << 24) |
                          (static_cast<std::uint32_t>(buf[5 + 4 * d]) << 16) |
                          (static_cast<std::uint32_t>(buf[6 + 4 * d]) << 8) |
                          static_cast<std::uint32_t>(buf[7 + 4 * d]);
        if (e == 0) throw DimensionError("idx: zero extent");
        shape[d] = e;
        total *= e;
    }
    std::size_t header = 4 + 4 * ndim;
    if (buf.size() < header + total) throw TruncatedError("idx: truncated payload");
    if (buf.size() > header + total) throw DimensionError("idx: payload larger than header says");

    std::vector<double> data(total);
    for (std::size_t k = 0; k < total; ++k)
        data[k] = static_cast<double>(buf[header + k]) / 255.0;
    return Tensor(std::move(shape), std::move(data));
}

Tensor load_cifar10(const std::string& path) {
    constexpr std::size_t kRecord = 1 + 3 * 1024;
    std::vector<std::uint8_t> buf = read_file(path, "cifar10");
    if (buf.empty() || buf.size() % kRecord != 0)
        throw RecordSizeError("cifar10: file length is not a multiple of 3073 bytes");
    std::size_t n = buf.size() / kRecord;
    Tensor out({n, 32, 32, 3});
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint8_t* rec = buf.data() + r * kRecord + 1; // label byte skipped
        for (std::size_t c = 0; c < 3; ++c) {
            const std::uint8_t* plane = rec + c * 1024;
            for (std::size_t y = 0; y < 32; ++y)
                for (std::size_t x = 0; x < 32; ++x)
                    out[((r * 32 + y) * 32 + x) * 3 + c] =
                        static_cast<double>(plane[y * 32 + x]) / 255.0;
        }
    }
    return out;
}

void emit_image_grid(const std::vector<Tensor>& images, std::size_t rows, std::size_t cols,
                     const std::string& path) {
    if (rows * cols != images.size())
        throw ShapeError("image grid: rows*cols does not match the image count");
    if (images.empty()) throw ShapeError("image grid: no images");
    const Tensor& first = images.front();
    if (first.rank() != 3) throw ShapeError("image grid: images must be [H,W,C]");
    std::size_t h = first.extent(0), w = first.extent(1), ch = first.extent(2);
    if (ch != 1 && ch != 3) throw ShapeError("image grid: images must have 1 or 3 channels");
    for (const Tensor& t : images)
        if (!t.same_shape(first)) throw ShapeError("image grid: image shapes differ");

    const std::uint8_t sep = 128;
    std::size_t out_w = cols * w + cols + 1;
    std::size_t out_h = rows * h + rows + 1;
    std::vector<std::uint8_t> pixels(out_w * out_h * ch, sep);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const Tensor& img = images[r * cols + c];
            std::size_t y0 = 1 + r * (h + 1), x0 = 1 + c * (w + 1);
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    for (std::size_t k = 0; k < ch; ++k)
                        pixels[((y0 + y) * out_w + (x0 + x)) * ch + k] =
                            quantize(img[(y * w + x) * ch + k]);
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("image grid: cannot open for writing: " + path);
    char header[64];
    std::snprintf(header, sizeof header, "%s\n%zu %zu\n255\n", ch == 1 ? "P5" : "P6", out_w,
                  out_h);
    out << header;
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("image grid: write failed: " + path);
}

void emit_routing_svg(const DiagramModel& d, const std::string& path) {
    // lower layer at the bottom, upper layer on top; shade 0 -> near white,
    // shade 1 -> black
    const int rect_w = 10, rect_h = 18, pitch = 14, margin = 20;
    const int upper_y = 30, lower_y = 160;
    std::size_t I = d.lower_shades.size(), J = d.upper_shades.size();
    std::size_t width = margin * 2 + pitch * std::max<std::size_t>(1, std::max(I, J));
    std::size_t height = lower_y + rect_h + margin;

    auto gray = [](double shade) { return static_cast<int>(std::round(255.0 * (1.0 - shade))); };
    auto cx = [&](std::size_t idx, std::size_t n) {
        double span = static_cast<double>(width - 2 * margin);
        double step = n > 1 ? span / static_cast<double>(n - 1) : 0.0;
        double base = n > 1 ? static_cast<double>(margin)
                            : static_cast<double>(width) / 2.0 - rect_w / 2.0;
        return base + step * static_cast<double>(idx);
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("svg: cannot open for writing: " + path);
    char line[256];
    std::snprintf(line, sizeof line,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%zu\" "
                  "height=\"%zu\">\n",
                  width, height);
    out << line;

    for (const auto& e : d.edges) {
        int g = gray(e.shade);
        std::snprintf(line, sizeof line,
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" "
                      "stroke=\"rgb(%d,%d,%d)\" stroke-width=\"1\"/>\n",
                      cx(e.i, I) + rect_w / 2.0, lower_y, cx(e.j, J) + rect_w / 2.0,
                      upper_y + rect_h, g, g, g);
        out << line;
    }
    for (std::size_t i = 0; i < I; ++i) {
        int g = gray(d.lower_shades[i]);
        std::snprintf(line, sizeof line,
                      "<rect x=\"%.1f\" y=\"%d\" width=\"%d\" height=\"%d\" "
                      "fill=\"rgb(%d,%d,%d)\" stroke=\"black\"/>\n",
                      cx(i, I), lower_y, rect_w, rect_h, g, g, g);
        out << line;
    }
    for (std::size_t j = 0; j < J; ++j) {
        int g = gray(d.upper_shades[j]);
        std::snprintf(line, sizeof line,
                      "<rect x=\"%.1f\" y=\"%d\" width=\"%d\" height=\"%d\" "
                      "fill=\"rgb(%d,%d,%d)\" stroke=\"black\"/>\n",
                      cx(j, J), upper_y, rect_w, rect_h, g, g, g);
        out << line;
    }
    out << "</svg>\n";
    if (!out) throw IoError("svg: write failed: " + path);
}

} // namespace capspoe
