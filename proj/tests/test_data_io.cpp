#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <fstream>

#include "capspoe/checkpoint.hpp"
#include "capspoe/data_io.hpp"
#include "support.hpp"

using namespace capspoe;
using testsupport::read_bytes;
using testsupport::scratch_dir;

TEST_CASE("idx: round trip through the writer, normalization contract") {
    std::string dir = scratch_dir("idx");
    Tensor imgs({3, 4, 5});
    imgs[0] = 1.0;             // byte 255 -> 1.0
    imgs[1] = 0.0;             // byte 0 -> 0.0
    imgs[7] = 128.0 / 255.0;   // survives quantization exactly
    testsupport::write_idx(imgs, dir + "/t.idx");

    Tensor back = load_idx(dir + "/t.idx");
    CHECK(back.shape() == std::vector<std::size_t>{3, 4, 5});
    CHECK(back[0] == 1.0);
    CHECK(back[1] == 0.0);
    CHECK(back[7] == 128.0 / 255.0);
}

TEST_CASE("idx: distinct errors for magic, truncation and dimension problems") {
    std::string dir = scratch_dir("idx_err");

    auto write_raw = [&](const std::string& name, const std::vector<unsigned char>& bytes) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        return dir + "/" + name;
    };

    CHECK_THROWS_AS(load_idx(dir + "/missing.idx"), IoError);
    CHECK_THROWS_AS(load_idx(write_raw("bad_magic.idx", {1, 0, 8, 3, 0, 0, 0, 1})),
                    BadMagicError);
    CHECK_THROWS_AS(load_idx(write_raw("bad_type.idx", {0, 0, 0x0D, 3, 0, 0, 0, 1})),
                    BadMagicError);
    // header says 2x2x2 = 8 payload bytes, only 3 present
    CHECK_THROWS_AS(load_idx(write_raw("trunc.idx", {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0,
                                                     0, 2, 9, 9, 9})),
                    TruncatedError);
    // trailing garbage after the declared payload
    CHECK_THROWS_AS(load_idx(write_raw("long.idx", {0, 0, 8, 1, 0, 0, 0, 1, 42, 42})),
                    DimensionError);
    // zero extent
    CHECK_THROWS_AS(load_idx(write_raw("zero.idx", {0, 0, 8, 1, 0, 0, 0, 0})), DimensionError);
}

TEST_CASE("cifar10: record layout, planar to interleaved, size errors") {
    std::string dir = scratch_dir("cifar");
    std::vector<unsigned char> bytes;
    for (int rec = 0; rec < 2; ++rec) {
        bytes.push_back(7); // label, skipped
        for (int c = 0; c < 3; ++c)
            for (int p = 0; p < 1024; ++p)
                bytes.push_back(static_cast<unsigned char>((c * 50 + rec) & 0xFF));
    }
    {
        std::ofstream out(dir + "/batch.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    Tensor t = load_cifar10(dir + "/batch.bin");
    CHECK(t.shape() == std::vector<std::size_t>{2, 32, 32, 3});
    CHECK(t.at({0, 0, 0, 0}) == 0.0 / 255.0);
    CHECK(t.at({0, 0, 0, 1}) == 50.0 / 255.0);
    CHECK(t.at({1, 5, 9, 2}) == 101.0 / 255.0);

    {
        std::ofstream out(dir + "/bad.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), 3072); // not a record multiple
    }
    CHECK_THROWS_AS(load_cifar10(dir + "/bad.bin"), RecordSizeError);
}

TEST_CASE("image grid: geometry, separators, quantization") {
    std::string dir = scratch_dir("grid");

    // 1x1 grid: the image plus a one-pixel border
    Tensor img({2, 3, 1});
    img[0] = 1.0;
    img[5] = 0.5;
    emit_image_grid({img}, 1, 1, dir + "/one.pgm");
    auto bytes = read_bytes(dir + "/one.pgm");
    std::string header(bytes.begin(), bytes.begin() + 9);
    CHECK(header == "P5\n5 4\n25"); // width 3+2, height 2+2
    // payload: 4 rows x 5 cols; border value 128; pixel (1,1) is 255
    std::size_t off = std::string("P5\n5 4\n255\n").size();
    CHECK(bytes[off] == 128);
    CHECK(bytes[off + 5 + 1] == 255);
    CHECK(bytes[off + 2 * 5 + 3] == 128); // round(0.5*255)

    // 4x20 grid of 28x28 images has the full-figure geometry
    std::vector<Tensor> many(80, Tensor({28, 28, 1}, 0.25));
    emit_image_grid(many, 4, 20, dir + "/grid.pgm");
    auto gb = read_bytes(dir + "/grid.pgm");
    std::string gh(gb.begin(), gb.begin() + 12);
    CHECK(gh == "P5\n581 117\n2"); // 20*28+21 by 4*28+5

    CHECK_THROWS_AS(emit_image_grid(many, 4, 19, dir + "/bad.pgm"), ShapeError);

    // color images come out as P6
    std::vector<Tensor> rgb(2, Tensor({2, 2, 3}, 0.5));
    emit_image_grid(rgb, 1, 2, dir + "/c.ppm");
    auto cb = read_bytes(dir + "/c.ppm");
    CHECK(std::string(cb.begin(), cb.begin() + 2) == "P6");
}

TEST_CASE("routing svg: rectangle and edge counts, deterministic bytes") {
    std::string dir = scratch_dir("svg");
    RoutingState st;
    std::size_t I = 144, J = 10;
    st.logits = Tensor({I, J});
    st.coefficients = Tensor({I, J}, 1.0 / double(I)); // all above threshold 1/144 > 0.0069...
    std::vector<double> lower(I, 0.5), upper(J, 0.9);
    DiagramModel d = routing_diagram(st, lower, upper, 0.0);
    emit_routing_svg(d, dir + "/r.svg");

    std::ifstream in(dir + "/r.svg");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t rects = 0, edges = 0, pos = 0;
    while ((pos = text.find("<rect", pos)) != std::string::npos) { ++rects; pos += 5; }
    pos = 0;
    while ((pos = text.find("<line", pos)) != std::string::npos) { ++edges; pos += 5; }
    CHECK(rects == I + J);
    CHECK(edges == I * J);
    CHECK(edges <= 1440);

    emit_routing_svg(d, dir + "/r2.svg");
    CHECK(read_bytes(dir + "/r.svg") == read_bytes(dir + "/r2.svg"));

    // all-zero activations: every rectangle at the lightest shade
    DiagramModel dz = routing_diagram(st, std::vector<double>(I, 0.0),
                                      std::vector<double>(J, 0.0), 2.0);
    emit_routing_svg(dz, dir + "/z.svg");
    std::ifstream in2(dir + "/z.svg");
    std::string t2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    CHECK(t2.find("fill=\"rgb(255,255,255)\"") != std::string::npos);
    CHECK(t2.find("<line") == std::string::npos); // threshold above every c
}

TEST_CASE("checkpoint: bitwise round trip including awkward values") {
    std::string dir = scratch_dir("ckpt");
    SeededRng rng(5);
    std::map<std::string, Tensor> sections;
    sections.emplace("weights", testsupport::random_tensor({3, 4, 2}, rng, 100.0));
    Tensor odd({5});
    odd[0] = 0.0;
    odd[1] = -0.0;
    odd[2] = 5e-324;
    odd[3] = std::numeric_limits<double>::max();
    odd[4] = -1.0 / 3.0;
    sections.emplace("odd", odd);
    sections.emplace("scalar", Tensor({1}, 42.0));

    std::string path = dir + "/model.cpoe";
    save_checkpoint(sections, path);
    auto back = load_checkpoint(path);
    REQUIRE(back.size() == 3);
    CHECK(back.at("weights") == sections.at("weights"));
    CHECK(back.at("scalar") == sections.at("scalar"));
    for (std::size_t k = 0; k < odd.size(); ++k) {
        // bit-level comparison so -0.0 round trips as -0.0
        CHECK(std::bit_cast<std::uint64_t>(back.at("odd")[k]) ==
              std::bit_cast<std::uint64_t>(odd[k]));
    }

    // identical content produces identical bytes
    save_checkpoint(sections, dir + "/again.cpoe");
    CHECK(read_bytes(path) == read_bytes(dir + "/again.cpoe"));
}

TEST_CASE("checkpoint: corruption, magic and version failures") {
    std::string dir = scratch_dir("ckpt_err");
    std::map<std::string, Tensor> sections;
    sections.emplace("t", Tensor({2, 2}, 1.5));
    std::string path = dir + "/c.cpoe";
    save_checkpoint(sections, path);

    auto bytes = read_bytes(path);
    auto rewrite = [&](const std::string& name, std::vector<std::uint8_t> b) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(b.size()));
        return dir + "/" + name;
    };

    auto corrupted = bytes;
    corrupted[20] ^= 0x40;
    CHECK_THROWS_AS(load_checkpoint(rewrite("bad.cpoe", corrupted)), ChecksumError);

    auto wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(rewrite("magic.cpoe", wrong_magic)), BadMagicError);

    auto truncated = bytes;
    truncated.resize(10);
    CHECK_THROWS_AS(load_checkpoint(rewrite("trunc.cpoe", truncated)), TruncatedError);

    CHECK_THROWS_AS(load_checkpoint(dir + "/nope.cpoe"), IoError);
}
