#include <doctest.h>

#include <filesystem>

#include "dc2/divide.hpp"
#include "dc2/image.hpp"

using namespace dc2;

TEST_SUITE_BEGIN("image");

TEST_CASE("crop copies the exact window") {
    Image img(8, 6);
    img.fill_rect(Region{2, 1, 3, 2}, 10, 20, 30);
    const Image c = crop(img, Region{2, 1, 3, 2});
    CHECK(c.w == 3);
    CHECK(c.h == 2);
    for (int y = 0; y < c.h; ++y) {
        for (int x = 0; x < c.w; ++x) {
            CHECK(c.px(x, y)[0] == 10);
            CHECK(c.px(x, y)[2] == 30);
        }
    }
    CHECK_THROWS_AS(crop(img, Region{7, 0, 3, 3}), std::invalid_argument);
}

TEST_CASE("bilinear resize of a constant image is constant") {
    Image img(50, 30, 77);
    const Image out = bilinear_resize(img, 13, 9);
    for (const std::uint8_t v : out.data) CHECK(v == 77);
}

TEST_CASE("average of black and white is mid gray, rounded half up") {
    const Image black(4, 4, 0);
    const Image white(4, 4, 255);
    const Image avg = average_images({black, white});
    // (0 + 255) / 2 = 127.5 -> 128
    for (const std::uint8_t v : avg.data) CHECK(v == 128);
}

TEST_CASE("average of a single image is the image") {
    Image img(5, 5, 9);
    img.fill_rect(Region{1, 1, 2, 2}, 200, 100, 50);
    CHECK(average_images({img}) == img);
}

TEST_CASE("downsample_to_max_side preserves aspect and never upscales") {
    Image img(800, 600, 3);
    const Image down = downsample_to_max_side(img, 336);
    CHECK(down.w == 336);
    CHECK(down.h == 252);
    const Image same = downsample_to_max_side(down, 336);
    CHECK(same == down);
    const Image tiny(10, 4, 1);
    CHECK(downsample_to_max_side(tiny, 336) == tiny);
}

TEST_CASE("png round trip preserves pixels") {
    Image img(17, 11);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            std::uint8_t* p = img.px(x, y);
            p[0] = static_cast<std::uint8_t>(x * 13 + y);
            p[1] = static_cast<std::uint8_t>(x + y * 7);
            p[2] = static_cast<std::uint8_t>(x * y);
        }
    }
    const auto bytes = encode_png(img);
    CHECK(decode_image(bytes) == img);

    const auto tmp =
        (std::filesystem::temp_directory_path() / "dc2_roundtrip.png").string();
    save_png(img, tmp);
    CHECK(load_image(tmp) == img);
    std::filesystem::remove(tmp);
}

TEST_CASE("base64 encodes the usual test vectors") {
    const auto enc = [](const std::string& s) {
        return base64_encode(std::vector<std::uint8_t>(s.begin(), s.end()));
    };
    CHECK(enc("") == "");
    CHECK(enc("f") == "Zg==");
    CHECK(enc("fo") == "Zm8=");
    CHECK(enc("foo") == "Zm9v");
    CHECK(enc("foobar") == "Zm9vYmFy");
    const std::vector<std::uint8_t> bytes = {0, 255, 10, 77, 200};
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
}

TEST_SUITE_END();
