#include <doctest.h>

#include <cmath>
#include <limits>

#include <opencv2/imgproc.hpp>

#include "test_support.hpp"
#include "wpkit/error.hpp"
#include "wpkit/image.hpp"

using namespace wpkit;

TEST_CASE("planar and interleaved byte layouts agree") {
  std::vector<std::uint8_t> planar(3 * 2 * 3);
  std::vector<std::uint8_t> interleaved(planar.size());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 3; ++x) {
        const auto v = static_cast<std::uint8_t>(40 * c + 10 * y + x);
        planar[(c * 2 + y) * 3 + x] = v;
        interleaved[(y * 3 + x) * 3 + c] = v;
      }
  const auto a = Image::from_planar_bytes(planar, 2, 3);
  const auto b = Image::from_interleaved_bytes(interleaved, 2, 3);
  CHECK(a == b);
  CHECK(a.at(2, 1, 2) == doctest::Approx(92.0 / 255.0));
  CHECK(a.to_interleaved_bytes() == interleaved);
  CHECK_THROWS_AS(Image::from_planar_bytes(planar, 3, 3), Error);
}

TEST_CASE("to_interleaved_bytes clamps out-of-range values") {
  Image img(1, 1);
  img.at(0, 0, 0) = -0.5;
  img.at(1, 0, 0) = 1.7;
  img.at(2, 0, 0) = 0.5;
  const auto bytes = img.to_interleaved_bytes();
  CHECK(bytes[0] == 0);
  CHECK(bytes[1] == 255);
  CHECK(bytes[2] == 128);
}

TEST_CASE("validate rejects non-finite pixels") {
  Image img(2, 2, 0.5);
  CHECK_NOTHROW(img.validate());
  img.at(1, 1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    img.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "non-finite");
  }
}

TEST_CASE("bilinear resize matches OpenCV INTER_LINEAR") {
  for (auto [src, dst] : {std::pair<std::size_t, std::size_t>{20, 32}, {48, 32}, {7, 13}}) {
    const auto img = testing::random_image(src, 100 + src);
    const auto out = resize_bilinear(img, dst, dst);
    REQUIRE(out.height() == dst);
    for (std::size_t c = 0; c < kChannels; ++c) {
      cv::Mat in(static_cast<int>(src), static_cast<int>(src), CV_64F,
                 const_cast<double*>(img.plane(c).data()));
      cv::Mat ref;
      cv::resize(in, ref, cv::Size(static_cast<int>(dst), static_cast<int>(dst)), 0, 0,
                 cv::INTER_LINEAR);
      double worst = 0.0;
      for (std::size_t y = 0; y < dst; ++y)
        for (std::size_t x = 0; x < dst; ++x)
          worst = std::max(worst, std::abs(ref.at<double>(static_cast<int>(y), static_cast<int>(x)) -
                                           out.at(c, y, x)));
      CHECK(worst < 1e-5);
    }
  }
}

TEST_CASE("resize to the same size is a copy") {
  const auto img = testing::random_image(9, 3);
  CHECK(resize_bilinear(img, 9, 9) == img);
  CHECK_THROWS_AS(resize_bilinear(Image{}, 4, 4), Error);
}
