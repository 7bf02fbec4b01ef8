#pragma once

// Raster decoding and encoding. OpenCV's imgcodecs handles the byte-level
// formats; everything downstream works on GrayImage.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "figmine/error.hpp"
#include "figmine/image.hpp"

namespace figmine {

enum class ImageFormat { gif, jpeg, png, tiff, unknown };

inline std::string to_string(ImageFormat f) {
  switch (f) {
    case ImageFormat::gif: return "gif";
    case ImageFormat::jpeg: return "jpeg";
    case ImageFormat::png: return "png";
    case ImageFormat::tiff: return "tiff";
    case ImageFormat::unknown: break;
  }
  return "unknown";
}

/// Identify the container from its magic bytes. File extensions are not
/// trusted.
inline ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
  auto starts = [&](std::initializer_list<std::uint8_t> magic) {
    if (bytes.size() < magic.size()) return false;
    return std::equal(magic.begin(), magic.end(), bytes.begin());
  };
  if (starts({'G', 'I', 'F', '8'})) return ImageFormat::gif;
  if (starts({0xFF, 0xD8, 0xFF})) return ImageFormat::jpeg;
  if (starts({0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A})) return ImageFormat::png;
  if (starts({'I', 'I', 0x2A, 0x00}) || starts({'M', 'M', 0x00, 0x2A})) return ImageFormat::tiff;
  return ImageFormat::unknown;
}

/// Decode to an 8-bit image with 1 (gray) or 3 (BGR) channels. Alpha is
/// composited over white; 16-bit inputs are rescaled.
inline cv::Mat decode_raster(std::span<const std::uint8_t> bytes) {
  const ImageFormat fmt = sniff_format(bytes);
  if (fmt == ImageFormat::unknown) fail(ErrorCode::UnsupportedFormat, "unrecognized image signature");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat img;
  try {
    img = cv::imdecode(buf, cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  } catch (const cv::Exception& e) {
    fail(ErrorCode::DecodeError, e.what());
  }
  if (img.empty()) fail(ErrorCode::DecodeError, "decoder rejected " + to_string(fmt) + " payload");

  if (img.depth() != CV_8U) {
    cv::Mat tmp;
    const double scale = img.depth() == CV_16U ? 1.0 / 257.0 : (img.depth() == CV_32F || img.depth() == CV_64F ? 255.0 : 1.0);
    img.convertTo(tmp, CV_8U, scale);
    img = tmp;
  }
  if (img.channels() == 4) {
    cv::Mat out(img.rows, img.cols, CV_8UC3);
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c) {
        const auto px = img.at<cv::Vec4b>(r, c);
        const double a = px[3] / 255.0;
        cv::Vec3b o;
        for (int k = 0; k < 3; ++k) o[k] = cv::saturate_cast<std::uint8_t>(px[k] * a + 255.0 * (1.0 - a));
        out.at<cv::Vec3b>(r, c) = o;
      }
    img = out;
  } else if (img.channels() == 2) {
    cv::Mat out(img.rows, img.cols, CV_8UC1);
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c) {
        const auto px = img.at<cv::Vec2b>(r, c);
        const double a = px[1] / 255.0;
        out.at<std::uint8_t>(r, c) = cv::saturate_cast<std::uint8_t>(px[0] * a + 255.0 * (1.0 - a));
      }
    img = out;
  }
  return img;
}

inline std::vector<std::uint8_t> encode_png(const cv::Mat& img) {
  std::vector<std::uint8_t> out;
  // Fixed compression level so the encoded bytes, and therefore the content
  // address, are stable.
  if (!cv::imencode(".png", img, out, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    fail(ErrorCode::IoError, "png encode failed");
  return out;
}

/// ITU-R BT.601 luminance in [0,1].
inline GrayImage to_gray(const cv::Mat& img) {
  if (img.empty()) fail(ErrorCode::InvalidImage, "zero-area image");
  GrayImage out(img.cols, img.rows);
  if (img.channels() == 1) {
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c) out.at(r, c) = img.at<std::uint8_t>(r, c) / 255.0f;
  } else {
    for (int r = 0; r < img.rows; ++r)
      for (int c = 0; c < img.cols; ++c) {
        const auto px = img.at<cv::Vec3b>(r, c);
        out.at(r, c) = static_cast<float>((0.114 * px[0] + 0.587 * px[1] + 0.299 * px[2]) / 255.0);
      }
  }
  return out;
}

inline cv::Mat to_raster(const GrayImage& img) {
  cv::Mat out(img.height, img.width, CV_8UC1);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp(img.at(r, c), 0.0f, 1.0f) * 255.0f));
  return out;
}

inline GrayImage decode_gray(std::span<const std::uint8_t> bytes) { return to_gray(decode_raster(bytes)); }

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) { return encode_png(to_raster(img)); }

inline cv::Mat crop_raster(const cv::Mat& img, const Rect& r) {
  if (!Rect{0, 0, img.cols, img.rows}.contains(r) || r.empty())
    fail(ErrorCode::InvalidRegion, "crop rectangle outside image");
  return img(cv::Rect(r.x, r.y, r.w, r.h)).clone();
}

}  // namespace figmine
