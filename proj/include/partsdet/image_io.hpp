#ifndef PARTSDET_IMAGE_IO_HPP
#define PARTSDET_IMAGE_IO_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "partsdet/errors.hpp"
#include "partsdet/tensor.hpp"

namespace partsdet {

inline uint8_t float_to_u8(float x) {
  const float c = x < 0.f ? 0.f : (x > 1.f ? 1.f : x);
  return static_cast<uint8_t>(std::lround(c * 255.f));
}

inline cv::Mat image_to_bgr8(const Image& img) {
  cv::Mat m(img.h, img.w, CV_8UC3);
  for (int y = 0; y < img.h; ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < img.w; ++x) {
      row[x * 3 + 0] = float_to_u8(img.at(y, x, 2));
      row[x * 3 + 1] = float_to_u8(img.at(y, x, 1));
      row[x * 3 + 2] = float_to_u8(img.at(y, x, 0));
    }
  }
  return m;
}

inline Image bgr8_to_image(const cv::Mat& m) {
  Image img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      img.at(y, x, 0) = row[x * 3 + 2] / 255.f;
      img.at(y, x, 1) = row[x * 3 + 1] / 255.f;
      img.at(y, x, 2) = row[x * 3 + 0] / 255.f;
    }
  }
  return img;
}

inline Image read_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw io_error("cannot read image: " + path);
  return bgr8_to_image(m);
}

inline void write_image_png(const std::string& path, const Image& img) {
  if (!cv::imwrite(path, image_to_bgr8(img)))
    throw io_error("cannot write image: " + path);
}

inline void write_image_jpeg(const std::string& path, const Image& img,
                             int quality) {
  if (!cv::imwrite(path, image_to_bgr8(img),
                   {cv::IMWRITE_JPEG_QUALITY, quality}))
    throw io_error("cannot write image: " + path);
}

// Mask persistence: 8-bit grayscale PNG, value = round(255 * m).
inline void write_mask_png(const std::string& path, const GridF& mask) {
  cv::Mat m(mask.h, mask.w, CV_8UC1);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x)
      m.at<uint8_t>(y, x) = float_to_u8(mask.at(y, x));
  if (!cv::imwrite(path, m)) throw io_error("cannot write mask: " + path);
}

inline GridF read_mask_png(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw io_error("cannot read mask: " + path);
  GridF g(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) g.at(y, x) = m.at<uint8_t>(y, x) / 255.f;
  return g;
}

inline std::vector<uint8_t> jpeg_encode(const Image& img, int quality) {
  std::vector<uint8_t> buf;
  if (!cv::imencode(".jpg", image_to_bgr8(img), buf,
                    {cv::IMWRITE_JPEG_QUALITY, quality}))
    throw io_error("jpeg encode failed");
  return buf;
}

inline Image jpeg_decode(const std::vector<uint8_t>& buf) {
  cv::Mat m = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (m.empty()) throw io_error("jpeg decode failed");
  return bgr8_to_image(m);
}

// Write-then-rename so readers never observe a partial file.
inline void atomic_write_text(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for write: " + tmp);
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot read: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace partsdet

#endif
