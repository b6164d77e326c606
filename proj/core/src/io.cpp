// SPDX-License-Identifier: Apache-2.0
#include "mdps/io.hpp"

#include <png.h>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace mdps {

ImageTensor read_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("unreadable image: " + path);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  ImageTensor img(3, rgb.rows, rgb.cols, ValueRange::Unit);
  for (int y = 0; y < rgb.rows; ++y) {
    const cv::Vec3b* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(row[x][c]) / 255.0f;
      }
    }
  }
  return img;
}

MaskImage read_mask(const std::string& path) {
  cv::Mat gray = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (gray.empty()) throw std::runtime_error("unreadable mask: " + path);
  MaskImage mask(gray.rows, gray.cols, 0);
  for (int y = 0; y < gray.rows; ++y) {
    const std::uint8_t* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) {
      mask.at(y, x) = row[x] > 127 ? 1 : 0;
    }
  }
  return mask;
}

void write_image_png(const std::string& path, const ImageTensor& img) {
  if (img.channels != 3) throw std::invalid_argument("write_image_png: expected 3 channels");
  const ImageTensor unit = img.range == ValueRange::Model ? to_unit_range(img) : img;
  cv::Mat rgb(unit.height, unit.width, CV_8UC3);
  for (int y = 0; y < unit.height; ++y) {
    cv::Vec3b* row = rgb.ptr<cv::Vec3b>(y);
    for (int x = 0; x < unit.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(unit.at(c, y, x), 0.0f, 1.0f);
        row[x][c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path, bgr)) throw std::runtime_error("cannot write image: " + path);
}

void write_heatmap_png16(const std::string& path, const ScoreMap& map) {
  float peak = 0.0f;
  for (float v : map.data) peak = std::max(peak, v);
  cv::Mat gray(map.height, map.width, CV_16UC1);
  const double scale = peak > 0.0f ? 65535.0 / peak : 0.0;
  for (int y = 0; y < map.height; ++y) {
    std::uint16_t* row = gray.ptr<std::uint16_t>(y);
    for (int x = 0; x < map.width; ++x) {
      const double v = std::max(0.0, static_cast<double>(map.at(y, x))) * scale;
      row[x] = static_cast<std::uint16_t>(std::lround(std::min(v, 65535.0)));
    }
  }
  if (!cv::imwrite(path, gray)) throw std::runtime_error("cannot write heatmap: " + path);
}

void write_mask_png1(const std::string& path, const MaskImage& mask) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("libpng failure writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(mask.width),
               static_cast<png_uint_32>(mask.height), 1, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int stride = (mask.width + 7) / 8;
  std::vector<png_byte> row(static_cast<std::size_t>(stride));
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) row[static_cast<std::size_t>(x / 8)] |= static_cast<png_byte>(0x80 >> (x % 8));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace mdps
