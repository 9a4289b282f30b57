#include "lapseg/dataset/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lapseg/error.hpp"

namespace fs = std::filesystem;

namespace lapseg::dataset {

namespace {

// Pixel-centre aligned nearest neighbour, same mapping for every pixel type.
constexpr int kNearest = cv::INTER_NEAREST_EXACT;

cv::Mat view(const ImageTensor& image) {
  return cv::Mat(image.height, image.width, CV_32FC3, const_cast<float*>(image.data.data()));
}

cv::Mat view(const MaskTensor& mask) {
  return cv::Mat(mask.height, mask.width, CV_8UC1, const_cast<std::uint8_t*>(mask.data.data()));
}

void check_size(Size2 size) {
  if (size.width <= 0 || size.height <= 0)
    throw Error(ErrorCode::invalid_config, "target size must be positive");
}

}  // namespace

MaskTensor binarize_mask(const RawMask& raw) {
  MaskTensor out(raw.height, raw.width);
  std::transform(raw.data.begin(), raw.data.end(), out.data.begin(),
                 [](std::int32_t v) { return std::uint8_t(v > 0 ? 1 : 0); });
  return out;
}

ImageTensor read_image(const fs::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::unreadable_image, path.string());
  ImageTensor out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(y, x, 0) = float(row[x][2]) / 255.0f;
      out.at(y, x, 1) = float(row[x][1]) / 255.0f;
      out.at(y, x, 2) = float(row[x][0]) / 255.0f;
    }
  }
  return out;
}

RawMask read_raw_mask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw Error(ErrorCode::unreadable_image, path.string());
  if (m.depth() != CV_8U && m.depth() != CV_16U)
    throw Error(ErrorCode::unreadable_image, "mask must be 8- or 16-bit: " + path.string());
  m.convertTo(m, CV_32S);
  if (m.channels() > 1) {
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    cv::Mat acc = planes[0];
    for (std::size_t i = 1; i < planes.size(); ++i) acc = cv::max(acc, planes[i]);
    m = acc;
  }
  RawMask out;
  out.height = m.rows;
  out.width = m.cols;
  out.data.resize(std::size_t(m.rows) * m.cols);
  for (int y = 0; y < m.rows; ++y)
    std::copy_n(m.ptr<std::int32_t>(y), m.cols, out.data.begin() + std::ptrdiff_t(y) * m.cols);
  return out;
}

void write_image_png(const ImageTensor& image, const fs::path& path) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[x][2 - c] = cv::saturate_cast<std::uint8_t>(std::lround(image.at(y, x, c) * 255.0f));
  }
  if (!cv::imwrite(path.string(), bgr)) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

void write_mask_png(const MaskTensor& mask, const fs::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
  if (!cv::imwrite(path.string(), m)) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

ImageTensor resize(const ImageTensor& image, Size2 size, Interpolation interp) {
  check_size(size);
  if (size.width == image.width && size.height == image.height) return image;
  ImageTensor out(size.height, size.width);
  cv::Mat dst = view(out);
  cv::resize(view(image), dst, cv::Size(size.width, size.height), 0, 0,
             interp == Interpolation::bilinear ? cv::INTER_LINEAR : kNearest);
  // cv::resize must not reallocate: dst already has the right size/type.
  CV_Assert(dst.data == reinterpret_cast<uchar*>(out.data.data()));
  for (float& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

MaskTensor resize(const MaskTensor& mask, Size2 size) {
  check_size(size);
  if (size.width == mask.width && size.height == mask.height) return mask;
  MaskTensor out(size.height, size.width);
  cv::Mat dst = view(out);
  cv::resize(view(mask), dst, cv::Size(size.width, size.height), 0, 0, kNearest);
  CV_Assert(dst.data == out.data.data());
  return out;
}

ImageTensor mask_as_image(const MaskTensor& mask) {
  ImageTensor out(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = float(mask.data[i]);
  return out;
}

std::pair<ImageTensor, MaskTensor> load_sample(const SampleRecord& record, Size2 target) {
  if (target.width <= 0 || target.height <= 0 || target.width % 32 || target.height % 32)
    throw Error(ErrorCode::invalid_config, "target size must be positive multiples of 32");
  ImageTensor image = read_image(record.image_path);
  RawMask raw = read_raw_mask(record.mask_path);
  if (raw.height != image.height || raw.width != image.width)
    throw Error(ErrorCode::dimension_mismatch,
                record.image_path.string() + " is " + std::to_string(image.width) + "x" +
                    std::to_string(image.height) + " but its mask is " + std::to_string(raw.width) +
                    "x" + std::to_string(raw.height));
  return {resize(image, target, Interpolation::bilinear), resize(binarize_mask(raw), target)};
}

}  // namespace lapseg::dataset
