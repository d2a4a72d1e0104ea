#include "svpsf/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svpsf/error.hpp"

namespace svpsf {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) fail(ErrorKind::Size, "image dimensions must be nonnegative");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0 || pixels_.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::Size, "pixel count does not match image dimensions");
}

double Image::sum() const noexcept { return std::accumulate(pixels_.begin(), pixels_.end(), 0.0); }

double Image::mean() const noexcept { return pixels_.empty() ? 0.0 : sum() / pixels_.size(); }

double Image::min() const noexcept {
  return pixels_.empty() ? 0.0 : *std::min_element(pixels_.begin(), pixels_.end());
}

double Image::max() const noexcept {
  return pixels_.empty() ? 0.0 : *std::max_element(pixels_.begin(), pixels_.end());
}

double Image::variance() const noexcept {
  if (pixels_.empty()) return 0.0;
  const double m = mean();
  double acc = 0.0;
  for (double v : pixels_) acc += (v - m) * (v - m);
  return acc / pixels_.size();
}

bool Image::all_finite() const noexcept {
  return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return std::isfinite(v); });
}

Image Image::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_)
    fail(ErrorKind::Size, "crop window outside image");
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(pixels_.begin() + static_cast<std::ptrdiff_t>(y0 + y) * width_ + x0, w,
                out.pixels_.begin() + static_cast<std::ptrdiff_t>(y) * w);
  return out;
}

Image Image::rotated90(int quarter_turns) const {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return *this;
  if (k == 2) {
    Image out(width_, height_);
    std::reverse_copy(pixels_.begin(), pixels_.end(), out.pixels_.begin());
    return out;
  }
  Image out(height_, width_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (k == 1)
        out(y, width_ - 1 - x) = (*this)(x, y);
      else
        out(height_ - 1 - y, x) = (*this)(x, y);
    }
  }
  return out;
}

Image& Image::operator*=(double s) noexcept {
  for (double& v : pixels_) v *= s;
  return *this;
}

Image& Image::operator+=(double s) noexcept {
  for (double& v : pixels_) v += s;
  return *this;
}

Image& Image::operator+=(const Image& other) {
  if (other.width_ != width_ || other.height_ != height_)
    fail(ErrorKind::DimensionMismatch, "image dimensions differ");
  for (std::size_t i = 0; i < pixels_.size(); ++i) pixels_[i] += other.pixels_[i];
  return *this;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.width() != b.width() || a.height() != b.height())
    fail(ErrorKind::DimensionMismatch, "image dimensions differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
  return m;
}

}  // namespace svpsf
