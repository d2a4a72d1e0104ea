#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svpsf {

// Row-major 2D grid of doubles. Used for images, kernels and pupil-plane grids.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& operator()(int x, int y) noexcept { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const noexcept { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }
  const std::vector<double>& vector() const noexcept { return pixels_; }

  double sum() const noexcept;
  double mean() const noexcept;
  double min() const noexcept;
  double max() const noexcept;
  double variance() const noexcept;
  bool all_finite() const noexcept;

  Image crop(int x0, int y0, int w, int h) const;
  // Rotates counter-clockwise by quarter_turns * 90 degrees (display orientation, y down).
  Image rotated90(int quarter_turns) const;

  Image& operator*=(double s) noexcept;
  Image& operator+=(double s) noexcept;
  Image& operator+=(const Image& other);

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

double max_abs_diff(const Image& a, const Image& b);

}  // namespace svpsf
