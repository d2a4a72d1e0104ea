#include "svpsf/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "svpsf/error.hpp"

namespace svpsf::fft {
namespace {

enum class Kind { R2C, C2R, C2C };

// FFTW planning is not thread-safe; execution of an existing plan on new arrays is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, int w, int h) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(kind, w, h);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const std::size_t n_real = static_cast<std::size_t>(w) * h;
    const std::size_t n_half = static_cast<std::size_t>(w / 2 + 1) * h;
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::R2C: {
        double* in = fftw_alloc_real(n_real);
        fftw_complex* out = fftw_alloc_complex(n_half);
        plan = fftw_plan_dft_r2c_2d(h, w, in, out, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
      case Kind::C2R: {
        fftw_complex* in = fftw_alloc_complex(n_half);
        double* out = fftw_alloc_real(n_real);
        plan = fftw_plan_dft_c2r_2d(h, w, in, out, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
      case Kind::C2C: {
        fftw_complex* in = fftw_alloc_complex(n_real);
        fftw_complex* out = fftw_alloc_complex(n_real);
        plan = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
    }
    if (!plan) fail(ErrorKind::Numerical, "FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Kind, int, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

int fast_size(int n) {
  if (n <= 1) return 1;
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

Spectrum forward(const Image& field) {
  if (field.empty()) fail(ErrorKind::Size, "cannot transform an empty field");
  Spectrum s{field.width(), field.height(), {}};
  s.data.resize(static_cast<std::size_t>(field.width() / 2 + 1) * field.height());
  std::vector<double> in(field.pixels().begin(), field.pixels().end());
  fftw_execute_dft_r2c(plans().get(Kind::R2C, field.width(), field.height()), in.data(),
                       as_fftw(s.data.data()));
  return s;
}

Image inverse(Spectrum spectrum) {
  Image out(spectrum.width, spectrum.height);
  fftw_execute_dft_c2r(plans().get(Kind::C2R, spectrum.width, spectrum.height),
                       as_fftw(spectrum.data.data()), out.pixels().data());
  out *= 1.0 / (static_cast<double>(spectrum.width) * spectrum.height);
  return out;
}

Spectrum kernel_spectrum(const Image& kernel, int field_w, int field_h) {
  if (kernel.width() % 2 == 0 || kernel.height() % 2 == 0)
    fail(ErrorKind::Size, "kernel sides must be odd");
  if (kernel.width() > field_w || kernel.height() > field_h)
    fail(ErrorKind::Size, "kernel larger than the transform field");
  Image wrapped(field_w, field_h);
  const int rx = kernel.width() / 2;
  const int ry = kernel.height() / 2;
  for (int y = 0; y < kernel.height(); ++y) {
    const int wy = ((y - ry) % field_h + field_h) % field_h;
    for (int x = 0; x < kernel.width(); ++x) {
      const int wx = ((x - rx) % field_w + field_w) % field_w;
      wrapped(wx, wy) += kernel(x, y);
    }
  }
  return forward(wrapped);
}

void multiply(Spectrum& a, const Spectrum& b, bool conjugate_b) {
  if (a.width != b.width || a.height != b.height)
    fail(ErrorKind::DimensionMismatch, "spectrum sizes differ");
  if (conjugate_b)
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] *= std::conj(b.data[i]);
  else
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] *= b.data[i];
}

void multiply_add(Spectrum& acc, const Spectrum& a, const Spectrum& b, bool conjugate_b) {
  if (acc.width != a.width || acc.height != a.height || a.width != b.width || a.height != b.height)
    fail(ErrorKind::DimensionMismatch, "spectrum sizes differ");
  if (conjugate_b)
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += a.data[i] * std::conj(b.data[i]);
  else
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += a.data[i] * b.data[i];
}

std::vector<std::complex<double>> forward_complex(std::vector<std::complex<double>> field, int width,
                                                  int height) {
  if (field.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::Size, "complex field size mismatch");
  std::vector<std::complex<double>> out(field.size());
  fftw_execute_dft(plans().get(Kind::C2C, width, height), as_fftw(field.data()), as_fftw(out.data()));
  return out;
}

}  // namespace svpsf::fft
