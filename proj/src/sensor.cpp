#include "scotopic/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace scotopic {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kJitterReferencePpp = 220.0;
constexpr double kFpnGainFloor = 1e-3;
}  // namespace

void IntensityImage::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw std::invalid_argument("image: non-positive dimensions");
  if (pixels.size() != static_cast<size_t>(height) * width * channels)
    throw std::invalid_argument("image: pixel buffer does not match dimensions");
  for (double p : pixels)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("image: pixel outside [0,1]");
}

void NoiseConfig::validate() const {
  if (dark_current < 0.0) throw std::invalid_argument("noise: dark_current < 0");
  if (read_noise_std < 0.0) throw std::invalid_argument("noise: read_noise_std < 0");
  if (fpn_std < 0.0) throw std::invalid_argument("noise: fpn_std < 0");
  if (jitter_std_deg < 0.0) throw std::invalid_argument("noise: jitter_std_deg < 0");
  if (!(illuminance > 0.0)) throw std::invalid_argument("noise: illuminance must be positive");
  if (!(bin_width > 0.0)) throw std::invalid_argument("noise: bin_width must be positive");
}

double pixel_rate(double intensity, const NoiseConfig& cfg) {
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw std::invalid_argument("pixel_rate: intensity outside [0,1]");
  if (!(cfg.illuminance > 0.0))
    throw std::invalid_argument("pixel_rate: non-positive illuminance");
  return cfg.illuminance * (intensity + cfg.dark_current) / (1.0 + cfg.dark_current);
}

double ppp_of_bins(double num_bins, const NoiseConfig& cfg) {
  return cfg.illuminance * num_bins * cfg.bin_width;
}

double equivalent_time(double ppp_hat, double illuminance, double bin_width) {
  if (!(illuminance > 0.0) || !(bin_width > 0.0))
    throw std::invalid_argument("equivalent_time: non-positive illuminance or bin width");
  if (ppp_hat < 0.0) throw std::invalid_argument("equivalent_time: negative ppp");
  return ppp_hat / (illuminance * bin_width);
}

double bits_of_signal(double t_seconds, double lux) {
  if (!(t_seconds > 0.0) || !(lux > 0.0))
    throw std::invalid_argument("bits_of_signal: inputs must be positive");
  return 5.0 + 0.5 * std::log2(t_seconds) + 0.5 * std::log2(lux);
}

IntensityImage rotate_bilinear(const IntensityImage& img, double degrees) {
  if (degrees == 0.0) return img;
  IntensityImage out = img;
  const double cx = (img.width - 1) * 0.5;
  const double cy = (img.height - 1) * 0.5;
  const double c = std::cos(-degrees * kDegToRad);
  const double s = std::sin(-degrees * kDegToRad);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + c * dx - s * dy;
      const double sy = cy + s * dx + c * dy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int ch = 0; ch < img.channels; ++ch) {
        auto sample = [&](int yy, int xx) -> double {
          if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return 0.0;
          return img.at(yy, xx, ch);
        };
        const double val = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                           fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
        out.pixels[(static_cast<size_t>(y) * img.width + x) * img.channels + ch] = val;
      }
    }
  }
  return out;
}

IntensityImage apply_jitter(const IntensityImage& img, double sigma_theta_deg,
                            double ppp, uint64_t seed) {
  if (ppp < 0.0) throw std::invalid_argument("apply_jitter: negative ppp");
  if (sigma_theta_deg == 0.0) return img;
  RngStream rng(seed, RngLane::JitterOneShot);
  const double theta = rng.normal() * sigma_theta_deg * ppp / kJitterReferencePpp;
  return rotate_bilinear(img, theta);
}

PhotonStream::PhotonStream(IntensityImage img, NoiseConfig cfg, int num_bins, uint64_t seed)
    : img_(std::move(img)), cfg_(cfg), num_bins_(num_bins), seed_(seed) {
  img_.validate();
  cfg_.validate();
  if (num_bins_ < 1) throw std::invalid_argument("stream: num_bins must be >= 1");
  fpn_gains_.resize(img_.pixels.size());
  for (size_t i = 0; i < fpn_gains_.size(); ++i) {
    RngStream rng(seed_, RngLane::FixedPattern, static_cast<uint32_t>(i));
    fpn_gains_[i] = std::max(kFpnGainFloor, 1.0 + cfg_.fpn_std * rng.normal());
  }
}

double PhotonStream::jitter_sigma_at(int t) const {
  return cfg_.jitter_std_deg * ppp_of_bins(t, cfg_) / kJitterReferencePpp;
}

double PhotonStream::jitter_angle_at(int t) const {
  // Replay the walk: independent increments whose variances telescope to
  // sigma(t)^2, so the marginal at any bin matches the one-shot distribution.
  double theta = 0.0;
  double prev_var = 0.0;
  for (int u = 1; u <= t; ++u) {
    const double s = jitter_sigma_at(u);
    const double var = s * s;
    RngStream rng(seed_, RngLane::Jitter, static_cast<uint32_t>(u));
    theta += std::sqrt(std::max(0.0, var - prev_var)) * rng.normal();
    prev_var = var;
  }
  return theta;
}

void PhotonStream::fill_frame(int t, const std::vector<double>& intensities,
                              std::vector<double>& out) const {
  out.resize(intensities.size());
  for (size_t i = 0; i < intensities.size(); ++i) {
    const double mean = pixel_rate(intensities[i], cfg_) * cfg_.bin_width;
    RngStream rng(seed_, RngLane::Frame, static_cast<uint32_t>(t), static_cast<uint32_t>(i));
    out[i] = static_cast<double>(rng.poisson(mean));
  }
}

void PhotonStream::frame(int t, std::vector<double>& out) const {
  if (t < 1 || t > num_bins_) throw std::out_of_range("stream: frame index out of range");
  if (cfg_.jitter_std_deg > 0.0) {
    const IntensityImage rotated = rotate_bilinear(img_, jitter_angle_at(t));
    fill_frame(t, rotated.pixels, out);
  } else {
    fill_frame(t, img_.pixels, out);
  }
}

CountImage PhotonStream::accumulate(int t) const {
  if (t < 0 || t > num_bins_) throw std::out_of_range("stream: accumulate beyond stream length");
  Cursor cur(*this);
  cur.advance_to(t);
  return cur.counts();
}

PhotonStream::Cursor::Cursor(const PhotonStream& s)
    : stream_(&s), cum_(s.pixel_count(), 0.0) {}

void PhotonStream::Cursor::step() {
  const PhotonStream& s = *stream_;
  if (bin_ >= s.num_bins_) throw std::out_of_range("cursor: past end of stream");
  const int t = bin_ + 1;
  const std::vector<double>* intensities = &s.img_.pixels;
  IntensityImage rotated;
  if (s.cfg_.jitter_std_deg > 0.0) {
    const double s_prev = s.jitter_sigma_at(t - 1);
    const double s_now = s.jitter_sigma_at(t);
    RngStream rng(s.seed_, RngLane::Jitter, static_cast<uint32_t>(t));
    theta_deg_ += std::sqrt(std::max(0.0, s_now * s_now - s_prev * s_prev)) * rng.normal();
    rotated = rotate_bilinear(s.img_, theta_deg_);
    intensities = &rotated.pixels;
  }
  s.fill_frame(t, *intensities, rotated_);
  for (size_t i = 0; i < cum_.size(); ++i) cum_[i] += rotated_[i];
  bin_ = t;
}

void PhotonStream::Cursor::advance_to(int t) {
  if (t < bin_) throw std::invalid_argument("cursor: cannot rewind");
  while (bin_ < t) step();
}

CountImage PhotonStream::Cursor::counts() const {
  CountImage c;
  c.height = stream_->height();
  c.width = stream_->width();
  c.channels = stream_->channels();
  c.counts = cum_;
  c.num_bins = bin_;
  c.ppp = ppp_of_bins(bin_, stream_->config());
  return c;
}

CountImage readout(const CountImage& counts, const PhotonStream& stream,
                   const NoiseConfig& cfg, uint64_t seed) {
  if (counts.counts.size() != stream.fpn_gains().size())
    throw std::invalid_argument("readout: counts/gains dimension mismatch");
  CountImage out = counts;
  if (cfg.read_noise_std == 0.0 && cfg.fpn_std == 0.0) return out;
  for (size_t i = 0; i < out.counts.size(); ++i) {
    double v = out.counts[i];
    if (cfg.read_noise_std > 0.0) {
      RngStream rng(seed, RngLane::Readout, static_cast<uint32_t>(i));
      v += cfg.read_noise_std * rng.normal();
    }
    v *= stream.fpn_gains()[i];
    out.counts[i] = std::max(0.0, v);
  }
  return out;
}

CountImage simulate_counts(const IntensityImage& img, const NoiseConfig& cfg,
                           double ppp, uint64_t seed) {
  img.validate();
  cfg.validate();
  if (ppp < 0.0) throw std::invalid_argument("simulate_counts: negative ppp");
  const IntensityImage* scene = &img;
  IntensityImage rotated;
  if (cfg.jitter_std_deg > 0.0 && ppp > 0.0) {
    rotated = apply_jitter(img, cfg.jitter_std_deg, ppp, seed);
    scene = &rotated;
  }
  const double t_bins = equivalent_time(ppp, cfg.illuminance, cfg.bin_width);
  CountImage out;
  out.height = img.height;
  out.width = img.width;
  out.channels = img.channels;
  out.num_bins = static_cast<int>(std::lround(t_bins));
  out.ppp = ppp;
  out.counts.resize(img.pixels.size());
  const bool corrupt = cfg.read_noise_std > 0.0 || cfg.fpn_std > 0.0;
  for (size_t i = 0; i < out.counts.size(); ++i) {
    RngStream rng(seed, RngLane::Sample, static_cast<uint32_t>(i));
    const double mean = pixel_rate(scene->pixels[i], cfg) * cfg.bin_width * t_bins;
    double v = static_cast<double>(rng.poisson(mean));
    if (corrupt) {
      if (cfg.read_noise_std > 0.0) v += cfg.read_noise_std * rng.normal();
      if (cfg.fpn_std > 0.0)
        v *= std::max(kFpnGainFloor, 1.0 + cfg.fpn_std * rng.normal());
      v = std::max(0.0, v);
    }
    out.counts[i] = v;
  }
  return out;
}

}  // namespace scotopic
