#pragma once

#include <cstdint>
#include <vector>

#include "scotopic/rng.hpp"

namespace scotopic {

// Ground-truth scene: per-pixel intensities in [0,1] on a (height, width,
// channels) grid, with an optional class label.
struct IntensityImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;  // row-major (y, x, c)
  int label = -1;              // -1 = unlabeled

  size_t size() const { return pixels.size(); }
  double at(int y, int x, int c = 0) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  void validate() const;
};

// Sensor noise model parameters.
struct NoiseConfig {
  double dark_current = 0.03;   // epsilon_dc, dimensionless fraction
  double read_noise_std = 0.15; // sigma_r, photons at readout
  double fpn_std = 0.03;        // sigma_fpn, multiplicative gain std
  double jitter_std_deg = 0.0;  // sigma_theta, degrees at the 220-PPP reference
  double illuminance = 1.0;     // lambda_phi, photons per pixel per unit time
  double bin_width = 1.0;       // Delta, unit time per bin

  void validate() const;
  double ppp_per_bin() const { return illuminance * bin_width; }
};

// Cumulative photon counts with their exposure metadata. Counts are integers
// straight off the stream and reals after readout corruption.
struct CountImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> counts;
  int num_bins = 0;
  double ppp = 0.0;

  size_t size() const { return counts.size(); }
};

// Poisson rate for one pixel: lambda_phi * (I + eps_dc) / (1 + eps_dc),
// photons per unit time. Dark current keeps the rate positive at I = 0.
double pixel_rate(double intensity, const NoiseConfig& cfg);

// PPP = lambda_phi * t * Delta for a t-bin exposure.
double ppp_of_bins(double num_bins, const NoiseConfig& cfg);

// Inverse of the PPP relation: the exposure (in bins) that yields ppp_hat.
double equivalent_time(double ppp_hat, double illuminance, double bin_width);

// Bits of signal per pixel for an exposure of t seconds at E_v lux:
// b = 5 + log2(t)/2 + log2(E_v)/2.
double bits_of_signal(double t_seconds, double lux);

// Rotate about the image center by `degrees`, bilinear with zero padding.
IntensityImage rotate_bilinear(const IntensityImage& img, double degrees);

// One-shot camera jitter: rotation drawn from N(0, (sigma_theta*ppp/220)^2).
IntensityImage apply_jitter(const IntensityImage& img, double sigma_theta_deg,
                            double ppp, uint64_t seed);

// A photon stream: per-bin Poisson count frames of a fixed scene under the
// configured noise model. Frames are a pure function of (seed, bin, pixel),
// so the stream is immutable, cheap to hold, and bit-reproducible; frames are
// materialized on demand rather than stored.
class PhotonStream {
 public:
  PhotonStream(IntensityImage img, NoiseConfig cfg, int num_bins, uint64_t seed);

  int num_bins() const { return num_bins_; }
  int height() const { return img_.height; }
  int width() const { return img_.width; }
  int channels() const { return img_.channels; }
  size_t pixel_count() const { return img_.pixels.size(); }
  int label() const { return img_.label; }
  uint64_t seed() const { return seed_; }
  const NoiseConfig& config() const { return cfg_; }
  const IntensityImage& image() const { return img_; }
  const std::vector<double>& fpn_gains() const { return fpn_gains_; }

  // Counts for bin t (1-based). O(pixels), plus O(t) to replay the jitter
  // walk when sigma_theta > 0; use a Cursor for sequential access.
  void frame(int t, std::vector<double>& out) const;

  // Sum of frames 1..t with PPP metadata. t = 0 yields an all-zero image.
  CountImage accumulate(int t) const;

  // Sequential walker: advances one bin at a time, keeping the running
  // cumulative counts and the jitter state, so a full pass costs
  // O(num_bins * pixels) total.
  class Cursor {
   public:
    explicit Cursor(const PhotonStream& s);
    int bin() const { return bin_; }
    bool done() const { return bin_ >= stream_->num_bins(); }
    void step();                 // consume bin_+1
    void advance_to(int t);      // step until bin() == t
    CountImage counts() const;   // snapshot of the cumulative counts
    const std::vector<double>& raw_counts() const { return cum_; }

   private:
    const PhotonStream* stream_;
    int bin_ = 0;
    std::vector<double> cum_;
    double theta_deg_ = 0.0;
    std::vector<double> rotated_;  // scratch: jittered intensities for this bin
  };

 private:
  // Jitter walk: cumulative rotation whose std at bin t is
  // sigma_theta * PPP(t) / 220; variance increments make the marginal exact.
  double jitter_sigma_at(int t) const;
  double jitter_angle_at(int t) const;  // O(t) replay
  void fill_frame(int t, const std::vector<double>& intensities,
                  std::vector<double>& out) const;

  IntensityImage img_;
  NoiseConfig cfg_;
  int num_bins_;
  uint64_t seed_;
  std::vector<double> fpn_gains_;
  friend class Cursor;
};

// Readout corruption of accumulated counts: additive read noise first, then
// the stream's fixed-pattern gains, clamped at zero. Applied per classifier
// query, not per bin.
CountImage readout(const CountImage& counts, const PhotonStream& stream,
                   const NoiseConfig& cfg, uint64_t seed);

// Direct draw of a count image at a given PPP: aggregated shot noise plus the
// jitter marginal and optional readout corruption. Distributionally identical
// to accumulate+readout on a stream; used where per-bin frames are not needed
// (training, light-estimator fitting).
CountImage simulate_counts(const IntensityImage& img, const NoiseConfig& cfg,
                           double ppp, uint64_t seed);

}  // namespace scotopic
