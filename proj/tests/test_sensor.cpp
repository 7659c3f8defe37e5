#include <doctest.h>

#include <cmath>

#include "scotopic/sensor.hpp"

using namespace scotopic;

namespace {

IntensityImage flat_image(int h, int w, double value, int label = 0) {
  IntensityImage img;
  img.height = h;
  img.width = w;
  img.channels = 1;
  img.label = label;
  img.pixels.assign(static_cast<size_t>(h) * w, value);
  return img;
}

NoiseConfig clean_noise() {
  NoiseConfig n;
  n.dark_current = 0.0;
  n.read_noise_std = 0.0;
  n.fpn_std = 0.0;
  n.jitter_std_deg = 0.0;
  return n;
}

}  // namespace

TEST_CASE("pixel_rate follows the shot-noise rate expression") {
  NoiseConfig cfg = clean_noise();
  cfg.dark_current = 0.03;
  CHECK(pixel_rate(1.0, cfg) == doctest::Approx(1.0));
  CHECK(pixel_rate(0.0, cfg) == doctest::Approx(0.03 / 1.03));
  cfg.dark_current = 0.0;
  cfg.illuminance = 2.0;
  CHECK(pixel_rate(0.5, cfg) == doctest::Approx(1.0));
  CHECK_THROWS(pixel_rate(-0.1, cfg));
  CHECK_THROWS(pixel_rate(1.1, cfg));
  cfg.illuminance = 0.0;
  CHECK_THROWS(pixel_rate(0.5, cfg));
}

TEST_CASE("ppp and equivalent time invert each other") {
  NoiseConfig cfg = clean_noise();
  CHECK(ppp_of_bins(5, cfg) == 5.0);
  for (double lam_delta : {1.0, 0.5, 2.0, 0.25}) {
    NoiseConfig c = clean_noise();
    c.illuminance = lam_delta;
    for (double p : {0.0, 0.22, 22.0, 220.0}) {
      const double t = equivalent_time(p, c.illuminance, c.bin_width);
      CHECK(ppp_of_bins(t, c) == p);  // exact for power-of-two products
    }
  }
  CHECK_THROWS(equivalent_time(1.0, 0.0, 1.0));
  CHECK_THROWS(equivalent_time(1.0, 1.0, 0.0));
}

TEST_CASE("bits_of_signal reproduces the exposure table cells") {
  // moonless, full moon, office, overcast, bright sun rows
  struct Cell { double t, lux, bits; };
  const Cell cells[] = {
      {8, 1e-3, 1.5},   {60, 1e-3, 3},
      {1.0 / 500, 1, 0.5}, {1.0 / 128, 1, 1.5}, {0.125, 1, 3.5}, {1, 1, 5},
      {8, 1, 6.5},      {60, 1, 8},
      {1.0 / 500, 250, 4.5}, {1.0 / 128, 250, 5.5}, {0.125, 250, 7.5},
      {1, 250, 9},      {8, 250, 10.5}, {60, 250, 12},
      {1.0 / 500, 1e3, 5.5}, {1.0 / 128, 1e3, 6.5}, {0.125, 1e3, 8.5},
      {1, 1e3, 10},     {8, 1e3, 11.5}, {60, 1e3, 13},
      {1.0 / 500, 1e5, 9}, {1.0 / 128, 1e5, 10}, {0.125, 1e5, 12},
      {1, 1e5, 13.5},   {8, 1e5, 15}, {60, 1e5, 16.5},
  };
  for (const Cell& c : cells)
    CHECK(std::abs(bits_of_signal(c.t, c.lux) - c.bits) <= 0.5);
  CHECK_THROWS(bits_of_signal(0.0, 1.0));
  CHECK_THROWS(bits_of_signal(1.0, -2.0));
}

TEST_CASE("streams are reproducible and frames match the cursor") {
  IntensityImage img = flat_image(4, 4, 0.5);
  NoiseConfig cfg = clean_noise();
  cfg.dark_current = 0.03;
  PhotonStream a(img, cfg, 20, 99);
  PhotonStream b(img, cfg, 20, 99);
  PhotonStream c(img, cfg, 20, 100);

  std::vector<double> fa, fb, fc;
  bool identical = true, differs = false;
  for (int t = 1; t <= 20; ++t) {
    a.frame(t, fa);
    b.frame(t, fb);
    c.frame(t, fc);
    identical = identical && fa == fb;
    differs = differs || fa != fc;
  }
  CHECK(identical);
  CHECK(differs);

  // accumulate equals the sum of frames (prefix additivity, exact)
  const CountImage n5 = a.accumulate(5);
  const CountImage n9 = a.accumulate(9);
  std::vector<double> manual = n5.counts;
  for (int t = 6; t <= 9; ++t) {
    a.frame(t, fa);
    for (size_t i = 0; i < manual.size(); ++i) manual[i] += fa[i];
  }
  CHECK(manual == n9.counts);
  CHECK(n9.ppp == doctest::Approx(ppp_of_bins(9, cfg)));

  const CountImage zero = a.accumulate(0);
  for (double v : zero.counts) CHECK(v == 0.0);
  CHECK(zero.ppp == 0.0);

  CHECK_THROWS(PhotonStream(img, cfg, 0, 1));
  CHECK_THROWS(a.accumulate(21));
}

TEST_CASE("per-bin counts have Poisson mean and Fano factor") {
  NoiseConfig cfg = clean_noise();
  cfg.dark_current = 0.03;
  cfg.bin_width = 0.8;
  IntensityImage img = flat_image(1, 1, 0.5);
  PhotonStream s(img, cfg, 20000, 7);
  std::vector<double> f;
  double sum = 0.0, sq = 0.0;
  for (int t = 1; t <= 20000; ++t) {
    s.frame(t, f);
    sum += f[0];
    sq += f[0] * f[0];
  }
  const int n = 20000;
  const double expected = pixel_rate(0.5, cfg) * cfg.bin_width;
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean - expected) < 4.0 * std::sqrt(expected / n));
  CHECK(var / mean == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("readout: identity when clean, unbiased gain scaling otherwise") {
  IntensityImage img = flat_image(2, 2, 1.0);
  NoiseConfig clean = clean_noise();
  PhotonStream s(img, clean, 4, 5);
  const CountImage counts = s.accumulate(4);
  const CountImage same = readout(counts, s, clean, 123);
  CHECK(same.counts == counts.counts);

  // sample std of the read noise on a bright pixel matches sigma_r * gain
  NoiseConfig noisy = clean;
  noisy.read_noise_std = 0.15;
  noisy.fpn_std = 0.03;
  IntensityImage one = flat_image(1, 1, 1.0);
  PhotonStream s1(one, noisy, 1, 11);
  CountImage fixed;
  fixed.height = fixed.width = fixed.channels = 1;
  fixed.counts = {100.0};
  fixed.num_bins = 1;
  fixed.ppp = 1;
  const double gain = s1.fpn_gains()[0];
  double sum = 0.0, sq = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const CountImage out = readout(fixed, s1, noisy, 1000 + i);
    sum += out.counts[0];
    sq += out.counts[0] * out.counts[0];
  }
  const double mean = sum / trials;
  const double stdev = std::sqrt(sq / trials - mean * mean);
  CHECK(stdev == doctest::Approx(0.15 * gain).epsilon(0.10));
  CHECK(mean == doctest::Approx(100.0 * gain).epsilon(0.01));

  CountImage wrong;
  wrong.height = 1;
  wrong.width = 3;
  wrong.channels = 1;
  wrong.counts = {1, 2, 3};
  CHECK_THROWS(readout(wrong, s1, noisy, 1));

  // clamp at zero: tiny counts with huge read noise never go negative
  NoiseConfig harsh = clean;
  harsh.read_noise_std = 50.0;
  CountImage zero;
  zero.height = zero.width = zero.channels = 1;
  zero.counts = {0.0};
  for (int i = 0; i < 200; ++i)
    CHECK(readout(zero, s1, harsh, i).counts[0] >= 0.0);
}

TEST_CASE("jitter: identity at zero, std scales linearly with ppp") {
  IntensityImage img = flat_image(6, 6, 0.0);
  img.pixels[2 * 6 + 3] = 1.0;  // off-center dot so rotation moves it
  CHECK(apply_jitter(img, 0.0, 220.0, 9).pixels == img.pixels);

  // sigma * ppp / 220 is the law: equal products give identical rotations
  const IntensityImage a = apply_jitter(img, 22.0, 22.0, 31);
  const IntensityImage b = apply_jitter(img, 2.2, 220.0, 31);
  CHECK(a.pixels == b.pixels);
  const IntensityImage c = apply_jitter(img, 22.0, 220.0, 31);
  CHECK(a.pixels != c.pixels);
}

TEST_CASE("rotation is bilinear with zero padding") {
  IntensityImage img = flat_image(3, 3, 0.0);
  img.pixels[0 * 3 + 1] = 1.0;  // top-center
  const IntensityImage quarter = rotate_bilinear(img, 90.0);
  // 90 degrees counterclockwise in image coordinates maps top-center to a side
  double total = 0.0;
  for (double p : quarter.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rotate_bilinear(img, 0.0).pixels == img.pixels);
}

TEST_CASE("simulate_counts matches stream statistics at an anchor") {
  NoiseConfig cfg = clean_noise();
  cfg.dark_current = 0.03;
  IntensityImage img = flat_image(2, 2, 0.7);
  const double ppp = 22.0;
  double sum = 0.0;
  const int trials = 4000;
  for (int i = 0; i < trials; ++i) {
    const CountImage c = simulate_counts(img, cfg, ppp, 50 + i);
    for (double v : c.counts) sum += v;
  }
  const double expected = pixel_rate(0.7, cfg) * equivalent_time(ppp, 1.0, 1.0);
  const double mean = sum / (trials * 4.0);
  CHECK(mean == doctest::Approx(expected).epsilon(0.02));
  CHECK_THROWS(simulate_counts(img, cfg, -1.0, 1));
}
