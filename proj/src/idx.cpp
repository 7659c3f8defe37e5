#include "scotopic/idx.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace scotopic {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t read_be32(const std::string& b, size_t off) {
  return (static_cast<uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
         (static_cast<uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
         (static_cast<uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
         static_cast<uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

void write_be32(std::string& b, uint32_t v) {
  b.push_back(static_cast<char>(v >> 24));
  b.push_back(static_cast<char>(v >> 16));
  b.push_back(static_cast<char>(v >> 8));
  b.push_back(static_cast<char>(v));
}

void require_size(const std::string& b, size_t expected, const std::string& path) {
  if (b.size() != expected)
    throw std::runtime_error("idx: " + path + " truncated or oversized: expected " +
                             std::to_string(expected) + " bytes, got " +
                             std::to_string(b.size()));
}

}  // namespace

std::vector<IntensityImage> load_idx(const std::string& images_path,
                                     const std::string& labels_path) {
  const std::string ib = read_file(images_path);
  if (ib.size() < 16) throw std::runtime_error("idx: " + images_path + " too short for a header");
  if (read_be32(ib, 0) != kImageMagic)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const uint32_t n = read_be32(ib, 4);
  const uint32_t rows = read_be32(ib, 8);
  const uint32_t cols = read_be32(ib, 12);
  require_size(ib, 16 + static_cast<size_t>(n) * rows * cols, images_path);

  const std::string lb = read_file(labels_path);
  if (lb.size() < 8) throw std::runtime_error("idx: " + labels_path + " too short for a header");
  if (read_be32(lb, 0) != kLabelMagic)
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  const uint32_t nl = read_be32(lb, 4);
  if (nl != n)
    throw std::runtime_error("idx: image/label count mismatch: " + std::to_string(n) +
                             " images vs " + std::to_string(nl) + " labels");
  require_size(lb, 8 + static_cast<size_t>(nl), labels_path);

  std::vector<IntensityImage> out(n);
  size_t off = 16;
  for (uint32_t i = 0; i < n; ++i) {
    IntensityImage& img = out[i];
    img.height = static_cast<int>(rows);
    img.width = static_cast<int>(cols);
    img.channels = 1;
    img.label = static_cast<unsigned char>(lb[8 + i]);
    img.pixels.resize(static_cast<size_t>(rows) * cols);
    for (size_t p = 0; p < img.pixels.size(); ++p)
      img.pixels[p] = static_cast<unsigned char>(ib[off + p]) / 255.0;
    off += img.pixels.size();
  }
  return out;
}

void save_idx(const std::vector<IntensityImage>& images,
              const std::string& images_path, const std::string& labels_path) {
  if (images.empty()) throw std::invalid_argument("idx: nothing to save");
  const int rows = images[0].height, cols = images[0].width;
  std::string ib, lb;
  write_be32(ib, kImageMagic);
  write_be32(ib, static_cast<uint32_t>(images.size()));
  write_be32(ib, static_cast<uint32_t>(rows));
  write_be32(ib, static_cast<uint32_t>(cols));
  write_be32(lb, kLabelMagic);
  write_be32(lb, static_cast<uint32_t>(images.size()));
  for (const auto& img : images) {
    if (img.height != rows || img.width != cols || img.channels != 1)
      throw std::invalid_argument("idx: images must share one grayscale shape");
    for (double p : img.pixels) {
      const int q = static_cast<int>(p * 255.0 + 0.5);
      ib.push_back(static_cast<char>(q < 0 ? 0 : (q > 255 ? 255 : q)));
    }
    lb.push_back(static_cast<char>(img.label));
  }
  std::ofstream iout(images_path, std::ios::binary);
  if (!iout) throw std::runtime_error("idx: cannot write " + images_path);
  iout << ib;
  std::ofstream lout(labels_path, std::ios::binary);
  if (!lout) throw std::runtime_error("idx: cannot write " + labels_path);
  lout << lb;
}

}  // namespace scotopic
