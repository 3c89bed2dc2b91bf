#pragma once

// On-disk formats. All multi-byte fields are little-endian.
//
// SBT1 tensor:
//   "SBT1" | u8 dtype (0 = f32, 1 = f64) | u8 rank | rank × u32 dims | payload (row-major)
//
// SBP1 path logits:
//   "SBP1" | u32 record count | records...
//   record: str x1_id | str x2_id | str band | u32 target_class | u32 n | u32 K
//           | f64 norm_distance | n × f64 lambda | n·K × f64 logits (row-major)
//   str:    u32 byte length | UTF-8 bytes
//
// Images: binary P6 PPM (maxval <= 255, samples scaled to [0, 1]) or an SBT1
// tensor of rank 3 (C, H, W) or rank 2 (H, W).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbmeter/ndnum.hpp"
#include "sbmeter/path_logits.hpp"

namespace sbmeter::io {

class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::optional<std::size_t> record = std::nullopt)
      : std::runtime_error(record ? "record " + std::to_string(*record) + ": " + what : what),
        record_(record) {}

  std::optional<std::size_t> record() const { return record_; }

 private:
  std::optional<std::size_t> record_;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
  DType dtype = DType::f32;

  std::size_t element_count() const;
};

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tensor(const std::filesystem::path& path);

Tensor image_to_tensor(const ndnum::ImageTensor& image, DType dtype = DType::f32);
ndnum::ImageTensor tensor_to_image(const Tensor& tensor);

void write_path_logits(std::ostream& out, std::span<const metrics::PathLogits> records);
/// Every record is validated; failures carry the record index.
std::vector<metrics::PathLogits> read_path_logits(std::istream& in);
void save_path_logits(const std::filesystem::path& path,
                      std::span<const metrics::PathLogits> records);
std::vector<metrics::PathLogits> load_path_logits(const std::filesystem::path& path);

ndnum::ImageTensor read_ppm(std::istream& in);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_ppm(std::ostream& out, const ndnum::ImageTensor& image);

/// Dispatches on extension: .ppm → PPM, anything else → SBT1.
ndnum::ImageTensor load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const ndnum::ImageTensor& image);

}  // namespace sbmeter::io
