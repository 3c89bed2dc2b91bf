#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbmeter/ndnum.hpp"

namespace sbmeter::harness {

struct LabeledItem {
  std::string id;
  ndnum::ImageTensor image;
  std::size_t label = 0;
};

/// Images of one shape with class labels in [0, K), K >= 2.
class LabeledDataset {
 public:
  /// `num_classes` of 0 means max(label) + 1. Throws std::invalid_argument
  /// on an empty set, mixed shapes, labels >= K or K < 2.
  explicit LabeledDataset(std::vector<LabeledItem> items, std::size_t num_classes = 0);

  const std::vector<LabeledItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const LabeledItem& operator[](std::size_t k) const { return items_[k]; }
  std::size_t num_classes() const { return num_classes_; }
  /// Number of distinct labels actually present.
  std::size_t classes_present() const;

 private:
  std::vector<LabeledItem> items_;
  std::size_t num_classes_ = 0;
};

/// Reads `<dir>/labels.csv` (rows `<filename>,<class-index>`, an optional
/// header row, '#' comments) and loads each file as a PPM or SBT1 image.
LabeledDataset load_dataset(const std::filesystem::path& dir);

/// Deterministic toy corpus: class k images are a class-specific smooth
/// pattern plus white noise.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t per_class = 8;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

LabeledDataset synthetic_dataset(const SyntheticSpec& spec);

}  // namespace sbmeter::harness
