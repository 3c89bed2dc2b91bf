#include "sbmeter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "sbmeter/containers.hpp"
#include "sbmeter/rng.hpp"

namespace sbmeter::harness {

LabeledDataset::LabeledDataset(std::vector<LabeledItem> items, std::size_t num_classes)
    : items_(std::move(items)), num_classes_(num_classes) {
  if (items_.empty()) throw std::invalid_argument("dataset is empty");
  std::size_t max_label = 0;
  for (const auto& item : items_) {
    if (!item.image.same_shape(items_.front().image)) {
      throw std::invalid_argument("dataset: image '" + item.id + "' has a different shape");
    }
    max_label = std::max(max_label, item.label);
  }
  if (num_classes_ == 0) num_classes_ = max_label + 1;
  if (max_label >= num_classes_) {
    throw std::invalid_argument("dataset: label " + std::to_string(max_label) +
                                " out of range for " + std::to_string(num_classes_) + " classes");
  }
  if (num_classes_ < 2) throw std::invalid_argument("dataset: need at least 2 classes");
}

std::size_t LabeledDataset::classes_present() const {
  std::set<std::size_t> labels;
  for (const auto& item : items_) labels.insert(item.label);
  return labels.size();
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

LabeledDataset load_dataset(const std::filesystem::path& dir) {
  const auto csv = dir / "labels.csv";
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open " + csv.string());
  std::vector<LabeledItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(csv.string() + ":" + std::to_string(line_no) + ": expected name,label");
    }
    const std::string name = trim(line.substr(0, comma));
    const std::string label_text = trim(line.substr(comma + 1));
    std::size_t label = 0;
    std::size_t used = 0;
    try {
      label = std::stoul(label_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != label_text.size()) {
      if (items.empty() && line_no == 1) continue;  // header row
      throw std::runtime_error(csv.string() + ":" + std::to_string(line_no) + ": bad class index '" +
                               label_text + "'");
    }
    items.push_back({name, io::load_image(dir / name), label});
  }
  return LabeledDataset(std::move(items));
}

LabeledDataset synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.per_class == 0 || spec.channels == 0 || spec.height < 2 ||
      spec.width < 2) {
    throw std::invalid_argument("synthetic_dataset: invalid spec");
  }
  SplitMix64 rng(spec.seed);
  std::vector<LabeledItem> items;
  const double h = static_cast<double>(spec.height);
  const double w = static_cast<double>(spec.width);
  for (std::size_t n = 0; n < spec.per_class; ++n) {
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
      // Class k: a low-frequency plane wave whose orientation depends on k.
      const double angle = std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.num_classes);
      const double fu = std::cos(angle);
      const double fv = std::sin(angle);
      ndnum::ImageTensor img(spec.channels, spec.height, spec.width);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t i = 0; i < spec.height; ++i) {
          for (std::size_t j = 0; j < spec.width; ++j) {
            const double phase = 2.0 * std::numbers::pi *
                                 (fu * static_cast<double>(i) / h + fv * static_cast<double>(j) / w);
            img(c, i, j) = 0.5 + 0.25 * std::sin(phase + 0.5 * static_cast<double>(c)) +
                           spec.noise * rng.uniform(-1.0, 1.0);
          }
        }
      }
      items.push_back({"syn_" + std::to_string(k) + "_" + std::to_string(n), std::move(img), k});
    }
  }
  return LabeledDataset(std::move(items), spec.num_classes);
}

}  // namespace sbmeter::harness
