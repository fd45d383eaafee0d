// SPDX-License-Identifier: Apache-2.0
#include "prunelab/datagen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "prunelab/errors.hpp"
#include "prunelab/random.hpp"

namespace prunelab::datagen {

void validate(const Dataset& ds) {
  if (ds.features.rank() != 2 || ds.features.dim(0) != ds.labels.size()) {
    throw ParameterError("dataset features and labels disagree in sample count");
  }
  std::vector<std::size_t> counts(ds.class_count, 0);
  for (auto label : ds.labels) {
    if (label >= ds.class_count) {
      throw ParameterError("label " + std::to_string(label) + " out of range for " +
                           std::to_string(ds.class_count) + " classes");
    }
    ++counts[label];
  }
  if (ds.split == Split::train) {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) {
        throw ParameterError("class " + std::to_string(c) + " has no training samples");
      }
    }
  }
}

Dataset make_blobs(std::uint32_t class_count, std::size_t per_class, std::size_t dim, double separation,
                   std::uint64_t seed, Split split) {
  if (dim < 1) {
    throw ParameterError("make_blobs: dim must be at least 1");
  }
  if (class_count < 1 || per_class < 1) {
    throw ParameterError("make_blobs: counts must be positive");
  }
  if (!(separation > 0.0)) {
    throw ParameterError("make_blobs: separation must be positive");
  }
  std::vector<std::vector<double>> means(class_count, std::vector<double>(dim, 0.0));
  if (dim == 1 || class_count == 1) {
    for (std::uint32_t c = 0; c < class_count; ++c) {
      means[c][0] = separation * c;
    }
  } else {
    // Chord between neighbours on a circle of radius r is 2 r sin(pi / C).
    const double radius = class_count == 2 ? separation / 2.0
                                           : separation / (2.0 * std::sin(std::numbers::pi / class_count));
    for (std::uint32_t c = 0; c < class_count; ++c) {
      const double angle = 2.0 * std::numbers::pi * c / class_count;
      means[c][0] = radius * std::cos(angle);
      means[c][1] = radius * std::sin(angle);
    }
  }

  std::mt19937_64 rng(derive_seed(seed, "blobs"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.class_count = class_count;
  ds.split = split;
  ds.features = Tensor({static_cast<std::size_t>(class_count) * per_class, dim});
  ds.labels.reserve(ds.features.dim(0));
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < class_count; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      for (std::size_t d = 0; d < dim; ++d) {
        ds.features.at(row, d) = static_cast<float>(means[c][d] + gauss(rng));
      }
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset make_rings(std::uint32_t class_count, std::size_t per_class, double noise_sigma, std::uint64_t seed,
                   Split split) {
  if (class_count < 2) {
    throw ParameterError("make_rings: need at least two classes");
  }
  if (per_class < 1 || noise_sigma < 0.0) {
    throw ParameterError("make_rings: invalid per_class or noise");
  }
  std::mt19937_64 rng(derive_seed(seed, "rings"));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset ds;
  ds.class_count = class_count;
  ds.split = split;
  ds.features = Tensor({static_cast<std::size_t>(class_count) * per_class, 2});
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < class_count; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      const double theta = angle(rng);
      const double r = (c + 1.0) + noise_sigma * gauss(rng);
      ds.features.at(row, 0) = static_cast<float>(r * std::cos(theta));
      ds.features.at(row, 1) = static_cast<float>(r * std::sin(theta));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset make_mixture(std::uint32_t ring_classes, std::uint32_t blob_classes, std::size_t per_class,
                     std::size_t dim, double separation, double noise_sigma, std::uint64_t seed, Split split) {
  if (ring_classes < 2 && ring_classes != 0) {
    throw ParameterError("make_mixture: ring part needs zero or at least two classes");
  }
  if (ring_classes + blob_classes < 2) {
    throw ParameterError("make_mixture: need at least two classes");
  }
  if (dim < 2 + blob_classes) {
    throw ParameterError("make_mixture: dim must be at least 2 + blob_classes");
  }
  if (per_class < 1 || !(separation > 0.0) || noise_sigma < 0.0) {
    throw ParameterError("make_mixture: invalid per_class, separation or noise");
  }
  std::mt19937_64 rng(derive_seed(seed, "mixture"));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::uint32_t classes = ring_classes + blob_classes;
  Dataset ds;
  ds.class_count = classes;
  ds.split = split;
  ds.features = Tensor({static_cast<std::size_t>(classes) * per_class, dim});
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < ring_classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      const double theta = angle(rng);
      const double r = (c + 1.0) + noise_sigma * gauss(rng);
      ds.features.at(row, 0) = static_cast<float>(r * std::cos(theta));
      ds.features.at(row, 1) = static_cast<float>(r * std::sin(theta));
      for (std::size_t d = 2; d < dim; ++d) {
        ds.features.at(row, d) = static_cast<float>(noise_sigma * gauss(rng));
      }
      ds.labels.push_back(c);
    }
  }
  for (std::uint32_t b = 0; b < blob_classes; ++b) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double mean = d == 2 + b ? separation : 0.0;
        ds.features.at(row, d) = static_cast<float>(mean + gauss(rng));
      }
      ds.labels.push_back(ring_classes + b);
    }
  }
  return ds;
}

void AugmentationPolicy::validate() const {
  if (noise_sigma < 0.0) {
    throw ParameterError("augmentation noise_sigma must be nonnegative");
  }
  if (!(scale_min > 0.0) || scale_min > scale_max) {
    throw ParameterError("augmentation scale range must satisfy 0 < min <= max");
  }
  if (views_per_sample < 2) {
    throw ParameterError("augmentation needs at least two views per sample");
  }
}

std::vector<std::vector<float>> augment(std::span<const float> sample, const AugmentationPolicy& policy,
                                        std::uint64_t seed, std::uint64_t sample_index) {
  policy.validate();
  std::mt19937_64 rng(derive_seed(seed, sample_index));
  std::uniform_real_distribution<double> scale(policy.scale_min, policy.scale_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<float>> views(policy.views_per_sample);
  for (auto& view : views) {
    // uniform_real_distribution on a degenerate interval is allowed to return a
    // value just below max; pin it so the identity policy is exact.
    const double s = policy.scale_min == policy.scale_max ? policy.scale_min : scale(rng);
    view.resize(sample.size());
    for (std::size_t d = 0; d < sample.size(); ++d) {
      const double jitter = policy.noise_sigma > 0.0 ? policy.noise_sigma * gauss(rng) : 0.0;
      view[d] = static_cast<float>(s * sample[d] + jitter);
    }
  }
  return views;
}

namespace {

template <typename T>
T parse_cell(std::string_view cell, std::size_t line, const char* what) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
    cell.remove_prefix(1);
  }
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  T value{};
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("non-numeric " + std::string(what) + " '" + std::string(cell) + "'", line);
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open CSV file '" + path.string() + "'", 0);
  }
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() < 2) {
      throw ParseError("row needs at least one feature and a label", lineno);
    }
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " columns, found " +
                           std::to_string(cells.size()),
                       lineno);
    }
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      const float v = parse_cell<float>(cells[c], lineno, "feature");
      if (!std::isfinite(v)) {
        throw ParseError("non-finite feature", lineno);
      }
      values.push_back(v);
    }
    labels.push_back(parse_cell<std::uint32_t>(cells.back(), lineno, "label"));
  }
  if (labels.empty()) {
    throw ParseError("CSV file '" + path.string() + "' holds no samples", lineno);
  }
  Dataset ds;
  ds.split = split;
  ds.features = Tensor({labels.size(), width - 1}, std::move(values));
  std::uint32_t max_label = 0;
  for (auto l : labels) {
    max_label = std::max(max_label, l);
  }
  ds.class_count = max_label + 1;
  ds.labels = std::move(labels);
  return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ParseError("cannot write CSV file '" + path.string() + "'", 0);
  }
  char buf[64];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (float v : ds.sample(r)) {
      auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out.put(',');
    }
    out << ds.labels[r] << '\n';
  }
}

}  // namespace prunelab::datagen
