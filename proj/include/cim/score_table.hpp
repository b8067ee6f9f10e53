#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cim/matrix.hpp"

namespace cim {

enum class ScoreKind { classification, integrity };

// N×(C+1) per-proposal per-category scores in [0,1]; column 0 is background.
struct ScoreTable {
  Matrix values;
  ScoreKind kind = ScoreKind::classification;

  std::size_t proposals() const { return values.rows(); }
  std::size_t categories() const { return values.cols() == 0 ? 0 : values.cols() - 1; }
};

// Image-level presence flags over C+1 categories; index 0 is background and
// must always be set.
using ImageLabel = std::vector<std::uint8_t>;

inline ImageLabel make_image_label(std::size_t num_categories,
                                   const std::vector<std::size_t>& present) {
  ImageLabel y(num_categories + 1, 0);
  y[0] = 1;
  for (std::size_t c : present) {
    if (c == 0 || c > num_categories) {
      throw std::invalid_argument("image label: category out of range");
    }
    y[c] = 1;
  }
  return y;
}

inline void check_table_shape(const ScoreTable& t, std::size_t proposals,
                              std::size_t num_categories) {
  if (t.values.rows() != proposals || t.values.cols() != num_categories + 1) {
    throw std::invalid_argument("score table shape mismatch");
  }
}

}  // namespace cim
