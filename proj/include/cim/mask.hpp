#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cim {

// Half-open pixel run [start, start + length) over row-major pixel order.
struct Run {
  std::uint32_t start = 0;
  std::uint32_t length = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

// Pixel-aligned bounding box, inclusive coordinates.
struct PixelBox {
  std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

// Run-length encoded binary mask over a fixed canvas.
//
// Stored runs are canonical: sorted by start, non-overlapping, adjacent runs
// merged. Mask equality is therefore canvas plus run-list equality, and run
// arithmetic stays exact integer arithmetic throughout.
class BinaryMask {
public:
  BinaryMask() = default;

  // Builds a mask from arbitrary runs: sorts, merges overlaps and adjacency,
  // drops zero-length runs. Throws std::invalid_argument on out-of-canvas runs.
  static BinaryMask from_runs(std::size_t height, std::size_t width, std::vector<Run> runs) {
    const std::uint64_t total = check_canvas_size(height, width);
    std::erase_if(runs, [](const Run& r) { return r.length == 0; });
    for (const Run& r : runs) {
      if (static_cast<std::uint64_t>(r.start) + r.length > total) {
        throw std::invalid_argument("BinaryMask: run exceeds canvas");
      }
    }
    std::sort(runs.begin(), runs.end(),
              [](const Run& a, const Run& b) { return a.start < b.start; });
    std::vector<Run> canon;
    canon.reserve(runs.size());
    for (const Run& r : runs) {
      if (!canon.empty() && r.start <= canon.back().start + canon.back().length) {
        const std::uint32_t end = std::max(canon.back().start + canon.back().length,
                                           r.start + r.length);
        canon.back().length = end - canon.back().start;
      } else {
        canon.push_back(r);
      }
    }
    BinaryMask m;
    m.height_ = height;
    m.width_ = width;
    m.runs_ = std::move(canon);
    for (const Run& r : m.runs_) m.area_ += r.length;
    return m;
  }

  static BinaryMask from_dense(std::size_t height, std::size_t width,
                               std::span<const std::uint8_t> pixels) {
    check_canvas_size(height, width);
    if (pixels.size() != height * width) {
      throw std::invalid_argument("BinaryMask: dense buffer size mismatch");
    }
    std::vector<Run> runs;
    std::size_t i = 0;
    while (i < pixels.size()) {
      if (pixels[i]) {
        std::size_t j = i;
        while (j < pixels.size() && pixels[j]) ++j;
        runs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j - i)});
        i = j;
      } else {
        ++i;
      }
    }
    return from_runs(height, width, std::move(runs));
  }

  // Filled axis-aligned rectangle, inclusive coordinates, clipped to canvas.
  static BinaryMask rect(std::size_t height, std::size_t width, std::size_t row0,
                         std::size_t col0, std::size_t row1, std::size_t col1) {
    check_canvas_size(height, width);
    std::vector<Run> runs;
    row1 = std::min(row1, height == 0 ? 0 : height - 1);
    col1 = std::min(col1, width == 0 ? 0 : width - 1);
    for (std::size_t r = row0; r <= row1 && r < height; ++r) {
      if (col0 > col1) break;
      runs.push_back({static_cast<std::uint32_t>(r * width + col0),
                      static_cast<std::uint32_t>(col1 - col0 + 1)});
    }
    return from_runs(height, width, std::move(runs));
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<Run>& runs() const { return runs_; }
  std::size_t area() const { return area_; }
  bool empty() const { return area_ == 0; }

  bool same_canvas(const BinaryMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool contains(std::size_t row, std::size_t col) const {
    if (row >= height_ || col >= width_) return false;
    const std::uint32_t idx = static_cast<std::uint32_t>(row * width_ + col);
    auto it = std::upper_bound(runs_.begin(), runs_.end(), idx,
                               [](std::uint32_t v, const Run& r) { return v < r.start; });
    if (it == runs_.begin()) return false;
    --it;
    return idx < it->start + it->length;
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> px(height_ * width_, 0);
    for (const Run& r : runs_) {
      std::fill(px.begin() + r.start, px.begin() + r.start + r.length, std::uint8_t{1});
    }
    return px;
  }

  // Bounding box of set pixels; nullopt for the empty mask. Runs may wrap
  // across row boundaries, so each run is split over its rows.
  std::optional<PixelBox> bbox() const {
    if (runs_.empty()) return std::nullopt;
    PixelBox box{height_, width_, 0, 0};
    for (const Run& r : runs_) {
      const std::size_t first = r.start, last = r.start + r.length - 1;
      const std::size_t r0 = first / width_, r1 = last / width_;
      box.row0 = std::min(box.row0, r0);
      box.row1 = std::max(box.row1, r1);
      if (r0 == r1) {
        box.col0 = std::min(box.col0, first % width_);
        box.col1 = std::max(box.col1, last % width_);
      } else {
        box.col0 = 0;
        box.col1 = width_ - 1;
      }
    }
    return box;
  }

  // Translates by (dr, dc), dropping pixels pushed off the canvas.
  BinaryMask shifted(std::int64_t dr, std::int64_t dc) const {
    std::vector<Run> out;
    out.reserve(runs_.size());
    const std::int64_t w = static_cast<std::int64_t>(width_);
    for (const Run& r : runs_) {
      // Split into per-row segments before moving; columns must not wrap.
      std::uint32_t pos = r.start;
      std::uint32_t left = r.length;
      while (left > 0) {
        const std::uint32_t row = pos / width_;
        const std::uint32_t col = pos % width_;
        const std::uint32_t take = std::min<std::uint32_t>(left, width_ - col);
        const std::int64_t nr = static_cast<std::int64_t>(row) + dr;
        std::int64_t c0 = static_cast<std::int64_t>(col) + dc;
        std::int64_t c1 = c0 + take - 1;
        if (nr >= 0 && nr < static_cast<std::int64_t>(height_)) {
          c0 = std::max<std::int64_t>(c0, 0);
          c1 = std::min<std::int64_t>(c1, w - 1);
          if (c0 <= c1) {
            out.push_back({static_cast<std::uint32_t>(nr * w + c0),
                           static_cast<std::uint32_t>(c1 - c0 + 1)});
          }
        }
        pos += take;
        left -= take;
      }
    }
    return from_runs(height_, width_, std::move(out));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
  // Run offsets are 32-bit; canvases past 2^32 pixels are not representable.
  static std::uint64_t check_canvas_size(std::size_t height, std::size_t width) {
    const std::uint64_t total = static_cast<std::uint64_t>(height) * width;
    if (height != 0 && total / height != width) {
      throw std::invalid_argument("BinaryMask: canvas size overflow");
    }
    if (total > std::numeric_limits<std::uint32_t>::max()) {
      throw std::invalid_argument("BinaryMask: canvas too large for 32-bit runs");
    }
    return total;
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t area_ = 0;
  std::vector<Run> runs_;
};

inline std::size_t area(const BinaryMask& mask) { return mask.area(); }

inline void check_same_canvas(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_canvas(b)) throw std::invalid_argument("mask canvas mismatch");
}

// |a ∩ b| by merging the two run lists; exact integer count.
inline std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  check_same_canvas(a, b);
  std::size_t total = 0;
  auto ia = a.runs().begin(), ib = b.runs().begin();
  while (ia != a.runs().end() && ib != b.runs().end()) {
    const std::uint64_t lo = std::max(ia->start, ib->start);
    const std::uint64_t ea = static_cast<std::uint64_t>(ia->start) + ia->length;
    const std::uint64_t eb = static_cast<std::uint64_t>(ib->start) + ib->length;
    const std::uint64_t hi = std::min(ea, eb);
    if (hi > lo) total += hi - lo;
    if (ea <= eb) ++ia; else ++ib;
  }
  return total;
}

inline std::size_t union_area(const BinaryMask& a, const BinaryMask& b) {
  return a.area() + b.area() - intersection_area(a, b);
}

// |a ∩ b| / |a ∪ b|; two empty masks give 0 so the matrices stay total.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t inter = intersection_area(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Ordered set of masks sharing one canvas. Indices are stable identities;
// every score table and label matrix is aligned to them.
class MaskSet {
public:
  MaskSet() = default;
  MaskSet(std::size_t height, std::size_t width) : height_(height), width_(width) {}

  MaskSet(std::size_t height, std::size_t width, std::vector<BinaryMask> masks)
      : height_(height), width_(width), masks_(std::move(masks)) {
    for (const BinaryMask& m : masks_) check_canvas(m);
  }

  void add(BinaryMask mask) {
    check_canvas(mask);
    masks_.push_back(std::move(mask));
  }

  std::size_t size() const { return masks_.size(); }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const BinaryMask& operator[](std::size_t i) const { return masks_[i]; }
  const std::vector<BinaryMask>& masks() const { return masks_; }

  friend bool operator==(const MaskSet&, const MaskSet&) = default;

private:
  void check_canvas(const BinaryMask& m) const {
    if (m.height() != height_ || m.width() != width_) {
      throw std::invalid_argument("MaskSet: mask canvas mismatch");
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<BinaryMask> masks_;
};

// Pixel kept iff (covering members) / (member count) > threshold. Runs as a
// single coverage sweep over the merged run endpoints; no dense grids.
inline BinaryMask mean_threshold(std::span<const BinaryMask> members, double threshold) {
  if (members.empty()) throw std::invalid_argument("mean_threshold: empty mask subset");
  for (const BinaryMask& m : members) check_same_canvas(members.front(), m);
  const double n = static_cast<double>(members.size());

  std::vector<std::pair<std::uint32_t, std::int32_t>> events;
  for (const BinaryMask& m : members) {
    for (const Run& r : m.runs()) {
      events.emplace_back(r.start, 1);
      events.emplace_back(r.start + r.length, -1);
    }
  }
  std::sort(events.begin(), events.end());

  std::vector<Run> kept;
  std::int32_t count = 0;
  std::uint32_t prev = 0;
  std::size_t i = 0;
  while (i < events.size()) {
    const std::uint32_t pos = events[i].first;
    if (pos > prev && static_cast<double>(count) / n > threshold) {
      kept.push_back({prev, pos - prev});
    }
    while (i < events.size() && events[i].first == pos) {
      count += events[i].second;
      ++i;
    }
    prev = pos;
  }
  return BinaryMask::from_runs(members.front().height(), members.front().width(),
                               std::move(kept));
}

inline BinaryMask mean_threshold(const MaskSet& set, std::span<const std::size_t> indices,
                                 double threshold) {
  std::vector<BinaryMask> members;
  members.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= set.size()) throw std::out_of_range("mean_threshold: index out of range");
    members.push_back(set[i]);
  }
  return mean_threshold(std::span<const BinaryMask>(members), threshold);
}

}  // namespace cim
