#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gnp/tensor.hpp"

namespace gnp {

struct Segment {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  std::size_t size() const { return shape_size(shape); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Ordered (name, shape, offset) table. Offsets partition [0, total()).
class SegmentTable {
 public:
  SegmentTable() = default;

  /// Appends a segment at the current end of the table.
  void append(std::string name, Shape shape);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t total() const noexcept { return total_; }
  std::size_t count() const noexcept { return segments_.size(); }
  const Segment& operator[](std::size_t i) const { return segments_.at(i); }
  const Segment& find(const std::string& name) const;

  friend bool operator==(const SegmentTable&, const SegmentTable&) = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

/// Flat view over every model parameter. Two vectors are algebra-compatible
/// iff their segment tables are equal.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(SegmentTable layout);
  ParamVector(SegmentTable layout, std::vector<double> values);
  ParamVector(std::shared_ptr<const SegmentTable> layout, std::vector<double> values);

  /// Single unnamed segment of shape [n]; handy for closed-form test problems.
  static ParamVector flat(std::vector<double> values, std::string name = "theta");
  static ParamVector zeros_like(const ParamVector& other);

  const SegmentTable& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const SegmentTable>& shared_layout() const noexcept { return layout_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<double> segment(std::size_t i);
  std::span<const double> segment(std::size_t i) const;
  Tensor segment_tensor(std::size_t i) const;

  bool compatible(const ParamVector& other) const noexcept;
  bool all_finite() const noexcept;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double s);
  /// this += s * x
  ParamVector& axpy(double s, const ParamVector& x);

  /// Bitwise value equality with identical layout.
  bool identical(const ParamVector& other) const noexcept;

 private:
  void require_compatible(const ParamVector& other, const char* op) const;

  std::shared_ptr<const SegmentTable> layout_ = std::make_shared<SegmentTable>();
  std::vector<double> values_;
};

ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector sub(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& v, double s);
double dot(const ParamVector& a, const ParamVector& b);
double l2_norm(const ParamVector& v);

inline ParamVector operator+(const ParamVector& a, const ParamVector& b) { return add(a, b); }
inline ParamVector operator-(const ParamVector& a, const ParamVector& b) { return sub(a, b); }
inline ParamVector operator*(double s, const ParamVector& v) { return scale(v, s); }

}  // namespace gnp
