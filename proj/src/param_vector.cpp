#include "gnp/param_vector.hpp"

#include <cmath>
#include <cstring>

#include "gnp/error.hpp"

namespace gnp {

void SegmentTable::append(std::string name, Shape shape) {
  Segment seg{std::move(name), std::move(shape), total_};
  if (seg.shape.empty() || seg.size() == 0) {
    throw ShapeError("segment '" + seg.name + "' has an empty shape");
  }
  total_ += seg.size();
  segments_.push_back(std::move(seg));
}

const Segment& SegmentTable::find(const std::string& name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw ShapeError("no segment named '" + name + "'");
}

ParamVector::ParamVector(SegmentTable layout)
    : layout_(std::make_shared<const SegmentTable>(std::move(layout))),
      values_(layout_->total(), 0.0) {}

ParamVector::ParamVector(SegmentTable layout, std::vector<double> values)
    : ParamVector(std::make_shared<const SegmentTable>(std::move(layout)), std::move(values)) {}

ParamVector::ParamVector(std::shared_ptr<const SegmentTable> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_) throw ShapeError("null segment table");
  if (values_.size() != layout_->total()) {
    throw ShapeError("param vector has " + std::to_string(values_.size()) +
                     " values but its segment table covers " + std::to_string(layout_->total()));
  }
}

ParamVector ParamVector::flat(std::vector<double> values, std::string name) {
  SegmentTable t;
  t.append(std::move(name), {values.size()});
  return ParamVector(std::move(t), std::move(values));
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
  return ParamVector(other.layout_, std::vector<double>(other.size(), 0.0));
}

std::span<double> ParamVector::segment(std::size_t i) {
  const Segment& s = layout_->segments().at(i);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::segment(std::size_t i) const {
  const Segment& s = layout_->segments().at(i);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

Tensor ParamVector::segment_tensor(std::size_t i) const {
  const Segment& s = layout_->segments().at(i);
  auto span = segment(i);
  return Tensor(s.shape, std::vector<double>(span.begin(), span.end()));
}

bool ParamVector::compatible(const ParamVector& other) const noexcept {
  return layout_ == other.layout_ || *layout_ == *other.layout_;
}

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ParamVector::require_compatible(const ParamVector& other, const char* op) const {
  if (!compatible(other)) {
    throw ShapeError(std::string(op) + ": incompatible parameter layouts");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_compatible(other, "add");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_compatible(other, "sub");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ParamVector& ParamVector::axpy(double s, const ParamVector& x) {
  require_compatible(x, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * x.values_[i];
  return *this;
}

bool ParamVector::identical(const ParamVector& other) const noexcept {
  return compatible(other) && values_.size() == other.values_.size() &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  out += b;
  return out;
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
  ParamVector out = a;
  out -= b;
  return out;
}

ParamVector scale(const ParamVector& v, double s) {
  ParamVector out = v;
  out *= s;
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  if (!a.compatible(b)) throw ShapeError("dot: incompatible parameter layouts");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(const ParamVector& v) { return std::sqrt(dot(v, v)); }

}  // namespace gnp
