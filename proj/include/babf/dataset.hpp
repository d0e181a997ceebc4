#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace babf {

/// One noisy functional observation: values y on a strictly increasing grid t.
struct Curve {
  std::int64_t id = 0;
  Eigen::VectorXd t;
  Eigen::VectorXd y;
};

inline void validate_curve(const Curve& c) {
  if (c.t.size() == 0) throw std::invalid_argument("curve " + std::to_string(c.id) + ": empty grid");
  if (c.t.size() != c.y.size())
    throw std::invalid_argument("curve " + std::to_string(c.id) + ": grid/value length mismatch");
  for (Eigen::Index j = 1; j < c.t.size(); ++j)
    if (!(c.t[j] > c.t[j - 1]))
      throw std::invalid_argument("curve " + std::to_string(c.id) + ": grid not strictly increasing");
}

/// A collection of curves with possibly uncommon grids. Curves are stored
/// sorted by id so that downstream computations do not depend on input order.
struct FunctionalDataset {
  std::vector<Curve> curves;
  Eigen::VectorXd pooled;  // sorted union of all observation points
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  bool common_grid = false;

  int n() const { return static_cast<int>(curves.size()); }

  long total_points() const {
    long s = 0;
    for (const auto& c : curves) s += c.t.size();
    return s;
  }

  static FunctionalDataset from_curves(std::vector<Curve> curves) {
    if (curves.empty()) throw std::invalid_argument("dataset: no curves");
    for (const auto& c : curves) validate_curve(c);
    std::sort(curves.begin(), curves.end(),
              [](const Curve& a, const Curve& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < curves.size(); ++i)
      if (curves[i].id == curves[i - 1].id)
        throw std::invalid_argument("dataset: duplicate curve id " + std::to_string(curves[i].id));

    FunctionalDataset d;
    std::vector<double> all;
    all.reserve(1024);
    for (const auto& c : curves)
      all.insert(all.end(), c.t.data(), c.t.data() + c.t.size());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    d.pooled = Eigen::Map<const Eigen::VectorXd>(all.data(), static_cast<Eigen::Index>(all.size()));
    d.domain_lo = d.pooled[0];
    d.domain_hi = d.pooled[d.pooled.size() - 1];

    d.common_grid = true;
    for (std::size_t i = 1; i < curves.size() && d.common_grid; ++i) {
      if (curves[i].t.size() != curves[0].t.size() || curves[i].t != curves[0].t)
        d.common_grid = false;
    }
    d.curves = std::move(curves);
    return d;
  }
};

}  // namespace babf
