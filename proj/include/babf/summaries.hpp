#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "babf/rng.hpp"
#include "babf/util.hpp"

namespace babf {

/// Welford accumulator for a scalar stream.
struct RunningMeanVar {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Fixed-capacity uniform subsample of a stream of draw vectors, one column
/// per tracked scalar. Row-level reservoir sampling keeps the columns jointly
/// subsampled, so pointwise quantiles come from a common set of draws.
class ReservoirBank {
 public:
  ReservoirBank() = default;
  ReservoirBank(int capacity, Eigen::Index streams)
      : store_(capacity, streams) {}

  Eigen::Index streams() const { return store_.cols(); }
  int capacity() const { return static_cast<int>(store_.rows()); }
  int filled() const { return filled_; }
  long seen() const { return seen_; }

  void add(const Eigen::VectorXd& row, RngStream& rng) {
    if (row.size() != store_.cols()) throw std::invalid_argument("reservoir: row size mismatch");
    ++seen_;
    if (filled_ < capacity()) {
      store_.row(filled_++) = row.transpose();
      return;
    }
    const auto j = static_cast<long>(draw_uniform(rng) * static_cast<double>(seen_));
    if (j < capacity()) store_.row(j) = row.transpose();
  }

  /// Type-7 quantile per stream over the stored rows.
  Eigen::VectorXd quantile(double q) const {
    if (filled_ == 0) throw std::runtime_error("reservoir: empty");
    Eigen::VectorXd out(store_.cols());
    std::vector<double> col(static_cast<std::size_t>(filled_));
    for (Eigen::Index s = 0; s < store_.cols(); ++s) {
      for (int r = 0; r < filled_; ++r) col[static_cast<std::size_t>(r)] = store_(r, s);
      std::sort(col.begin(), col.end());
      out[s] = quantile_type7(col, q);
    }
    return out;
  }

  /// Combine with another bank over the same streams, drawing rows from each
  /// side in proportion to how many draws it has seen.
  void merge(const ReservoirBank& other, RngStream& rng) {
    if (other.filled_ == 0) return;
    if (filled_ == 0) {
      *this = other;
      return;
    }
    if (other.streams() != streams()) throw std::invalid_argument("reservoir merge: stream mismatch");
    const int cap = capacity();
    const double pa = static_cast<double>(seen_) / static_cast<double>(seen_ + other.seen_);
    std::vector<int> ia(static_cast<std::size_t>(filled_)), ib(static_cast<std::size_t>(other.filled_));
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::shuffle(ia.begin(), ia.end(), rng);
    std::shuffle(ib.begin(), ib.end(), rng);
    Eigen::MatrixXd merged(cap, streams());
    std::size_t na = 0, nb = 0;
    int rows = 0;
    while (rows < cap && (na < ia.size() || nb < ib.size())) {
      const bool take_a = nb >= ib.size() || (na < ia.size() && draw_uniform(rng) < pa);
      if (take_a) merged.row(rows++) = store_.row(ia[na++]);
      else merged.row(rows++) = other.store_.row(ib[nb++]);
    }
    store_.topRows(rows) = merged.topRows(rows);
    filled_ = rows;
    seen_ += other.seen_;
  }

  std::size_t bytes() const {
    return static_cast<std::size_t>(store_.size()) * sizeof(double);
  }

 private:
  Eigen::MatrixXd store_;  // capacity x streams
  int filled_ = 0;
  long seen_ = 0;
};

}  // namespace babf
