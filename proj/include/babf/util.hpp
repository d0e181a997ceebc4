#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace babf {

inline Eigen::VectorXd linspace(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("linspace: n must be positive");
  if (n == 1) return Eigen::VectorXd::Constant(1, lo);
  Eigen::VectorXd v(n);
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) v[i] = lo + step * i;
  v[n - 1] = hi;
  return v;
}

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" rule). Input must be sorted ascending.
inline double quantile_type7(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto i = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

/// Piecewise linear interpolation of (x, y) at query points, extrapolating
/// with the boundary segment slopes. x must be strictly increasing.
inline Eigen::VectorXd interp_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& query) {
  if (x.size() != y.size() || x.size() == 0)
    throw std::invalid_argument("interp_linear: size mismatch");
  Eigen::VectorXd out(query.size());
  const Eigen::Index n = x.size();
  for (Eigen::Index k = 0; k < query.size(); ++k) {
    const double q = query[k];
    if (n == 1) {
      out[k] = y[0];
      continue;
    }
    Eigen::Index j;
    if (q <= x[0]) {
      j = 0;
    } else if (q >= x[n - 1]) {
      j = n - 2;
    } else {
      j = std::upper_bound(x.data(), x.data() + n, q) - x.data() - 1;
      if (j > n - 2) j = n - 2;
    }
    const double t = (q - x[j]) / (x[j + 1] - x[j]);
    out[k] = y[j] + t * (y[j + 1] - y[j]);
  }
  return out;
}

/// Run fn(i) for i in [0, count) on up to `threads` workers. Tasks must be
/// independent; exceptions are captured and the first one rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// FNV-1a 64-bit hash, used for input checksums in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace babf
