#pragma once

// Simulated collectives. Reductions are a left fold in ascending part order,
// so the result never depends on when the parts were produced.

#include <span>
#include <string>
#include <vector>

#include "tpla/numerics/matrix.hpp"

namespace tpla::shard {

enum class CollectiveOp { all_reduce_sum, all_gather };

struct CollectiveRecord {
  CollectiveOp op = CollectiveOp::all_reduce_sum;
  std::string purpose;
  std::size_t participants = 0;
  std::size_t elements_per_part = 0;
  std::size_t bytes_per_part = 0;
};

class CollectiveLog {
 public:
  void record(CollectiveRecord r) { records_.push_back(std::move(r)); }
  const std::vector<CollectiveRecord>& records() const { return records_; }
  void clear() { records_.clear(); }

  std::size_t count(const std::string& purpose) const {
    std::size_t n = 0;
    for (const auto& r : records_) n += r.purpose == purpose ? 1 : 0;
    return n;
  }

  std::size_t total_bytes() const {
    std::size_t b = 0;
    for (const auto& r : records_) b += r.bytes_per_part * r.participants;
    return b;
  }

 private:
  std::vector<CollectiveRecord> records_;
};

inline Matrix all_reduce_sum(std::span<const Matrix> parts, CollectiveLog* log = nullptr,
                             const std::string& purpose = "all_reduce") {
  detail::require_shape(!parts.empty(), "all_reduce_sum: no parts");
  Matrix acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    detail::require_shape(parts[i].rows() == acc.rows() && parts[i].cols() == acc.cols(),
                          "all_reduce_sum: part " + std::to_string(i) + " is " +
                              shape_str(parts[i]) + ", expected " + shape_str(acc));
    acc = add(acc, parts[i]);
  }
  if (log)
    log->record({CollectiveOp::all_reduce_sum, purpose, parts.size(), acc.size(),
                 acc.size() * sizeof(double)});
  return acc;
}

inline Matrix all_reduce_sum(const std::vector<Matrix>& parts, CollectiveLog* log = nullptr,
                             const std::string& purpose = "all_reduce") {
  return all_reduce_sum(std::span<const Matrix>(parts), log, purpose);
}

// Concatenates parts along columns in ascending order.
inline Matrix all_gather(std::span<const Matrix> parts, CollectiveLog* log = nullptr,
                         const std::string& purpose = "all_gather") {
  detail::require_shape(!parts.empty(), "all_gather: no parts");
  Matrix out = hconcat<double>(parts);
  if (log) {
    const std::size_t per = parts.front().size();
    log->record({CollectiveOp::all_gather, purpose, parts.size(), per, per * sizeof(double)});
  }
  return out;
}

inline Matrix all_gather(const std::vector<Matrix>& parts, CollectiveLog* log = nullptr,
                         const std::string& purpose = "all_gather") {
  return all_gather(std::span<const Matrix>(parts), log, purpose);
}

}  // namespace tpla::shard
