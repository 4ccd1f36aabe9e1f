#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace hyperdrive::sync {

struct TimedMessage {
  std::string stream_id;
  std::int64_t timestamp_ns = 0;
  std::shared_ptr<const void> payload;
};

struct SyncPolicy {
  std::vector<std::string> required_streams;  // first entry is the pivot stream
  std::int64_t window_ns = 50'000'000;        // half-width, default 50 ms
  std::size_t queue_depth = 32;
};

struct AttachedMessage {
  TimedMessage msg;
  bool stale = false;  // no packet within the window; most recent earlier used
};

struct SyncTuple {
  std::int64_t pivot_ns = 0;
  std::map<std::string, TimedMessage> required;   // one message per required stream
  std::map<std::string, AttachedMessage> attached;  // best-effort streams
};

struct SyncCounters {
  std::size_t pushed = 0;
  std::size_t emitted = 0;   // messages consumed into tuples
  std::size_t dropped = 0;   // overflow, unmatchable, or superseded-unattached
  std::size_t buffered = 0;  // currently queued
};

/// Approximate-time matcher keyed on the required (camera) streams. Streams
/// not named in the policy attach best-effort: the closest packet inside the
/// window, else the most recent earlier packet flagged stale. Attached
/// packets may serve several tuples; required messages are consumed exactly
/// once. push is serialized internally; tuple emission order is globally
/// total with strictly increasing pivots.
class Synchronizer {
 public:
  explicit Synchronizer(SyncPolicy policy);

  /// Throws a monotonicity error for messages older than their stream's last
  /// push or than the last emitted pivot.
  std::vector<SyncTuple> push(const TimedMessage& msg);

  SyncCounters counters() const;

 private:
  struct Buffered {
    TimedMessage msg;
    bool attached = false;
  };
  static constexpr std::int64_t kMinTs = std::numeric_limits<std::int64_t>::min();
  struct Stream {
    std::deque<Buffered> q;
    std::int64_t last_ts = kMinTs;
    bool required = false;
  };

  bool try_emit(SyncTuple& out);
  void retire(Buffered&& b);

  SyncPolicy policy_;
  std::map<std::string, Stream> streams_;
  std::int64_t last_pivot_ = kMinTs;
  std::size_t pushed_ = 0, emitted_ = 0, dropped_ = 0;
  mutable std::mutex mu_;
};

/// Greedy rate reduction: keep the first tuple, then each tuple at least
/// (1/target_hz - window) after the last kept one.
std::vector<SyncTuple> downsample(const std::vector<SyncTuple>& tuples, double target_hz,
                                  std::int64_t window_ns = 50'000'000);

}  // namespace hyperdrive::sync
