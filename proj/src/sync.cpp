#include "hyperdrive/sync.hpp"

#include <algorithm>
#include <cstdlib>

#include "hyperdrive/error.hpp"

namespace hyperdrive::sync {

Synchronizer::Synchronizer(SyncPolicy policy) : policy_(std::move(policy)) {
  if (policy_.required_streams.empty())
    fail(Errc::invalid_argument, "sync policy needs at least one required stream");
  if (policy_.window_ns <= 0) fail(Errc::invalid_argument, "sync window must be positive");
  if (policy_.queue_depth < 1) fail(Errc::invalid_argument, "queue depth must be >= 1");
  for (const auto& id : policy_.required_streams) streams_[id].required = true;
}

void Synchronizer::retire(Buffered&& b) {
  if (b.attached)
    ++emitted_;
  else
    ++dropped_;
}

std::vector<SyncTuple> Synchronizer::push(const TimedMessage& msg) {
  std::lock_guard<std::mutex> lock(mu_);
  Stream& s = streams_[msg.stream_id];
  if (msg.timestamp_ns < s.last_ts)
    fail(Errc::monotonicity, "message on stream '" + msg.stream_id +
                                 "' is older than the stream's last message");
  if (s.required && last_pivot_ != kMinTs && msg.timestamp_ns < last_pivot_)
    fail(Errc::monotonicity, "message on stream '" + msg.stream_id +
                                 "' predates the last emitted pivot");
  s.last_ts = msg.timestamp_ns;
  ++pushed_;
  s.q.push_back({msg, false});
  while (s.q.size() > policy_.queue_depth) {
    retire(std::move(s.q.front()));
    s.q.pop_front();
  }

  std::vector<SyncTuple> tuples;
  SyncTuple t;
  while (try_emit(t)) {
    tuples.push_back(std::move(t));
    t = SyncTuple{};
  }
  return tuples;
}

bool Synchronizer::try_emit(SyncTuple& out) {
  // Pivot candidate: the oldest unconsumed message of the designated pivot
  // stream. It is matched when every other required stream has a message
  // within the window; it is abandoned when some stream can prove no such
  // message will ever arrive (it already holds a newer one).
  Stream& pivot_stream = streams_[policy_.required_streams.front()];
  while (!pivot_stream.q.empty()) {
    const std::int64_t pivot = pivot_stream.q.front().msg.timestamp_ns;
    bool matched = true;
    bool unmatchable = false;
    std::vector<std::pair<Stream*, std::size_t>> picks;
    for (std::size_t k = 1; k < policy_.required_streams.size(); ++k) {
      Stream& s = streams_[policy_.required_streams[k]];
      std::size_t best = s.q.size();
      std::int64_t best_dist = 0;
      for (std::size_t i = 0; i < s.q.size(); ++i) {
        const std::int64_t dist = std::llabs(s.q[i].msg.timestamp_ns - pivot);
        if (best == s.q.size() || dist < best_dist) {
          best = i;
          best_dist = dist;
        }
      }
      if (best == s.q.size() || best_dist > policy_.window_ns) {
        matched = false;
        // A newer-than-window message means nothing closer can still arrive.
        if (!s.q.empty() && s.q.back().msg.timestamp_ns > pivot + policy_.window_ns)
          unmatchable = true;
        break;
      }
      picks.emplace_back(&s, best);
    }

    if (matched) {
      out.pivot_ns = pivot;
      out.required[policy_.required_streams.front()] = pivot_stream.q.front().msg;
      pivot_stream.q.pop_front();
      ++emitted_;
      // Consume the picked messages (and purge anything older than the
      // window; later pivots only move forward).
      for (auto& [s, idx] : picks) {
        out.required[s->q[idx].msg.stream_id] = s->q[idx].msg;
        s->q.erase(s->q.begin() + static_cast<std::ptrdiff_t>(idx));
        ++emitted_;
      }
      for (const auto& id : policy_.required_streams) {
        Stream& s = streams_[id];
        while (!s.q.empty() && s.q.front().msg.timestamp_ns < pivot - policy_.window_ns) {
          retire(std::move(s.q.front()));
          s.q.pop_front();
        }
      }
      // Best-effort streams: closest within the window, else most recent
      // earlier packet flagged stale. Superseded packets retire.
      for (auto& [id, s] : streams_) {
        if (s.required || s.q.empty()) continue;
        std::size_t best = s.q.size();
        std::int64_t best_dist = 0;
        for (std::size_t i = 0; i < s.q.size(); ++i) {
          const std::int64_t dist = std::llabs(s.q[i].msg.timestamp_ns - pivot);
          if (best == s.q.size() || dist < best_dist) {
            best = i;
            best_dist = dist;
          }
        }
        bool stale = best_dist > policy_.window_ns;
        if (stale) {
          // fall back to the most recent packet at or before the pivot
          best = s.q.size();
          for (std::size_t i = 0; i < s.q.size(); ++i)
            if (s.q[i].msg.timestamp_ns <= pivot) best = i;
          if (best == s.q.size()) continue;  // only future packets buffered
        }
        s.q[best].attached = true;
        out.attached[id] = {s.q[best].msg, stale};
        // Packets strictly older than the chosen one can never be preferred
        // again (pivots increase), so retire them.
        for (std::size_t i = 0; i < best; ++i) retire(std::move(s.q[i]));
        s.q.erase(s.q.begin(), s.q.begin() + static_cast<std::ptrdiff_t>(best));
      }
      last_pivot_ = pivot;
      return true;
    }

    if (unmatchable) {
      retire(std::move(pivot_stream.q.front()));
      pivot_stream.q.pop_front();
      continue;
    }
    return false;  // wait for more data
  }
  return false;
}

SyncCounters Synchronizer::counters() const {
  std::lock_guard<std::mutex> lock(mu_);
  SyncCounters c;
  c.pushed = pushed_;
  c.emitted = emitted_;
  c.dropped = dropped_;
  for (const auto& [id, s] : streams_) c.buffered += s.q.size();
  return c;
}

std::vector<SyncTuple> downsample(const std::vector<SyncTuple>& tuples, double target_hz,
                                  std::int64_t window_ns) {
  if (tuples.empty()) return {};
  if (target_hz <= 0) fail(Errc::invalid_argument, "downsample target rate must be positive");
  const std::int64_t period_ns = static_cast<std::int64_t>(1e9 / target_hz);
  std::vector<SyncTuple> kept;
  kept.push_back(tuples.front());
  for (const auto& t : tuples) {
    if (t.pivot_ns >= kept.back().pivot_ns + period_ns - window_ns) kept.push_back(t);
  }
  return kept;
}

}  // namespace hyperdrive::sync
