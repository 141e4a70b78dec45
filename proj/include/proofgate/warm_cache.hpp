#pragma once

#include <cstddef>
#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "proofgate/protocol.hpp"

namespace proofgate {

using WorkerId = int;

class CacheError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t evictions = 0;
    std::map<HeaderKey, std::size_t> bucket_sizes;
};

/// LRU index of idle warmed workers keyed by canonical header.
///
/// Every entry belongs to exactly one bucket and one slot in a global recency
/// list; the list front is the least recently released entry. Lookups hand out
/// the least recently released worker of the bucket. Recency is refreshed only
/// by release, never by a claim.
///
/// Not thread-safe: the pool mutates it under its own lock.
class WarmCache {
public:
    /// Records the header a worker now holds. Called when a worker is warmed.
    void assign(WorkerId worker, const HeaderKey& key);
    /// Drops all knowledge of a worker (killed or recycled). Removes its entry if idle.
    void forget(WorkerId worker);
    std::optional<HeaderKey> assigned_key(WorkerId worker) const;

    /// Claims an idle worker warmed on `key`, or returns nullopt on a miss.
    std::optional<WorkerId> lookup(const HeaderKey& key);

    /// Returns a worker to the cache as most recently used.
    /// Throws CacheError when the worker is already cached or is warmed on another key.
    void release(WorkerId worker, const HeaderKey& key);

    /// Claims the globally least recently used idle worker, if any.
    std::optional<WorkerId> evict_lru();

    /// The entry evict_lru would take, without claiming it.
    std::optional<WorkerId> least_recent() const;

    /// Claims a specific idle worker. Returns false when it is not cached.
    bool claim(WorkerId worker);

    bool contains(WorkerId worker) const { return index_.contains(worker); }
    std::size_t size() const { return recency_.size(); }
    bool empty() const { return recency_.empty(); }
    CacheStats stats() const;

    /// Checks the structural invariants; throws CacheError on violation.
    void check_invariants() const;

private:
    struct Entry {
        WorkerId worker;
        HeaderKey key;
    };
    using Recency = std::list<Entry>;
    using Bucket = std::list<WorkerId>;
    struct Slot {
        Recency::iterator recency;
        Bucket::iterator in_bucket;
    };

    void erase(WorkerId worker);

    Recency recency_;
    std::unordered_map<WorkerId, Slot> index_;
    // Each bucket lists its workers in recency order (front = oldest).
    std::unordered_map<HeaderKey, Bucket> buckets_;
    std::unordered_map<WorkerId, HeaderKey> assigned_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
    std::uint64_t evictions_ = 0;
};

}  // namespace proofgate
