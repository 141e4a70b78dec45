#include "proofgate/warm_cache.hpp"

#include <unordered_set>

namespace proofgate {

void WarmCache::assign(WorkerId worker, const HeaderKey& key) {
    if (index_.contains(worker)) {
        throw CacheError("cannot re-assign a cached worker " + std::to_string(worker));
    }
    assigned_[worker] = key;
}

void WarmCache::forget(WorkerId worker) {
    if (index_.contains(worker)) {
        erase(worker);
    }
    assigned_.erase(worker);
}

std::optional<HeaderKey> WarmCache::assigned_key(WorkerId worker) const {
    if (auto it = assigned_.find(worker); it != assigned_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::optional<WorkerId> WarmCache::lookup(const HeaderKey& key) {
    auto bucket = buckets_.find(key);
    if (bucket == buckets_.end() || bucket->second.empty()) {
        ++misses_;
        return std::nullopt;
    }
    const WorkerId worker = bucket->second.front();
    erase(worker);
    ++hits_;
    return worker;
}

void WarmCache::release(WorkerId worker, const HeaderKey& key) {
    if (index_.contains(worker)) {
        throw CacheError("duplicate release of worker " + std::to_string(worker));
    }
    auto assigned = assigned_.find(worker);
    if (assigned == assigned_.end() || assigned->second != key) {
        throw CacheError("worker " + std::to_string(worker) + " is not warmed on the released key");
    }
    auto rec = recency_.insert(recency_.end(), Entry{worker, key});
    auto& bucket = buckets_[key];
    auto pos = bucket.insert(bucket.end(), worker);
    index_.emplace(worker, Slot{rec, pos});
}

std::optional<WorkerId> WarmCache::evict_lru() {
    if (recency_.empty()) {
        return std::nullopt;
    }
    const WorkerId worker = recency_.front().worker;
    erase(worker);
    ++evictions_;
    return worker;
}

std::optional<WorkerId> WarmCache::least_recent() const {
    if (recency_.empty()) {
        return std::nullopt;
    }
    return recency_.front().worker;
}

bool WarmCache::claim(WorkerId worker) {
    if (!index_.contains(worker)) {
        return false;
    }
    erase(worker);
    return true;
}

void WarmCache::erase(WorkerId worker) {
    auto slot = index_.find(worker);
    const auto key = slot->second.recency->key;
    auto bucket = buckets_.find(key);
    bucket->second.erase(slot->second.in_bucket);
    if (bucket->second.empty()) {
        buckets_.erase(bucket);
    }
    recency_.erase(slot->second.recency);
    index_.erase(slot);
}

CacheStats WarmCache::stats() const {
    CacheStats stats{hits_, misses_, evictions_, {}};
    for (const auto& [key, bucket] : buckets_) {
        stats.bucket_sizes[key] = bucket.size();
    }
    return stats;
}

void WarmCache::check_invariants() const {
    std::unordered_set<WorkerId> seen;
    std::size_t bucketed = 0;
    for (const auto& [key, bucket] : buckets_) {
        if (bucket.empty()) {
            throw CacheError("empty bucket retained");
        }
        for (WorkerId w : bucket) {
            if (!seen.insert(w).second) {
                throw CacheError("worker " + std::to_string(w) + " in more than one bucket");
            }
            auto slot = index_.find(w);
            if (slot == index_.end() || slot->second.recency->key != key) {
                throw CacheError("bucket entry missing from recency list");
            }
            auto assigned = assigned_.find(w);
            if (assigned == assigned_.end() || assigned->second != key) {
                throw CacheError("cached worker warmed on a different key");
            }
            ++bucketed;
        }
    }
    if (bucketed != recency_.size() || index_.size() != recency_.size()) {
        throw CacheError("recency list and buckets disagree");
    }
}

}  // namespace proofgate
