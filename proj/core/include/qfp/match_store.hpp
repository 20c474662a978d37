#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "qfp/fingerprint.hpp"
#include "qfp/types.hpp"

namespace qfp {

using QueryId = std::uint64_t;

struct MatchResult {
  std::size_t max_overlap = 0;
  std::optional<QueryId> best_match;  // lowest id among the maxima
  bool flagged = false;               // max_overlap > threshold

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Inverted index from digest to the queries whose fingerprints contain it.
///
/// Digests live once in a key arena; an open-addressing table of
/// (32-bit tag, key index) slots maps digests to arena entries, and each
/// entry heads an insertion-ordered posting chain of fingerprint ordinals.
/// A lookup costs one probe sequence per digest plus the postings it hits,
/// independent of the number of stored fingerprints.
///
/// Mutations take an exclusive lock and max_overlap a shared one, so
/// check_and_insert is the linearization point for concurrent callers.
class FingerprintIndex {
 public:
  static constexpr std::size_t kDefaultCapacity = 10'000'000;
  // Upper bound on heap bytes per stored digest beyond its 32 payload bytes,
  // holding after any sequence of inserts.
  static constexpr std::size_t kOverheadBytesPerDigest = 120;
  static constexpr std::size_t kOverheadBytesPerFingerprint = 32;

  explicit FingerprintIndex(std::size_t threshold, Salt salt = {},
                            std::size_t capacity = kDefaultCapacity);

  FingerprintIndex(const FingerprintIndex&) = delete;
  FingerprintIndex& operator=(const FingerprintIndex&) = delete;
  FingerprintIndex(FingerprintIndex&&) noexcept;
  FingerprintIndex& operator=(FingerprintIndex&&) noexcept;

  MatchResult max_overlap(const Fingerprint& fp) const;
  /// Throws kCapacityExceeded once `capacity` fingerprints are stored.
  QueryId insert(const Fingerprint& fp);
  /// max_overlap followed by insert under one lock; returns the pre-insert
  /// result.
  MatchResult check_and_insert(const Fingerprint& fp);
  /// Like check_and_insert, but skips the insert when the query is flagged.
  MatchResult check_and_maybe_insert(const Fingerprint& fp,
                                     bool insert_flagged);
  /// Empties the index, bumps the epoch, installs `new_salt`, and restarts
  /// query ids at zero.
  void reset(const Salt& new_salt);

  /// Pre-sizes for `fingerprints` more fingerprints of `digests_each`.
  void reserve(std::size_t fingerprints, std::size_t digests_each);

  std::size_t size() const;
  std::uint32_t epoch() const;
  Salt salt() const;
  std::size_t threshold() const { return threshold_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_postings() const;
  std::size_t distinct_digests() const;
  /// Heap bytes held by the index containers (capacity-based, exact for the
  /// standard allocator's requests).
  std::size_t memory_bytes() const;

  /// Stored fingerprints in id order, rebuilt from the postings.
  std::vector<std::pair<QueryId, Fingerprint>> fingerprints() const;

  // BLDB: "BLDB", u8 version = 1, u32 epoch, 16-byte salt, u64 count, then
  // per fingerprint u64 id, u16 digest count, digests. Big-endian.
  void save(std::ostream& out) const;
  static FingerprintIndex load(std::istream& in, std::size_t threshold,
                               std::size_t capacity = kDefaultCapacity);

 private:
  struct Slot {
    std::uint32_t tag;
    std::uint32_t key;  // kEmpty when unused
  };
  struct KeyEntry {
    HashDigest digest;
    std::uint32_t head;
    std::uint32_t tail;
  };
  struct Posting {
    std::uint32_t ordinal;
    std::uint32_t next;
  };
  static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  MatchResult max_overlap_locked(const Fingerprint& fp) const;
  QueryId insert_locked(const Fingerprint& fp, std::optional<QueryId> id);
  std::uint32_t find_key(const HashDigest& d, std::uint64_t h) const;
  void grow_for(std::size_t extra_keys);
  void rehash(std::size_t new_slot_count);
  void clear_locked();

  std::size_t threshold_;
  std::size_t capacity_;
  Salt salt_;
  std::uint32_t epoch_ = 0;
  QueryId next_id_ = 0;

  std::vector<Slot> slots_;
  std::vector<KeyEntry> keys_;
  std::vector<Posting> postings_;
  std::vector<QueryId> ids_;  // ordinal -> id
  mutable std::shared_mutex mutex_;
};

}  // namespace qfp
