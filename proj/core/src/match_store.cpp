#include "qfp/match_store.hpp"

#include <algorithm>
#include <istream>
#include <iterator>
#include <mutex>
#include <ostream>

#include "byte_io.hpp"
#include "qfp/error.hpp"

namespace qfp {

namespace {

std::uint32_t tag_of(std::uint64_t h) { return static_cast<std::uint32_t>(h >> 32); }

}  // namespace

FingerprintIndex::FingerprintIndex(std::size_t threshold, Salt salt,
                                   std::size_t capacity)
    : threshold_(threshold), capacity_(capacity), salt_(salt) {}

FingerprintIndex::FingerprintIndex(FingerprintIndex&& other) noexcept
    : threshold_(other.threshold_),
      capacity_(other.capacity_),
      salt_(other.salt_),
      epoch_(other.epoch_),
      next_id_(other.next_id_),
      slots_(std::move(other.slots_)),
      keys_(std::move(other.keys_)),
      postings_(std::move(other.postings_)),
      ids_(std::move(other.ids_)) {}

FingerprintIndex& FingerprintIndex::operator=(FingerprintIndex&& other) noexcept {
  if (this != &other) {
    std::unique_lock lock(mutex_);
    threshold_ = other.threshold_;
    capacity_ = other.capacity_;
    salt_ = other.salt_;
    epoch_ = other.epoch_;
    next_id_ = other.next_id_;
    slots_ = std::move(other.slots_);
    keys_ = std::move(other.keys_);
    postings_ = std::move(other.postings_);
    ids_ = std::move(other.ids_);
  }
  return *this;
}

std::uint32_t FingerprintIndex::find_key(const HashDigest& d,
                                         std::uint64_t h) const {
  if (slots_.empty()) return kNone;
  const std::size_t mask = slots_.size() - 1;
  const std::uint32_t tag = tag_of(h);
  for (std::size_t i = h & mask;; i = (i + 1) & mask) {
    const Slot& slot = slots_[i];
    if (slot.key == kEmpty) return kNone;
    if (slot.tag == tag && keys_[slot.key].digest == d) return slot.key;
  }
}

MatchResult FingerprintIndex::max_overlap_locked(const Fingerprint& fp) const {
  MatchResult result;
  if (ids_.empty() || fp.digests.empty()) return result;

  thread_local std::vector<std::uint64_t> hashes;
  thread_local std::vector<std::uint32_t> touched;
  hashes.resize(fp.digests.size());
  touched.clear();

  const std::size_t mask = slots_.size() - 1;
  for (std::size_t i = 0; i < fp.digests.size(); ++i) {
    hashes[i] = fp.digests[i].mix();
    __builtin_prefetch(&slots_[hashes[i] & mask]);
  }
  for (std::size_t i = 0; i < fp.digests.size(); ++i) {
    if (i > 0 && fp.digests[i] == fp.digests[i - 1]) continue;
    const std::uint32_t key = find_key(fp.digests[i], hashes[i]);
    if (key == kNone) continue;
    for (std::uint32_t p = keys_[key].head; p != kNone; p = postings_[p].next) {
      touched.push_back(postings_[p].ordinal);
    }
  }
  if (touched.empty()) return result;

  // Ordinals increase with query id, so the first maximal run after sorting
  // is the lowest id.
  std::sort(touched.begin(), touched.end());
  std::size_t best = 0;
  std::uint32_t best_ordinal = 0;
  for (std::size_t i = 0; i < touched.size();) {
    std::size_t j = i;
    while (j < touched.size() && touched[j] == touched[i]) ++j;
    if (j - i > best) {
      best = j - i;
      best_ordinal = touched[i];
    }
    i = j;
  }
  result.max_overlap = best;
  result.best_match = ids_[best_ordinal];
  result.flagged = best > threshold_;
  return result;
}

void FingerprintIndex::rehash(std::size_t new_slot_count) {
  slots_.assign(new_slot_count, Slot{0, kEmpty});
  const std::size_t mask = new_slot_count - 1;
  for (std::uint32_t k = 0; k < keys_.size(); ++k) {
    const std::uint64_t h = keys_[k].digest.mix();
    std::size_t i = h & mask;
    while (slots_[i].key != kEmpty) i = (i + 1) & mask;
    slots_[i] = Slot{tag_of(h), k};
  }
}

void FingerprintIndex::grow_for(std::size_t extra_keys) {
  const std::size_t needed = keys_.size() + extra_keys;
  if (!slots_.empty() && needed * 2 <= slots_.size()) return;
  std::size_t n = std::max<std::size_t>(16, slots_.size());
  while (needed * 2 > n) n *= 2;
  rehash(n);
}

QueryId FingerprintIndex::insert_locked(const Fingerprint& fp,
                                        std::optional<QueryId> id) {
  if (ids_.size() >= capacity_) {
    throw Error(ErrorCode::kCapacityExceeded,
                "store holds " + std::to_string(ids_.size()) +
                    " fingerprints; reset policy must clear it");
  }
  if (keys_.size() + fp.digests.size() >= kEmpty ||
      postings_.size() + fp.digests.size() >= kNone) {
    throw Error(ErrorCode::kCapacityExceeded, "index arena exhausted");
  }
  QueryId qid = next_id_;
  if (id) {
    if (!ids_.empty() && *id <= ids_.back()) {
      throw Error(ErrorCode::kMalformedData, "query ids must strictly increase");
    }
    qid = *id;
  }
  next_id_ = qid + 1;
  const auto ordinal = static_cast<std::uint32_t>(ids_.size());
  ids_.push_back(qid);

  grow_for(fp.digests.size());
  const std::size_t mask = slots_.size() - 1;
  for (const auto& d : fp.digests) {
    const std::uint64_t h = d.mix();
    const std::uint32_t tag = tag_of(h);
    std::size_t i = h & mask;
    std::uint32_t key = kNone;
    for (;; i = (i + 1) & mask) {
      const Slot& slot = slots_[i];
      if (slot.key == kEmpty) break;
      if (slot.tag == tag && keys_[slot.key].digest == d) {
        key = slot.key;
        break;
      }
    }
    if (key == kNone) {
      key = static_cast<std::uint32_t>(keys_.size());
      keys_.push_back(KeyEntry{d, kNone, kNone});
      slots_[i] = Slot{tag, key};
    }
    KeyEntry& entry = keys_[key];
    if (entry.tail != kNone && postings_[entry.tail].ordinal == ordinal) continue;
    const auto p = static_cast<std::uint32_t>(postings_.size());
    postings_.push_back(Posting{ordinal, kNone});
    if (entry.head == kNone) {
      entry.head = p;
    } else {
      postings_[entry.tail].next = p;
    }
    entry.tail = p;
  }
  return qid;
}

MatchResult FingerprintIndex::max_overlap(const Fingerprint& fp) const {
  std::shared_lock lock(mutex_);
  return max_overlap_locked(fp);
}

QueryId FingerprintIndex::insert(const Fingerprint& fp) {
  std::unique_lock lock(mutex_);
  return insert_locked(fp, std::nullopt);
}

MatchResult FingerprintIndex::check_and_insert(const Fingerprint& fp) {
  return check_and_maybe_insert(fp, true);
}

MatchResult FingerprintIndex::check_and_maybe_insert(const Fingerprint& fp,
                                                     bool insert_flagged) {
  std::unique_lock lock(mutex_);
  MatchResult result = max_overlap_locked(fp);
  if (!result.flagged || insert_flagged) insert_locked(fp, std::nullopt);
  return result;
}

void FingerprintIndex::clear_locked() {
  std::vector<Slot>().swap(slots_);
  std::vector<KeyEntry>().swap(keys_);
  std::vector<Posting>().swap(postings_);
  std::vector<QueryId>().swap(ids_);
  next_id_ = 0;
}

void FingerprintIndex::reset(const Salt& new_salt) {
  std::unique_lock lock(mutex_);
  clear_locked();
  ++epoch_;
  salt_ = new_salt;
}

void FingerprintIndex::reserve(std::size_t fingerprints,
                               std::size_t digests_each) {
  std::unique_lock lock(mutex_);
  const std::size_t digests = fingerprints * digests_each;
  grow_for(digests);
  keys_.reserve(keys_.size() + digests);
  postings_.reserve(postings_.size() + digests);
  ids_.reserve(ids_.size() + fingerprints);
}

std::size_t FingerprintIndex::size() const {
  std::shared_lock lock(mutex_);
  return ids_.size();
}

std::uint32_t FingerprintIndex::epoch() const {
  std::shared_lock lock(mutex_);
  return epoch_;
}

Salt FingerprintIndex::salt() const {
  std::shared_lock lock(mutex_);
  return salt_;
}

std::size_t FingerprintIndex::total_postings() const {
  std::shared_lock lock(mutex_);
  return postings_.size();
}

std::size_t FingerprintIndex::distinct_digests() const {
  std::shared_lock lock(mutex_);
  return keys_.size();
}

std::size_t FingerprintIndex::memory_bytes() const {
  std::shared_lock lock(mutex_);
  return slots_.capacity() * sizeof(Slot) + keys_.capacity() * sizeof(KeyEntry) +
         postings_.capacity() * sizeof(Posting) +
         ids_.capacity() * sizeof(QueryId);
}

std::vector<std::pair<QueryId, Fingerprint>> FingerprintIndex::fingerprints()
    const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<QueryId, Fingerprint>> out(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) out[i].first = ids_[i];
  for (const auto& entry : keys_) {
    for (std::uint32_t p = entry.head; p != kNone; p = postings_[p].next) {
      out[postings_[p].ordinal].second.digests.push_back(entry.digest);
    }
  }
  for (auto& [id, fp] : out) {
    std::sort(fp.digests.begin(), fp.digests.end(), std::greater<>{});
    fp.source_n = fp.digests.size();
  }
  return out;
}

void FingerprintIndex::save(std::ostream& out) const {
  const auto fps = fingerprints();
  std::string bytes;
  detail::ByteWriter w(bytes);
  w.raw("BLDB", 4);
  w.u8(1);
  w.u32(epoch());
  const Salt s = salt();
  w.raw(s.data(), s.size());
  w.u64(fps.size());
  for (const auto& [id, fp] : fps) {
    w.u64(id);
    w.u16(static_cast<std::uint16_t>(fp.digests.size()));
    for (const auto& d : fp.digests) w.raw(d.bytes.data(), kDigestBytes);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FingerprintIndex FingerprintIndex::load(std::istream& in, std::size_t threshold,
                                        std::size_t capacity) {
  const std::string bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};
  detail::ByteReader r(bytes, "BLDB");
  r.expect_magic("BLDB", 1);
  const std::uint32_t epoch = r.u32();
  Salt salt;
  r.raw(salt.data(), salt.size());
  const std::uint64_t count = r.u64();
  if (count > capacity) {
    throw Error(ErrorCode::kCapacityExceeded,
                "snapshot holds " + std::to_string(count) + " fingerprints");
  }
  FingerprintIndex index(threshold, salt, capacity);
  index.epoch_ = epoch;
  Fingerprint fp;
  for (std::uint64_t i = 0; i < count; ++i) {
    const QueryId id = r.u64();
    fp.digests.resize(r.u16());
    for (auto& d : fp.digests) r.raw(d.bytes.data(), kDigestBytes);
    fp.source_n = fp.digests.size();
    index.insert_locked(fp, id);
  }
  r.expect_end();
  return index;
}

}  // namespace qfp
