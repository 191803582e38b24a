#pragma once

#include "feti/common.hpp"

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace feti {

/// Handle to a live pool region. Plain value; the pool tracks ownership by id.
class Region {
public:
    Region() = default;
    std::uint64_t id() const { return id_; }
    std::size_t offset() const { return offset_; }
    std::size_t size() const { return size_; }
    bool valid() const { return id_ != 0; }

private:
    friend class Pool;
    Region(std::uint64_t id, std::size_t offset, std::size_t size) : id_(id), offset_(offset), size_(size) {}
    std::uint64_t id_ = 0;
    std::size_t offset_ = 0;
    std::size_t size_ = 0;
};

/// Transition record, emitted under the pool lock.
struct PoolEvent {
    enum class Kind { request, grant, release };
    Kind kind;
    std::uint64_t ticket; ///< request order; also the region id once granted
    std::size_t size;
    std::size_t offset;   ///< grant only
};

struct LedgerEntry {
    std::uint64_t id;
    std::size_t offset;
    std::size_t size;
    int owner;
};

/// Fixed-capacity temporary memory arena. acquire() blocks until the request
/// fits; placement is first-fit over an address-sorted free list with
/// coalescing; waiters are served strictly in arrival order.
class Pool {
public:
    /// `granularity` rounds every request up; `with_storage` backs the pool with real memory.
    explicit Pool(std::size_t capacity, std::size_t granularity = 1, bool with_storage = true);
    Pool(const Pool&) = delete;
    Pool& operator=(const Pool&) = delete;

    std::size_t capacity() const { return capacity_; }
    std::size_t granularity() const { return granularity_; }

    Region acquire(std::size_t bytes, int owner = -1);
    void release(const Region& region);

    std::size_t free_bytes() const;
    std::size_t live_count() const;
    std::size_t waiting_count() const;
    std::vector<LedgerEntry> ledger() const;

    /// Called under the pool lock at every transition; the ledger snapshot is current.
    using Observer = std::function<void(const PoolEvent&, std::span<const LedgerEntry>)>;
    void set_observer(Observer observer);

    std::byte* data(const Region& region) const;
    template <typename T>
    std::span<T> as(const Region& region, std::size_t count, std::size_t byte_offset = 0) const
    {
        return {reinterpret_cast<T*>(data(region) + byte_offset), count};
    }

private:
    struct FreeBlock {
        std::size_t offset;
        std::size_t size;
    };
    struct Waiter {
        std::size_t size;
        int owner;
        std::uint64_t ticket;
        bool granted = false;
        Region region;
        Waiter* next = nullptr;
    };

    bool try_place(std::size_t size, int owner, std::uint64_t ticket, Region& out);
    void serve_waiters();
    void notify(const PoolEvent& e);

    std::size_t capacity_;
    std::size_t granularity_;
    std::unique_ptr<std::byte[]> storage_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<FreeBlock> free_;    // sorted by offset, never adjacent
    std::vector<LedgerEntry> live_;
    Waiter* head_ = nullptr;
    Waiter* tail_ = nullptr;
    std::size_t waiting_ = 0;
    std::uint64_t next_ticket_ = 1;
    Observer observer_;
};

/// Releases its region on destruction.
class PoolLease {
public:
    PoolLease(Pool& pool, std::size_t bytes, int owner = -1) : pool_(&pool), region_(pool.acquire(bytes, owner)) {}
    ~PoolLease()
    {
        if (pool_) pool_->release(region_);
    }
    PoolLease(const PoolLease&) = delete;
    PoolLease& operator=(const PoolLease&) = delete;

    const Region& region() const { return region_; }
    std::byte* data() const { return pool_->data(region_); }

private:
    Pool* pool_;
    Region region_;
};

} // namespace feti
