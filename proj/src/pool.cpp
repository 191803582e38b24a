#include "feti/pool.hpp"

#include <algorithm>
#include <string>

namespace feti {

Pool::Pool(std::size_t capacity, std::size_t granularity, bool with_storage)
    : capacity_(capacity), granularity_(std::max<std::size_t>(granularity, 1))
{
    if (with_storage && capacity_ > 0) storage_ = std::make_unique<std::byte[]>(capacity_);
    free_.reserve(256);
    live_.reserve(256);
    if (capacity_ > 0) free_.push_back({0, capacity_});
}

void Pool::notify(const PoolEvent& e)
{
    if (observer_) observer_(e, live_);
}

bool Pool::try_place(std::size_t size, int owner, std::uint64_t ticket, Region& out)
{
    if (size == 0) {
        out = Region(ticket, 0, 0);
        live_.push_back({ticket, 0, 0, owner});
        notify({PoolEvent::Kind::grant, ticket, 0, 0});
        return true;
    }
    for (std::size_t b = 0; b < free_.size(); ++b) {
        FreeBlock& blk = free_[b];
        if (blk.size < size) continue;
        out = Region(ticket, blk.offset, size);
        live_.push_back({ticket, blk.offset, size, owner});
        if (blk.size == size) {
            free_.erase(free_.begin() + static_cast<std::ptrdiff_t>(b));
        } else {
            blk.offset += size;
            blk.size -= size;
        }
        notify({PoolEvent::Kind::grant, ticket, size, out.offset()});
        return true;
    }
    return false;
}

Region Pool::acquire(std::size_t bytes, int owner)
{
    const std::size_t size = (bytes + granularity_ - 1) / granularity_ * granularity_;
    if (size > capacity_)
        throw InvalidArgument("Pool::acquire: request of " + std::to_string(bytes) + " bytes exceeds capacity " +
                              std::to_string(capacity_));
    std::unique_lock lock(mutex_);
    const std::uint64_t ticket = next_ticket_++;
    notify({PoolEvent::Kind::request, ticket, size, 0});
    Region out;
    if ((size == 0 || head_ == nullptr) && try_place(size, owner, ticket, out)) return out;

    Waiter self{size, owner, ticket, false, Region{}, nullptr};
    if (tail_) tail_->next = &self;
    else head_ = &self;
    tail_ = &self;
    ++waiting_;
    cv_.wait(lock, [&] { return self.granted; });
    return self.region;
}

void Pool::serve_waiters()
{
    bool woke = false;
    while (head_) {
        Waiter* w = head_;
        if (!try_place(w->size, w->owner, w->ticket, w->region)) break;
        w->granted = true;
        head_ = w->next;
        if (!head_) tail_ = nullptr;
        --waiting_;
        woke = true;
    }
    if (woke) cv_.notify_all();
}

void Pool::release(const Region& region)
{
    std::lock_guard lock(mutex_);
    const auto it = std::find_if(live_.begin(), live_.end(), [&](const LedgerEntry& e) { return e.id == region.id(); });
    if (!region.valid() || it == live_.end())
        throw ContractViolation("Pool::release: region " + std::to_string(region.id()) + " is not live (double release?)");
    const LedgerEntry entry = *it;
    live_.erase(it);
    if (entry.size > 0) {
        auto pos = std::lower_bound(free_.begin(), free_.end(), entry.offset,
                                    [](const FreeBlock& b, std::size_t off) { return b.offset < off; });
        pos = free_.insert(pos, FreeBlock{entry.offset, entry.size});
        auto next = pos + 1;
        if (next != free_.end() && pos->offset + pos->size == next->offset) {
            pos->size += next->size;
            free_.erase(next);
        }
        if (pos != free_.begin()) {
            auto prev = pos - 1;
            if (prev->offset + prev->size == pos->offset) {
                prev->size += pos->size;
                free_.erase(pos);
            }
        }
    }
    notify({PoolEvent::Kind::release, entry.id, entry.size, entry.offset});
    serve_waiters();
}

std::size_t Pool::free_bytes() const
{
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const FreeBlock& b : free_) total += b.size;
    return total;
}

std::size_t Pool::live_count() const
{
    std::lock_guard lock(mutex_);
    return live_.size();
}

std::size_t Pool::waiting_count() const
{
    std::lock_guard lock(mutex_);
    return waiting_;
}

std::vector<LedgerEntry> Pool::ledger() const
{
    std::lock_guard lock(mutex_);
    return live_;
}

void Pool::set_observer(Observer observer)
{
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

std::byte* Pool::data(const Region& region) const
{
    if (!storage_) return nullptr;
    return storage_.get() + region.offset();
}

} // namespace feti
