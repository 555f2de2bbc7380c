#pragma once

#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

namespace cogmesh::engine {

// Time-ordered queue; events with equal timestamps pop in insertion order.
template <typename Payload>
class EventQueue {
public:
    struct Entry {
        double time;
        std::uint64_t seq;
        Payload payload;
    };

    void push(double time, Payload payload) {
        heap_.push(Entry{time, next_seq_++, std::move(payload)});
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    double next_time() const { return heap_.top().time; }

    Entry pop() {
        Entry e = heap_.top();
        heap_.pop();
        return e;
    }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

} // namespace cogmesh::engine
