#pragma once

#include <cstddef>

namespace ordlab {

// Half-open token-index interval [begin, end).
struct Span {
    size_t begin = 0;
    size_t end = 0;

    size_t size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool contains(size_t i) const { return i >= begin && i < end; }
    friend bool operator==(const Span&, const Span&) = default;
};

}  // namespace ordlab
