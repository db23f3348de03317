#pragma once

#include <span>
#include <vector>

#include "pairlab/records.hpp"

namespace pairlab {

struct Anchor {
    SampleId sample;
    double score;
    double percentile;
};

/// L >= 1 anchors with strictly increasing scores and percentiles in (0, 100).
class AnchorSet {
public:
    explicit AnchorSet(std::vector<Anchor> anchors);

    std::span<const Anchor> anchors() const noexcept { return anchors_; }
    std::size_t size() const noexcept { return anchors_.size(); }
    const Anchor& operator[](std::size_t i) const { return anchors_.at(i); }

    /// nullptr when `id` is not an anchor.
    const Anchor* find(const SampleId& id) const noexcept;

private:
    std::vector<Anchor> anchors_;
};

}  // namespace pairlab
