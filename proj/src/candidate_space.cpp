#include "gnnrob/candidate_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gnnrob {

namespace {

Index upper_row_offset(Index i, Index n) { return i * n - i * (i + 1) / 2; }

}  // namespace

Index SpaceCodec::size() const {
    switch (space) {
        case CandidateSpace::UpperTriangular: return n * (n - 1) / 2;
        case CandidateSpace::DirectedOffDiagonal: return n * (n - 1);
        case CandidateSpace::IncomingRow: return n - 1;
    }
    return 0;
}

std::pair<Index, Index> SpaceCodec::decode(Index e) const {
    if (e < 0 || e >= size()) throw std::out_of_range("candidate index out of range");
    switch (space) {
        case CandidateSpace::UpperTriangular: {
            // invert e = i n - i(i+1)/2 + (j - i - 1)
            Index i = static_cast<Index>(
                std::floor(static_cast<double>(n) - 0.5 -
                           std::sqrt((static_cast<double>(n) - 0.5) * (static_cast<double>(n) - 0.5) -
                                     2.0 * static_cast<double>(e))));
            i = std::clamp<Index>(i, 0, n - 2);
            while (i > 0 && upper_row_offset(i, n) > e) --i;
            while (i < n - 2 && upper_row_offset(i + 1, n) <= e) ++i;
            const Index j = i + 1 + (e - upper_row_offset(i, n));
            return {i, j};
        }
        case CandidateSpace::DirectedOffDiagonal: {
            const Index i = e / (n - 1);
            const Index r = e % (n - 1);
            return {i, r < i ? r : r + 1};
        }
        case CandidateSpace::IncomingRow: {
            const Index j = e < target ? e : e + 1;
            return {j, target};
        }
    }
    throw std::logic_error("unreachable");
}

Index SpaceCodec::encode(Index i, Index j) const {
    switch (space) {
        case CandidateSpace::UpperTriangular:
            if (!(0 <= i && i < j && j < n)) throw std::out_of_range("bad upper-triangular pair");
            return upper_row_offset(i, n) + (j - i - 1);
        case CandidateSpace::DirectedOffDiagonal:
            if (i == j || i < 0 || j < 0 || i >= n || j >= n)
                throw std::out_of_range("bad off-diagonal pair");
            return i * (n - 1) + (j < i ? j : j - 1);
        case CandidateSpace::IncomingRow:
            if (j != target || i == target || i < 0 || i >= n)
                throw std::out_of_range("bad incoming-row pair");
            return i < target ? i : i - 1;
    }
    throw std::logic_error("unreachable");
}

std::vector<Index> sample_block(const SpaceCodec& codec, Index b, std::mt19937_64& rng,
                                const std::vector<Index>& exclude) {
    const Index sz = codec.size();
    if (b >= sz - static_cast<Index>(exclude.size())) {
        // block covers the whole remaining space
        std::vector<Index> all;
        all.reserve(static_cast<std::size_t>(sz));
        for (Index e = 0; e < sz; ++e)
            if (!std::binary_search(exclude.begin(), exclude.end(), e)) all.push_back(e);
        return all;
    }
    std::uniform_int_distribution<Index> dist(0, sz - 1);
    std::vector<Index> draws(static_cast<std::size_t>(b));
    for (Index& d : draws) d = dist(rng);
    std::sort(draws.begin(), draws.end());
    draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
    if (!exclude.empty()) {
        std::vector<Index> kept;
        kept.reserve(draws.size());
        std::set_difference(draws.begin(), draws.end(), exclude.begin(), exclude.end(),
                            std::back_inserter(kept));
        draws = std::move(kept);
    }
    return draws;
}

}  // namespace gnnrob
