#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "gnnrob/csr.hpp"

namespace gnnrob {

/// Linear-index codec over the candidate edges of an attack: the strict upper
/// triangle for undirected graphs, all off-diagonal entries for directed
/// ones, or the incoming edges of a single target node.
enum class CandidateSpace { UpperTriangular, DirectedOffDiagonal, IncomingRow };

struct SpaceCodec {
    CandidateSpace space = CandidateSpace::UpperTriangular;
    Index n = 0;
    Index target = -1;  // IncomingRow only

    Index size() const;
    std::pair<Index, Index> decode(Index e) const;  // (row, col)
    Index encode(Index i, Index j) const;
};

/// Samples up to b distinct indices: with-replacement draws, duplicates
/// dropped, result sorted. Indices in `exclude` (sorted) are rejected.
std::vector<Index> sample_block(const SpaceCodec& codec, Index b, std::mt19937_64& rng,
                                const std::vector<Index>& exclude = {});

}  // namespace gnnrob
