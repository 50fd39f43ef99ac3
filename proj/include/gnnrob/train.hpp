#pragma once

#include <cstdint>
#include <vector>

#include "gnnrob/model.hpp"

namespace gnnrob {

struct TrainConfig {
    double lr = 0.01;
    double weight_decay = 0.001;
    Index epochs = 3000;
    Index patience = 300;
    std::uint64_t seed = 0;
};

struct TrainRecord {
    std::vector<double> train_loss;
    std::vector<double> valid_acc;
    Index best_epoch = -1;
    double best_valid_acc = 0.0;
};

std::vector<Index> predict_classes(const Matrix& logits);

/// Adam with cross-entropy on the train split and early stopping on
/// validation accuracy; returns the best-validation parameters.
ModelParams train(ModelParams params, const Graph& g, const CsrMatrix& mp_matrix,
                  const TrainConfig& cfg, TrainRecord* record = nullptr);

ModelParams train_pprgo(ModelParams params, const Graph& g, const PprMatrix& ppr,
                        const TrainConfig& cfg, TrainRecord* record = nullptr);

}  // namespace gnnrob
