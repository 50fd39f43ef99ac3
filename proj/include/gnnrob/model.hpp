#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gnnrob/graph.hpp"
#include "gnnrob/ppr.hpp"

namespace gnnrob {

enum class ModelKind { GCN, SGC, GDC, PPRGo };
enum class Aggregation { WeightedSum, SoftMedian };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);
const char* aggregation_name(Aggregation agg);
Aggregation aggregation_from_name(const std::string& name);

/// Layered message-passing model. GCN/GDC stack aggregation layers with ReLU
/// between them; SGC propagates `propagation_steps` times and applies one
/// linear layer; PPRGo encodes features with a plain MLP and aggregates the
/// encoded logits once with PPR weights.
struct ModelParams {
    ModelKind kind = ModelKind::GCN;
    std::vector<Matrix> layer_weights;          // W^l: d_in x d_out
    std::vector<std::vector<double>> biases;    // per layer, length d_out
    Aggregation aggregation = Aggregation::WeightedSum;
    double temperature = 0.5;                   // SoftMedian only
    Index propagation_steps = 2;                // SGC only

    Index n_layers() const { return static_cast<Index>(layer_weights.size()); }
    Index in_dim() const { return layer_weights.front().rows; }
    Index out_dim() const { return layer_weights.back().cols; }
    void check_shapes() const;
};

/// Glorot-uniform initialization, deterministic under the seed.
ModelParams init_params(ModelKind kind, Index in_dim, Index hidden_dim, Index n_classes,
                        Index n_layers, std::uint64_t seed,
                        Aggregation aggregation = Aggregation::WeightedSum,
                        double temperature = 0.5);

struct Prediction {
    Matrix logits;        // n x C
    Matrix confidences;   // softmax rows
    std::vector<double> margins;  // psi per node; empty when labels unknown
};

Prediction make_prediction(Matrix logits, const std::vector<Index>* labels = nullptr);

struct ForwardTape {
    CsrMatrix mp;                  // message-passing matrix actually used
    std::vector<Matrix> inputs;    // H^{l-1} per layer
    std::vector<Matrix> messages;  // M^l = H^{l-1} W^l per layer
    std::vector<Matrix> pre_acts;  // Z^l per layer
};

/// Full-graph forward. `mp_matrix` is the message-passing matrix (normalized
/// adjacency for GCN/SGC, diffusion matrix for GDC).
Prediction forward(const ModelParams& params, const CsrMatrix& mp_matrix, const Matrix& x,
                   ForwardTape* tape = nullptr, const std::vector<Index>* labels = nullptr);

/// PPRGo encoder: per-node MLP logits f_enc(X).
Matrix pprgo_encode(const ModelParams& params, const Matrix& x);

/// Aggregates encoded logits over one PPR row (weighted sum or weighted Soft
/// Median per params).
std::vector<double> pprgo_aggregate(const ModelParams& params, const SparseRow& row,
                                    const Matrix& encoded);

/// Forward for the queried nodes only; every node needs a PPR row.
Prediction pprgo_forward(const ModelParams& params, const PprMatrix& ppr, const Matrix& x,
                         const std::vector<Index>& nodes,
                         const std::vector<Index>* labels = nullptr);

/// Gradient of a scalar loss with respect to the PPR weights of one row,
/// given d loss / d aggregated logits. Flows through the Soft Median weights
/// when that aggregation is active.
std::vector<double> pprgo_row_gradient(const ModelParams& params, const SparseRow& row,
                                       const Matrix& encoded, const std::vector<double>& gbar);

struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

/// Parameter gradients by tape replay; `grad_logits` is d loss / d logits.
ParamGrads backward_wrt_params(const ForwardTape& tape, const ModelParams& params,
                               const Matrix& grad_logits);

/// Gradient of a scalar loss with respect to d loss / d encoded logits for
/// PPRGo training (aggregation backward only).
Matrix pprgo_backward_to_encoded(const ModelParams& params, const PprMatrix& ppr,
                                 const std::vector<Index>& nodes, const Matrix& encoded,
                                 const Matrix& grad_logits);

/// Parameter gradients of the PPRGo encoder given d loss / d encoded logits.
ParamGrads pprgo_encoder_backward(const ModelParams& params, const Matrix& x,
                                  const Matrix& grad_encoded);

/// Gradients of the loss with respect to the relaxed weights p of candidate
/// edge flips, through the symmetric normalization of the perturbed adjacency
/// (A xor p). Requires a WeightedSum tape produced on gcn_normalize(perturbed).
/// The sign convention follows the xor semantics: +1 for inserting a missing
/// edge of `clean_adjacency`, -1 for removing an existing one. With
/// `freeze_normalization`, the degree terms are dropped (normalization treated
/// as constant).
std::vector<double> backward_wrt_edges(const ForwardTape& tape, const ModelParams& params,
                                       const Matrix& grad_logits,
                                       const CsrMatrix& clean_adjacency,
                                       const CsrMatrix& perturbed_adjacency,
                                       const std::vector<std::pair<Index, Index>>& candidates,
                                       bool directed, bool freeze_normalization = false);

}  // namespace gnnrob
