#pragma once

#include "ordlab/eval.hpp"
#include "ordlab/model.hpp"
#include "ordlab/prompt.hpp"

namespace ordlab {

enum class QuerySet { CueOnly, AllPostOption };

const char* query_set_name(QuerySet q);

// Per-layer mean attention mass directed at option-span keys.
struct AttentionProfile {
    std::vector<double> per_layer;  // each in [0, 1]
    QuerySet query_set = QuerySet::CueOnly;
    std::string head_aggregation = "mean";
};

AttentionProfile attention_profile(const LayerTrace& trace, const SpanMap& spans,
                                   QuerySet query_set);

enum class AttributionTarget { Predicted, Gold };

struct AttributionReport {
    std::vector<double> per_token;  // Gradient x Input score per prompt token
    double context_ratio = 0.0;     // context share of total attribution mass
    double total_mass = 0.0;        // the denominator, recorded for audit
    bool degenerate = false;        // true when total attribution mass is 0
    Ordering ordering = Ordering::CQO;
    int target_label = 0;
};

// Gradient x Input against the restricted-softmax log-probability of the
// target label. signed_aggregation switches the span sums from |score| to raw
// signed scores (sensitivity analysis; ratios may then leave [0, 1]).
AttributionReport grad_x_input(const Model& model, const TokenizedPrompt& prompt,
                               AttributionTarget target_mode, int gold_label,
                               bool signed_aggregation = false);

// Core attribution arithmetic, shared with the linearity check in tests:
// takes per-token embeddings with populated gradients of log p(target).
AttributionReport attribution_from_scores(const std::vector<double>& per_token_scores,
                                          const SpanMap& spans, bool signed_aggregation);

}  // namespace ordlab
