#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ordlab/corpus.hpp"
#include "ordlab/span.hpp"
#include "ordlab/vocab.hpp"

namespace ordlab {

enum class Ordering { CQO, QOC, QO, QOCO };
enum class ArchFlavor { Decoder, EncoderCloze, EncDec };

const char* ordering_name(Ordering o);
Ordering ordering_from_name(const std::string& name);
const char* flavor_name(ArchFlavor f);

// Exact token intervals of the test instance's components. Option spans cover
// the label token plus the option content ("A v7"); headers and the cue are
// structural. demo_spans cover each few-shot demonstration including its gold
// label and trailing separator.
struct SpanMap {
    Span context;  // empty for QO
    Span question;
    std::vector<Span> option_spans;           // 4 entries
    std::vector<Span> repeated_option_spans;  // 4 entries for QOCO, else empty
    Span cue;
    std::vector<Span> demo_spans;
};

struct TokenizedPrompt {
    std::vector<int> tokens;
    SpanMap spans;
    Ordering ordering = Ordering::CQO;
    ArchFlavor flavor = ArchFlavor::Decoder;
};

// Renders a sample under an ordering and architecture flavor, with up to five
// few-shot demonstrations (each rendered in the same ordering, gold label
// appended, followed by a separator). Throws LengthError when the result
// exceeds max_seq.
TokenizedPrompt render(const Vocabulary& vocab, const Sample& sample, Ordering ordering,
                       ArchFlavor flavor, const std::vector<std::pair<Sample, int>>& fewshot = {},
                       size_t max_seq = 4096);

// Position pairs covering exactly the (original) option-span tokens of two
// renderings of the same sample. Token ids must match pairwise; any mismatch
// raises AlignmentError naming the offending index.
std::vector<std::pair<size_t, size_t>> align_option_spans(const TokenizedPrompt& a,
                                                          const TokenizedPrompt& b);

// Human-readable dump: symbols plus a span table. For the --dump-prompts flag.
std::string dump_prompt(const Vocabulary& vocab, const TokenizedPrompt& prompt);

// Index of the logits row that scores the answer labels:
// decoder -> last cue token (its next-token logits), cloze -> mask position.
// EncDec prompts are scored at decoder position 0, outside this helper.
size_t scoring_row(const TokenizedPrompt& prompt);

}  // namespace ordlab
