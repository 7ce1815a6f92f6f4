#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ordlab/errors.hpp"

namespace ordlab {

// Reserved token ids. The layout is frozen: prompt fixtures and checkpoints
// depend on it. Fact keys follow the reserved block, then fact values.
enum ReservedToken : int {
    TOK_SEP = 0,       // separator between few-shot demonstrations
    TOK_BOS = 1,       // decoder start for the encoder-decoder architecture
    TOK_MASK = 2,      // cloze mask
    TOK_CONTEXT = 3,   // "Context:"
    TOK_QUESTION = 4,  // "Question:"
    TOK_OPTIONS = 5,   // "Options:"
    TOK_A = 6,
    TOK_B = 7,
    TOK_C = 8,
    TOK_D = 9,
    TOK_AMONG = 10,  // "Among"
    TOK_TO = 11,     // "to"
    TOK_COMMA = 12,  // ","
    TOK_THE = 13,    // "the"
    TOK_ANSWER = 14, // "answer"
    TOK_IS = 15,     // "is"
    TOK_COLON = 16,  // ":"
    TOK_PERIOD = 17, // "."
    TOK_OPTION = 18, // "Option" (recall-probe cue)
    RESERVED_COUNT = 19,
};

// One symbol per token. Key and value alphabets are disjoint from each other
// and from every reserved token.
class Vocabulary {
public:
    Vocabulary(int n_keys, int n_values);

    int size() const { return RESERVED_COUNT + n_keys_ + n_values_; }
    int n_keys() const { return n_keys_; }
    int n_values() const { return n_values_; }

    int key_token(int key_idx) const;
    int value_token(int value_idx) const;
    int label_token(int option_idx) const;  // 0 -> A .. 3 -> D

    bool is_key(int token) const { return token >= RESERVED_COUNT && token < RESERVED_COUNT + n_keys_; }
    bool is_value(int token) const {
        return token >= RESERVED_COUNT + n_keys_ && token < size();
    }

    const std::string& symbol(int token) const;
    int token(const std::string& symbol) const;

private:
    int n_keys_;
    int n_values_;
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> ids_;
};

}  // namespace ordlab
