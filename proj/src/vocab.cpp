#include "ordlab/vocab.hpp"

namespace ordlab {

Vocabulary::Vocabulary(int n_keys, int n_values) : n_keys_(n_keys), n_values_(n_values) {
    if (n_keys < 1 || n_values < 4)
        throw CapacityError("Vocabulary: need at least 1 key and 4 value symbols");
    symbols_ = {"<sep>", "<s>",  "[MASK]", "Context:", "Question:", "Options:", "A",
                "B",     "C",    "D",      "Among",    "to",        ",",        "the",
                "answer", "is",  ":",      ".",        "Option"};
    for (int i = 0; i < n_keys; ++i) symbols_.push_back("k" + std::to_string(i));
    for (int i = 0; i < n_values; ++i) symbols_.push_back("v" + std::to_string(i));
    for (size_t i = 0; i < symbols_.size(); ++i) ids_[symbols_[i]] = static_cast<int>(i);
}

int Vocabulary::key_token(int key_idx) const {
    if (key_idx < 0 || key_idx >= n_keys_) throw IndexError("Vocabulary: key index out of range");
    return RESERVED_COUNT + key_idx;
}

int Vocabulary::value_token(int value_idx) const {
    if (value_idx < 0 || value_idx >= n_values_)
        throw IndexError("Vocabulary: value index out of range");
    return RESERVED_COUNT + n_keys_ + value_idx;
}

int Vocabulary::label_token(int option_idx) const {
    if (option_idx < 0 || option_idx > 3) throw IndexError("Vocabulary: label index out of range");
    return TOK_A + option_idx;
}

const std::string& Vocabulary::symbol(int token) const {
    if (token < 0 || token >= size()) throw IndexError("Vocabulary: token out of range");
    return symbols_[static_cast<size_t>(token)];
}

int Vocabulary::token(const std::string& symbol) const {
    auto it = ids_.find(symbol);
    if (it == ids_.end()) throw IndexError("Vocabulary: unknown symbol '" + symbol + "'");
    return it->second;
}

}  // namespace ordlab
