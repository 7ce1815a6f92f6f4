#pragma once

#include <stdexcept>
#include <string>

namespace ordlab {

// Error taxonomy. Each class maps to one CLI exit code (see tools/ordlab.cpp).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement (matmul inner dims, elementwise shapes, ...).
struct ShapeError : Error {
    using Error::Error;
};

// Violated API precondition (non-scalar backward root, span out of bounds, ...).
struct ContractError : Error {
    using Error::Error;
};

// Index outside valid range (cross-entropy target, option index, ...).
struct IndexError : Error {
    using Error::Error;
};

// Fully-masked softmax row; never silently normalized to uniform.
struct DegenerateRowError : Error {
    using Error::Error;
};

// Sequence exceeds max_seq.
struct LengthError : Error {
    using Error::Error;
};

// NaN/Inf surfaced where finite values are required (logits, loss).
struct NumericError : Error {
    using Error::Error;
};

// Scoring protocol violated (flavor/arch mismatch, missing cue or mask position).
struct ProtocolError : Error {
    using Error::Error;
};

// Option token content differs between two renderings of the same sample.
struct AlignmentError : Error {
    using Error::Error;
};

// Symbol alphabet too small for the requested corpus.
struct CapacityError : Error {
    using Error::Error;
};

// EvalReports with mismatched model/corpus fingerprints compared.
struct ComparisonError : Error {
    using Error::Error;
};

// Training diverged (NaN loss), with the step index in the message.
struct TrainingError : Error {
    using Error::Error;
};

// Manifest failed schema validation.
struct SchemaError : Error {
    using Error::Error;
};

// A subcommand's upstream artifact (corpus, checkpoint, CSV) is missing.
struct ArtifactError : Error {
    using Error::Error;
};

}  // namespace ordlab
