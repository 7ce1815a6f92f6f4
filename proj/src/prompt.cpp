#include "ordlab/prompt.hpp"

#include <algorithm>
#include <sstream>

namespace ordlab {

const char* ordering_name(Ordering o) {
    switch (o) {
        case Ordering::CQO: return "CQO";
        case Ordering::QOC: return "QOC";
        case Ordering::QO: return "QO";
        case Ordering::QOCO: return "QOCO";
    }
    return "?";
}

Ordering ordering_from_name(const std::string& name) {
    if (name == "CQO" || name == "cqo") return Ordering::CQO;
    if (name == "QOC" || name == "qoc") return Ordering::QOC;
    if (name == "QO" || name == "qo") return Ordering::QO;
    if (name == "QOCO" || name == "qoco") return Ordering::QOCO;
    throw ContractError("unknown ordering '" + name + "'");
}

const char* flavor_name(ArchFlavor f) {
    switch (f) {
        case ArchFlavor::Decoder: return "decoder";
        case ArchFlavor::EncoderCloze: return "encoder_cloze";
        case ArchFlavor::EncDec: return "encdec";
    }
    return "?";
}

namespace {

void emit_context(const Vocabulary& vocab, const Sample& s, std::vector<int>& toks, Span& span) {
    toks.push_back(TOK_CONTEXT);
    span.begin = toks.size();
    for (const Fact& f : s.facts) {
        toks.push_back(vocab.key_token(f.key));
        toks.push_back(vocab.value_token(f.value));
    }
    span.end = toks.size();
}

void emit_question(const Vocabulary& vocab, const Sample& s, std::vector<int>& toks, Span& span) {
    toks.push_back(TOK_QUESTION);
    span.begin = toks.size();
    toks.push_back(vocab.key_token(s.query_key));
    span.end = toks.size();
}

void emit_options(const Vocabulary& vocab, const Sample& s, std::vector<int>& toks,
                  std::vector<Span>& spans) {
    toks.push_back(TOK_OPTIONS);
    spans.clear();
    for (int i = 0; i < 4; ++i) {
        Span sp;
        sp.begin = toks.size();
        toks.push_back(vocab.label_token(i));
        toks.push_back(vocab.value_token(s.options[static_cast<size_t>(i)]));
        sp.end = toks.size();
        spans.push_back(sp);
    }
}

void emit_cue(ArchFlavor flavor, std::vector<int>& toks, Span& span) {
    span.begin = toks.size();
    switch (flavor) {
        case ArchFlavor::Decoder:
            // "Among A to D, the answer is:"
            for (int t : {TOK_AMONG, TOK_A, TOK_TO, TOK_D, TOK_COMMA, TOK_THE, TOK_ANSWER, TOK_IS,
                          TOK_COLON})
                toks.push_back(t);
            break;
        case ArchFlavor::EncoderCloze:
            // "Among A, B, C, D, the answer is [MASK]."
            for (int t : {TOK_AMONG, TOK_A, TOK_COMMA, TOK_B, TOK_COMMA, TOK_C, TOK_COMMA, TOK_D,
                          TOK_COMMA, TOK_THE, TOK_ANSWER, TOK_IS, TOK_MASK, TOK_PERIOD})
                toks.push_back(t);
            break;
        case ArchFlavor::EncDec:
            // "The answer is"
            for (int t : {TOK_THE, TOK_ANSWER, TOK_IS}) toks.push_back(t);
            break;
    }
    span.end = toks.size();
}

// Renders one instance; spans are filled only when `spans` is non-null.
void emit_instance(const Vocabulary& vocab, const Sample& s, Ordering ordering, ArchFlavor flavor,
                   std::vector<int>& toks, SpanMap* spans) {
    SpanMap local;
    SpanMap& sm = spans ? *spans : local;
    switch (ordering) {
        case Ordering::CQO:
            emit_context(vocab, s, toks, sm.context);
            emit_question(vocab, s, toks, sm.question);
            emit_options(vocab, s, toks, sm.option_spans);
            break;
        case Ordering::QOC:
            emit_question(vocab, s, toks, sm.question);
            emit_options(vocab, s, toks, sm.option_spans);
            emit_context(vocab, s, toks, sm.context);
            break;
        case Ordering::QO:
            emit_question(vocab, s, toks, sm.question);
            emit_options(vocab, s, toks, sm.option_spans);
            sm.context = Span{0, 0};
            break;
        case Ordering::QOCO: {
            emit_question(vocab, s, toks, sm.question);
            emit_options(vocab, s, toks, sm.option_spans);
            emit_context(vocab, s, toks, sm.context);
            std::vector<Span> repeated;
            emit_options(vocab, s, toks, repeated);
            sm.repeated_option_spans = repeated;
            break;
        }
    }
    emit_cue(flavor, toks, sm.cue);
}

bool same_sample(const Sample& a, const Sample& b) {
    return sample_to_line(a) == sample_to_line(b);
}

}  // namespace

TokenizedPrompt render(const Vocabulary& vocab, const Sample& sample, Ordering ordering,
                       ArchFlavor flavor, const std::vector<std::pair<Sample, int>>& fewshot,
                       size_t max_seq) {
    if (fewshot.size() > 5)
        throw ContractError("render: at most 5 few-shot demonstrations, got " +
                            std::to_string(fewshot.size()));
    for (const auto& [demo, label] : fewshot) {
        if (label < 0 || label > 3) throw IndexError("render: demo label out of range");
        if (same_sample(demo, sample))
            throw ContractError("render: few-shot demo equals the test sample");
    }

    TokenizedPrompt out;
    out.ordering = ordering;
    out.flavor = flavor;

    for (const auto& [demo, label] : fewshot) {
        Span dsp;
        dsp.begin = out.tokens.size();
        emit_instance(vocab, demo, ordering, flavor, out.tokens, nullptr);
        out.tokens.push_back(vocab.label_token(label));
        out.tokens.push_back(TOK_SEP);
        dsp.end = out.tokens.size();
        out.spans.demo_spans.push_back(dsp);
    }
    emit_instance(vocab, sample, ordering, flavor, out.tokens, &out.spans);

    if (out.tokens.size() > max_seq)
        throw LengthError("render: prompt length " + std::to_string(out.tokens.size()) +
                          " exceeds max_seq " + std::to_string(max_seq) + " (overflow of " +
                          std::to_string(out.tokens.size() - max_seq) + " tokens)");
    return out;
}

std::vector<std::pair<size_t, size_t>> align_option_spans(const TokenizedPrompt& a,
                                                          const TokenizedPrompt& b) {
    if (a.spans.option_spans.size() != 4 || b.spans.option_spans.size() != 4)
        throw AlignmentError("align_option_spans: prompts lack 4 option spans");
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < 4; ++i) {
        const Span& sa = a.spans.option_spans[i];
        const Span& sb = b.spans.option_spans[i];
        if (sa.size() != sb.size())
            throw AlignmentError("align_option_spans: option " + std::to_string(i) +
                                 " span length mismatch");
        for (size_t k = 0; k < sa.size(); ++k) {
            size_t pa = sa.begin + k, pb = sb.begin + k;
            if (a.tokens[pa] != b.tokens[pb])
                throw AlignmentError("align_option_spans: token mismatch at option " +
                                     std::to_string(i) + " offset " + std::to_string(k) +
                                     " (positions " + std::to_string(pa) + " vs " +
                                     std::to_string(pb) + ")");
            pairs.emplace_back(pa, pb);
        }
    }
    return pairs;
}

std::string dump_prompt(const Vocabulary& vocab, const TokenizedPrompt& prompt) {
    std::ostringstream os;
    os << "# ordering=" << ordering_name(prompt.ordering) << " flavor="
       << flavor_name(prompt.flavor) << " len=" << prompt.tokens.size() << "\n";
    for (size_t i = 0; i < prompt.tokens.size(); ++i)
        os << (i ? " " : "") << vocab.symbol(prompt.tokens[i]);
    os << "\n\n# spans (half-open)\n";
    auto row = [&os](const std::string& name, const Span& s) {
        os << name << "\t[" << s.begin << ", " << s.end << ")\n";
    };
    row("context", prompt.spans.context);
    row("question", prompt.spans.question);
    for (size_t i = 0; i < prompt.spans.option_spans.size(); ++i)
        row("option_" + std::string(1, static_cast<char>('A' + i)), prompt.spans.option_spans[i]);
    for (size_t i = 0; i < prompt.spans.repeated_option_spans.size(); ++i)
        row("repeat_" + std::string(1, static_cast<char>('A' + i)),
            prompt.spans.repeated_option_spans[i]);
    row("cue", prompt.spans.cue);
    for (size_t i = 0; i < prompt.spans.demo_spans.size(); ++i)
        row("demo_" + std::to_string(i), prompt.spans.demo_spans[i]);
    return os.str();
}

size_t scoring_row(const TokenizedPrompt& prompt) {
    const Span& cue = prompt.spans.cue;
    if (cue.empty()) throw ProtocolError("scoring_row: prompt has no cue span");
    switch (prompt.flavor) {
        case ArchFlavor::Decoder:
            return cue.end - 1;
        case ArchFlavor::EncoderCloze:
            for (size_t i = cue.begin; i < cue.end; ++i)
                if (prompt.tokens[i] == TOK_MASK) return i;
            throw ProtocolError("scoring_row: cloze prompt has no mask token in cue");
        case ArchFlavor::EncDec:
            throw ProtocolError("scoring_row: encdec prompts are scored at decoder position 0");
    }
    throw ProtocolError("scoring_row: unknown flavor");
}

}  // namespace ordlab
