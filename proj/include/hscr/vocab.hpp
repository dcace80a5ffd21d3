#pragma once

#include <cstdint>
#include <string>

namespace hscr::vocab {

// Fixed 64-token vocabulary of the synthetic grounded-captioning language.
// Ids 0..3 are specials; the rest are regular tokens. Unused filler ids keep
// the vocabulary at its nominal size.
inline constexpr int32_t BOS = 0;
inline constexpr int32_t EOS = 1;
inline constexpr int32_t PAD = 2;
inline constexpr int32_t MASK = 3;
inline constexpr int32_t Q_OPEN = 4;    // "what is <attr>?"
inline constexpr int32_t Q_CLOSED = 5;  // "is <attr> <val>?"
inline constexpr int32_t YES = 6;
inline constexpr int32_t NO = 7;
inline constexpr int32_t SEP = 8;       // clause separator
inline constexpr int32_t IS = 9;
inline constexpr int32_t QMARK = 10;
inline constexpr int32_t ATTR0 = 11;    // ..ATTR0+3
inline constexpr int32_t VAL0 = 15;     // ..VAL0+7
inline constexpr int32_t PROBE0 = 23;   // 32 attribute/value probe tokens

inline constexpr int32_t kNumAttributes = 4;
inline constexpr int32_t kNumValues = 8;
inline constexpr int32_t kVocabSize = 64;
inline constexpr int32_t kNumSpecials = 4;

inline constexpr int32_t attr_token(int32_t a) { return ATTR0 + a; }
inline constexpr int32_t value_token(int32_t v) { return VAL0 + v; }
// One token per (attribute, value) pair so a closed question carries its
// whole probe in the final prompt position.
inline constexpr int32_t probe_token(int32_t a, int32_t v) {
    return PROBE0 + a * kNumValues + v;
}
inline constexpr bool is_special(int32_t t) { return t >= 0 && t < kNumSpecials; }

inline std::string token_name(int32_t t) {
    switch (t) {
        case BOS: return "<bos>";
        case EOS: return "<eos>";
        case PAD: return "<pad>";
        case MASK: return "<mask>";
        case Q_OPEN: return "what";
        case Q_CLOSED: return "check";
        case YES: return "yes";
        case NO: return "no";
        case SEP: return ",";
        case IS: return "is";
        case QMARK: return "?";
    }
    if (t >= ATTR0 && t < ATTR0 + kNumAttributes) return "attr" + std::to_string(t - ATTR0);
    if (t >= VAL0 && t < VAL0 + kNumValues) return "val" + std::to_string(t - VAL0);
    if (t >= PROBE0 && t < PROBE0 + kNumAttributes * kNumValues)
        return "attr" + std::to_string((t - PROBE0) / kNumValues) + "=val" +
               std::to_string((t - PROBE0) % kNumValues);
    return "tok" + std::to_string(t);
}

}  // namespace hscr::vocab
