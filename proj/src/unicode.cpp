#include "ocrpost/unicode.hpp"

#include "ocrpost/errors.hpp"

namespace ocrpost {

std::u32string utf8_decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        size_t len;
        char32_t cp;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            throw Utf8Error("invalid UTF-8 lead byte at offset " + std::to_string(i));
        }
        if (i + len > s.size())
            throw Utf8Error("truncated UTF-8 sequence at offset " + std::to_string(i));
        for (size_t k = 1; k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80)
                throw Utf8Error("invalid UTF-8 continuation at offset " + std::to_string(i + k));
            cp = (cp << 6) | (b & 0x3F);
        }
        static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < kMin[len])
            throw Utf8Error("overlong UTF-8 encoding at offset " + std::to_string(i));
        if (cp >= 0xD800 && cp <= 0xDFFF)
            throw Utf8Error("UTF-8 encoded surrogate at offset " + std::to_string(i));
        if (cp > 0x10FFFF)
            throw Utf8Error("code point out of range at offset " + std::to_string(i));
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string utf8_encode(char32_t c) {
    std::string out;
    if (c < 0x80) {
        out += static_cast<char>(c);
    } else if (c < 0x800) {
        out += static_cast<char>(0xC0 | (c >> 6));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
        out += static_cast<char>(0xE0 | (c >> 12));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (c >> 18));
        out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (c & 0x3F));
    }
    return out;
}

std::string utf8_encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) out += utf8_encode(c);
    return out;
}

bool is_space(char32_t c) {
    switch (c) {
        case U'\t':
        case U'\n':
        case U'\v':
        case U'\f':
        case U'\r':
        case U' ':
        case 0x0085:  // NEL
        case 0x00A0:  // NBSP
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

char32_t fold_char(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 32;
    if (c >= 0x0410 && c <= 0x042F) return c + 0x20;  // А..Я
    if (c >= 0x0400 && c <= 0x040F) return c + 0x50;  // Ѐ..Џ
    // Historical Cyrillic (Ѡ..Ҁ incl. yat and yus) and extensions come in
    // uppercase/lowercase pairs at even/odd code points.
    if ((c >= 0x0460 && c <= 0x0481) || (c >= 0x048A && c <= 0x04BF)) {
        return (c % 2 == 0) ? c + 1 : c;
    }
    return c;
}

std::u32string fold_case(std::u32string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (char32_t c : s) out.push_back(fold_char(c));
    return out;
}

std::vector<std::u32string> split_ws(std::u32string_view s) {
    std::vector<std::u32string> tokens;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        size_t b = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > b) tokens.emplace_back(s.substr(b, i - b));
    }
    return tokens;
}

std::u32string join_tokens(const std::vector<std::u32string>& tokens, char32_t sep) {
    std::u32string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(sep);
        out += tokens[i];
    }
    return out;
}

}  // namespace ocrpost
