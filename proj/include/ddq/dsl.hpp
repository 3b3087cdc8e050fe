// Copyright 2026 The ddq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Text form of pulse sequences. One statement per line, '#' starts a comment:
//
//   init S:-1/2
//   pulse optical pi/2 S:-1/2 D:-5/2 phase 0
//   pulse optical pi   S:-1/2 D:-1/2 phase 0
//   repeat 8 {
//     wait 250us
//     pulse rf pi phase alt(0,pi)
//     wait 250us
//   }
//   pulse optical pi   S:-1/2 D:-5/2 phase 0
//   pulse optical pi/2 S:-1/2 D:-1/2 phase $phi_laser
//   measure
//
// `dd N <duration>` expands to the echo block above repeated N (even) times.
// Angles: decimal radians or [coef]pi[/den]. Durations: number with a
// ns/us/ms/s suffix. `$name` marks a scan variable; `alt(a,b)` picks a on even
// and b on odd iterations of the innermost repeat.

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <variant>
#include <vector>

#include "ddq/constants.hpp"
#include "ddq/errors.hpp"
#include "ddq/sequence.hpp"

namespace ddq {

namespace dsl_detail {

struct Token {
    std::string text;
    int column = 1;
};

inline std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        Token tok;
        tok.column = static_cast<int>(i) + 1;
        int depth = 0;
        while (i < line.size() && line[i] != '#' &&
               (depth > 0 || !std::isspace(static_cast<unsigned char>(line[i])))) {
            if (line[i] == '(') ++depth;
            if (line[i] == ')') --depth;
            if (!std::isspace(static_cast<unsigned char>(line[i]))) tok.text += line[i];
            ++i;
        }
        out.push_back(std::move(tok));
    }
    return out;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool valid_identifier(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

/// "[coef]pi[/den]" or plain radians.
inline std::optional<double> parse_angle_literal(std::string_view s) {
    const auto p = s.find("pi");
    if (p == std::string_view::npos) return parse_number(s);
    double coef = 1.0;
    std::string_view head = s.substr(0, p);
    if (head == "-") {
        coef = -1.0;
    } else if (!head.empty() && head != "+") {
        if (head.back() == '*') head.remove_suffix(1);
        const auto c = parse_number(head);
        if (!c) return std::nullopt;
        coef = *c;
    }
    std::string_view tail = s.substr(p + 2);
    double den = 1.0;
    if (!tail.empty()) {
        if (tail.front() != '/') return std::nullopt;
        const auto d = parse_number(tail.substr(1));
        if (!d || *d == 0.0) return std::nullopt;
        den = *d;
    }
    return (coef * constants::pi) / den;
}

struct UnitScale {
    std::string_view suffix;
    double per_second;
};

inline constexpr UnitScale kUnits[] = {{"ns", 1e9}, {"us", 1e6}, {"ms", 1e3}, {"s", 1.0}};

inline std::optional<double> parse_duration_literal(std::string_view s) {
    for (const auto &u : kUnits) {
        if (s.size() > u.suffix.size() && s.substr(s.size() - u.suffix.size()) == u.suffix) {
            const auto v = parse_number(s.substr(0, s.size() - u.suffix.size()));
            if (!v) return std::nullopt;
            return *v / u.per_second;
        }
    }
    return std::nullopt;
}

inline std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string format_angle(double v) {
    if (v == 0.0) return "0";
    for (int den : {1, 2, 3, 4, 6, 8}) {
        const double k = std::round(v * den / constants::pi);
        if (k == 0.0 || std::abs(k) > 1000) continue;
        if ((k * constants::pi) / den == v) {
            std::string out = k == 1.0 ? "pi" : (k == -1.0 ? "-pi" : format_number(k) + "pi");
            if (den != 1) out += "/" + std::to_string(den);
            return out;
        }
    }
    return format_number(v);
}

inline std::string format_duration(double v) {
    if (v == 0.0) return "0s";
    for (auto it = std::rbegin(kUnits); it != std::rend(kUnits); ++it) {
        const double k = std::round(v * it->per_second);
        if (k != 0.0 && std::abs(k) < 1e15 && k / it->per_second == v) {
            return format_number(k) + std::string(it->suffix);
        }
    }
    return format_number(v) + "s";
}

inline std::string format_parameter(const Parameter &p, bool duration) {
    if (p.symbolic()) return "$" + p.variable;
    return duration ? format_duration(p.value) : format_angle(p.value);
}

class Parser {
  public:
    explicit Parser(std::string_view text) {
        std::size_t start = 0;
        while (start <= text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string_view line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines_.push_back(tokenize(line));
            start = end + 1;
        }
    }

    PulseSequence parse() {
        PulseSequence seq;
        bool have_init = false;
        std::size_t row = 0;
        std::optional<Parameter> dd_tau;
        parse_block(seq, row, /*depth=*/0, /*iteration=*/-1, have_init, dd_tau);
        seq.metadata = infer_metadata(seq, dd_tau);
        return seq;
    }

  private:
    [[noreturn]] void fail(std::size_t row, const Token &tok, const std::string &msg) const {
        throw ParseError(static_cast<int>(row) + 1, tok.column, msg);
    }
    [[noreturn]] void fail_eol(std::size_t row, const std::string &msg) const {
        int col = 1;
        if (!lines_[row].empty()) {
            const auto &last = lines_[row].back();
            col = last.column + static_cast<int>(last.text.size());
        }
        throw ParseError(static_cast<int>(row) + 1, col, msg);
    }

    const Token &expect(std::size_t row, std::size_t idx, const std::string &what) const {
        if (idx >= lines_[row].size()) fail_eol(row, "expected " + what);
        return lines_[row][idx];
    }

    Parameter angle(std::size_t row, const Token &tok, int iteration, bool allow_variable) const {
        std::string_view s = tok.text;
        if (s.starts_with("alt(")) {
            if (iteration < 0) fail(row, tok, "alt(a,b) is only valid inside repeat");
            if (!s.ends_with(")")) fail(row, tok, "malformed alt(a,b)");
            const std::string_view inner = s.substr(4, s.size() - 5);
            const auto comma = inner.find(',');
            if (comma == std::string_view::npos) fail(row, tok, "alt needs two arguments");
            const auto a = parse_angle_literal(inner.substr(0, comma));
            const auto b = parse_angle_literal(inner.substr(comma + 1));
            if (!a || !b) fail(row, tok, "bad angle in alt(a,b)");
            return Parameter::literal(iteration % 2 == 0 ? *a : *b);
        }
        if (s.starts_with("$")) {
            if (!allow_variable) fail(row, tok, "scan variables are not allowed here");
            if (!valid_identifier(s.substr(1))) fail(row, tok, "bad variable name '" + tok.text + "'");
            return Parameter::named(std::string(s.substr(1)));
        }
        const auto v = parse_angle_literal(s);
        if (!v) fail(row, tok, "bad angle '" + tok.text + "'");
        return Parameter::literal(*v);
    }

    Parameter duration(std::size_t row, const Token &tok) const {
        std::string_view s = tok.text;
        if (s.starts_with("$")) {
            if (!valid_identifier(s.substr(1))) fail(row, tok, "bad variable name '" + tok.text + "'");
            return Parameter::named(std::string(s.substr(1)));
        }
        const auto v = parse_duration_literal(s);
        if (!v) fail(row, tok, "bad duration '" + tok.text + "' (expected number with ns/us/ms/s)");
        if (*v < 0.0) fail(row, tok, "negative duration");
        return Parameter::literal(*v);
    }

    BasisLabel label(std::size_t row, const Token &tok) const {
        try {
            return BasisLabel::parse(tok.text);
        } catch (const SimulationError &) {
            fail(row, tok, "unknown level label '" + tok.text + "'");
        }
    }

    int count(std::size_t row, const Token &tok) const {
        int n = 0;
        const auto [ptr, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), n);
        if (ec != std::errc() || ptr != tok.text.data() + tok.text.size() || n < 0) {
            fail(row, tok, "expected a non-negative integer, got '" + tok.text + "'");
        }
        return n;
    }

    void no_trailing(std::size_t row, std::size_t idx) const {
        if (lines_[row].size() > idx) fail(row, lines_[row][idx], "unexpected token '" + lines_[row][idx].text + "'");
    }

    // Parses statements until the closing brace of this block (depth > 0) or EOF.
    void parse_block(PulseSequence &seq, std::size_t &row, int depth, int iteration, bool &have_init,
                     std::optional<Parameter> &dd_tau) {
        while (row < lines_.size()) {
            const auto &toks = lines_[row];
            if (toks.empty()) {
                ++row;
                continue;
            }
            const Token &kw = toks[0];
            if (kw.text == "}") {
                if (depth == 0) fail(row, kw, "unmatched '}'");
                no_trailing(row, 1);
                ++row;
                return;
            }
            if (kw.text == "init") {
                if (depth > 0 || have_init || !seq.elements.empty()) fail(row, kw, "init must be the first statement");
                seq.initial = label(row, expect(row, 1, "level label"));
                no_trailing(row, 2);
                have_init = true;
            } else if (kw.text == "pulse") {
                const Token &kind = expect(row, 1, "'optical' or 'rf'");
                if (kind.text == "optical") {
                    const Token &area_tok = expect(row, 2, "pulse area");
                    const Parameter area = angle(row, area_tok, -1, false);
                    if (area.value < 0.0) fail(row, area_tok, "negative pulse area");
                    const Token &from_tok = expect(row, 3, "ground level label");
                    const BasisLabel from = label(row, from_tok);
                    if (from != BasisLabel::s(-1)) fail(row, from_tok, "optical pulses start from S:-1/2");
                    const Token &to_tok = expect(row, 4, "D level label");
                    const BasisLabel to = label(row, to_tok);
                    if (to.level != Level::D) fail(row, to_tok, "optical pulses couple S:-1/2 to a D level");
                    const Token &ph = expect(row, 5, "'phase'");
                    if (ph.text != "phase") fail(row, ph, "expected 'phase'");
                    const Parameter phase = angle(row, expect(row, 6, "phase value"), iteration, true);
                    no_trailing(row, 7);
                    seq.elements.emplace_back(OpticalPulse{to.m, area.value, phase});
                } else if (kind.text == "rf") {
                    const Token &area_tok = expect(row, 2, "pulse area");
                    const Parameter area = angle(row, area_tok, -1, false);
                    if (area.value < 0.0) fail(row, area_tok, "negative pulse area");
                    const Token &ph = expect(row, 3, "'phase'");
                    if (ph.text != "phase") fail(row, ph, "expected 'phase'");
                    const Parameter phase = angle(row, expect(row, 4, "phase value"), iteration, true);
                    no_trailing(row, 5);
                    seq.elements.emplace_back(RfPulse{area.value, phase});
                } else {
                    fail(row, kind, "unknown pulse kind '" + kind.text + "'");
                }
            } else if (kw.text == "wait") {
                const Parameter tau = duration(row, expect(row, 1, "duration"));
                no_trailing(row, 2);
                seq.elements.emplace_back(Wait{tau});
            } else if (kw.text == "dd") {
                const Token &n_tok = expect(row, 1, "echo count");
                const int n = count(row, n_tok);
                if (n < 2 || n % 2 != 0) fail(row, n_tok, "dd needs an even echo count >= 2, got " + n_tok.text);
                const Parameter tau = duration(row, expect(row, 2, "duration"));
                no_trailing(row, 3);
                for (int k = 0; k < n; ++k) {
                    seq.elements.emplace_back(Wait{tau});
                    seq.elements.emplace_back(RfPulse{constants::pi, Parameter::literal(k % 2 == 0 ? 0.0 : constants::pi)});
                    seq.elements.emplace_back(Wait{tau});
                }
                dd_tau = tau;
            } else if (kw.text == "repeat") {
                const int n = count(row, expect(row, 1, "repeat count"));
                const Token &brace = expect(row, 2, "'{'");
                if (brace.text != "{") fail(row, brace, "expected '{'");
                no_trailing(row, 3);
                const std::size_t body = row + 1;
                std::size_t after = body;
                if (n == 0) {
                    PulseSequence scratch;
                    bool init_copy = true;
                    parse_block(scratch, after, depth + 1, 0, init_copy, dd_tau);
                }
                for (int k = 0; k < n; ++k) {
                    after = body;
                    parse_block(seq, after, depth + 1, k, have_init, dd_tau);
                }
                row = after;
                continue;
            } else if (kw.text == "measure") {
                no_trailing(row, 1);
                seq.elements.emplace_back(Measure{});
            } else {
                fail(row, kw, "unknown statement '" + kw.text + "'");
            }
            ++row;
        }
        if (depth > 0) {
            throw ParseError(static_cast<int>(lines_.size()), 1, "missing '}' at end of input");
        }
    }

    static SequenceMetadata infer_metadata(const PulseSequence &seq, const std::optional<Parameter> &dd_tau) {
        SequenceMetadata meta;
        std::optional<Parameter> tau;
        bool uniform = true;
        for (const auto &e : seq.elements) {
            if (std::holds_alternative<RfPulse>(e)) ++meta.n_echo;
            if (const auto *w = std::get_if<Wait>(&e)) {
                if (!tau) {
                    tau = w->tau;
                } else if (!(*tau == w->tau)) {
                    uniform = false;
                }
            }
        }
        if (dd_tau) {
            meta.tau = *dd_tau;
        } else if (tau && uniform) {
            meta.tau = *tau;
        }
        return meta;
    }

    std::vector<std::vector<Token>> lines_;
};

}  // namespace dsl_detail

/// Parses the sequence DSL. Throws ParseError with a line/column position.
inline PulseSequence parse_sequence_text(std::string_view text) {
    return dsl_detail::Parser(text).parse();
}

/// Canonical text form; runs of alternating echo blocks are folded back into
/// `repeat N { ... }` so builder output reads like the hand-written program.
inline std::string serialize_sequence(const PulseSequence &seq) {
    using namespace dsl_detail;
    std::ostringstream out;
    out << "init " << seq.initial.to_string() << "\n";
    const auto &el = seq.elements;
    auto block_at = [&](std::size_t i, const Wait *&w, const RfPulse *&rf) {
        if (i + 2 >= el.size()) return false;
        w = std::get_if<Wait>(&el[i]);
        rf = std::get_if<RfPulse>(&el[i + 1]);
        const Wait *w2 = std::get_if<Wait>(&el[i + 2]);
        return w && rf && w2 && *w == *w2 && !rf->rf_phase.symbolic();
    };
    std::size_t i = 0;
    while (i < el.size()) {
        const Wait *w = nullptr;
        const RfPulse *rf = nullptr;
        if (block_at(i, w, rf)) {
            // Count consecutive blocks with equal wait/area and phases alternating a, b.
            const double a = rf->rf_phase.value;
            std::optional<double> b;
            std::size_t n = 1;
            while (true) {
                const Wait *w_next = nullptr;
                const RfPulse *rf_next = nullptr;
                if (!block_at(i + 3 * n, w_next, rf_next)) break;
                if (!(*w_next == *w) || rf_next->area != rf->area) break;
                const double p = rf_next->rf_phase.value;
                if (n % 2 == 0) {
                    if (p != a) break;
                } else {
                    if (b && p != *b) break;
                    b = p;
                }
                ++n;
            }
            if (n >= 2) {
                const std::string phase = (!b || *b == a)
                                              ? format_angle(a)
                                              : "alt(" + format_angle(a) + "," + format_angle(*b) + ")";
                out << "repeat " << n << " {\n";
                out << "  wait " << format_parameter(w->tau, true) << "\n";
                out << "  pulse rf " << format_angle(rf->area) << " phase " << phase << "\n";
                out << "  wait " << format_parameter(w->tau, true) << "\n";
                out << "}\n";
                i += 3 * n;
                continue;
            }
        }
        std::visit(
            [&](const auto &e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, OpticalPulse>) {
                    out << "pulse optical " << format_angle(e.area) << " S:-1/2 "
                        << BasisLabel{Level::D, e.target_m}.to_string() << " phase "
                        << format_parameter(e.laser_phase, false) << "\n";
                } else if constexpr (std::is_same_v<T, RfPulse>) {
                    out << "pulse rf " << format_angle(e.area) << " phase " << format_parameter(e.rf_phase, false)
                        << "\n";
                } else if constexpr (std::is_same_v<T, Wait>) {
                    out << "wait " << format_parameter(e.tau, true) << "\n";
                } else {
                    out << "measure\n";
                }
            },
            el[i]);
        ++i;
    }
    return out.str();
}

}  // namespace ddq
