#include "reward_audit/spec_lang.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace reward_audit {

namespace {

enum class Tok {
    kIdent,
    kNumber,
    kString,
    kLBrace,
    kRBrace,
    kLParen,
    kRParen,
    kLBracket,
    kRBracket,
    kComma,
    kAssign,
    kPlus,
    kMinus,
    kStar,
    kSlash,
    kLess,
    kLessEq,
    kEqEq,
    kGreaterEq,
    kGreater,
    kEnd,
};

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    SourceLoc loc;
};

[[noreturn]] void syntax_error(SourceLoc loc, std::string expected, const std::string& message) {
    throw ParseError(ErrorCode::kSyntaxError, loc, std::move(expected), message);
}

std::string describe(const Token& t) {
    switch (t.kind) {
        case Tok::kEnd: return "end of input";
        case Tok::kString: return "string";
        case Tok::kNumber: return "number '" + t.text + "'";
        case Tok::kIdent: return "identifier '" + t.text + "'";
        default: return "'" + t.text + "'";
    }
}

// Length of a valid UTF-8 sequence starting at `s[i]`, or 0.
std::size_t utf8_length(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0 && c >= 0xC2) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) len = 4;
    else return 0;
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k)
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
    return len;
}

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size()) {
                out.push_back({Tok::kEnd, "", 0.0, here()});
                return out;
            }
            out.push_back(next());
        }
    }

  private:
    SourceLoc here() const { return {line_, col_}; }

    char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                bump();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
            } else {
                break;
            }
        }
    }

    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_ident_char(char c) { return (c >= 'a' && c <= 'z') || is_digit(c) || c == '_'; }

    Token next() {
        const SourceLoc loc = here();
        const char c = peek();
        const auto single = [&](Tok kind) {
            Token t{kind, std::string(1, c), 0.0, loc};
            bump();
            return t;
        };
        switch (c) {
            case '{': return single(Tok::kLBrace);
            case '}': return single(Tok::kRBrace);
            case '(': return single(Tok::kLParen);
            case ')': return single(Tok::kRParen);
            case '[': return single(Tok::kLBracket);
            case ']': return single(Tok::kRBracket);
            case ',': return single(Tok::kComma);
            case '+': return single(Tok::kPlus);
            case '-': return single(Tok::kMinus);
            case '*': return single(Tok::kStar);
            case '/': return single(Tok::kSlash);
            case '=':
                if (peek(1) == '=') return pair(Tok::kEqEq, loc);
                return single(Tok::kAssign);
            case '<':
                if (peek(1) == '=') return pair(Tok::kLessEq, loc);
                return single(Tok::kLess);
            case '>':
                if (peek(1) == '=') return pair(Tok::kGreaterEq, loc);
                return single(Tok::kGreater);
            case '"': return string_literal();
            default: break;
        }
        if (is_digit(c)) return number();
        if (c >= 'a' && c <= 'z') return identifier();
        if (c >= 'A' && c <= 'Z') {
            syntax_error(loc, "identifier", "identifiers must match [a-z][a-z0-9_]*");
        }
        syntax_error(loc, "token", "unexpected character");
    }

    Token pair(Tok kind, SourceLoc loc) {
        Token t{kind, std::string(src_.substr(pos_, 2)), 0.0, loc};
        bump();
        bump();
        return t;
    }

    Token identifier() {
        const SourceLoc loc = here();
        const std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) bump();
        if (const char c = peek(); c >= 'A' && c <= 'Z') {
            syntax_error(here(), "identifier", "identifiers must match [a-z][a-z0-9_]*");
        }
        return {Tok::kIdent, std::string(src_.substr(start, pos_ - start)), 0.0, loc};
    }

    Token number() {
        const SourceLoc loc = here();
        const std::size_t start = pos_;
        while (is_digit(peek())) bump();
        if (peek() == '.') {
            bump();
            if (!is_digit(peek())) syntax_error(here(), "digit", "expected digits after decimal point");
            while (is_digit(peek())) bump();
        }
        if (peek() == 'e' || peek() == 'E') {
            bump();
            if (peek() == '+' || peek() == '-') bump();
            if (!is_digit(peek())) syntax_error(here(), "digit", "expected exponent digits");
            while (is_digit(peek())) bump();
        }
        if (is_ident_char(peek()) || (peek() >= 'A' && peek() <= 'Z')) {
            syntax_error(here(), "delimiter", "unexpected character after number");
        }
        const std::string text(src_.substr(start, pos_ - start));
        double value = 0.0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
            syntax_error(loc, "number", "numeric literal out of range");
        }
        return {Tok::kNumber, text, value, loc};
    }

    Token string_literal() {
        const SourceLoc loc = here();
        bump();
        std::string value;
        while (true) {
            if (pos_ >= src_.size()) syntax_error(loc, "'\"'", "unterminated string");
            const char c = src_[pos_];
            if (c == '"') {
                bump();
                break;
            }
            if (c == '\n') syntax_error(here(), "'\"'", "newline inside string");
            if (c == '\\') {
                const SourceLoc esc = here();
                bump();
                const char e = peek();
                if (e == '"' || e == '\\') value += e;
                else if (e == 'n') value += '\n';
                else syntax_error(esc, "escape", "unknown escape sequence");
                bump();
                continue;
            }
            const std::size_t len = utf8_length(src_, pos_);
            if (len == 0) syntax_error(here(), "UTF-8", "invalid UTF-8 in string");
            if (static_cast<unsigned char>(c) < 0x20 && c != '\t') {
                syntax_error(here(), "character", "control character inside string");
            }
            value.append(src_.substr(pos_, len));
            for (std::size_t k = 0; k < len; ++k) {
                ++pos_;
                ++col_;
            }
        }
        return {Tok::kString, value, 0.0, loc};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

constexpr int kMaxExprDepth = 200;

class Parser {
  public:
    explicit Parser(std::string_view text) : toks_(Lexer(text).run()) {}

    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    bool at(Tok kind) const { return peek().kind == kind; }

    const Token& advance() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }

    const Token& expect(Tok kind, const std::string& what) {
        if (!at(kind)) syntax_error(peek().loc, what, "expected " + what + ", found " + describe(peek()));
        return advance();
    }

    const Token& expect_keyword(std::string_view word) {
        if (!at(Tok::kIdent) || peek().text != word) {
            syntax_error(peek().loc, std::string(word), "expected '" + std::string(word) + "', found " + describe(peek()));
        }
        return advance();
    }

    // ---- values ----

    double number_value() {
        const SourceLoc loc = peek().loc;
        bool negative = false;
        if (at(Tok::kMinus)) {
            advance();
            negative = true;
        }
        if (!at(Tok::kNumber)) syntax_error(loc, "number", "expected number, found " + describe(peek()));
        const double v = advance().number;
        return negative ? -v : v;
    }

    double non_negative(const char* what) {
        const SourceLoc loc = peek().loc;
        const double v = number_value();
        if (v < 0.0) syntax_error(loc, "non-negative number", std::string(what) + " must be >= 0");
        return v;
    }

    double positive(const char* what) {
        const SourceLoc loc = peek().loc;
        const double v = number_value();
        if (!(v > 0.0)) syntax_error(loc, "positive number", std::string(what) + " must be > 0");
        return v;
    }

    std::size_t index_value() {
        const SourceLoc loc = peek().loc;
        const double v = number_value();
        if (v < 0.0 || v != std::floor(v) || v > 1e15) {
            syntax_error(loc, "non-negative integer", "expected a non-negative integer");
        }
        return static_cast<std::size_t>(v);
    }

    std::string string_value() { return expect(Tok::kString, "string").text; }

    const Token& ident_token() { return expect(Tok::kIdent, "identifier"); }

    bool bool_value() {
        const Token& t = ident_token();
        if (t.text == "true") return true;
        if (t.text == "false") return false;
        syntax_error(t.loc, "true or false", "expected true or false");
    }

    template <class Fn>
    void list_value(Fn&& each) {
        expect(Tok::kLBracket, "'['");
        if (at(Tok::kRBracket)) {
            advance();
            return;
        }
        while (true) {
            each(ident_token());
            if (at(Tok::kComma)) {
                advance();
                continue;
            }
            expect(Tok::kRBracket, "',' or ']'");
            return;
        }
    }

    // ---- expressions ----

    Expr expression(int depth = 0) {
        if (depth > kMaxExprDepth) syntax_error(peek().loc, "shallower expression", "expression nested too deeply");
        Expr lhs = term(depth);
        while (at(Tok::kPlus) || at(Tok::kMinus)) {
            const Token& op = advance();
            Expr rhs = term(depth);
            lhs = Expr::binary(op.kind == Tok::kPlus ? BinaryOp::kAdd : BinaryOp::kSub, lhs, rhs, op.loc);
        }
        return lhs;
    }

    Expr term(int depth) {
        Expr lhs = unary(depth);
        while (at(Tok::kStar) || at(Tok::kSlash)) {
            const Token& op = advance();
            Expr rhs = unary(depth);
            lhs = Expr::binary(op.kind == Tok::kStar ? BinaryOp::kMul : BinaryOp::kDiv, lhs, rhs, op.loc);
        }
        return lhs;
    }

    Expr unary(int depth) {
        if (depth > kMaxExprDepth) syntax_error(peek().loc, "shallower expression", "expression nested too deeply");
        if (at(Tok::kMinus)) {
            const SourceLoc loc = advance().loc;
            if (at(Tok::kNumber)) return Expr::constant(-advance().number, loc);
            return Expr::negate(unary(depth + 1), loc);
        }
        return primary(depth);
    }

    Expr primary(int depth) {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::kNumber: return Expr::constant(advance().number, t.loc);
            case Tok::kLParen: {
                advance();
                Expr inner = expression(depth + 1);
                expect(Tok::kRParen, "')'");
                return inner;
            }
            case Tok::kIdent: {
                const Token& name = advance();
                if (!at(Tok::kLParen)) return Expr::feature(name.text, name.loc);
                return call(name, depth);
            }
            default: syntax_error(t.loc, "expression", "expected expression, found " + describe(t));
        }
    }

    Expr call(const Token& name, int depth) {
        expect(Tok::kLParen, "'('");
        if (name.text == "cond") {
            Expr lhs = expression(depth + 1);
            const Token& cmp_tok = peek();
            CompareOp cmp;
            switch (cmp_tok.kind) {
                case Tok::kLess: cmp = CompareOp::kLess; break;
                case Tok::kLessEq: cmp = CompareOp::kLessEqual; break;
                case Tok::kEqEq: cmp = CompareOp::kEqual; break;
                case Tok::kGreaterEq: cmp = CompareOp::kGreaterEqual; break;
                case Tok::kGreater: cmp = CompareOp::kGreater; break;
                default: syntax_error(cmp_tok.loc, "comparison", "expected comparison operator in cond");
            }
            advance();
            Expr rhs = expression(depth + 1);
            expect(Tok::kComma, "','");
            Expr then_branch = expression(depth + 1);
            expect(Tok::kComma, "','");
            Expr else_branch = expression(depth + 1);
            expect(Tok::kRParen, "')'");
            return Expr::cond(cmp, lhs, rhs, then_branch, else_branch, name.loc);
        }
        Function fn;
        std::size_t min_args = 2;
        std::size_t max_args = SIZE_MAX;
        if (name.text == "min") {
            fn = Function::kMin;
        } else if (name.text == "max") {
            fn = Function::kMax;
        } else if (name.text == "abs") {
            fn = Function::kAbs;
            min_args = max_args = 1;
        } else if (name.text == "clip") {
            fn = Function::kClip;
            min_args = max_args = 3;
        } else {
            syntax_error(name.loc, "min, max, abs, clip or cond", "unknown function '" + name.text + "'");
        }
        std::vector<Expr> args;
        if (!at(Tok::kRParen)) {
            while (true) {
                args.push_back(expression(depth + 1));
                if (at(Tok::kComma)) {
                    advance();
                    continue;
                }
                break;
            }
        }
        expect(Tok::kRParen, "')'");
        if (args.size() < min_args || args.size() > max_args) {
            syntax_error(name.loc, "argument list", "wrong number of arguments for " + name.text);
        }
        return Expr::call(fn, args, name.loc);
    }

    // ---- blocks ----

    /// Parses `{ key = value ... }`, dispatching each key to `on_key`.
    template <class OnKey>
    void block_body(OnKey&& on_key) {
        expect(Tok::kLBrace, "'{'");
        std::set<std::string> seen;
        while (!at(Tok::kRBrace)) {
            const Token& key = expect(Tok::kIdent, "key or '}'");
            if (!seen.insert(key.text).second) syntax_error(key.loc, "new key", "duplicate key '" + key.text + "'");
            expect(Tok::kAssign, "'='");
            on_key(key);
        }
        advance();
    }

    /// Walks a document: header, then top-level `key = value` pairs and blocks in any order.
    template <class OnTop, class OnBlock>
    std::string document(std::string_view header, OnTop&& on_top, OnBlock&& on_block) {
        expect_keyword(header);
        const std::string id = ident_token().text;
        std::set<std::string> seen;
        while (!at(Tok::kEnd)) {
            const Token& name = expect(Tok::kIdent, "key or block");
            if (at(Tok::kAssign)) {
                if (!seen.insert(name.text).second) {
                    syntax_error(name.loc, "new key", "duplicate key '" + name.text + "'");
                }
                advance();
                on_top(name);
            } else {
                on_block(name);
            }
        }
        return id;
    }

  private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

[[noreturn]] void unknown_key(const Token& key) {
    throw ParseError(ErrorCode::kUnknownKey, key.loc, "known key", "unknown key '" + key.text + "'");
}

EventKind event_kind(const Token& t) {
    if (auto k = parse_event_kind(t.text)) return *k;
    syntax_error(t.loc, "event kind", "unknown event kind '" + t.text + "'");
}

void check_format_version(Parser& p) {
    const SourceLoc loc = p.peek().loc;
    if (p.number_value() != 1.0) syntax_error(loc, "1", "unsupported format_version (only 1 is supported)");
}

// ---- reward spec ----

struct FeatureUse {
    std::string name;
    SourceLoc loc;
};

void collect_uses(const Expr::Node& node, std::vector<FeatureUse>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                out.push_back({n.name, node.loc});
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                collect_uses(*n.operand, out);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                collect_uses(*n.lhs, out);
                collect_uses(*n.rhs, out);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                for (const auto& a : n.args) collect_uses(*a, out);
            } else if constexpr (std::is_same_v<T, Expr::Cond>) {
                collect_uses(*n.lhs, out);
                collect_uses(*n.rhs, out);
                collect_uses(*n.then_branch, out);
                collect_uses(*n.else_branch, out);
            }
        },
        node.value);
}

void check_expression(const RewardSpec& spec, const Expr& expr) {
    std::vector<FeatureUse> uses;
    collect_uses(*expr.root(), uses);
    for (const auto& use : uses) {
        if (!spec.find_feature(use.name)) {
            throw ParseError(ErrorCode::kUnknownFeature, use.loc, "declared feature",
                             "feature '" + use.name + "' is not declared in the features block");
        }
    }
    for_each_constant_clip(expr, [](double lo, double hi, SourceLoc loc) {
        if (lo > hi) syntax_error(loc, "lo <= hi", "clip bounds require lo <= hi");
    });
}

AttributeDef parse_attribute(Parser& p, const Token& label) {
    AttributeDef attr;
    attr.id = label.text;
    bool has_expr = false;
    p.block_body([&](const Token& key) {
        if (key.text == "weight") {
            attr.weight = p.number_value();
        } else if (key.text == "expr") {
            attr.expr = p.expression();
            has_expr = true;
        } else if (key.text == "kind") {
            const Token& t = p.ident_token();
            auto k = parse_attribute_kind(t.text);
            if (!k) syntax_error(t.loc, "outcome, shaping or ambiguous", "unknown attribute kind '" + t.text + "'");
            attr.kind = *k;
        } else if (key.text == "tags") {
            p.list_value([&](const Token& t) {
                auto tag = parse_outcome_tag(t.text);
                if (!tag) syntax_error(t.loc, "outcome tag", "unknown outcome tag '" + t.text + "'");
                attr.outcome_tags.insert(*tag);
            });
        } else if (key.text == "accrual") {
            const Token& t = p.ident_token();
            if (t.text == "per_reward_step") {
                attr.accrual = Accrual::per_reward_step();
            } else if (t.text == "per_decision_step") {
                attr.accrual = Accrual::per_decision_step();
            } else if (t.text == "on_event") {
                p.expect(Tok::kLParen, "'('");
                attr.accrual = Accrual::on_event(event_kind(p.ident_token()));
                p.expect(Tok::kRParen, "')'");
            } else {
                syntax_error(t.loc, "per_reward_step, per_decision_step or on_event(kind)",
                             "unknown accrual '" + t.text + "'");
            }
        } else {
            unknown_key(key);
        }
    });
    if (!has_expr) syntax_error(label.loc, "expr", "attribute '" + attr.id + "' has no expr");
    return attr;
}

void parse_episode(Parser& p, EpisodeConfig& ep) {
    p.block_body([&](const Token& key) {
        const auto& k = key.text;
        if (k == "reward_step_s") ep.reward_step_s = p.positive("reward_step_s");
        else if (k == "decision_step_s") ep.decision_step_s = p.positive("decision_step_s");
        else if (k == "discount") ep.discount = p.number_value();
        else if (k == "episodic") ep.episodic = p.bool_value();
        else if (k == "time_limit_s") ep.time_limit_s = p.positive("time_limit_s");
        else if (k == "time_limit_at_kmh") ep.time_limit_at_kmh = p.positive("time_limit_at_kmh");
        else if (k == "termination") p.list_value([&](const Token& t) { ep.termination_criteria.insert(event_kind(t)); });
        else unknown_key(key);
    });
}

void parse_features(Parser& p, RewardSpec& spec) {
    p.block_body([&](const Token& key) {
        const Token& t = p.ident_token();
        auto unit = parse_unit(t.text);
        if (!unit) syntax_error(t.loc, "unit", "unknown unit '" + t.text + "'");
        spec.features.push_back({key.text, *unit});
    });
}

bool features_less(const FeatureDecl& a, const FeatureDecl& b) { return a.name < b.name; }

}  // namespace

Expr parse_expr(std::string_view text) {
    Parser p(text);
    Expr e = p.expression();
    if (!p.at(Tok::kEnd)) syntax_error(p.peek().loc, "end of expression", "unexpected " + describe(p.peek()));
    for_each_constant_clip(e, [](double lo, double hi, SourceLoc loc) {
        if (lo > hi) syntax_error(loc, "lo <= hi", "clip bounds require lo <= hi");
    });
    return e;
}

RewardSpec parse_spec(std::string_view text) {
    Parser p(text);
    RewardSpec spec;
    bool seen_episode = false;
    bool seen_features = false;
    spec.id = p.document(
        "reward_spec",
        [&](const Token& key) {
            if (key.text == "format_version") {
                check_format_version(p);
            } else if (key.text == "source") {
                spec.source = p.string_value();
            } else if (key.text == "provenance") {
                const Token& t = p.ident_token();
                auto prov = parse_provenance(t.text);
                if (!prov) syntax_error(t.loc, "principled, trial_and_error or unstated", "unknown provenance");
                spec.design_provenance = *prov;
            } else if (key.text == "declared_shaping") {
                p.list_value([&](const Token& t) { spec.declared_shaping_ids.insert(t.text); });
            } else {
                unknown_key(key);
            }
        },
        [&](const Token& name) {
            if (name.text == "episode") {
                if (seen_episode) syntax_error(name.loc, "single episode block", "duplicate episode block");
                seen_episode = true;
                parse_episode(p, spec.episode);
            } else if (name.text == "features") {
                if (seen_features) syntax_error(name.loc, "single features block", "duplicate features block");
                seen_features = true;
                parse_features(p, spec);
            } else if (name.text == "attribute") {
                const Token& label = p.ident_token();
                spec.per_step_attributes.push_back(parse_attribute(p, label));
            } else if (name.text == "terminal") {
                const EventKind kind = event_kind(p.ident_token());
                const Token& open = p.peek();
                std::optional<Expr> expr;
                p.block_body([&](const Token& key) {
                    if (key.text != "expr") unknown_key(key);
                    expr = p.expression();
                });
                if (!expr) syntax_error(open.loc, "expr", "terminal rule has no expr");
                spec.terminal_rules.push_back({kind, *expr});
            } else {
                throw ParseError(ErrorCode::kUnknownKey, name.loc, "episode, features, attribute or terminal",
                                 "unknown block '" + name.text + "'");
            }
        });

    std::stable_sort(spec.features.begin(), spec.features.end(), features_less);
    for (const auto& a : spec.per_step_attributes) check_expression(spec, a.expr);
    for (const auto& t : spec.terminal_rules) check_expression(spec, t.expr);
    return spec;
}

namespace {

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

template <class Range, class Fn>
std::string list_text(const Range& items, Fn&& name) {
    std::string out = "[";
    bool first = true;
    for (const auto& item : items) {
        if (!first) out += ", ";
        out += name(item);
        first = false;
    }
    return out + "]";
}

/// Accumulates key/value lines of one block and emits them sorted by key.
class BlockWriter {
  public:
    void add(std::string key, std::string value) { lines_.emplace_back(std::move(key), std::move(value)); }

    void write(std::ostringstream& out, const std::string& indent) {
        std::sort(lines_.begin(), lines_.end());
        for (const auto& [k, v] : lines_) out << indent << k << " = " << v << '\n';
    }

  private:
    std::vector<std::pair<std::string, std::string>> lines_;
};

std::string accrual_text(const Accrual& a) {
    switch (a.mode) {
        case Accrual::Mode::kPerRewardStep: return "per_reward_step";
        case Accrual::Mode::kPerDecisionStep: return "per_decision_step";
        case Accrual::Mode::kOnEvent: return "on_event(" + std::string(to_string(a.event)) + ")";
    }
    return "";
}

}  // namespace

std::string render_spec(const RewardSpec& spec) {
    std::ostringstream out;
    out << "reward_spec " << spec.id << '\n';

    BlockWriter top;
    top.add("format_version", std::to_string(spec.format_version));
    if (!spec.source.empty()) top.add("source", quote(spec.source));
    if (spec.design_provenance) top.add("provenance", std::string(to_string(*spec.design_provenance)));
    if (!spec.declared_shaping_ids.empty()) {
        top.add("declared_shaping", list_text(spec.declared_shaping_ids, [](const std::string& s) { return s; }));
    }
    top.write(out, "");

    const EpisodeConfig& ep = spec.episode;
    BlockWriter episode;
    episode.add("episodic", ep.episodic ? "true" : "false");
    if (ep.reward_step_s) episode.add("reward_step_s", format_number(*ep.reward_step_s));
    if (ep.decision_step_s) episode.add("decision_step_s", format_number(*ep.decision_step_s));
    if (ep.discount) episode.add("discount", format_number(*ep.discount));
    if (ep.time_limit_s) episode.add("time_limit_s", format_number(*ep.time_limit_s));
    if (ep.time_limit_at_kmh) episode.add("time_limit_at_kmh", format_number(*ep.time_limit_at_kmh));
    if (!ep.termination_criteria.empty()) {
        episode.add("termination",
                    list_text(ep.termination_criteria, [](EventKind k) { return std::string(to_string(k)); }));
    }
    out << "\nepisode {\n";
    episode.write(out, "  ");
    out << "}\n";

    if (!spec.features.empty()) {
        BlockWriter features;
        for (const auto& f : spec.features) features.add(f.name, std::string(to_string(f.unit)));
        out << "\nfeatures {\n";
        features.write(out, "  ");
        out << "}\n";
    }

    for (const auto& a : spec.per_step_attributes) {
        BlockWriter block;
        block.add("weight", format_number(a.weight));
        block.add("expr", render_expr(a.expr));
        block.add("kind", std::string(to_string(a.kind)));
        if (!a.outcome_tags.empty()) {
            block.add("tags", list_text(a.outcome_tags, [](OutcomeTag t) { return std::string(to_string(t)); }));
        }
        block.add("accrual", accrual_text(a.accrual));
        out << "\nattribute " << a.id << " {\n";
        block.write(out, "  ");
        out << "}\n";
    }

    for (const auto& t : spec.terminal_rules) {
        out << "\nterminal " << to_string(t.on) << " {\n  expr = " << render_expr(t.expr) << "\n}\n";
    }
    return out.str();
}

// ---- scenarios ----

namespace {

TrajectoryKind trajectory_kind(const Token& t) {
    if (t.text == "crash") return TrajectoryKind::kCrash;
    if (t.text == "idle") return TrajectoryKind::kIdle;
    if (t.text == "succ") return TrajectoryKind::kSucc;
    syntax_error(t.loc, "crash, idle or succ", "unknown trajectory kind '" + t.text + "'");
}

TrajectoryEdit parse_edit(Parser& p, const Token& label) {
    std::optional<std::string> kind;
    SourceLoc kind_loc = label.loc;
    std::map<std::string, std::pair<const Token*, double>> numbers;
    std::optional<std::string> feature;
    std::vector<const Token*> keys;

    p.block_body([&](const Token& key) {
        keys.push_back(&key);
        if (key.text == "kind") {
            kind_loc = p.peek().loc;
            kind = p.ident_token().text;
        } else if (key.text == "feature") {
            feature = p.ident_token().text;
        } else if (key.text == "step" || key.text == "from_step" || key.text == "to_step" ||
                   key.text == "after_step" || key.text == "steps") {
            numbers[key.text] = {&key, static_cast<double>(p.index_value())};
        } else if (key.text == "amount" || key.text == "progress_m" || key.text == "seconds") {
            numbers[key.text] = {&key, p.non_negative(key.text.c_str())};
        } else if (key.text == "value") {
            numbers[key.text] = {&key, p.number_value()};
        } else {
            unknown_key(key);
        }
    });
    if (!kind) syntax_error(label.loc, "kind", "edit '" + label.text + "' has no kind");

    const auto allow = [&](std::initializer_list<std::string_view> allowed) {
        for (const Token* k : keys) {
            if (k->text == "kind") continue;
            if (std::find(allowed.begin(), allowed.end(), k->text) == allowed.end()) unknown_key(*k);
        }
    };
    const auto need_feature = [&]() -> std::string {
        if (!feature) syntax_error(label.loc, "feature", "edit '" + label.text + "' needs a feature");
        return *feature;
    };
    const auto num = [&](const char* key, std::optional<double> fallback) -> double {
        auto it = numbers.find(key);
        if (it != numbers.end()) return it->second.second;
        if (!fallback) syntax_error(label.loc, key, "edit '" + label.text + "' needs " + key);
        return *fallback;
    };

    if (*kind == "add_event") {
        allow({"feature", "step", "amount"});
        return AddEvent{need_feature(), static_cast<std::size_t>(num("step", 0.0)), num("amount", 1.0)};
    }
    if (*kind == "remove_event") {
        allow({"feature", "amount"});
        return RemoveEvent{need_feature(), num("amount", 1.0)};
    }
    if (*kind == "set_feature") {
        allow({"feature", "from_step", "to_step", "value"});
        return SetFeature{need_feature(), static_cast<std::size_t>(num("from_step", std::nullopt)),
                          static_cast<std::size_t>(num("to_step", std::nullopt)), num("value", std::nullopt)};
    }
    if (*kind == "insert_circle") {
        allow({"after_step", "steps", "progress_m"});
        return InsertCircle{static_cast<std::size_t>(num("after_step", std::nullopt)),
                            static_cast<std::size_t>(num("steps", std::nullopt)), num("progress_m", std::nullopt)};
    }
    if (*kind == "inject_overlap") {
        allow({"seconds"});
        return InjectOverlap{num("seconds", std::nullopt)};
    }
    syntax_error(kind_loc, "add_event, remove_event, set_feature, insert_circle or inject_overlap",
                 "unknown edit kind '" + *kind + "'");
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view text) {
    Parser p(text);
    ScenarioSpec scn;
    bool seen_speed = false;
    bool seen_constants = false;
    bool seen_baselines = false;
    std::set<std::string> event_names;
    std::set<std::string> edit_names;

    scn.id = p.document(
        "scenario",
        [&](const Token& key) {
            const auto& k = key.text;
            if (k == "format_version") {
                check_format_version(p);
            } else if (k == "source") {
                scn.source = p.string_value();
            } else if (k == "path_length_km") {
                scn.path_length_km = p.non_negative("path_length_km");
            } else if (k == "speed_mps" || k == "speed_kmh") {
                if (seen_speed) syntax_error(key.loc, "single speed", "give either speed_mps or speed_kmh, not both");
                seen_speed = true;
                const double v = p.non_negative(k.c_str());
                scn.speed_mps = k == "speed_kmh" ? v / 3.6 : v;
            } else if (k == "success_time_s") {
                scn.success_time_s = p.positive("success_time_s");
            } else if (k == "overlap_s") {
                scn.overlap_s = p.non_negative("overlap_s");
            } else if (k == "time_limit_s") {
                scn.time_limit_s = p.non_negative("time_limit_s");
            } else if (k == "idle_cutoff_s") {
                scn.idle_cutoff_s = p.non_negative("idle_cutoff_s");
            } else if (k == "idle_terminal") {
                const Token& t = p.ident_token();
                if (t.text == "none") scn.idle_terminal = std::optional<EventKind>{};
                else scn.idle_terminal = std::optional<EventKind>{event_kind(t)};
            } else if (k == "collision_damage") {
                scn.collision_damage = p.non_negative("collision_damage");
            } else if (k == "loophole_base") {
                scn.loophole_base = trajectory_kind(p.ident_token());
            } else {
                unknown_key(key);
            }
        },
        [&](const Token& name) {
            if (name.text == "constants") {
                if (seen_constants) syntax_error(name.loc, "single constants block", "duplicate constants block");
                seen_constants = true;
                p.block_body([&](const Token& key) { scn.constants[key.text] = p.number_value(); });
            } else if (name.text == "baselines") {
                if (seen_baselines) syntax_error(name.loc, "single baselines block", "duplicate baselines block");
                seen_baselines = true;
                p.block_body([&](const Token& key) { scn.baselines[key.text] = p.positive("baseline"); });
            } else if (name.text == "event") {
                const Token& label = p.ident_token();
                if (!event_names.insert(label.text).second) {
                    syntax_error(label.loc, "new event", "duplicate event '" + label.text + "'");
                }
                EventRate rate;
                rate.feature = label.text;
                p.block_body([&](const Token& key) {
                    if (key.text == "per_km") rate.per_km = p.non_negative("per_km");
                    else if (key.text == "per_path") rate.per_path = p.non_negative("per_path");
                    else if (key.text == "before_crash") rate.before_crash = p.non_negative("before_crash");
                    else unknown_key(key);
                });
                scn.events.push_back(rate);
            } else if (name.text == "edit") {
                const Token& label = p.ident_token();
                if (!edit_names.insert(label.text).second) {
                    syntax_error(label.loc, "new edit", "duplicate edit '" + label.text + "'");
                }
                scn.loophole_edits.emplace_back(label.text, parse_edit(p, label));
            } else {
                throw ParseError(ErrorCode::kUnknownKey, name.loc, "constants, baselines, event or edit",
                                 "unknown block '" + name.text + "'");
            }
        });
    return scn;
}

namespace {

std::string_view kind_name(TrajectoryKind kind) { return to_string(kind); }

void write_edit(std::ostringstream& out, const std::string& name, const TrajectoryEdit& edit) {
    BlockWriter block;
    std::visit(
        [&](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, AddEvent>) {
                block.add("kind", "add_event");
                block.add("feature", e.feature);
                block.add("step", std::to_string(e.step));
                block.add("amount", format_number(e.amount));
            } else if constexpr (std::is_same_v<T, RemoveEvent>) {
                block.add("kind", "remove_event");
                block.add("feature", e.feature);
                block.add("amount", format_number(e.amount));
            } else if constexpr (std::is_same_v<T, SetFeature>) {
                block.add("kind", "set_feature");
                block.add("feature", e.feature);
                block.add("from_step", std::to_string(e.from_step));
                block.add("to_step", std::to_string(e.to_step));
                block.add("value", format_number(e.value));
            } else if constexpr (std::is_same_v<T, InsertCircle>) {
                block.add("kind", "insert_circle");
                block.add("after_step", std::to_string(e.after_step));
                block.add("steps", std::to_string(e.steps));
                block.add("progress_m", format_number(e.progress_m));
            } else {
                block.add("kind", "inject_overlap");
                block.add("seconds", format_number(e.seconds));
            }
        },
        edit);
    out << "\nedit " << name << " {\n";
    block.write(out, "  ");
    out << "}\n";
}

}  // namespace

std::string render_scenario(const ScenarioSpec& scn) {
    std::ostringstream out;
    out << "scenario " << scn.id << '\n';
    BlockWriter top;
    top.add("format_version", std::to_string(scn.format_version));
    if (!scn.source.empty()) top.add("source", quote(scn.source));
    if (scn.path_length_km) top.add("path_length_km", format_number(*scn.path_length_km));
    if (scn.speed_mps != 0.0) top.add("speed_mps", format_number(scn.speed_mps));
    if (scn.success_time_s) top.add("success_time_s", format_number(*scn.success_time_s));
    if (scn.overlap_s != 0.0) top.add("overlap_s", format_number(scn.overlap_s));
    if (scn.time_limit_s) top.add("time_limit_s", format_number(*scn.time_limit_s));
    if (scn.idle_cutoff_s) top.add("idle_cutoff_s", format_number(*scn.idle_cutoff_s));
    if (scn.idle_terminal) {
        top.add("idle_terminal", *scn.idle_terminal ? std::string(to_string(**scn.idle_terminal)) : "none");
    }
    if (scn.collision_damage != 1.0) top.add("collision_damage", format_number(scn.collision_damage));
    if (scn.loophole_base != TrajectoryKind::kSucc) top.add("loophole_base", std::string(kind_name(scn.loophole_base)));
    top.write(out, "");

    if (!scn.constants.empty()) {
        BlockWriter block;
        for (const auto& [k, v] : scn.constants) block.add(k, format_number(v));
        out << "\nconstants {\n";
        block.write(out, "  ");
        out << "}\n";
    }
    for (const auto& e : scn.events) {
        BlockWriter block;
        if (e.per_km != 0.0) block.add("per_km", format_number(e.per_km));
        if (e.per_path != 0.0) block.add("per_path", format_number(e.per_path));
        if (e.before_crash != 0.0) block.add("before_crash", format_number(e.before_crash));
        out << "\nevent " << e.feature << " {\n";
        block.write(out, "  ");
        out << "}\n";
    }
    for (const auto& [name, edit] : scn.loophole_edits) write_edit(out, name, edit);
    if (!scn.baselines.empty()) {
        BlockWriter block;
        for (const auto& [k, v] : scn.baselines) block.add(k, format_number(v));
        out << "\nbaselines {\n";
        block.write(out, "  ");
        out << "}\n";
    }
    return out.str();
}

}  // namespace reward_audit
