#pragma once

// Expression trees over one variable x: the parsed form of user-supplied
// generators. Exponents are constants, so symbolic differentiation is total.
//
// Grammar (whitespace insignificant):
//   expr   := term { ("+"|"-") term }
//   term   := factor { ("*"|"/") factor }
//   factor := atom [ "^" num ]
//   atom   := "x" | num | "ln(" expr ")" | "exp(" expr ")" | "(" expr ")" | "-" atom

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "meanscope/common.hpp"

namespace meanscope {

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind { Var, Const, Add, Sub, Mul, Div, Pow, Ln, Exp, Neg };
    Kind kind;
    double value = 0.0;  // Const payload, or the exponent for Pow
    ExprPtr lhs, rhs;    // unary nodes use lhs only
};

inline ExprPtr make_var() {
    return std::make_shared<ExprNode>(ExprNode{ExprNode::Kind::Var, 0.0, nullptr, nullptr});
}
inline ExprPtr make_const(double v) {
    return std::make_shared<ExprNode>(ExprNode{ExprNode::Kind::Const, v, nullptr, nullptr});
}
inline ExprPtr make_binary(ExprNode::Kind k, ExprPtr a, ExprPtr b) {
    return std::make_shared<ExprNode>(ExprNode{k, 0.0, std::move(a), std::move(b)});
}
inline ExprPtr make_pow(ExprPtr base, double exponent) {
    return std::make_shared<ExprNode>(
        ExprNode{ExprNode::Kind::Pow, exponent, std::move(base), nullptr});
}
inline ExprPtr make_unary(ExprNode::Kind k, ExprPtr a) {
    return std::make_shared<ExprNode>(ExprNode{k, 0.0, std::move(a), nullptr});
}

// Total on every point where no division by zero, log of a non-positive
// value, or non-real power occurs; such points raise EvalError.
inline double eval_expr(const ExprNode& node, double x) {
    using K = ExprNode::Kind;
    switch (node.kind) {
        case K::Var: return x;
        case K::Const: return node.value;
        case K::Add: return eval_expr(*node.lhs, x) + eval_expr(*node.rhs, x);
        case K::Sub: return eval_expr(*node.lhs, x) - eval_expr(*node.rhs, x);
        case K::Mul: return eval_expr(*node.lhs, x) * eval_expr(*node.rhs, x);
        case K::Div: {
            double den = eval_expr(*node.rhs, x);
            if (den == 0.0) throw EvalError("division by zero", x);
            return eval_expr(*node.lhs, x) / den;
        }
        case K::Pow: {
            double base = eval_expr(*node.lhs, x);
            double p = node.value;
            if (base < 0.0 && p != std::nearbyint(p))
                throw EvalError("non-real power of negative base", x);
            if (base == 0.0 && p < 0.0) throw EvalError("zero base with negative exponent", x);
            return std::pow(base, p);
        }
        case K::Ln: {
            double v = eval_expr(*node.lhs, x);
            if (v <= 0.0) throw EvalError("log of non-positive value", x);
            return std::log(v);
        }
        case K::Exp: return std::exp(eval_expr(*node.lhs, x));
        case K::Neg: return -eval_expr(*node.lhs, x);
    }
    throw EvalError("corrupt expression node", x);
}

inline bool expr_equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == ExprNode::Kind::Const || a.kind == ExprNode::Kind::Pow) {
        if (a.value != b.value && !(std::isnan(a.value) && std::isnan(b.value))) return false;
    }
    if (bool(a.lhs) != bool(b.lhs) || bool(a.rhs) != bool(b.rhs)) return false;
    if (a.lhs && !expr_equal(*a.lhs, *b.lhs)) return false;
    if (a.rhs && !expr_equal(*a.rhs, *b.rhs)) return false;
    return true;
}

inline bool is_const(const ExprPtr& e, double v) {
    return e && e->kind == ExprNode::Kind::Const && e->value == v;
}

// Constant folding only: subtrees without x collapse to Const, double
// negation drops. No algebraic rewriting, so error behavior at bad points
// is preserved (0 * ln(x) never folds away the log).
inline ExprPtr fold_expr(const ExprPtr& e) {
    using K = ExprNode::Kind;
    if (!e) return e;
    if (e->kind == K::Var || e->kind == K::Const) return e;
    ExprPtr a = fold_expr(e->lhs);
    ExprPtr b = fold_expr(e->rhs);
    auto all_const = [&] {
        if (a && a->kind != K::Const) return false;
        if (b && b->kind != K::Const) return false;
        return true;
    };
    if (all_const()) {
        ExprNode tmp{e->kind, e->value, a, b};
        try {
            double v = eval_expr(tmp, 0.0);
            if (std::isfinite(v)) return make_const(v);
        } catch (const EvalError&) {
            // leave unfolded; evaluation will report the error in context
        }
    }
    if (e->kind == K::Neg && a->kind == K::Neg) return a->lhs;
    if (a == e->lhs && b == e->rhs) return e;
    auto n = std::make_shared<ExprNode>(*e);
    n->lhs = a;
    n->rhs = b;
    return n;
}

// d/dx, total because Pow exponents are constants.
inline ExprPtr diff_expr(const ExprPtr& e) {
    using K = ExprNode::Kind;
    switch (e->kind) {
        case K::Var: return make_const(1.0);
        case K::Const: return make_const(0.0);
        case K::Add: return make_binary(K::Add, diff_expr(e->lhs), diff_expr(e->rhs));
        case K::Sub: return make_binary(K::Sub, diff_expr(e->lhs), diff_expr(e->rhs));
        case K::Mul:
            return make_binary(K::Add, make_binary(K::Mul, diff_expr(e->lhs), e->rhs),
                               make_binary(K::Mul, e->lhs, diff_expr(e->rhs)));
        case K::Div:
            // (u/v)' = u'/v - u v'/v^2
            return make_binary(
                K::Sub, make_binary(K::Div, diff_expr(e->lhs), e->rhs),
                make_binary(K::Div, make_binary(K::Mul, e->lhs, diff_expr(e->rhs)),
                            make_pow(e->rhs, 2.0)));
        case K::Pow:
            if (e->value == 0.0) return make_const(0.0);
            return make_binary(K::Mul,
                               make_binary(K::Mul, make_const(e->value),
                                           make_pow(e->lhs, e->value - 1.0)),
                               diff_expr(e->lhs));
        case K::Ln: return make_binary(K::Div, diff_expr(e->lhs), e->lhs);
        case K::Exp: return make_binary(K::Mul, make_unary(K::Exp, e->lhs), diff_expr(e->lhs));
        case K::Neg: return make_unary(K::Neg, diff_expr(e->lhs));
    }
    return nullptr;
}

inline std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    assert(ec == std::errc());
    return std::string(buf, p);
}

namespace detail {

inline bool prints_as_atom(const ExprNode& e) {
    using K = ExprNode::Kind;
    switch (e.kind) {
        case K::Var: case K::Ln: case K::Exp: return true;
        case K::Const: return e.value >= 0.0;  // negative constants print via Neg
        case K::Neg: return prints_as_atom(*e.lhs);
        default: return false;
    }
}

inline void print_expr(const ExprNode& e, std::string& out);

inline void print_atom(const ExprNode& e, std::string& out) {
    if (prints_as_atom(e)) {
        print_expr(e, out);
    } else {
        out += '(';
        print_expr(e, out);
        out += ')';
    }
}

inline void print_expr(const ExprNode& e, std::string& out) {
    using K = ExprNode::Kind;
    switch (e.kind) {
        case K::Var: out += 'x'; return;
        case K::Const:
            if (e.value < 0.0) {
                out += '-';
                out += format_number(-e.value);
            } else {
                out += format_number(e.value);
            }
            return;
        case K::Add: case K::Sub: {
            print_expr(*e.lhs, out);
            out += (e.kind == K::Add) ? " + " : " - ";
            // a - (b + c) and a - (b - c) need parens on the right
            bool paren = e.rhs->kind == K::Add || e.rhs->kind == K::Sub;
            if (paren) out += '(';
            print_expr(*e.rhs, out);
            if (paren) out += ')';
            return;
        }
        case K::Mul: case K::Div: {
            auto print_side = [&](const ExprNode& s, bool rhs) {
                // right operands keep their own grouping under reparse
                bool paren = s.kind == K::Add || s.kind == K::Sub ||
                             (rhs && (s.kind == K::Mul || s.kind == K::Div));
                if (paren) out += '(';
                print_expr(s, out);
                if (paren) out += ')';
            };
            print_side(*e.lhs, false);
            out += (e.kind == K::Mul) ? "*" : "/";
            print_side(*e.rhs, true);
            return;
        }
        case K::Pow:
            print_atom(*e.lhs, out);
            out += '^';
            if (e.value < 0.0) {
                out += '-';
                out += format_number(-e.value);
            } else {
                out += format_number(e.value);
            }
            return;
        case K::Ln:
            out += "ln(";
            print_expr(*e.lhs, out);
            out += ')';
            return;
        case K::Exp:
            out += "exp(";
            print_expr(*e.lhs, out);
            out += ')';
            return;
        case K::Neg:
            out += '-';
            print_atom(*e.lhs, out);
            return;
    }
}

}  // namespace detail

inline std::string pretty_expr(const ExprPtr& e) {
    std::string out;
    detail::print_expr(*e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Lexer and recursive-descent parser.

namespace detail {

struct Token {
    enum class Type { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };
    Type type;
    double num = 0.0;
    std::string ident;
    std::size_t offset = 0;  // 0-based position in the source text
};

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        Token t;
        t.offset = i;
        switch (c) {
            case '+': t.type = Token::Type::Plus; ++i; break;
            case '-': t.type = Token::Type::Minus; ++i; break;
            case '*': t.type = Token::Type::Star; ++i; break;
            case '/': t.type = Token::Type::Slash; ++i; break;
            case '^': t.type = Token::Type::Caret; ++i; break;
            case '(': t.type = Token::Type::LParen; ++i; break;
            case ')': t.type = Token::Type::RParen; ++i; break;
            default:
                if ((c >= '0' && c <= '9') || c == '.') {
                    const char* begin = text.data() + i;
                    const char* end = text.data() + text.size();
                    double v = 0.0;
                    auto res = std::from_chars(begin, end, v);
                    if (res.ec != std::errc())
                        throw ParseError("malformed number", i + 1);
                    t.type = Token::Type::Num;
                    t.num = v;
                    i += std::size_t(res.ptr - begin);
                } else if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
                    std::size_t j = i;
                    while (j < text.size() &&
                           ((text[j] >= 'a' && text[j] <= 'z') ||
                            (text[j] >= 'A' && text[j] <= 'Z') ||
                            (text[j] >= '0' && text[j] <= '9')))
                        ++j;
                    t.type = Token::Type::Ident;
                    t.ident = std::string(text.substr(i, j - i));
                    i = j;
                } else {
                    throw ParseError("unexpected character '" + std::string(1, c) + "'", i + 1);
                }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.type = Token::Type::End;
    end.offset = text.size();
    out.push_back(end);
    return out;
}

class ExprParser {
  public:
    explicit ExprParser(const std::vector<Token>& toks) : toks_(toks) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        expect(Token::Type::End, "trailing input");
        return e;
    }

    ExprPtr expr() {
        ExprPtr left = term();
        for (;;) {
            if (accept(Token::Type::Plus))
                left = make_binary(ExprNode::Kind::Add, left, term());
            else if (accept(Token::Type::Minus))
                left = make_binary(ExprNode::Kind::Sub, left, term());
            else
                return left;
        }
    }

  private:
    ExprPtr term() {
        ExprPtr left = factor();
        for (;;) {
            if (accept(Token::Type::Star))
                left = make_binary(ExprNode::Kind::Mul, left, factor());
            else if (accept(Token::Type::Slash))
                left = make_binary(ExprNode::Kind::Div, left, factor());
            else
                return left;
        }
    }

    ExprPtr factor() {
        ExprPtr a = atom();
        if (accept(Token::Type::Caret)) return make_pow(a, signed_num("exponent"));
        return a;
    }

    ExprPtr atom() {
        const Token& t = peek();
        switch (t.type) {
            case Token::Type::Num:
                ++pos_;
                return make_const(t.num);
            case Token::Type::Minus:
                ++pos_;
                return make_unary(ExprNode::Kind::Neg, atom());
            case Token::Type::LParen: {
                ++pos_;
                ExprPtr e = expr();
                expect(Token::Type::RParen, "expected ')'");
                return e;
            }
            case Token::Type::Ident: {
                if (t.ident == "x") {
                    ++pos_;
                    return make_var();
                }
                if (t.ident == "ln" || t.ident == "exp") {
                    ExprNode::Kind k =
                        (t.ident == "ln") ? ExprNode::Kind::Ln : ExprNode::Kind::Exp;
                    ++pos_;
                    expect(Token::Type::LParen, "expected '(' after function name");
                    ExprPtr e = expr();
                    expect(Token::Type::RParen, "expected ')'");
                    return make_unary(k, e);
                }
                throw ParseError("unknown identifier '" + t.ident + "'", t.offset + 1);
            }
            default:
                throw ParseError("expected value", t.offset + 1);
        }
    }

    // Numeric literal with optional leading sign (builtin args, exponents).
    double signed_num(const char* what) {
        bool neg = accept(Token::Type::Minus);
        const Token& t = peek();
        if (t.type != Token::Type::Num)
            throw ParseError(std::string("expected numeric ") + what, t.offset + 1);
        ++pos_;
        return neg ? -t.num : t.num;
    }

    const Token& peek() const { return toks_[pos_]; }
    bool accept(Token::Type ty) {
        if (toks_[pos_].type == ty) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(Token::Type ty, const char* msg) {
        if (!accept(ty)) throw ParseError(msg, toks_[pos_].offset + 1);
    }

    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text) {
    auto toks = detail::lex(text);
    detail::ExprParser p(toks);
    return p.parse();
}

// If e is affine in x with a nonzero coefficient, returns (a, b) with
// e = a*x + b. Used to recognize exp(c*x) as a builtin.
inline bool linear_in_var(const ExprNode& e, double& a, double& b) {
    using K = ExprNode::Kind;
    switch (e.kind) {
        case K::Var: a = 1.0; b = 0.0; return true;
        case K::Const: a = 0.0; b = e.value; return true;
        case K::Neg: {
            double a1, b1;
            if (!linear_in_var(*e.lhs, a1, b1)) return false;
            a = -a1; b = -b1;
            return true;
        }
        case K::Add: case K::Sub: {
            double a1, b1, a2, b2;
            if (!linear_in_var(*e.lhs, a1, b1) || !linear_in_var(*e.rhs, a2, b2)) return false;
            double s = (e.kind == K::Add) ? 1.0 : -1.0;
            a = a1 + s * a2;
            b = b1 + s * b2;
            return true;
        }
        case K::Mul: {
            double a1, b1, a2, b2;
            if (!linear_in_var(*e.lhs, a1, b1) || !linear_in_var(*e.rhs, a2, b2)) return false;
            if (a1 != 0.0 && a2 != 0.0) return false;  // quadratic
            a = a1 * b2 + a2 * b1;
            b = b1 * b2;
            return true;
        }
        case K::Div: {
            double a1, b1, a2, b2;
            if (!linear_in_var(*e.lhs, a1, b1) || !linear_in_var(*e.rhs, a2, b2)) return false;
            if (a2 != 0.0 || b2 == 0.0) return false;
            a = a1 / b2;
            b = b1 / b2;
            return true;
        }
        default: return false;
    }
}

}  // namespace meanscope
