#include "martcheck/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace martcheck {

SyntaxError::SyntaxError(std::size_t pos, const std::string& message)
    : std::runtime_error("syntax error at position " + std::to_string(pos) + ": " + message),
      position(pos) {}

DomainError::DomainError(const std::string& message)
    : std::runtime_error("domain error: " + message) {}

UnboundParameter::UnboundParameter(const std::string& parameter)
    : std::runtime_error("unbound parameter: " + parameter), name(parameter) {}

namespace {

struct Token {
    enum Kind { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End } kind;
    std::size_t pos;
    double num = 0.0;
    std::string text;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') { ++i; continue; }
        std::size_t start = i;
        if ((c >= '0' && c <= '9') || c == '.') {
            double value = 0.0;
            auto [end, ec] = std::from_chars(s.data() + i, s.data() + s.size(), value);
            if (ec != std::errc() || end == s.data() + i)
                throw SyntaxError(start, "malformed number");
            i = static_cast<std::size_t>(end - s.data());
            out.push_back({Token::Num, start, value, {}});
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < s.size() && ident_char(s[j])) ++j;
            out.push_back({Token::Ident, start, 0.0, std::string(s.substr(i, j - i))});
            i = j;
            continue;
        }
        Token::Kind k;
        switch (c) {
            case '+': k = Token::Plus; break;
            case '-': k = Token::Minus; break;
            case '*': k = Token::Star; break;
            case '/': k = Token::Slash; break;
            case '^': k = Token::Caret; break;
            case '(': k = Token::LParen; break;
            case ')': k = Token::RParen; break;
            default: throw SyntaxError(start, std::string("unexpected character '") + c + "'");
        }
        out.push_back({k, start, 0.0, {}});
        ++i;
    }
    out.push_back({Token::End, s.size(), 0.0, {}});
    return out;
}

class Parser {
public:
    explicit Parser(std::string_view text) : toks_(tokenize(text)) {}

    ExprPtr run() {
        ExprPtr e = sum();
        if (cur().kind != Token::End)
            throw SyntaxError(cur().pos, "trailing input");
        return e;
    }

private:
    const Token& cur() const { return toks_[pos_]; }
    void advance() { ++pos_; }

    static ExprPtr make(Expr::Node n) { return std::make_shared<Expr>(Expr{std::move(n)}); }

    ExprPtr sum() {
        ExprPtr lhs = product();
        while (cur().kind == Token::Plus || cur().kind == Token::Minus) {
            BinOp op = cur().kind == Token::Plus ? BinOp::Add : BinOp::Sub;
            advance();
            lhs = make(Expr::Binary{op, lhs, product()});
        }
        return lhs;
    }

    ExprPtr product() {
        ExprPtr lhs = unary();
        while (cur().kind == Token::Star || cur().kind == Token::Slash) {
            BinOp op = cur().kind == Token::Star ? BinOp::Mul : BinOp::Div;
            advance();
            lhs = make(Expr::Binary{op, lhs, unary()});
        }
        return lhs;
    }

    ExprPtr unary() {
        if (cur().kind == Token::Minus) {
            advance();
            return make(Expr::Neg{unary()});
        }
        return power();
    }

    // Right associative; the exponent re-enters unary so "2^-3" parses.
    ExprPtr power() {
        ExprPtr base = primary();
        if (cur().kind == Token::Caret) {
            advance();
            return make(Expr::Binary{BinOp::Pow, base, unary()});
        }
        return base;
    }

    ExprPtr primary() {
        const Token& t = cur();
        switch (t.kind) {
            case Token::Num:
                advance();
                return make(Expr::Literal{t.num});
            case Token::LParen: {
                advance();
                ExprPtr inner = sum();
                expect_rparen(t.pos);
                return inner;
            }
            case Token::Ident: {
                advance();
                if (cur().kind == Token::LParen) {
                    FuncKind fn;
                    if (t.text == "exp") fn = FuncKind::Exp;
                    else if (t.text == "log") fn = FuncKind::Log;
                    else if (t.text == "sqrt") fn = FuncKind::Sqrt;
                    else if (t.text == "abs") fn = FuncKind::Abs;
                    else throw SyntaxError(t.pos, "unknown function '" + t.text + "'");
                    std::size_t open = cur().pos;
                    advance();
                    ExprPtr arg = sum();
                    expect_rparen(open);
                    return make(Expr::Call{fn, arg});
                }
                if (t.text == "x") return make(Expr::Var{});
                return make(Expr::Param{t.text});
            }
            default:
                throw SyntaxError(t.pos, "expected a value");
        }
    }

    void expect_rparen(std::size_t open_pos) {
        if (cur().kind != Token::RParen)
            throw SyntaxError(cur().pos, "expected ')' to close '(' at position " +
                                             std::to_string(open_pos));
        advance();
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

bool is_integer_valued(double v) {
    return std::isfinite(v) && std::nearbyint(v) == v && std::abs(v) < 9.007199254740992e15;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

int precedence(const Expr& e) {
    struct V {
        int operator()(const Expr::Literal&) const { return 5; }
        int operator()(const Expr::Var&) const { return 5; }
        int operator()(const Expr::Param&) const { return 5; }
        int operator()(const Expr::Call&) const { return 5; }
        int operator()(const Expr::Neg&) const { return 3; }
        int operator()(const Expr::Binary& b) const {
            switch (b.op) {
                case BinOp::Add: case BinOp::Sub: return 1;
                case BinOp::Mul: case BinOp::Div: return 2;
                case BinOp::Pow: return 4;
            }
            return 5;
        }
    };
    return std::visit(V{}, e.node);
}

void print_rec(const Expr& e, std::string& out);

void print_child(const Expr& child, int min_prec, std::string& out) {
    if (precedence(child) < min_prec) {
        out += '(';
        print_rec(child, out);
        out += ')';
    } else {
        print_rec(child, out);
    }
}

void print_rec(const Expr& e, std::string& out) {
    struct V {
        std::string& out;
        void operator()(const Expr::Literal& l) const {
            if (l.value < 0) out += '-';  // reparses as Neg; parser never builds these
            out += format_double(std::abs(l.value));
        }
        void operator()(const Expr::Var&) const { out += 'x'; }
        void operator()(const Expr::Param& p) const { out += p.name; }
        void operator()(const Expr::Neg& n) const {
            out += '-';
            print_child(*n.operand, 3, out);
        }
        void operator()(const Expr::Binary& b) const {
            // Left-assoc ops need parens around same-precedence right children;
            // Pow is right-assoc and its exponent admits unary minus directly.
            switch (b.op) {
                case BinOp::Add:
                    print_child(*b.lhs, 1, out); out += '+'; print_child(*b.rhs, 2, out); break;
                case BinOp::Sub:
                    print_child(*b.lhs, 1, out); out += '-'; print_child(*b.rhs, 2, out); break;
                case BinOp::Mul:
                    print_child(*b.lhs, 2, out); out += '*'; print_child(*b.rhs, 3, out); break;
                case BinOp::Div:
                    print_child(*b.lhs, 2, out); out += '/'; print_child(*b.rhs, 3, out); break;
                case BinOp::Pow:
                    print_child(*b.lhs, 5, out); out += '^'; print_child(*b.rhs, 3, out); break;
            }
        }
        void operator()(const Expr::Call& c) const {
            switch (c.fn) {
                case FuncKind::Exp: out += "exp("; break;
                case FuncKind::Log: out += "log("; break;
                case FuncKind::Sqrt: out += "sqrt("; break;
                case FuncKind::Abs: out += "abs("; break;
            }
            print_rec(*c.arg, out);
            out += ')';
        }
    };
    std::visit(V{out}, e.node);
}

}  // namespace

ExprPtr parse_expr(std::string_view text) { return Parser(text).run(); }

double eval_expr(const Expr& e, double x, const ParamBindings& params) {
    struct V {
        double x;
        const ParamBindings& params;
        double operator()(const Expr::Literal& l) const { return l.value; }
        double operator()(const Expr::Var&) const { return x; }
        double operator()(const Expr::Param& p) const {
            auto it = params.find(p.name);
            if (it == params.end()) throw UnboundParameter(p.name);
            return it->second;
        }
        double operator()(const Expr::Neg& n) const { return -eval_expr(*n.operand, x, params); }
        double operator()(const Expr::Binary& b) const {
            double l = eval_expr(*b.lhs, x, params);
            double r = eval_expr(*b.rhs, x, params);
            switch (b.op) {
                case BinOp::Add: return l + r;
                case BinOp::Sub: return l - r;
                case BinOp::Mul: return l * r;
                case BinOp::Div:
                    if (r == 0.0) throw DomainError("division by zero");
                    return l / r;
                case BinOp::Pow:
                    if (l < 0.0 && !is_integer_valued(r))
                        throw DomainError("negative base raised to non-integer power");
                    return std::pow(l, r);
            }
            return 0.0;
        }
        double operator()(const Expr::Call& c) const {
            double a = eval_expr(*c.arg, x, params);
            switch (c.fn) {
                case FuncKind::Exp: return std::exp(a);
                case FuncKind::Log:
                    if (a <= 0.0) throw DomainError("log of non-positive value");
                    return std::log(a);
                case FuncKind::Sqrt:
                    if (a < 0.0) throw DomainError("sqrt of negative value");
                    return std::sqrt(a);
                case FuncKind::Abs: return std::abs(a);
            }
            return 0.0;
        }
    };
    return std::visit(V{x, params}, e.node);
}

std::string print_expr(const Expr& e) {
    std::string out;
    print_rec(e, out);
    return out;
}

bool expr_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct V {
        const Expr& b;
        bool operator()(const Expr::Literal& l) const {
            return l.value == std::get<Expr::Literal>(b.node).value;
        }
        bool operator()(const Expr::Var&) const { return true; }
        bool operator()(const Expr::Param& p) const {
            return p.name == std::get<Expr::Param>(b.node).name;
        }
        bool operator()(const Expr::Neg& n) const {
            return expr_equal(*n.operand, *std::get<Expr::Neg>(b.node).operand);
        }
        bool operator()(const Expr::Binary& bin) const {
            const auto& o = std::get<Expr::Binary>(b.node);
            return bin.op == o.op && expr_equal(*bin.lhs, *o.lhs) && expr_equal(*bin.rhs, *o.rhs);
        }
        bool operator()(const Expr::Call& c) const {
            const auto& o = std::get<Expr::Call>(b.node);
            return c.fn == o.fn && expr_equal(*c.arg, *o.arg);
        }
    };
    return std::visit(V{b}, a.node);
}

bool is_literal_zero(const Expr& e) {
    const auto* l = std::get_if<Expr::Literal>(&e.node);
    return l != nullptr && l->value == 0.0;
}

void collect_params(const Expr& e, std::map<std::string, bool>& out) {
    struct V {
        std::map<std::string, bool>& out;
        void operator()(const Expr::Literal&) const {}
        void operator()(const Expr::Var&) const {}
        void operator()(const Expr::Param& p) const { out[p.name] = true; }
        void operator()(const Expr::Neg& n) const { collect_params(*n.operand, out); }
        void operator()(const Expr::Binary& b) const {
            collect_params(*b.lhs, out);
            collect_params(*b.rhs, out);
        }
        void operator()(const Expr::Call& c) const { collect_params(*c.arg, out); }
    };
    std::visit(V{out}, e.node);
}

}  // namespace martcheck
