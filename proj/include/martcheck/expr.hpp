#pragma once
// Arithmetic expressions over one state variable `x` and named parameters.
// Grammar (precedence low to high): +,-  <  *,/  <  unary -  <  ^ (right
// associative), so "-x^2" is -(x^2) and "2^3^2" is 2^(3^2).  No implicit
// multiplication.  Functions: exp, log, sqrt, abs.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace martcheck {

// Parse failure; `position` is the 0-based byte offset into the input.
class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t position, const std::string& message);
    std::size_t position;
};

// Evaluation hit an argument outside a function's domain (log of a
// non-positive value, sqrt of a negative, negative base raised to a
// non-integer power, division by zero).  Never silently returns NaN.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& message);
};

// Evaluation referenced a parameter absent from the bindings.
class UnboundParameter : public std::runtime_error {
public:
    explicit UnboundParameter(const std::string& parameter);
    std::string name;
};

enum class FuncKind { Exp, Log, Sqrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;  // immutable, freely shareable

struct Expr {
    struct Literal { double value; };  // non-negative as produced by the parser
    struct Var {};                     // the state variable x
    struct Param { std::string name; };
    struct Neg { ExprPtr operand; };
    struct Binary { BinOp op; ExprPtr lhs, rhs; };
    struct Call { FuncKind fn; ExprPtr arg; };

    using Node = std::variant<Literal, Var, Param, Neg, Binary, Call>;
    Node node;
};

using ParamBindings = std::map<std::string, double>;

// Throws SyntaxError on malformed input (unbalanced parentheses, unknown
// function names, trailing tokens, ...).  Whitespace-insensitive.
ExprPtr parse_expr(std::string_view text);

// IEEE double evaluation.  Throws DomainError / UnboundParameter.
double eval_expr(const Expr& e, double x, const ParamBindings& params);

// Emits text that re-parses to a structurally identical tree.
std::string print_expr(const Expr& e);

bool expr_equal(const Expr& a, const Expr& b);

// True for the literal constant 0 (symbolically, not numerically probed).
bool is_literal_zero(const Expr& e);

// Names of all parameters referenced anywhere in the tree.
void collect_params(const Expr& e, std::map<std::string, bool>& out);

}  // namespace martcheck
