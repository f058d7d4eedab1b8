// Formula ASTs for the scalar kernels N, M and the initial-history data.
//
// Grammar: real literals, the variable `v`, constants `pi` and `e`, binary
// + - * / ^ (with ^ binding tightest and right-associative), unary minus,
// and the functions sin, cos, exp, sqrt. Anything else is rejected at parse
// time. Expressions are immutable and cheap to copy (shared subtrees), so
// they can be evaluated concurrently.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace idec {

struct ParseError : std::runtime_error {
    std::size_t position;
    ParseError(const std::string& message, std::size_t pos)
        : std::runtime_error(message + " at position " + std::to_string(pos)), position(pos) {}
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class KernelExpr {
public:
    enum class Op {
        Number, Pi, Euler, Var,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp, Sqrt,
    };

    struct Node {
        Op op;
        double number = 0.0;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };
    using NodePtr = std::shared_ptr<const Node>;

    KernelExpr() = default;
    explicit KernelExpr(NodePtr root) : root_(std::move(root)) {}

    static KernelExpr number(double x) { return KernelExpr(make(Op::Number, x)); }
    static KernelExpr variable() { return KernelExpr(make(Op::Var)); }

    [[nodiscard]] bool empty() const { return root_ == nullptr; }
    [[nodiscard]] const NodePtr& root() const { return root_; }

    [[nodiscard]] double operator()(double v) const { return eval(root_.get(), v); }

    // True if any node references the variable.
    [[nodiscard]] bool depends_on_variable() const { return depends(root_.get()); }

private:
    static NodePtr make(Op op, double number = 0.0, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        return std::make_shared<const Node>(Node{op, number, std::move(lhs), std::move(rhs)});
    }

    static bool depends(const Node* n) {
        if (!n) return false;
        if (n->op == Op::Var) return true;
        return depends(n->lhs.get()) || depends(n->rhs.get());
    }

    static double checked(double x, const char* what) {
        if (!std::isfinite(x)) throw EvalError(std::string("non-finite result in ") + what);
        return x;
    }

    static double eval(const Node* n, double v) {
        switch (n->op) {
            case Op::Number: return n->number;
            case Op::Pi: return 3.14159265358979323846;
            case Op::Euler: return 2.71828182845904523536;
            case Op::Var: return v;
            case Op::Add: return checked(eval(n->lhs.get(), v) + eval(n->rhs.get(), v), "+");
            case Op::Sub: return checked(eval(n->lhs.get(), v) - eval(n->rhs.get(), v), "-");
            case Op::Mul: return checked(eval(n->lhs.get(), v) * eval(n->rhs.get(), v), "*");
            case Op::Div: {
                const double num = eval(n->lhs.get(), v);
                const double den = eval(n->rhs.get(), v);
                if (den == 0.0) throw EvalError("division by zero");
                return checked(num / den, "/");
            }
            case Op::Pow: {
                const double base = eval(n->lhs.get(), v);
                const double expo = eval(n->rhs.get(), v);
                if (base < 0.0 && expo != std::floor(expo))
                    throw EvalError("negative base with non-integer exponent");
                return checked(std::pow(base, expo), "^");
            }
            case Op::Neg: return -eval(n->lhs.get(), v);
            case Op::Sin: return std::sin(eval(n->lhs.get(), v));
            case Op::Cos: return std::cos(eval(n->lhs.get(), v));
            case Op::Exp: return checked(std::exp(eval(n->lhs.get(), v)), "exp");
            case Op::Sqrt: {
                const double arg = eval(n->lhs.get(), v);
                if (arg < 0.0) throw EvalError("sqrt of negative value");
                return std::sqrt(arg);
            }
        }
        throw EvalError("corrupt expression node");
    }

    NodePtr root_;

    friend KernelExpr differentiate(const KernelExpr&);
    friend struct ExprParser;
    friend bool identical(const KernelExpr&, const KernelExpr&);
    friend std::string unparse(const KernelExpr&);
};

namespace detail {

inline std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace detail

struct ExprParser {
    std::string_view src;
    std::size_t pos = 0;

    using Op = KernelExpr::Op;
    using NodePtr = KernelExpr::NodePtr;

    static NodePtr node(Op op, double num = 0.0, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        return std::make_shared<const KernelExpr::Node>(KernelExpr::Node{op, num, std::move(lhs), std::move(rhs)});
    }

    void skip_ws() {
        while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\n' || src[pos] == '\r'))
            ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& message) { throw ParseError(message, pos); }

    NodePtr parse_expression() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (eat('+')) lhs = node(Op::Add, 0.0, lhs, parse_term());
            else if (eat('-')) lhs = node(Op::Sub, 0.0, lhs, parse_term());
            else return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            if (eat('*')) lhs = node(Op::Mul, 0.0, lhs, parse_factor());
            else if (eat('/')) lhs = node(Op::Div, 0.0, lhs, parse_factor());
            else return lhs;
        }
    }

    // unary minus binds looser than ^, so -v^2 is -(v^2)
    NodePtr parse_factor() {
        if (eat('-')) return node(Op::Neg, 0.0, parse_factor());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (eat('^')) return node(Op::Pow, 0.0, base, parse_factor());  // right-associative
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos >= src.size()) fail("unexpected end of input");
        const char c = src[pos];
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if ((c >= '0' && c <= '9') || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(src.data() + pos, src.data() + src.size(), value);
        if (ec != std::errc()) fail("malformed number");
        pos = static_cast<std::size_t>(ptr - src.data());
        return node(Op::Number, value);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        const std::string_view name = src.substr(start, pos - start);
        if (name == "v") return node(Op::Var);
        if (name == "pi") return node(Op::Pi);
        if (name == "e") return node(Op::Euler);
        if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
            if (!eat('(')) fail("expected '(' after function name");
            NodePtr arg = parse_expression();
            if (!eat(')')) fail("expected ')'");
            Op op = name == "sin" ? Op::Sin : name == "cos" ? Op::Cos : name == "exp" ? Op::Exp : Op::Sqrt;
            return node(op, 0.0, arg);
        }
        pos = start;
        fail("unknown identifier '" + std::string(name) + "'");
    }
};

inline KernelExpr parse_kernel_expr(std::string_view src) {
    ExprParser p{src};
    p.skip_ws();
    if (p.pos >= src.size()) p.fail("empty expression");
    KernelExpr::NodePtr root = p.parse_expression();
    p.skip_ws();
    if (p.pos < src.size()) p.fail("unexpected trailing input");
    return KernelExpr(std::move(root));
}

inline double eval_kernel(const KernelExpr& k, double v) { return k(v); }

// Exact symbolic derivative with respect to v. No simplification is applied,
// so the resulting tree may be large. ^ requires a v-free exponent.
inline KernelExpr differentiate(const KernelExpr& k) {
    using Op = KernelExpr::Op;
    using NodePtr = KernelExpr::NodePtr;

    struct D {
        static NodePtr node(Op op, double num = 0.0, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
            return std::make_shared<const KernelExpr::Node>(KernelExpr::Node{op, num, std::move(lhs), std::move(rhs)});
        }
        static NodePtr num(double x) { return node(Op::Number, x); }

        static bool depends(const KernelExpr::Node* n) {
            if (!n) return false;
            if (n->op == Op::Var) return true;
            return depends(n->lhs.get()) || depends(n->rhs.get());
        }

        static NodePtr diff(const NodePtr& n) {
            switch (n->op) {
                case Op::Number:
                case Op::Pi:
                case Op::Euler: return num(0.0);
                case Op::Var: return num(1.0);
                case Op::Add: return node(Op::Add, 0.0, diff(n->lhs), diff(n->rhs));
                case Op::Sub: return node(Op::Sub, 0.0, diff(n->lhs), diff(n->rhs));
                case Op::Mul:
                    return node(Op::Add, 0.0,
                                node(Op::Mul, 0.0, diff(n->lhs), n->rhs),
                                node(Op::Mul, 0.0, n->lhs, diff(n->rhs)));
                case Op::Div:
                    // (u/w)' = (u'w - u w') / w^2
                    return node(Op::Div, 0.0,
                                node(Op::Sub, 0.0,
                                     node(Op::Mul, 0.0, diff(n->lhs), n->rhs),
                                     node(Op::Mul, 0.0, n->lhs, diff(n->rhs))),
                                node(Op::Pow, 0.0, n->rhs, num(2.0)));
                case Op::Pow: {
                    if (depends(n->rhs.get()))
                        throw std::invalid_argument("cannot differentiate '^' with the variable in the exponent");
                    // u^0 is constant; the generic power rule would evaluate 0 * u^-1
                    if (KernelExpr(n->rhs)(0.0) == 0.0) return num(0.0);
                    // (u^c)' = c * u^(c-1) * u'
                    return node(Op::Mul, 0.0,
                                node(Op::Mul, 0.0, n->rhs,
                                     node(Op::Pow, 0.0, n->lhs, node(Op::Sub, 0.0, n->rhs, num(1.0)))),
                                diff(n->lhs));
                }
                case Op::Neg: return node(Op::Neg, 0.0, diff(n->lhs));
                case Op::Sin: return node(Op::Mul, 0.0, node(Op::Cos, 0.0, n->lhs), diff(n->lhs));
                case Op::Cos:
                    return node(Op::Neg, 0.0, node(Op::Mul, 0.0, node(Op::Sin, 0.0, n->lhs), diff(n->lhs)));
                case Op::Exp: return node(Op::Mul, 0.0, node(Op::Exp, 0.0, n->lhs), diff(n->lhs));
                case Op::Sqrt:
                    // (sqrt u)' = u' / (2 sqrt u)
                    return node(Op::Div, 0.0, diff(n->lhs),
                                node(Op::Mul, 0.0, num(2.0), node(Op::Sqrt, 0.0, n->lhs)));
            }
            throw std::invalid_argument("corrupt expression node");
        }
    };

    return KernelExpr(D::diff(k.root_));
}

inline bool identical(const KernelExpr& a, const KernelExpr& b) {
    using Node = KernelExpr::Node;
    struct Eq {
        static bool eq(const Node* x, const Node* y) {
            if (x == y) return true;
            if (!x || !y) return false;
            if (x->op != y->op) return false;
            if (x->op == KernelExpr::Op::Number && x->number != y->number) return false;
            return eq(x->lhs.get(), y->lhs.get()) && eq(x->rhs.get(), y->rhs.get());
        }
    };
    return Eq::eq(a.root_.get(), b.root_.get());
}

// Render back to parseable text. Reparsing the result yields an identical tree.
inline std::string unparse(const KernelExpr& k) {
    using Op = KernelExpr::Op;
    using Node = KernelExpr::Node;

    struct P {
        static int prec(Op op) {
            switch (op) {
                case Op::Add: case Op::Sub: return 1;
                case Op::Mul: case Op::Div: return 2;
                case Op::Neg: return 3;
                case Op::Pow: return 4;
                default: return 5;
            }
        }
        static void wrap(std::string& out, const Node* n, int min_prec) {
            if (prec(n->op) < min_prec) {
                out += '(';
                print(out, n);
                out += ')';
            } else {
                print(out, n);
            }
        }
        static void print(std::string& out, const Node* n) {
            switch (n->op) {
                case Op::Number: out += detail::format_double(n->number); return;
                case Op::Pi: out += "pi"; return;
                case Op::Euler: out += "e"; return;
                case Op::Var: out += "v"; return;
                case Op::Add:
                    wrap(out, n->lhs.get(), 1); out += " + "; wrap(out, n->rhs.get(), 2); return;
                case Op::Sub:
                    wrap(out, n->lhs.get(), 1); out += " - "; wrap(out, n->rhs.get(), 2); return;
                case Op::Mul:
                    wrap(out, n->lhs.get(), 2); out += "*"; wrap(out, n->rhs.get(), 3); return;
                case Op::Div:
                    wrap(out, n->lhs.get(), 2); out += "/"; wrap(out, n->rhs.get(), 3); return;
                case Op::Neg:
                    out += '-'; wrap(out, n->lhs.get(), 3); return;
                case Op::Pow:
                    wrap(out, n->lhs.get(), 5); out += '^'; wrap(out, n->rhs.get(), 3); return;
                case Op::Sin: out += "sin("; print(out, n->lhs.get()); out += ')'; return;
                case Op::Cos: out += "cos("; print(out, n->lhs.get()); out += ')'; return;
                case Op::Exp: out += "exp("; print(out, n->lhs.get()); out += ')'; return;
                case Op::Sqrt: out += "sqrt("; print(out, n->lhs.get()); out += ')'; return;
            }
        }
    };

    std::string out;
    P::print(out, k.root().get());
    return out;
}

} // namespace idec
