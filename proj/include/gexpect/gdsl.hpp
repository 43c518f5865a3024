/**
 * @file gdsl.hpp
 * @brief Expression language for generators and claims
 *
 * Grammar (normative):
 *
 *     expr   := term (("+" | "-") term)*
 *     term   := factor (("*" | "/") factor)*
 *     factor := ["-"] atom
 *     atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"
 *
 * Numbers are decimal with optional fraction and exponent. Both ASCII '-' and
 * U+2212 are accepted as minus. Generator context binds t, y, z1..zd; claim
 * context binds x (d = 1) or x1..xd. Functions: abs, min, max, sin, cos, sqrt,
 * exp, pos (pos(a) = max(a, 0)). Transcendentals come from the C library of
 * the build (<cmath>), so results are reproducible run-to-run on one build.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gexpect/error.hpp"
#include "gexpect/model.hpp"

namespace gexpect::gdsl {

enum class Context { generator, claim };

enum class Function { abs, min, max, sin, cos, sqrt, exp, pos };

inline constexpr std::size_t kMaxDepth = 64;

/// Expression tree node. `slot` indexes the variable vector for Kind::variable.
struct Expr {
    enum class Kind { number, variable, negate, add, subtract, multiply, divide, call };

    Kind kind = Kind::number;
    double value = 0.0;
    std::string name;
    std::size_t slot = 0;
    Function function = Function::abs;
    std::vector<Expr> args;

    bool operator==(const Expr& other) const {
        return kind == other.kind && name == other.name && slot == other.slot && args == other.args &&
               (kind != Kind::number || value == other.value) && (kind != Kind::call || function == other.function);
    }

    std::size_t depth() const {
        std::size_t deepest = 0;
        for (const auto& a : args) deepest = std::max(deepest, a.depth());
        return deepest + 1;
    }
};

namespace detail {

struct FunctionInfo {
    std::string_view name;
    Function id;
    std::size_t min_args;
    std::size_t max_args;
};

inline constexpr std::array<FunctionInfo, 8> kFunctions{{
    {"abs", Function::abs, 1, 1},
    {"min", Function::min, 2, SIZE_MAX},
    {"max", Function::max, 2, SIZE_MAX},
    {"sin", Function::sin, 1, 1},
    {"cos", Function::cos, 1, 1},
    {"sqrt", Function::sqrt, 1, 1},
    {"exp", Function::exp, 1, 1},
    {"pos", Function::pos, 1, 1},
}};

inline const FunctionInfo* find_function(std::string_view name) {
    for (const auto& f : kFunctions)
        if (f.name == name) return &f;
    return nullptr;
}

inline std::string_view function_name(Function id) {
    for (const auto& f : kFunctions)
        if (f.id == id) return f.name;
    return "?";
}

class Parser {
public:
    Parser(std::string_view src, Context ctx, std::size_t d) : src_(src), ctx_(ctx), d_(d) {}

    Expr parse() {
        skip_space();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_, {"number", "identifier", "(", "-"});
        Expr e = expr();
        skip_space();
        if (pos_ < src_.size())
            throw ParseError("unexpected character '" + std::string(1, src_[pos_]) + "'", pos_,
                             {"+", "-", "*", "/", "end of input"});
        return e;
    }

private:
    Expr expr() {
        Expr lhs = term();
        for (;;) {
            skip_space();
            const std::size_t at = pos_;
            if (accept('+')) {
                lhs = binary(Expr::Kind::add, std::move(lhs), term(), at);
            } else if (accept_minus()) {
                lhs = binary(Expr::Kind::subtract, std::move(lhs), term(), at);
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = factor();
        for (;;) {
            skip_space();
            const std::size_t at = pos_;
            if (accept('*')) {
                lhs = binary(Expr::Kind::multiply, std::move(lhs), factor(), at);
            } else if (accept('/')) {
                lhs = binary(Expr::Kind::divide, std::move(lhs), factor(), at);
            } else {
                return lhs;
            }
        }
    }

    Expr factor() {
        skip_space();
        const std::size_t at = pos_;
        if (accept_minus()) {
            Expr e;
            e.kind = Expr::Kind::negate;
            e.args.push_back(atom());
            return checked_depth(std::move(e), at);
        }
        return atom();
    }

    Expr atom() {
        skip_space();
        const std::size_t at = pos_;
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_, {"number", "identifier", "("});
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            if (++nesting_ > kMaxDepth) throw ParseError("expression nested deeper than 64", at);
            Expr inner = expr();
            --nesting_;
            skip_space();
            if (!accept(')')) throw ParseError("unbalanced parenthesis", pos_, {")", "+", "-", "*", "/"});
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_, {"number", "identifier", "("});
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
                throw ParseError("malformed number", pos_, {"digit"});
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
                throw ParseError("malformed exponent", pos_, {"digit"});
            digits();
        }
        Expr e;
        e.kind = Expr::Kind::number;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, e.value);
        if (res.ec != std::errc() || !std::isfinite(e.value))
            throw ParseError("number out of range", start);
        return e;
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            const FunctionInfo* info = find_function(name);
            if (!info) {
                if (is_variable_name(name)) throw ParseError("'" + name + "' is a variable, not a function", start);
                throw ParseError("unknown function '" + name + "'", start);
            }
            ++pos_;
            if (++nesting_ > kMaxDepth) throw ParseError("expression nested deeper than 64", start);
            Expr call;
            call.kind = Expr::Kind::call;
            call.function = info->id;
            call.name = name;
            call.args.push_back(expr());
            for (;;) {
                skip_space();
                if (accept(',')) {
                    call.args.push_back(expr());
                } else if (accept(')')) {
                    break;
                } else {
                    throw ParseError("malformed argument list", pos_, {",", ")"});
                }
            }
            --nesting_;
            if (call.args.size() < info->min_args || call.args.size() > info->max_args) {
                const std::string want = info->min_args == info->max_args
                                             ? std::to_string(info->min_args)
                                             : "at least " + std::to_string(info->min_args);
                throw ParseError(name + " expects " + want + " argument(s), got " + std::to_string(call.args.size()),
                                 start);
            }
            return checked_depth(std::move(call), start);
        }
        if (find_function(name)) throw ParseError("function '" + name + "' requires arguments", pos_, {"("});
        return variable(name, start);
    }

    Expr variable(const std::string& name, std::size_t at) {
        Expr e;
        e.kind = Expr::Kind::variable;
        e.name = name;
        if (ctx_ == Context::generator) {
            if (name == "t") {
                e.slot = 0;
                return e;
            }
            if (name == "y") {
                e.slot = 1;
                return e;
            }
            if (auto k = indexed(name, 'z', at)) {
                e.slot = 1 + *k;
                return e;
            }
            if (name == "x" || indexed_shape(name, 'x'))
                throw ParseError("'" + name + "' is not allowed in a generator expression", at);
        } else {
            if (d_ == 1 && name == "x") {
                e.slot = 0;
                return e;
            }
            if (d_ > 1 && name != "x") {
                if (auto k = indexed(name, 'x', at)) {
                    e.slot = *k - 1;
                    return e;
                }
            }
            if (name == "t" || name == "y" || indexed_shape(name, 'z') || name == "z")
                throw ParseError("'" + name + "' is not allowed in a claim expression", at);
            if (name == "x" || indexed_shape(name, 'x'))
                throw ParseError("'" + name + "' does not match claim dimension d=" + std::to_string(d_), at);
        }
        throw ParseError("unknown identifier " + name, at);
    }

    static bool indexed_shape(const std::string& name, char prefix) {
        return name.size() >= 2 && name[0] == prefix &&
               std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
    }

    /// 1-based index for names like z3; throws if out of [1, d].
    std::optional<std::size_t> indexed(const std::string& name, char prefix, std::size_t at) const {
        if (!indexed_shape(name, prefix)) return std::nullopt;
        std::size_t k = 0;
        const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), k);
        if (res.ec != std::errc() || k < 1 || k > d_)
            throw ParseError("'" + name + "' index out of range for d=" + std::to_string(d_), at);
        return k;
    }

    bool is_variable_name(const std::string& name) const {
        return name == "t" || name == "y" || name == "x" || indexed_shape(name, 'z') || indexed_shape(name, 'x');
    }

    Expr binary(Expr::Kind kind, Expr lhs, Expr rhs, std::size_t at) {
        Expr e;
        e.kind = kind;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return checked_depth(std::move(e), at);
    }

    Expr checked_depth(Expr e, std::size_t at) {
        if (e.depth() > kMaxDepth) throw ParseError("expression tree deeper than 64", at);
        return e;
    }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r'))
            ++pos_;
    }

    bool accept(char c) {
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool accept_minus() {
        if (accept('-')) return true;
        if (src_.substr(pos_, 3) == "\xE2\x88\x92") {
            pos_ += 3;
            return true;
        }
        return false;
    }

    std::string_view src_;
    Context ctx_;
    std::size_t d_;
    std::size_t pos_ = 0;
    std::size_t nesting_ = 0;
};

inline std::string format_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool is_atom(const Expr& e) {
    return e.kind == Expr::Kind::number || e.kind == Expr::Kind::variable || e.kind == Expr::Kind::call;
}

} // namespace detail

/// Fully parenthesized rendering that re-parses to an identical tree.
inline std::string to_string(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::number:
        return detail::format_number(e.value);
    case Expr::Kind::variable:
        return e.name;
    case Expr::Kind::negate: {
        const std::string inner = to_string(e.args[0]);
        return detail::is_atom(e.args[0]) ? "-" + inner : "-(" + inner + ")";
    }
    case Expr::Kind::add:
    case Expr::Kind::subtract:
    case Expr::Kind::multiply:
    case Expr::Kind::divide: {
        static constexpr const char* ops[] = {" + ", " - ", " * ", " / "};
        const auto idx = static_cast<int>(e.kind) - static_cast<int>(Expr::Kind::add);
        return "(" + to_string(e.args[0]) + ops[idx] + to_string(e.args[1]) + ")";
    }
    case Expr::Kind::call: {
        std::string out(detail::function_name(e.function));
        out += "(";
        for (std::size_t i = 0; i < e.args.size(); ++i) out += (i ? ", " : "") + to_string(e.args[i]);
        return out + ")";
    }
    }
    return {};
}

/**
 * Parsed and compiled expression. Evaluation runs a postfix program over a
 * variable vector laid out as [t, y, z1..zd] (generator) or [x1..xd] (claim).
 */
class Expression {
public:
    static Expression parse(std::string_view src, Context ctx, std::size_t d) {
        if (d < 1) throw PreconditionError("expression dimension must be >= 1");
        Expression out;
        out.source_ = std::string(src);
        out.tree_ = detail::Parser(src, ctx, d).parse();
        out.compile(out.tree_);
        return out;
    }

    const Expr& tree() const noexcept { return tree_; }
    const std::string& source() const noexcept { return source_; }

    double evaluate(std::span<const double> vars) const {
        std::array<double, 256> fixed;
        std::vector<double> heap;
        double* stack = fixed.data();
        if (max_stack_ > fixed.size()) {
            heap.resize(max_stack_);
            stack = heap.data();
        }
        std::size_t sp = 0;
        for (const Instr& in : program_) {
            switch (in.op) {
            case Op::push:
                stack[sp++] = in.value;
                break;
            case Op::load:
                stack[sp++] = vars[in.slot];
                break;
            case Op::negate:
                stack[sp - 1] = -stack[sp - 1];
                break;
            case Op::add:
                --sp;
                stack[sp - 1] += stack[sp];
                break;
            case Op::subtract:
                --sp;
                stack[sp - 1] -= stack[sp];
                break;
            case Op::multiply:
                --sp;
                stack[sp - 1] *= stack[sp];
                break;
            case Op::divide:
                --sp;
                if (stack[sp] == 0.0) throw EvaluationError("division by zero in '" + source_ + "'");
                stack[sp - 1] /= stack[sp];
                break;
            case Op::abs:
                stack[sp - 1] = std::fabs(stack[sp - 1]);
                break;
            case Op::sin:
                stack[sp - 1] = std::sin(stack[sp - 1]);
                break;
            case Op::cos:
                stack[sp - 1] = std::cos(stack[sp - 1]);
                break;
            case Op::sqrt:
                stack[sp - 1] = std::sqrt(stack[sp - 1]);
                break;
            case Op::exp:
                stack[sp - 1] = std::exp(stack[sp - 1]);
                break;
            case Op::pos:
                stack[sp - 1] = stack[sp - 1] > 0.0 ? stack[sp - 1] : 0.0;
                break;
            case Op::min: {
                sp -= in.slot;
                double m = stack[sp - 1];
                for (std::size_t k = 0; k < in.slot; ++k) m = std::min(m, stack[sp + k]);
                stack[sp - 1] = m;
                break;
            }
            case Op::max: {
                sp -= in.slot;
                double m = stack[sp - 1];
                for (std::size_t k = 0; k < in.slot; ++k) m = std::max(m, stack[sp + k]);
                stack[sp - 1] = m;
                break;
            }
            }
        }
        const double result = stack[0];
        if (!std::isfinite(result)) throw EvaluationError("non-finite value from '" + source_ + "'");
        return result;
    }

private:
    enum class Op : std::uint8_t { push, load, negate, add, subtract, multiply, divide, abs, sin, cos, sqrt, exp, pos, min, max };

    /// For min/max, `slot` holds the number of extra operands (argc - 1).
    struct Instr {
        Op op;
        double value;
        std::size_t slot;
    };

    void compile(const Expr& e) {
        program_.clear();
        std::size_t depth = 0;
        emit(e, depth);
    }

    void emit(const Expr& e, std::size_t& sp) {
        auto push = [&](Instr in, std::ptrdiff_t delta) {
            program_.push_back(in);
            sp = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(sp) + delta);
            max_stack_ = std::max(max_stack_, sp);
        };
        switch (e.kind) {
        case Expr::Kind::number:
            push({Op::push, e.value, 0}, 1);
            return;
        case Expr::Kind::variable:
            push({Op::load, 0.0, e.slot}, 1);
            return;
        case Expr::Kind::negate:
            emit(e.args[0], sp);
            push({Op::negate, 0.0, 0}, 0);
            return;
        case Expr::Kind::add:
        case Expr::Kind::subtract:
        case Expr::Kind::multiply:
        case Expr::Kind::divide: {
            emit(e.args[0], sp);
            emit(e.args[1], sp);
            static constexpr Op ops[] = {Op::add, Op::subtract, Op::multiply, Op::divide};
            push({ops[static_cast<int>(e.kind) - static_cast<int>(Expr::Kind::add)], 0.0, 0}, -1);
            return;
        }
        case Expr::Kind::call: {
            for (const auto& a : e.args) emit(a, sp);
            const auto extra = static_cast<std::ptrdiff_t>(e.args.size()) - 1;
            switch (e.function) {
            case Function::abs: push({Op::abs, 0.0, 0}, 0); return;
            case Function::sin: push({Op::sin, 0.0, 0}, 0); return;
            case Function::cos: push({Op::cos, 0.0, 0}, 0); return;
            case Function::sqrt: push({Op::sqrt, 0.0, 0}, 0); return;
            case Function::exp: push({Op::exp, 0.0, 0}, 0); return;
            case Function::pos: push({Op::pos, 0.0, 0}, 0); return;
            case Function::min: push({Op::min, 0.0, static_cast<std::size_t>(extra)}, -extra); return;
            case Function::max: push({Op::max, 0.0, static_cast<std::size_t>(extra)}, -extra); return;
            }
        }
        }
    }

    std::string source_;
    Expr tree_;
    std::vector<Instr> program_;
    std::size_t max_stack_ = 0;
};

/// GeneratorSpec whose body evaluates `src`; K is the caller's declaration.
inline GeneratorSpec parse_generator(std::string_view src, std::size_t d, double lipschitz = 0.0) {
    auto expr = std::make_shared<const Expression>(Expression::parse(src, Context::generator, d));
    DriverFn body = [expr, d](double t, double y, std::span<const double> z) {
        std::array<double, 34> fixed;
        std::vector<double> heap;
        double* vars = fixed.data();
        if (d + 2 > fixed.size()) {
            heap.resize(d + 2);
            vars = heap.data();
        }
        vars[0] = t;
        vars[1] = y;
        for (std::size_t k = 0; k < d; ++k) vars[2 + k] = z[k];
        return expr->evaluate(std::span<const double>(vars, d + 2));
    };
    return GeneratorSpec(d, std::move(body), lipschitz, std::string(src));
}

inline Claim parse_claim(std::string_view src, std::size_t d, double lipschitz = 0.0) {
    auto expr = std::make_shared<const Expression>(Expression::parse(src, Context::claim, d));
    return Claim::terminal(
        d, [expr](std::span<const double> x) { return expr->evaluate(x); }, lipschitz, std::string(src));
}

} // namespace gexpect::gdsl
