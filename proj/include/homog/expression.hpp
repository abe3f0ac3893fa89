#pragma once

// Small closed expression grammar: constants, named variables, + - * /,
// unary minus, sin/cos. Trig arguments that are affine in the variables can
// be analyzed symbolically, which is what the periodicity validation and the
// exact-mean computation rely on.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace homog {

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class Expression {
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    struct Node {
        enum class Kind { Num, Var, Add, Sub, Mul, Div, Neg, Sin, Cos };
        Kind kind;
        double value = 0.0;   // Num
        std::size_t var = 0;  // Var
        NodePtr a, b;
    };

public:
    Expression() = default;

    // `vars` gives the variable slot names; `aliases` maps extra accepted
    // names onto slots (e.g. "x1" -> 0 when vars = {"x"}).
    static Expression parse(const std::string& text,
                            const std::vector<std::string>& vars,
                            const std::map<std::string, std::size_t>& aliases = {}) {
        Parser p(text, vars, aliases);
        Expression e;
        e.root_ = p.parse_expr();
        p.expect_end();
        e.vars_ = vars;
        e.text_ = text;
        return e;
    }

    static Expression constant(double c, const std::vector<std::string>& vars = {}) {
        Expression e;
        e.root_ = num(c);
        e.vars_ = vars;
        e.text_ = std::to_string(c);
        return e;
    }

    bool valid() const { return root_ != nullptr; }
    const std::string& text() const { return text_; }
    const std::vector<std::string>& variables() const { return vars_; }

    double operator()(std::span<const double> values) const {
        return eval(root_.get(), values);
    }
    double operator()(std::initializer_list<double> values) const {
        return eval(root_.get(), std::span<const double>(values.begin(), values.size()));
    }

    bool depends_on(std::size_t var) const { return depends(root_.get(), var); }

    Expression derivative(std::size_t var) const {
        Expression e;
        e.root_ = diff(root_, var);
        e.vars_ = vars_;
        e.text_ = "d/d" + (var < vars_.size() ? vars_[var] : std::string("?")) + "(" + text_ + ")";
        return e;
    }

    // Checks that the expression is periodic with period 1 in each listed
    // variable by construction: those variables may appear only inside
    // sin/cos arguments that are affine with a 2*pi*integer coefficient.
    void require_periodic(std::span<const std::size_t> periodic_vars) const {
        check_periodic(root_.get(), periodic_vars);
    }

    // Exact mean over the unit cell in the listed variables, computed by
    // expanding the expression into complex exponentials. Requires the
    // expression to be a trig polynomial in those variables; throws
    // ValidationError otherwise.
    double exact_mean(std::span<const std::size_t> periodic_vars) const {
        TermMap t = expand(root_.get(), periodic_vars);
        std::complex<double> m{0.0, 0.0};
        double scale = 0.0;
        for (const auto& [freq, amp] : t) {
            scale += std::abs(amp);
            bool zero = true;
            for (long k : freq)
                if (k != 0) zero = false;
            if (zero) m += amp;
        }
        if (scale > 0.0 && std::abs(m.imag()) > 1e-12 * scale)
            throw ValidationError("exact_mean: non-real mean in expansion of '" + text_ + "'");
        return m.real();
    }

private:
    NodePtr root_;
    std::vector<std::string> vars_;
    std::string text_;

    static NodePtr make(Node n) { return std::make_shared<const Node>(std::move(n)); }
    static NodePtr num(double v) { return make({Node::Kind::Num, v, 0, nullptr, nullptr}); }
    static NodePtr var(std::size_t i) { return make({Node::Kind::Var, 0.0, i, nullptr, nullptr}); }
    static NodePtr node(Node::Kind k, NodePtr a, NodePtr b = nullptr) {
        return make({k, 0.0, 0, std::move(a), std::move(b)});
    }

    static bool is_num(const NodePtr& n, double v) {
        return n->kind == Node::Kind::Num && n->value == v;
    }

    static double eval(const Node* n, std::span<const double> v) {
        switch (n->kind) {
            case Node::Kind::Num: return n->value;
            case Node::Kind::Var: return v[n->var];
            case Node::Kind::Add: return eval(n->a.get(), v) + eval(n->b.get(), v);
            case Node::Kind::Sub: return eval(n->a.get(), v) - eval(n->b.get(), v);
            case Node::Kind::Mul: return eval(n->a.get(), v) * eval(n->b.get(), v);
            case Node::Kind::Div: return eval(n->a.get(), v) / eval(n->b.get(), v);
            case Node::Kind::Neg: return -eval(n->a.get(), v);
            case Node::Kind::Sin: return std::sin(eval(n->a.get(), v));
            case Node::Kind::Cos: return std::cos(eval(n->a.get(), v));
        }
        return 0.0;
    }

    static bool depends(const Node* n, std::size_t var) {
        switch (n->kind) {
            case Node::Kind::Num: return false;
            case Node::Kind::Var: return n->var == var;
            default:
                if (n->a && depends(n->a.get(), var)) return true;
                return n->b && depends(n->b.get(), var);
        }
    }

    static NodePtr diff(const NodePtr& n, std::size_t v) {
        using K = Node::Kind;
        switch (n->kind) {
            case K::Num: return num(0.0);
            case K::Var: return num(n->var == v ? 1.0 : 0.0);
            case K::Add: return add(diff(n->a, v), diff(n->b, v));
            case K::Sub: return sub(diff(n->a, v), diff(n->b, v));
            case K::Mul: return add(mul(diff(n->a, v), n->b), mul(n->a, diff(n->b, v)));
            case K::Div:
                // (a/b)' = a'/b - a b'/b^2
                return sub(divi(diff(n->a, v), n->b),
                           divi(mul(n->a, diff(n->b, v)), mul(n->b, n->b)));
            case K::Neg: return neg(diff(n->a, v));
            case K::Sin: return mul(node(K::Cos, n->a), diff(n->a, v));
            case K::Cos: return neg(mul(node(K::Sin, n->a), diff(n->a, v)));
        }
        return num(0.0);
    }

    // constant-folding constructors keep derivative trees small
    static NodePtr add(NodePtr a, NodePtr b) {
        if (is_num(a, 0.0)) return b;
        if (is_num(b, 0.0)) return a;
        return node(Node::Kind::Add, std::move(a), std::move(b));
    }
    static NodePtr sub(NodePtr a, NodePtr b) {
        if (is_num(b, 0.0)) return a;
        if (is_num(a, 0.0)) return node(Node::Kind::Neg, std::move(b));
        return node(Node::Kind::Sub, std::move(a), std::move(b));
    }
    static NodePtr mul(NodePtr a, NodePtr b) {
        if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
        if (is_num(a, 1.0)) return b;
        if (is_num(b, 1.0)) return a;
        return node(Node::Kind::Mul, std::move(a), std::move(b));
    }
    static NodePtr divi(NodePtr a, NodePtr b) {
        if (is_num(a, 0.0)) return num(0.0);
        if (is_num(b, 1.0)) return a;
        return node(Node::Kind::Div, std::move(a), std::move(b));
    }
    static NodePtr neg(NodePtr a) {
        if (is_num(a, 0.0)) return a;
        return node(Node::Kind::Neg, std::move(a));
    }

    // ---- affine analysis -------------------------------------------------

    struct Affine {
        double c0 = 0.0;
        std::vector<double> coef;  // one per variable slot
    };

    std::optional<Affine> affine(const Node* n) const {
        using K = Node::Kind;
        Affine r;
        r.coef.assign(vars_.size(), 0.0);
        switch (n->kind) {
            case K::Num: r.c0 = n->value; return r;
            case K::Var: r.coef[n->var] = 1.0; return r;
            case K::Add:
            case K::Sub: {
                auto a = affine(n->a.get()), b = affine(n->b.get());
                if (!a || !b) return std::nullopt;
                double sgn = n->kind == K::Add ? 1.0 : -1.0;
                r = *a;
                r.c0 += sgn * b->c0;
                for (std::size_t i = 0; i < r.coef.size(); ++i) r.coef[i] += sgn * b->coef[i];
                return r;
            }
            case K::Neg: {
                auto a = affine(n->a.get());
                if (!a) return std::nullopt;
                r.c0 = -a->c0;
                for (std::size_t i = 0; i < r.coef.size(); ++i) r.coef[i] = -a->coef[i];
                return r;
            }
            case K::Mul: {
                auto a = affine(n->a.get()), b = affine(n->b.get());
                if (!a || !b) return std::nullopt;
                auto is_const = [](const Affine& f) {
                    for (double c : f.coef)
                        if (c != 0.0) return false;
                    return true;
                };
                if (is_const(*a)) std::swap(a, b);
                if (!is_const(*b)) return std::nullopt;
                r.c0 = a->c0 * b->c0;
                for (std::size_t i = 0; i < r.coef.size(); ++i) r.coef[i] = a->coef[i] * b->c0;
                return r;
            }
            case K::Div: {
                auto a = affine(n->a.get()), b = affine(n->b.get());
                if (!a || !b) return std::nullopt;
                for (double c : b->coef)
                    if (c != 0.0) return std::nullopt;
                if (b->c0 == 0.0) return std::nullopt;
                r.c0 = a->c0 / b->c0;
                for (std::size_t i = 0; i < r.coef.size(); ++i) r.coef[i] = a->coef[i] / b->c0;
                return r;
            }
            default: return std::nullopt;
        }
    }

    void check_periodic(const Node* n, std::span<const std::size_t> pvars) const {
        using K = Node::Kind;
        constexpr double two_pi = 2.0 * std::numbers::pi;
        switch (n->kind) {
            case K::Num: return;
            case K::Var:
                for (std::size_t p : pvars)
                    if (n->var == p)
                        throw ValidationError("variable '" + vars_[n->var] +
                                              "' appears outside a 2*pi-periodic sin/cos in '" +
                                              text_ + "'");
                return;
            case K::Sin:
            case K::Cos: {
                bool uses = false;
                for (std::size_t p : pvars) uses = uses || depends(n->a.get(), p);
                if (!uses) return;
                auto aff = affine(n->a.get());
                if (!aff)
                    throw ValidationError("trig argument involving a periodic variable must be "
                                          "affine in '" + text_ + "'");
                for (std::size_t p : pvars) {
                    double k = aff->coef[p] / two_pi;
                    if (std::abs(k - std::round(k)) > 1e-9)
                        throw ValidationError("coefficient of '" + vars_[p] +
                                              "' in trig argument is not a 2*pi integer multiple "
                                              "in '" + text_ + "'");
                }
                return;
            }
            default:
                if (n->a) check_periodic(n->a.get(), pvars);
                if (n->b) check_periodic(n->b.get(), pvars);
                return;
        }
    }

    // ---- exponential expansion (for exact means) -------------------------

    using TermMap = std::map<std::vector<long>, std::complex<double>>;

    TermMap expand(const Node* n, std::span<const std::size_t> pvars) const {
        using K = Node::Kind;
        constexpr double two_pi = 2.0 * std::numbers::pi;
        constexpr std::size_t max_terms = 20000;
        TermMap r;
        auto zero_freq = [&] { return std::vector<long>(pvars.size(), 0); };
        switch (n->kind) {
            case K::Num:
                r[zero_freq()] = n->value;
                return r;
            case K::Var:
                throw ValidationError("bare variable '" + vars_[n->var] +
                                      "' is not a trig polynomial term in '" + text_ + "'");
            case K::Add:
            case K::Sub: {
                r = expand(n->a.get(), pvars);
                TermMap b = expand(n->b.get(), pvars);
                double sgn = n->kind == K::Add ? 1.0 : -1.0;
                for (auto& [f, amp] : b) r[f] += sgn * amp;
                return r;
            }
            case K::Neg: {
                r = expand(n->a.get(), pvars);
                for (auto& [f, amp] : r) amp = -amp;
                return r;
            }
            case K::Mul: {
                TermMap a = expand(n->a.get(), pvars), b = expand(n->b.get(), pvars);
                for (const auto& [fa, aa] : a)
                    for (const auto& [fb, ab] : b) {
                        std::vector<long> f(fa.size());
                        for (std::size_t i = 0; i < f.size(); ++i) f[i] = fa[i] + fb[i];
                        r[f] += aa * ab;
                        if (r.size() > max_terms)
                            throw ValidationError("trig expansion too large for '" + text_ + "'");
                    }
                return r;
            }
            case K::Div: {
                TermMap a = expand(n->a.get(), pvars), b = expand(n->b.get(), pvars);
                if (b.size() != 1 || b.begin()->first != zero_freq())
                    throw ValidationError("division by a non-constant blocks the trig expansion "
                                          "of '" + text_ + "'");
                std::complex<double> d = b.begin()->second;
                r = std::move(a);
                for (auto& [f, amp] : r) amp /= d;
                return r;
            }
            case K::Sin:
            case K::Cos: {
                auto aff = affine(n->a.get());
                if (!aff)
                    throw ValidationError("non-affine trig argument blocks the trig expansion "
                                          "of '" + text_ + "'");
                std::vector<long> f(pvars.size(), 0);
                for (std::size_t i = 0; i < pvars.size(); ++i) {
                    double k = aff->coef[pvars[i]] / two_pi;
                    long ki = std::lround(k);
                    if (std::abs(k - static_cast<double>(ki)) > 1e-9)
                        throw ValidationError("non-integer frequency blocks the trig expansion "
                                              "of '" + text_ + "'");
                    f[i] = ki;
                }
                // any leftover dependence on non-listed variables is not expandable
                for (std::size_t v = 0; v < vars_.size(); ++v) {
                    bool listed = false;
                    for (std::size_t p : pvars) listed = listed || p == v;
                    if (!listed && aff->coef[v] != 0.0)
                        throw ValidationError("trig argument depends on non-averaged variable "
                                              "'" + vars_[v] + "' in '" + text_ + "'");
                }
                std::complex<double> phase = std::exp(std::complex<double>(0.0, aff->c0));
                std::vector<long> fneg(f.size());
                for (std::size_t i = 0; i < f.size(); ++i) fneg[i] = -f[i];
                if (n->kind == K::Sin) {
                    const std::complex<double> half_i(0.0, 0.5);
                    r[f] += phase * std::complex<double>(0.0, -0.5);
                    r[fneg] += std::conj(phase) * half_i;
                } else {
                    r[f] += 0.5 * phase;
                    r[fneg] += 0.5 * std::conj(phase);
                }
                return r;
            }
        }
        return r;
    }

    // ---- parser ----------------------------------------------------------

    class Parser {
    public:
        Parser(const std::string& text, const std::vector<std::string>& vars,
               const std::map<std::string, std::size_t>& aliases)
            : s_(text), vars_(vars), aliases_(aliases) {}

        NodePtr parse_expr() {
            NodePtr a = parse_term();
            for (;;) {
                skip_ws();
                if (accept('+'))
                    a = node(Node::Kind::Add, a, parse_term());
                else if (accept('-'))
                    a = node(Node::Kind::Sub, a, parse_term());
                else
                    return a;
            }
        }

        void expect_end() {
            skip_ws();
            if (pos_ != s_.size())
                throw ParseError("unexpected trailing input at '" + s_.substr(pos_) + "'");
        }

    private:
        const std::string& s_;
        std::size_t pos_ = 0;
        const std::vector<std::string>& vars_;
        const std::map<std::string, std::size_t>& aliases_;

        void skip_ws() {
            while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }
        bool accept(char c) {
            if (pos_ < s_.size() && s_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        NodePtr parse_term() {
            NodePtr a = parse_unary();
            for (;;) {
                skip_ws();
                if (accept('*'))
                    a = node(Node::Kind::Mul, a, parse_unary());
                else if (accept('/'))
                    a = node(Node::Kind::Div, a, parse_unary());
                else
                    return a;
            }
        }

        NodePtr parse_unary() {
            skip_ws();
            if (accept('-')) return node(Node::Kind::Neg, parse_unary());
            return parse_primary();
        }

        NodePtr parse_primary() {
            skip_ws();
            if (pos_ >= s_.size()) throw ParseError("unexpected end of expression '" + s_ + "'");
            char c = s_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
            if (accept('(')) {
                NodePtr e = parse_expr();
                skip_ws();
                if (!accept(')')) throw ParseError("missing ')' in '" + s_ + "'");
                return e;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
            throw ParseError(std::string("unexpected character '") + c + "' in '" + s_ + "'");
        }

        NodePtr parse_number() {
            std::size_t end = pos_;
            while (end < s_.size() &&
                   (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                    s_[end] == 'e' || s_[end] == 'E' ||
                    ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
                     (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
                ++end;
            const std::string tok = s_.substr(pos_, end - pos_);
            try {
                std::size_t used = 0;
                double v = std::stod(tok, &used);
                if (used != tok.size()) throw ParseError("bad number '" + tok + "'");
                pos_ = end;
                return num(v);
            } catch (const std::exception&) {
                throw ParseError("bad number '" + tok + "' in '" + s_ + "'");
            }
        }

        NodePtr parse_ident() {
            std::size_t end = pos_;
            while (end < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
                ++end;
            std::string name = s_.substr(pos_, end - pos_);
            pos_ = end;
            if (name == "pi") return num(std::numbers::pi);
            if (name == "sin" || name == "cos") {
                skip_ws();
                if (!accept('(')) throw ParseError(name + " must be followed by '(' in '" + s_ + "'");
                NodePtr arg = parse_expr();
                skip_ws();
                if (!accept(')')) throw ParseError("missing ')' after " + name + " in '" + s_ + "'");
                return node(name == "sin" ? Node::Kind::Sin : Node::Kind::Cos, arg);
            }
            for (std::size_t i = 0; i < vars_.size(); ++i)
                if (vars_[i] == name) return var(i);
            if (auto it = aliases_.find(name); it != aliases_.end()) return var(it->second);
            throw ParseError("unknown identifier '" + name + "' in '" + s_ + "'");
        }
    };
};

}  // namespace homog
