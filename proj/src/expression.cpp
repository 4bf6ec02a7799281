#include "hjblab/expression.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace hjb {

namespace {

struct Node {
    virtual ~Node() = default;
    virtual double eval(double x, double y) const = 0;
};

using NodePtr = std::shared_ptr<const Node>;

struct Const : Node {
    double v;
    explicit Const(double v) : v(v) {}
    double eval(double, double) const override { return v; }
};

struct Var : Node {
    bool is_x;
    explicit Var(bool is_x) : is_x(is_x) {}
    double eval(double x, double y) const override { return is_x ? x : y; }
};

struct Binary : Node {
    char op;
    NodePtr a, b;
    Binary(char op, NodePtr a, NodePtr b) : op(op), a(std::move(a)), b(std::move(b)) {}
    double eval(double x, double y) const override {
        const double u = a->eval(x, y);
        const double v = b->eval(x, y);
        switch (op) {
            case '+': return u + v;
            case '-': return u - v;
            case '*': return u * v;
            case '/': return u / v;
            default: return std::pow(u, v);
        }
    }
};

struct Unary : Node {
    double (*fn)(double);
    NodePtr a;
    Unary(double (*fn)(double), NodePtr a) : fn(fn), a(std::move(a)) {}
    double eval(double x, double y) const override { return fn(a->eval(x, y)); }
};

struct Binary2 : Node {
    double (*fn)(double, double);
    NodePtr a, b;
    Binary2(double (*fn)(double, double), NodePtr a, NodePtr b)
        : fn(fn), a(std::move(a)), b(std::move(b)) {}
    double eval(double x, double y) const override {
        return fn(a->eval(x, y), b->eval(x, y));
    }
};

double sign_fn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }
double min_fn(double a, double b) { return std::min(a, b); }
double max_fn(double a, double b) { return std::max(a, b); }

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse() {
        NodePtr n = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing input");
        return n;
    }

private:
    const std::string& s_;
    size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression error at position " +
                                    std::to_string(pos_) + " in \"" + s_ + "\": " + what);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    // expr := term (('+'|'-') term)*
    NodePtr expr() {
        NodePtr n = term();
        for (;;) {
            if (eat('+')) n = std::make_shared<Binary>('+', n, term());
            else if (eat('-')) n = std::make_shared<Binary>('-', n, term());
            else return n;
        }
    }

    // term := factor (('*'|'/') factor)*
    NodePtr term() {
        NodePtr n = factor();
        for (;;) {
            if (eat('*')) n = std::make_shared<Binary>('*', n, factor());
            else if (eat('/')) n = std::make_shared<Binary>('/', n, factor());
            else return n;
        }
    }

    // factor := unary ('^' factor)?   (right associative)
    NodePtr factor() {
        NodePtr n = unary();
        if (eat('^')) return std::make_shared<Binary>('^', n, factor());
        return n;
    }

    NodePtr unary() {
        if (eat('-')) return std::make_shared<Binary>('-', std::make_shared<Const>(0.0), unary());
        if (eat('+')) return unary();
        return atom();
    }

    NodePtr atom() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
        if (eat('(')) {
            NodePtr n = expr();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        fail("unexpected character");
    }

    NodePtr number() {
        size_t end = 0;
        double v = 0.0;
        try {
            v = std::stod(s_.substr(pos_), &end);
        } catch (const std::exception&) {
            fail("bad number");
        }
        pos_ += end;
        return std::make_shared<Const>(v);
    }

    NodePtr name() {
        const size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        const std::string id = s_.substr(start, pos_ - start);

        if (id == "x") return std::make_shared<Var>(true);
        if (id == "y") return std::make_shared<Var>(false);
        if (id == "pi") return std::make_shared<Const>(M_PI);
        if (id == "e") return std::make_shared<Const>(M_E);

        static const std::map<std::string, double (*)(double)> unary_fns = {
            {"sin", [](double v) { return std::sin(v); }},
            {"cos", [](double v) { return std::cos(v); }},
            {"tan", [](double v) { return std::tan(v); }},
            {"exp", [](double v) { return std::exp(v); }},
            {"log", [](double v) { return std::log(v); }},
            {"sqrt", [](double v) { return std::sqrt(v); }},
            {"abs", [](double v) { return std::abs(v); }},
            {"tanh", [](double v) { return std::tanh(v); }},
            {"sign", sign_fn},
        };
        static const std::map<std::string, double (*)(double, double)> binary_fns = {
            {"min", min_fn},
            {"max", max_fn},
            {"pow", [](double a, double b) { return std::pow(a, b); }},
        };

        if (auto it = unary_fns.find(id); it != unary_fns.end()) {
            if (!eat('(')) fail("expected '(' after " + id);
            NodePtr a = expr();
            if (!eat(')')) fail("missing ')'");
            return std::make_shared<Unary>(it->second, a);
        }
        if (auto it = binary_fns.find(id); it != binary_fns.end()) {
            if (!eat('(')) fail("expected '(' after " + id);
            NodePtr a = expr();
            if (!eat(',')) fail("expected ',' in " + id);
            NodePtr b = expr();
            if (!eat(')')) fail("missing ')'");
            return std::make_shared<Binary2>(it->second, a, b);
        }
        pos_ = start;
        fail("unknown identifier '" + id + "'");
    }
};

} // namespace

ScalarField compile_expression(const std::string& text) {
    Parser p(text);
    NodePtr root = p.parse();
    return [root](double x, double y) { return root->eval(x, y); };
}

ScalarField constant_field(double value) {
    return [value](double, double) { return value; };
}

} // namespace hjb
