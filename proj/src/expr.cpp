#include "oswitch/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace oswitch {

namespace {

struct Token {
  enum class Kind { kNumber, kIdent, kPlus, kMinus, kStar, kSlash, kCaret, kLParen, kRParen, kComma, kEnd };
  Kind kind;
  double number = 0.0;
  std::string text;
  std::size_t pos = 0, len = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    Token tok;
    tok.pos = i_;
    if (i_ >= src_.size()) {
      tok.kind = Token::Kind::kEnd;
      tok.len = 0;
      return tok;
    }
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.data() + i_;
      char* end = nullptr;
      tok.number = std::strtod(begin, &end);
      if (end == begin) throw ExprError("malformed number", i_, 1);
      tok.kind = Token::Kind::kNumber;
      tok.len = static_cast<std::size_t>(end - begin);
      i_ += tok.len;
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok.kind = Token::Kind::kIdent;
      tok.text = std::string(src_.substr(i_, j - i_));
      tok.len = j - i_;
      i_ = j;
      return tok;
    }
    tok.len = 1;
    ++i_;
    switch (c) {
      case '+': tok.kind = Token::Kind::kPlus; return tok;
      case '-': tok.kind = Token::Kind::kMinus; return tok;
      case '*': tok.kind = Token::Kind::kStar; return tok;
      case '/': tok.kind = Token::Kind::kSlash; return tok;
      case '^': tok.kind = Token::Kind::kCaret; return tok;
      case '(': tok.kind = Token::Kind::kLParen; return tok;
      case ')': tok.kind = Token::Kind::kRParen; return tok;
      case ',': tok.kind = Token::Kind::kComma; return tok;
      default:
        throw ExprError(std::string("unexpected character '") + c + "'", tok.pos, 1);
    }
  }

 private:
  std::string_view src_;
  std::size_t i_ = 0;
};

}  // namespace

class ExprParser {
 public:
  explicit ExprParser(std::string_view src) : lexer_(src) { advance(); }

  Expr run() {
    Expr e;
    nodes_ = &e.nodes_;
    e.root_ = parse_sum();
    expect(Token::Kind::kEnd, "trailing input after expression");
    return e;
  }

 private:
  using Op = Expr::Op;

  void advance() { cur_ = lexer_.next(); }

  void expect(Token::Kind k, const char* msg) {
    if (cur_.kind != k) throw ExprError(msg, cur_.pos, std::max<std::size_t>(cur_.len, 1));
    if (k != Token::Kind::kEnd) advance();
  }

  int add_node(Expr::Node n) {
    nodes_->push_back(n);
    return static_cast<int>(nodes_->size()) - 1;
  }

  int parse_sum() {
    int lhs = parse_product();
    for (;;) {
      if (cur_.kind == Token::Kind::kPlus || cur_.kind == Token::Kind::kMinus) {
        const bool plus = cur_.kind == Token::Kind::kPlus;
        const auto pos = cur_.pos;
        advance();
        int rhs = parse_product();
        Expr::Node n;
        n.op = plus ? Op::kAdd : Op::kSub;
        n.a = lhs;
        n.b = rhs;
        n.pos = static_cast<std::uint32_t>(pos);
        n.len = 1;
        lhs = add_node(n);
      } else {
        return lhs;
      }
    }
  }

  int parse_product() {
    int lhs = parse_unary();
    for (;;) {
      if (cur_.kind == Token::Kind::kStar || cur_.kind == Token::Kind::kSlash) {
        const bool mul = cur_.kind == Token::Kind::kStar;
        const auto pos = cur_.pos;
        advance();
        int rhs = parse_unary();
        Expr::Node n;
        n.op = mul ? Op::kMul : Op::kDiv;
        n.a = lhs;
        n.b = rhs;
        n.pos = static_cast<std::uint32_t>(pos);
        n.len = 1;
        lhs = add_node(n);
      } else {
        return lhs;
      }
    }
  }

  // '^' binds tighter than unary minus on the left and is right associative:
  // -x^2 is -(x^2), 2^3^2 is 2^(3^2), x^-2 is x^(-2).
  int parse_unary() {
    if (cur_.kind == Token::Kind::kMinus) {
      const auto pos = cur_.pos;
      advance();
      int operand = parse_unary();
      Expr::Node n;
      n.op = Op::kNeg;
      n.a = operand;
      n.pos = static_cast<std::uint32_t>(pos);
      n.len = 1;
      return add_node(n);
    }
    if (cur_.kind == Token::Kind::kPlus) {
      advance();
      return parse_unary();
    }
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    if (cur_.kind == Token::Kind::kCaret) {
      const auto pos = cur_.pos;
      advance();
      int exponent = parse_unary();
      Expr::Node n;
      n.op = Op::kPow;
      n.a = base;
      n.b = exponent;
      n.pos = static_cast<std::uint32_t>(pos);
      n.len = 1;
      return add_node(n);
    }
    return base;
  }

  int parse_primary() {
    if (cur_.kind == Token::Kind::kNumber) {
      Expr::Node n;
      n.op = Op::kConst;
      n.value = cur_.number;
      n.pos = static_cast<std::uint32_t>(cur_.pos);
      n.len = static_cast<std::uint32_t>(cur_.len);
      advance();
      return add_node(n);
    }
    if (cur_.kind == Token::Kind::kLParen) {
      advance();
      int inner = parse_sum();
      expect(Token::Kind::kRParen, "expected ')'");
      return inner;
    }
    if (cur_.kind == Token::Kind::kIdent) {
      Token ident = cur_;
      advance();
      if (cur_.kind == Token::Kind::kLParen) return parse_call(ident);
      return parse_variable(ident);
    }
    throw ExprError("expected a number, variable, function or '('", cur_.pos,
                    std::max<std::size_t>(cur_.len, 1));
  }

  int parse_variable(const Token& ident) {
    Expr::Node n;
    n.pos = static_cast<std::uint32_t>(ident.pos);
    n.len = static_cast<std::uint32_t>(ident.len);
    if (ident.text == "t") {
      n.op = Op::kVarT;
    } else if (ident.text == "x") {
      n.op = Op::kVarX;
    } else if (ident.text.size() >= 2 && ident.text[0] == 'y') {
      int k = 0;
      for (std::size_t i = 1; i < ident.text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(ident.text[i])))
          throw ExprError("unknown variable '" + ident.text + "'", ident.pos, ident.len);
        k = 10 * k + (ident.text[i] - '0');
      }
      if (k < 1) throw ExprError("y indices start at 1", ident.pos, ident.len);
      n.op = Op::kVarY;
      n.y_index = k;
    } else {
      throw ExprError("unknown variable '" + ident.text + "'", ident.pos, ident.len);
    }
    return add_node(n);
  }

  int parse_call(const Token& ident) {
    Op op;
    int arity;
    if (ident.text == "exp") { op = Op::kExp; arity = 1; }
    else if (ident.text == "log") { op = Op::kLog; arity = 1; }
    else if (ident.text == "sqrt") { op = Op::kSqrt; arity = 1; }
    else if (ident.text == "abs") { op = Op::kAbs; arity = 1; }
    else if (ident.text == "min") { op = Op::kMin; arity = 2; }
    else if (ident.text == "max") { op = Op::kMax; arity = 2; }
    else throw ExprError("unknown function '" + ident.text + "'", ident.pos, ident.len);

    expect(Token::Kind::kLParen, "expected '('");
    int first = parse_sum();
    int second = -1;
    if (arity == 2) {
      expect(Token::Kind::kComma, "function takes two arguments");
      second = parse_sum();
    }
    expect(Token::Kind::kRParen, "expected ')'");

    Expr::Node n;
    n.op = op;
    n.a = first;
    n.b = second;
    n.pos = static_cast<std::uint32_t>(ident.pos);
    n.len = static_cast<std::uint32_t>(ident.len);
    return add_node(n);
  }

  Lexer lexer_;
  Token cur_;
  std::vector<Expr::Node>* nodes_ = nullptr;
};

Expr Expr::parse(std::string_view src) { return ExprParser(src).run(); }

Expr Expr::constant(double v) {
  Expr e;
  Node n;
  n.op = Op::kConst;
  n.value = v;
  e.nodes_.push_back(n);
  e.root_ = 0;
  return e;
}

double Expr::eval(const Bindings& b) const {
  if (root_ < 0) throw std::logic_error("eval of empty expression");
  return eval_node(root_, b);
}

double Expr::eval_node(int idx, const Bindings& b) const {
  const Node& n = nodes_[idx];
  switch (n.op) {
    case Op::kConst: return n.value;
    case Op::kVarT:
      if (!b.has_t) throw ExprError("variable 't' is not bound here", n.pos, n.len);
      return b.t;
    case Op::kVarX:
      if (!b.has_x) throw ExprError("variable 'x' is not bound here", n.pos, n.len);
      return b.x;
    case Op::kVarY:
      if (n.y_index > static_cast<int>(b.y.size()))
        throw ExprError("variable 'y" + std::to_string(n.y_index) + "' is not bound here",
                        n.pos, n.len);
      return b.y[n.y_index - 1];
    case Op::kAdd: return eval_node(n.a, b) + eval_node(n.b, b);
    case Op::kSub: return eval_node(n.a, b) - eval_node(n.b, b);
    case Op::kMul: return eval_node(n.a, b) * eval_node(n.b, b);
    case Op::kDiv: {
      const double d = eval_node(n.b, b);
      if (d == 0.0) throw ExprError("division by zero", n.pos, n.len);
      return eval_node(n.a, b) / d;
    }
    case Op::kPow: {
      const double base = eval_node(n.a, b);
      const double e = eval_node(n.b, b);
      const double r = std::pow(base, e);
      if (std::isnan(r)) throw ExprError("pow outside real domain", n.pos, n.len);
      return r;
    }
    case Op::kNeg: return -eval_node(n.a, b);
    case Op::kExp: return std::exp(eval_node(n.a, b));
    case Op::kLog: {
      const double v = eval_node(n.a, b);
      if (v <= 0.0) throw ExprError("log of a non-positive value", n.pos, n.len);
      return std::log(v);
    }
    case Op::kSqrt: {
      const double v = eval_node(n.a, b);
      if (v < 0.0) throw ExprError("sqrt of a negative value", n.pos, n.len);
      return std::sqrt(v);
    }
    case Op::kAbs: return std::abs(eval_node(n.a, b));
    case Op::kMin: return std::min(eval_node(n.a, b), eval_node(n.b, b));
    case Op::kMax: return std::max(eval_node(n.a, b), eval_node(n.b, b));
  }
  throw std::logic_error("corrupt expression node");
}

bool Expr::uses_t() const {
  for (const Node& n : nodes_)
    if (n.op == Op::kVarT) return true;
  return false;
}

bool Expr::uses_x() const {
  for (const Node& n : nodes_)
    if (n.op == Op::kVarX) return true;
  return false;
}

int Expr::max_y_index() const {
  int k = 0;
  for (const Node& n : nodes_)
    if (n.op == Op::kVarY) k = std::max(k, n.y_index);
  return k;
}

bool Expr::uses_y(int k) const {
  for (const Node& n : nodes_)
    if (n.op == Op::kVarY && n.y_index == k) return true;
  return false;
}

namespace {
int precedence_of(int op_class) { return op_class; }
}  // namespace

void Expr::print_node(int idx, std::string& out, int parent_prec, bool right_side) const {
  const Node& n = nodes_[idx];
  auto binary = [&](const char* sym, int prec, bool assoc_breaks_right) {
    const bool need_parens = prec < parent_prec || (prec == parent_prec && right_side && assoc_breaks_right);
    if (need_parens) out += '(';
    print_node(n.a, out, prec, false);
    out += sym;
    print_node(n.b, out, prec + (assoc_breaks_right ? 1 : 0), true);
    if (need_parens) out += ')';
  };
  auto call = [&](const char* name) {
    out += name;
    out += '(';
    print_node(n.a, out, 0, false);
    if (n.b >= 0) {
      out += ", ";
      print_node(n.b, out, 0, false);
    }
    out += ')';
  };
  switch (n.op) {
    case Op::kConst: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", n.value);
      if (n.value < 0 && parent_prec > 0) {
        out += '(';
        out += buf;
        out += ')';
      } else {
        out += buf;
      }
      return;
    }
    case Op::kVarT: out += 't'; return;
    case Op::kVarX: out += 'x'; return;
    case Op::kVarY: out += 'y' + std::to_string(n.y_index); return;
    case Op::kAdd: binary(" + ", precedence_of(1), false); return;
    case Op::kSub: binary(" - ", precedence_of(1), true); return;
    case Op::kMul: binary(" * ", precedence_of(2), false); return;
    case Op::kDiv: binary(" / ", precedence_of(2), true); return;
    case Op::kPow: {
      const int prec = 4;
      out += '(';
      print_node(n.a, out, prec + 1, false);
      out += '^';
      print_node(n.b, out, prec, true);
      out += ')';
      return;
    }
    case Op::kNeg: {
      const int prec = 3;
      const bool need_parens = prec < parent_prec;
      if (need_parens) out += '(';
      out += '-';
      print_node(n.a, out, prec, true);
      if (need_parens) out += ')';
      return;
    }
    case Op::kExp: call("exp"); return;
    case Op::kLog: call("log"); return;
    case Op::kSqrt: call("sqrt"); return;
    case Op::kAbs: call("abs"); return;
    case Op::kMin: call("min"); return;
    case Op::kMax: call("max"); return;
  }
}

std::string Expr::to_string() const {
  if (root_ < 0) return "0";
  std::string out;
  print_node(root_, out, 0, false);
  return out;
}

}  // namespace oswitch
