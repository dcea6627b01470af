#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace oswitch {

struct ExprError : std::runtime_error {
  ExprError(const std::string& msg, std::size_t pos, std::size_t len)
      : std::runtime_error(msg), pos(pos), len(len) {}
  std::size_t pos;  // offset into the source text
  std::size_t len;
};

/// Variable bindings for evaluation. y holds y1..ym in order.
struct Bindings {
  double t = 0.0;
  double x = 0.0;
  std::span<const double> y{};
  bool has_t = false;
  bool has_x = false;

  static Bindings tx(double t, double x) {
    Bindings b;
    b.t = t;
    b.x = x;
    b.has_t = b.has_x = true;
    return b;
  }
  static Bindings txy(double t, double x, std::span<const double> y) {
    Bindings b = tx(t, x);
    b.y = y;
    return b;
  }
};

/// Arithmetic expression over variables {t, x, y1..ym}, constants and
/// {+, -, *, /, ^, unary -, exp, log, sqrt, abs, min, max}.
class Expr {
 public:
  Expr() = default;

  /// Parses source text; throws ExprError with the offending span.
  static Expr parse(std::string_view src);

  /// Convenience: expression that is identically the given constant.
  static Expr constant(double v);

  double eval(const Bindings& b) const;

  bool uses_t() const;
  bool uses_x() const;
  /// Largest k such that y_k appears (0 when no y variable appears).
  int max_y_index() const;
  bool uses_y(int k) const;  // 1-based

  /// Renders a parseable form; parse(to_string()) evaluates identically.
  std::string to_string() const;

  bool empty() const { return nodes_.empty(); }

 private:
  enum class Op : std::uint8_t {
    kConst, kVarT, kVarX, kVarY,
    kAdd, kSub, kMul, kDiv, kPow, kNeg,
    kExp, kLog, kSqrt, kAbs, kMin, kMax
  };
  struct Node {
    Op op;
    double value = 0.0;  // kConst
    int a = -1, b = -1;  // child indices
    int y_index = 0;     // kVarY, 1-based
    std::uint32_t pos = 0, len = 0;
  };

  double eval_node(int idx, const Bindings& b) const;
  void print_node(int idx, std::string& out, int parent_prec, bool right_side) const;

  std::vector<Node> nodes_;
  int root_ = -1;
  friend class ExprParser;
};

}  // namespace oswitch
