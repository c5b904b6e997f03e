#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ergq/common.hpp"
#include "ergq/flow.hpp"

namespace ergq {

namespace detail {
class ExprParser;
}

/// Small arithmetic-expression compiler used for user-supplied vector
/// fields. Supports + - * / ^, parentheses, a set of math functions, named
/// parameters (folded to constants at parse time), the constants pi and e,
/// the time variable t, and state variables x1..xD (x, y, z alias the first
/// three axes). Compiles to a stack program; evaluation is allocation-free.
class ExprProgram {
 public:
  /// slots layout at eval time: [x_0 .. x_{D-1}, t]
  static ExprProgram compile(const std::string& text, int dim,
                             const std::map<std::string, double>& params);

  double eval(std::span<const double> slots) const {
    double stack[64];
    int top = -1;
    for (const Instr& in : code_) {
      switch (in.op) {
        case Op::Push:
          stack[++top] = in.value;
          break;
        case Op::Load:
          stack[++top] = slots[static_cast<std::size_t>(in.slot)];
          break;
        case Op::Neg:
          stack[top] = -stack[top];
          break;
        case Op::Add:
          stack[top - 1] += stack[top];
          --top;
          break;
        case Op::Sub:
          stack[top - 1] -= stack[top];
          --top;
          break;
        case Op::Mul:
          stack[top - 1] *= stack[top];
          --top;
          break;
        case Op::Div:
          stack[top - 1] /= stack[top];
          --top;
          break;
        case Op::Pow:
          stack[top - 1] = std::pow(stack[top - 1], stack[top]);
          --top;
          break;
        case Op::Fn1:
          stack[top] = in.f1(stack[top]);
          break;
        case Op::Fn2:
          stack[top - 1] = in.f2(stack[top - 1], stack[top]);
          --top;
          break;
      }
    }
    return stack[0];
  }

  bool uses_time() const { return uses_time_; }
  int dim() const { return dim_; }

 private:
  friend class detail::ExprParser;

  enum class Op : std::uint8_t { Push, Load, Neg, Add, Sub, Mul, Div, Pow, Fn1, Fn2 };
  struct Instr {
    Op op;
    double value = 0.0;
    int slot = 0;
    double (*f1)(double) = nullptr;
    double (*f2)(double, double) = nullptr;
  };

  std::vector<Instr> code_;
  bool uses_time_ = false;
  int dim_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;

  void emit(Instr in, int stack_delta) {
    code_.push_back(in);
    depth_ += stack_delta;
    if (depth_ > max_depth_) max_depth_ = depth_;
    if (max_depth_ > 63) throw ConfigError("expression: too deeply nested");
  }
};

namespace detail {

class ExprParser {
 public:
  ExprParser(const std::string& text, int dim, const std::map<std::string, double>& params)
      : text_(text), dim_(dim), params_(params) {}

  ExprProgram run() {
    parse_expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ConfigError("expression: unexpected input at position " + std::to_string(pos_) +
                        " in '" + text_ + "'");
    return std::move(prog_);
  }

 private:
  using Op = ExprProgram::Op;
  using Instr = ExprProgram::Instr;

  const std::string& text_;
  int dim_;
  const std::map<std::string, double>& params_;
  std::size_t pos_ = 0;
  ExprProgram prog_;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  void parse_expr() {
    parse_term();
    for (;;) {
      if (accept('+')) {
        parse_term();
        prog_.emit({Op::Add}, -1);
      } else if (accept('-')) {
        parse_term();
        prog_.emit({Op::Sub}, -1);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        prog_.emit({Op::Mul}, -1);
      } else if (accept('/')) {
        parse_unary();
        prog_.emit({Op::Div}, -1);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    bool negate = false;
    for (;;) {
      if (accept('-'))
        negate = !negate;
      else if (accept('+'))
        ;
      else
        break;
    }
    parse_power();
    if (negate) prog_.emit({Op::Neg}, 0);
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();  // right-associative
      prog_.emit({Op::Pow}, -1);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ConfigError("expression: unexpected end of input");
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    if (c == '(') {
      ++pos_;
      parse_expr();
      if (!accept(')')) throw ConfigError("expression: missing ')'");
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      parse_ident();
      return;
    }
    throw ConfigError(std::string("expression: unexpected character '") + c + "'");
  }

  void parse_number() {
    const char* start = text_.c_str() + pos_;
    char* after = nullptr;
    double v = std::strtod(start, &after);
    if (after == start) throw ConfigError("expression: malformed number");
    pos_ += static_cast<std::size_t>(after - start);
    Instr in{Op::Push};
    in.value = v;
    prog_.emit(in, +1);
  }

  void parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);

    if (peek() == '(') {
      parse_call(name);
      return;
    }

    if (name == "pi") return push_const(std::numbers::pi);
    if (name == "e") return push_const(std::numbers::e);

    if (name == "t") {
      Instr in{Op::Load};
      in.slot = dim_;
      prog_.uses_time_ = true;
      prog_.emit(in, +1);
      return;
    }

    // state variables: x/y/z aliases, then x1..xD
    int slot = -1;
    if (name == "x" && dim_ >= 1)
      slot = 0;
    else if (name == "y" && dim_ >= 2)
      slot = 1;
    else if (name == "z" && dim_ >= 3)
      slot = 2;
    else if (name.size() >= 2 && name[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) digits = false;
      if (digits) {
        int idx = std::stoi(name.substr(1));
        if (idx >= 1 && idx <= dim_) slot = idx - 1;
      }
    }
    if (slot >= 0) {
      Instr in{Op::Load};
      in.slot = slot;
      prog_.emit(in, +1);
      return;
    }

    auto it = params_.find(name);
    if (it != params_.end()) return push_const(it->second);

    throw ConfigError("expression: unknown identifier '" + name + "'");
  }

  void push_const(double v) {
    Instr in{Op::Push};
    in.value = v;
    prog_.emit(in, +1);
  }

  void parse_call(const std::string& name) {
    struct Fn1Entry {
      const char* name;
      double (*f)(double);
    };
    struct Fn2Entry {
      const char* name;
      double (*f)(double, double);
    };
    static const Fn1Entry fns1[] = {
        {"sin", [](double v) { return std::sin(v); }},
        {"cos", [](double v) { return std::cos(v); }},
        {"tan", [](double v) { return std::tan(v); }},
        {"asin", [](double v) { return std::asin(v); }},
        {"acos", [](double v) { return std::acos(v); }},
        {"atan", [](double v) { return std::atan(v); }},
        {"sinh", [](double v) { return std::sinh(v); }},
        {"cosh", [](double v) { return std::cosh(v); }},
        {"tanh", [](double v) { return std::tanh(v); }},
        {"exp", [](double v) { return std::exp(v); }},
        {"log", [](double v) { return std::log(v); }},
        {"log10", [](double v) { return std::log10(v); }},
        {"sqrt", [](double v) { return std::sqrt(v); }},
        {"abs", [](double v) { return std::abs(v); }},
        {"floor", [](double v) { return std::floor(v); }},
        {"ceil", [](double v) { return std::ceil(v); }},
    };
    static const Fn2Entry fns2[] = {
        {"pow", [](double a, double b) { return std::pow(a, b); }},
        {"atan2", [](double a, double b) { return std::atan2(a, b); }},
        {"min", [](double a, double b) { return std::min(a, b); }},
        {"max", [](double a, double b) { return std::max(a, b); }},
        {"mod", [](double a, double b) { return a - b * std::floor(a / b); }},
    };

    if (!accept('(')) throw ConfigError("expression: expected '('");
    for (const auto& f : fns1) {
      if (name == f.name) {
        parse_expr();
        if (!accept(')')) throw ConfigError("expression: missing ')' after " + name);
        Instr in{Op::Fn1};
        in.f1 = f.f;
        prog_.emit(in, 0);
        return;
      }
    }
    for (const auto& f : fns2) {
      if (name == f.name) {
        parse_expr();
        if (!accept(',')) throw ConfigError("expression: " + name + " takes two arguments");
        parse_expr();
        if (!accept(')')) throw ConfigError("expression: missing ')' after " + name);
        Instr in{Op::Fn2};
        in.f2 = f.f;
        prog_.emit(in, -1);
        return;
      }
    }
    throw ConfigError("expression: unknown function '" + name + "'");
  }
};

}  // namespace detail

inline ExprProgram ExprProgram::compile(const std::string& text, int dim,
                                        const std::map<std::string, double>& params) {
  detail::ExprParser p(text, dim, params);
  ExprProgram prog = p.run();
  prog.dim_ = dim;
  return prog;
}

/// Builds a FlowSystem whose rhs evaluates one compiled expression per axis.
inline FlowSystem expression_system(const std::vector<std::string>& expressions,
                                    const std::map<std::string, double>& params,
                                    std::vector<Interval> domain,
                                    std::vector<bool> periodic_axes) {
  const int dim = static_cast<int>(expressions.size());
  if (dim == 0) throw ConfigError("expression system: no expressions given");
  if (dim > 31) throw ConfigError("expression system: at most 31 axes supported");
  if (domain.size() != expressions.size())
    throw ConfigError("expression system: domain must list one interval per axis");
  if (periodic_axes.empty()) periodic_axes.assign(expressions.size(), false);
  if (periodic_axes.size() != expressions.size())
    throw ConfigError("expression system: periodic flags must match axis count");

  auto programs = std::make_shared<std::vector<ExprProgram>>();
  bool uses_time = false;
  for (const auto& text : expressions) {
    programs->push_back(ExprProgram::compile(text, dim, params));
    uses_time = uses_time || programs->back().uses_time();
  }

  FlowSystem sys;
  sys.name = "expression";
  sys.dim = dim;
  sys.domain = std::move(domain);
  sys.periodic_axes = std::move(periodic_axes);
  sys.time_dependent = uses_time;
  sys.rhs = [programs, dim](std::span<const double> x, double t, std::span<double> out) {
    double slots[32];
    for (int i = 0; i < dim; ++i) slots[i] = x[static_cast<std::size_t>(i)];
    slots[dim] = t;
    std::span<const double> s(slots, static_cast<std::size_t>(dim) + 1);
    for (int i = 0; i < dim; ++i)
      out[static_cast<std::size_t>(i)] = (*programs)[static_cast<std::size_t>(i)].eval(s);
  };
  return sys;
}

}  // namespace ergq
