// Kernel DSL (.kdl) lexer, parser and printer. Grammar: docs/kdl.md.

#include <cctype>
#include <optional>
#include <sstream>

#include "dough/kernel.hpp"

namespace dough {

namespace {

enum class Tok {
  End,
  Ident,
  Int,
  LBracket,
  RBracket,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Semi,
  Plus,
  Minus,
  Star,
  Amp,
  Pipe,
  Caret,
  Less,
  Shl,
  Shr,
  Assign,
  PlusAssign,
  DotDot,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t value = 0;
  int line = 1;
  int column = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n = 1) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    const char ch = src[i];
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') advance();
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      advance();
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::Int;
      t.text = std::string(src.substr(i, j - i));
      try {
        t.value = std::stoll(t.text);
      } catch (const std::exception&) {
        throw ParseError(line, col, "integer literal out of range");
      }
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    auto two = [&](const char* s) { return src.substr(i, 2) == s; };
    std::size_t len = 1;
    if (two("..")) {
      t.kind = Tok::DotDot;
      len = 2;
    } else if (two("+=")) {
      t.kind = Tok::PlusAssign;
      len = 2;
    } else if (two("<<")) {
      t.kind = Tok::Shl;
      len = 2;
    } else if (two(">>")) {
      t.kind = Tok::Shr;
      len = 2;
    } else {
      switch (ch) {
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '{': t.kind = Tok::LBrace; break;
        case '}': t.kind = Tok::RBrace; break;
        case ',': t.kind = Tok::Comma; break;
        case ';': t.kind = Tok::Semi; break;
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '*': t.kind = Tok::Star; break;
        case '&': t.kind = Tok::Amp; break;
        case '|': t.kind = Tok::Pipe; break;
        case '^': t.kind = Tok::Caret; break;
        case '<': t.kind = Tok::Less; break;
        case '=': t.kind = Tok::Assign; break;
        default:
          throw ParseError(line, col, std::string("unexpected character '") + ch + "'");
      }
    }
    t.text = std::string(src.substr(i, len));
    advance(len);
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

// Affine form over loop variables, used while parsing index expressions.
struct Affine {
  std::vector<std::int64_t> coeffs;
  std::int64_t constant = 0;
  bool is_const() const {
    for (auto c : coeffs)
      if (c) return false;
    return true;
  }
};

struct PendingArray {
  std::string name;
  std::optional<ArrayRole> role;
  std::optional<Shape> extents;
  bool declared = false;
  int line = 0;
  int column = 0;
};

class Parser {
 public:
  Parser(std::string_view text, std::string_view name) : toks_(lex(text)), name_(name) {}

  LoopKernel parse() {
    LoopKernel k;
    k.name = name_;
    if (peek_ident("kernel")) {
      next();
      k.name = expect(Tok::Ident, "kernel name").text;
      expect(Tok::Semi, "';'");
    }
    while (peek_ident("in") || peek_ident("out")) parse_decl();
    const bool has_decls = !arrays_.empty();
    if (!peek_ident("loop")) fail(cur(), "expected 'loop'");
    next();
    parse_loop_header(k);
    expect(Tok::LBrace, "'{'");
    while (cur().kind != Tok::RBrace) {
      if (cur().kind == Tok::End) fail(cur(), "unterminated loop body");
      k.statements.push_back(parse_statement(k, has_decls));
      if (cur().kind == Tok::Semi) {
        next();
      } else if (cur().kind != Tok::RBrace) {
        fail(cur(), "expected ';' or '}' after statement");
      }
    }
    next();
    if (cur().kind != Tok::End) fail(cur(), "trailing input after loop body");
    finish_arrays(k);
    validate_kernel(k);
    return k;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) { throw ParseError(t.line, t.column, msg); }
  [[noreturn]] void semantic(const Token& t, const std::string& msg) {
    throw SemanticError(std::to_string(t.line) + ":" + std::to_string(t.column) + ": " + msg);
  }

  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(std::size_t ahead = 1) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool peek_ident(std::string_view s) const { return cur().kind == Tok::Ident && cur().text == s; }

  const Token& expect(Tok kind, const char* what) {
    if (cur().kind != kind) fail(cur(), std::string("expected ") + what);
    return next();
  }

  void parse_decl() {
    const bool is_in = cur().text == "in";
    next();
    const Token& name = expect(Tok::Ident, "array name");
    Shape extents;
    while (cur().kind == Tok::LBracket) {
      next();
      const Token& n = expect(Tok::Int, "array extent");
      if (n.value < 1) semantic(n, "array extent must be positive");
      extents.push_back(n.value);
      expect(Tok::RBracket, "']'");
    }
    if (extents.empty()) fail(cur(), "expected '[' extent ']'");
    expect(Tok::Semi, "';'");
    if (find_array(name.text) >= 0) semantic(name, "duplicate array '" + name.text + "'");
    PendingArray a;
    a.name = name.text;
    a.role = is_in ? ArrayRole::Input : ArrayRole::Output;
    a.extents = extents;
    a.declared = true;
    a.line = name.line;
    a.column = name.column;
    arrays_.push_back(std::move(a));
  }

  void parse_loop_header(LoopKernel& k) {
    while (true) {
      const Token& var = expect(Tok::Ident, "loop variable");
      if (!peek_ident("in")) fail(cur(), "expected 'in'");
      next();
      const Token& lo = expect(Tok::Int, "lower bound");
      if (lo.value != 0) semantic(lo, "loop lower bound must be 0");
      expect(Tok::DotDot, "'..'");
      const Token& hi = expect(Tok::Int, "upper bound");
      if (hi.value < 1) semantic(hi, "loop bound must be >= 1");
      for (const auto& v : k.vars)
        if (v == var.text) semantic(var, "duplicate loop variable '" + var.text + "'");
      k.vars.push_back(var.text);
      k.bounds.push_back(hi.value);
      if (cur().kind != Tok::Comma) break;
      next();
    }
  }

  int find_array(const std::string& n) const {
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].name == n) return static_cast<int>(i);
    return -1;
  }

  int var_index(const LoopKernel& k, const std::string& n) const {
    for (std::size_t i = 0; i < k.vars.size(); ++i)
      if (k.vars[i] == n) return static_cast<int>(i);
    return -1;
  }

  int resolve_array(const Token& name, bool has_decls, ArrayRole role) {
    int idx = find_array(name.text);
    if (idx < 0) {
      if (has_decls) semantic(name, "unknown array '" + name.text + "'");
      PendingArray a;
      a.name = name.text;
      a.line = name.line;
      a.column = name.column;
      arrays_.push_back(a);
      idx = static_cast<int>(arrays_.size() - 1);
    }
    auto& a = arrays_[static_cast<std::size_t>(idx)];
    if (!a.role) a.role = role;
    if (*a.role != role)
      semantic(name, "array '" + name.text + "' is used both as input and output");
    return idx;
  }

  AffineRef parse_ref(const LoopKernel& k, bool has_decls, ArrayRole role) {
    const Token& name = expect(Tok::Ident, "array name");
    AffineRef ref;
    ref.array = resolve_array(name, has_decls, role);
    if (cur().kind != Tok::LBracket) fail(cur(), "expected '[' after array name");
    while (cur().kind == Tok::LBracket) {
      next();
      const Affine a = parse_affine(k);
      expect(Tok::RBracket, "']'");
      ref.indices.push_back(AffineIndex{a.coeffs, a.constant});
    }
    refs_.push_back({&name, ref});
    return ref;
  }

  // affine := aterm (('+'|'-') aterm)*
  Affine parse_affine(const LoopKernel& k) {
    Affine a = parse_affine_term(k);
    while (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
      const bool minus = next().kind == Tok::Minus;
      Affine b = parse_affine_term(k);
      for (std::size_t i = 0; i < a.coeffs.size(); ++i) a.coeffs[i] += minus ? -b.coeffs[i] : b.coeffs[i];
      a.constant += minus ? -b.constant : b.constant;
    }
    return a;
  }

  Affine parse_affine_term(const LoopKernel& k) {
    Affine a = parse_affine_factor(k);
    while (cur().kind == Tok::Star) {
      const Token& op = next();
      Affine b = parse_affine_factor(k);
      if (!a.is_const() && !b.is_const()) semantic(op, "non-affine index (product of loop variables)");
      if (a.is_const()) std::swap(a, b);
      for (auto& c : a.coeffs) c *= b.constant;
      a.constant *= b.constant;
    }
    return a;
  }

  Affine parse_affine_factor(const LoopKernel& k) {
    Affine a;
    a.coeffs.assign(k.depth(), 0);
    const Token& t = cur();
    if (t.kind == Tok::Int) {
      next();
      a.constant = t.value;
    } else if (t.kind == Tok::Ident) {
      next();
      const int v = var_index(k, t.text);
      if (v < 0) semantic(t, "unknown loop variable '" + t.text + "'");
      if (cur().kind == Tok::LBracket) semantic(t, "non-affine index (array reference inside index)");
      a.coeffs[static_cast<std::size_t>(v)] = 1;
    } else if (t.kind == Tok::Minus) {
      next();
      a = parse_affine_factor(k);
      for (auto& c : a.coeffs) c = -c;
      a.constant = -a.constant;
    } else if (t.kind == Tok::LParen) {
      next();
      a = parse_affine(k);
      expect(Tok::RParen, "')'");
    } else {
      fail(t, "expected affine index expression");
    }
    return a;
  }

  Statement parse_statement(const LoopKernel& k, bool has_decls) {
    Statement s;
    s.target = parse_ref(k, has_decls, ArrayRole::Output);
    const Token& op = cur();
    if (op.kind == Tok::Assign) {
      next();
      s.update = Update::Assign;
    } else if (op.kind == Tok::PlusAssign) {
      next();
      s.update = Update::Sum;
    } else if (op.kind == Tok::Ident && op.text == "min" && peek().kind == Tok::Assign) {
      next();
      next();
      s.update = Update::Min;
    } else if (op.kind == Tok::Ident && op.text == "argmin") {
      next();
      expect(Tok::LParen, "'('");
      const Token& v = expect(Tok::Ident, "argmin variable");
      s.arg_var = var_index(k, v.text);
      if (s.arg_var < 0) semantic(v, "unknown loop variable '" + v.text + "'");
      expect(Tok::RParen, "')'");
      expect(Tok::Assign, "'='");
      s.update = Update::ArgMin;
    } else {
      fail(op, "expected '=', '+=', 'min=' or 'argmin(v)='");
    }
    s.value = parse_expr(k, has_decls);
    return s;
  }

  using Level = Expr (Parser::*)(const LoopKernel&, bool);

  Expr binary_level(const LoopKernel& k, bool d, Level sub, std::initializer_list<std::pair<Tok, Op>> ops) {
    Expr lhs = (this->*sub)(k, d);
    while (true) {
      std::optional<Op> op;
      for (const auto& [tok, o] : ops)
        if (cur().kind == tok) op = o;
      if (!op) return lhs;
      next();
      Expr rhs = (this->*sub)(k, d);
      lhs = Expr::apply(*op, {std::move(lhs), std::move(rhs)});
    }
  }

  Expr parse_expr(const LoopKernel& k, bool d) { return binary_level(k, d, &Parser::parse_xor, {{Tok::Pipe, Op::OR}}); }
  Expr parse_xor(const LoopKernel& k, bool d) { return binary_level(k, d, &Parser::parse_and, {{Tok::Caret, Op::XOR}}); }
  Expr parse_and(const LoopKernel& k, bool d) { return binary_level(k, d, &Parser::parse_cmp, {{Tok::Amp, Op::AND}}); }
  Expr parse_cmp(const LoopKernel& k, bool d) {
    Expr lhs = parse_shift(k, d);
    if (cur().kind == Tok::Less) {
      next();
      Expr rhs = parse_shift(k, d);
      lhs = Expr::apply(Op::CMP_LT, {std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }
  Expr parse_shift(const LoopKernel& k, bool d) {
    return binary_level(k, d, &Parser::parse_add, {{Tok::Shl, Op::SHL}, {Tok::Shr, Op::SHR}});
  }
  Expr parse_add(const LoopKernel& k, bool d) {
    return binary_level(k, d, &Parser::parse_mul, {{Tok::Plus, Op::ADD}, {Tok::Minus, Op::SUB}});
  }
  Expr parse_mul(const LoopKernel& k, bool d) { return binary_level(k, d, &Parser::parse_unary, {{Tok::Star, Op::MUL}}); }

  Expr parse_unary(const LoopKernel& k, bool d) {
    if (cur().kind == Tok::Minus) {
      next();
      Expr e = parse_unary(k, d);
      if (e.kind == Expr::Kind::Const) return Expr::constant(-e.value);
      return Expr::apply(Op::SUB, {Expr::constant(0), std::move(e)});
    }
    return parse_primary(k, d);
  }

  Expr parse_primary(const LoopKernel& k, bool d) {
    const Token& t = cur();
    if (t.kind == Tok::Int) {
      next();
      return Expr::constant(t.value);
    }
    if (t.kind == Tok::LParen) {
      next();
      Expr e = parse_expr(k, d);
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind != Tok::Ident) fail(t, "expected expression");
    if (peek().kind == Tok::LBracket) return Expr::reference(parse_ref(k, d, ArrayRole::Input));
    if (peek().kind == Tok::LParen) return parse_call(k, d);
    if (var_index(k, t.text) >= 0) semantic(t, "loop variable '" + t.text + "' used as a value");
    semantic(t, "unknown identifier '" + t.text + "'");
  }

  Expr parse_call(const LoopKernel& k, bool d) {
    const Token& fn = next();
    expect(Tok::LParen, "'('");
    if (fn.text == "sum") {
      const Token& v = expect(Tok::Ident, "sum variable");
      const int var = var_index(k, v.text);
      if (var < 0) semantic(v, "unknown loop variable '" + v.text + "'");
      expect(Tok::Comma, "','");
      Expr body = parse_expr(k, d);
      expect(Tok::RParen, "')'");
      return Expr::sum(var, std::move(body));
    }
    static const std::map<std::string, Op> funcs = {
        {"min", Op::MIN}, {"max", Op::MAX}, {"abs", Op::ABS}, {"select", Op::SELECT}, {"pass", Op::PASS}};
    auto it = funcs.find(fn.text);
    if (it == funcs.end()) semantic(fn, "unsupported op '" + fn.text + "'");
    std::vector<Expr> args;
    args.push_back(parse_expr(k, d));
    while (cur().kind == Tok::Comma) {
      next();
      args.push_back(parse_expr(k, d));
    }
    expect(Tok::RParen, "')'");
    if (static_cast<int>(args.size()) != op_arity(it->second))
      semantic(fn, fn.text + "() expects " + std::to_string(op_arity(it->second)) + " arguments");
    return Expr::apply(it->second, std::move(args));
  }

  void finish_arrays(LoopKernel& k) {
    // Infer extents of undeclared arrays from the index ranges they touch.
    for (std::size_t a = 0; a < arrays_.size(); ++a) {
      auto& pa = arrays_[a];
      if (pa.extents) continue;
      std::optional<std::size_t> rank;
      Shape hi;
      for (const auto& [tok, ref] : refs_) {
        if (ref.array != static_cast<int>(a)) continue;
        if (!rank) {
          rank = ref.indices.size();
          hi.assign(*rank, 0);
        }
        if (ref.indices.size() != *rank) semantic(*tok, "inconsistent rank for array '" + pa.name + "'");
        for (std::size_t dim = 0; dim < *rank; ++dim) {
          const auto& idx = ref.indices[dim];
          std::int64_t lo_v = idx.constant;
          std::int64_t hi_v = idx.constant;
          for (std::size_t v = 0; v < k.depth(); ++v) {
            const std::int64_t span = idx.coeffs[v] * (k.bounds[v] - 1);
            (span < 0 ? lo_v : hi_v) += span;
          }
          if (lo_v < 0) semantic(*tok, "out-of-bounds reference: '" + pa.name + "' index may be negative");
          hi[dim] = std::max(hi[dim], hi_v + 1);
        }
      }
      pa.extents = hi;
    }
    for (const auto& pa : arrays_) {
      ArrayDecl decl;
      decl.name = pa.name;
      decl.role = pa.role.value_or(ArrayRole::Input);
      decl.extents = *pa.extents;
      k.arrays.push_back(std::move(decl));
    }
    k.source = to_kdl(k);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::string name_;
  std::vector<PendingArray> arrays_;
  std::vector<std::pair<const Token*, AffineRef>> refs_;
};

std::string render_affine(const LoopKernel& k, const AffineIndex& idx) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t v = 0; v < idx.coeffs.size(); ++v) {
    const auto c = idx.coeffs[v];
    if (!c) continue;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    const auto mag = c < 0 ? -c : c;
    if (mag != 1) os << mag << "*";
    os << k.vars[v];
    first = false;
  }
  if (first) {
    os << idx.constant;
  } else if (idx.constant) {
    os << (idx.constant < 0 ? " - " : " + ") << (idx.constant < 0 ? -idx.constant : idx.constant);
  }
  return os.str();
}

std::string render_ref(const LoopKernel& k, const AffineRef& r) {
  std::string s = k.array(r.array).name;
  for (const auto& idx : r.indices) s += "[" + render_affine(k, idx) + "]";
  return s;
}

std::string render_expr(const LoopKernel& k, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value < 0 ? "(" + std::to_string(e.value) + ")" : std::to_string(e.value);
    case Expr::Kind::Ref:
      return render_ref(k, e.ref);
    case Expr::Kind::Sum:
      return "sum(" + k.vars[static_cast<std::size_t>(e.sum_var)] + ", " + render_expr(k, e.args[0]) + ")";
    case Expr::Kind::Apply:
      break;
  }
  static const std::map<Op, const char*> infix = {
      {Op::ADD, "+"}, {Op::SUB, "-"}, {Op::MUL, "*"}, {Op::AND, "&"}, {Op::OR, "|"},
      {Op::XOR, "^"}, {Op::SHL, "<<"}, {Op::SHR, ">>"}, {Op::CMP_LT, "<"}};
  if (auto it = infix.find(e.op); it != infix.end())
    return "(" + render_expr(k, e.args[0]) + " " + it->second + " " + render_expr(k, e.args[1]) + ")";
  std::string name(op_name(e.op));
  for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  std::string s = name + "(";
  for (std::size_t i = 0; i < e.args.size(); ++i) s += (i ? ", " : "") + render_expr(k, e.args[i]);
  return s + ")";
}

}  // namespace

LoopKernel parse_kernel(std::string_view text, std::string_view name) {
  return Parser(text, name).parse();
}

std::string to_kdl(const LoopKernel& k) {
  std::ostringstream os;
  os << "kernel " << k.name << ";\n";
  for (const auto& a : k.arrays) {
    os << (a.role == ArrayRole::Input ? "in " : "out ") << a.name;
    for (auto e : a.extents) os << "[" << e << "]";
    os << ";\n";
  }
  os << "loop ";
  for (std::size_t v = 0; v < k.depth(); ++v) os << (v ? ", " : "") << k.vars[v] << " in 0.." << k.bounds[v];
  os << " {\n";
  for (const auto& s : k.statements) {
    os << "  " << render_ref(k, s.target);
    switch (s.update) {
      case Update::Assign: os << " = "; break;
      case Update::Sum: os << " += "; break;
      case Update::Min: os << " min= "; break;
      case Update::ArgMin: os << " argmin(" << k.vars[static_cast<std::size_t>(s.arg_var)] << ")= "; break;
    }
    os << render_expr(k, s.value) << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace dough
