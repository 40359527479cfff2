#include "dough/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>

namespace dough {

// --- IR helpers -------------------------------------------------------------

std::int64_t AffineIndex::eval(const std::vector<std::int64_t>& point) const {
  std::int64_t v = constant;
  for (std::size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * point[i];
  return v;
}

std::vector<std::int64_t> AffineRef::eval(const std::vector<std::int64_t>& point) const {
  std::vector<std::int64_t> out;
  out.reserve(indices.size());
  for (const auto& idx : indices) out.push_back(idx.eval(point));
  return out;
}

bool AffineRef::uses(std::size_t var) const {
  return std::any_of(indices.begin(), indices.end(),
                     [&](const AffineIndex& i) { return i.uses(var); });
}

Expr Expr::constant(std::int64_t v) {
  Expr e;
  e.kind = Kind::Const;
  e.value = v;
  return e;
}

Expr Expr::reference(AffineRef r) {
  Expr e;
  e.kind = Kind::Ref;
  e.ref = std::move(r);
  return e;
}

Expr Expr::apply(Op op, std::vector<Expr> args) {
  Expr e;
  e.kind = Kind::Apply;
  e.op = op;
  e.args = std::move(args);
  return e;
}

Expr Expr::sum(int var, Expr body) {
  Expr e;
  e.kind = Kind::Sum;
  e.sum_var = var;
  e.args.push_back(std::move(body));
  return e;
}

int LoopKernel::find_array(std::string_view array_name) const {
  for (std::size_t i = 0; i < arrays.size(); ++i)
    if (arrays[i].name == array_name) return static_cast<int>(i);
  return -1;
}

namespace {

void collect_inner(const Expr& e, std::vector<bool>& out) {
  if (e.kind == Expr::Kind::Sum && e.sum_var >= 0 &&
      static_cast<std::size_t>(e.sum_var) < out.size())
    out[static_cast<std::size_t>(e.sum_var)] = true;
  for (const auto& a : e.args) collect_inner(a, out);
}

template <typename Fn>
void visit_refs(const Expr& e, Fn&& fn) {
  if (e.kind == Expr::Kind::Ref) fn(e.ref);
  for (const auto& a : e.args) visit_refs(a, fn);
}

}  // namespace

std::vector<bool> LoopKernel::inner_vars(const Statement& s) const {
  std::vector<bool> out(depth(), false);
  collect_inner(s.value, out);
  return out;
}

std::vector<bool> LoopKernel::reduction_vars(const Statement& s) const {
  std::vector<bool> out(depth(), false);
  for (std::size_t v = 0; v < depth(); ++v) out[v] = !s.target.uses(v);
  return out;
}

std::vector<std::int64_t> LoopKernel::element_offset(int array_index,
                                                      const std::vector<std::int64_t>& base) const {
  const AffineRef* ref = nullptr;
  for (const auto& s : statements) {
    if (s.target.array == array_index) ref = &s.target;
    if (!ref) visit_refs(s.value, [&](const AffineRef& r) {
      if (!ref && r.array == array_index) ref = &r;
    });
    if (ref) break;
  }
  const auto& decl = array(array_index);
  std::vector<std::int64_t> out(decl.extents.size(), 0);
  if (!ref) return out;
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = ref->indices[d].eval(base) - ref->indices[d].constant;
  return out;
}

std::vector<bool> LoopKernel::full_tile_dims() const {
  std::vector<bool> out(depth(), false);
  for (const auto& s : statements) {
    auto inner = inner_vars(s);
    for (std::size_t v = 0; v < depth(); ++v)
      if (inner[v]) out[v] = true;
    if (s.update == Update::ArgMin && s.arg_var >= 0)
      out[static_cast<std::size_t>(s.arg_var)] = true;
  }
  return out;
}

// --- validation ---------------------------------------------------------------

namespace {

// Rank of a small integer matrix (rows x cols) via Gaussian elimination.
int matrix_rank(std::vector<std::vector<double>> m) {
  if (m.empty()) return 0;
  const std::size_t rows = m.size();
  const std::size_t cols = m[0].size();
  int rank = 0;
  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < rows; ++col) {
    std::size_t pivot = row;
    for (std::size_t r = row; r < rows; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-9) continue;
    std::swap(m[pivot], m[row]);
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == row) continue;
      const double f = m[r][col] / m[row][col];
      for (std::size_t c = col; c < cols; ++c) m[r][c] -= f * m[row][c];
    }
    ++row;
    ++rank;
  }
  return rank;
}

void check_ref(const LoopKernel& k, const AffineRef& ref, ArrayRole role, const char* what) {
  if (ref.array < 0 || static_cast<std::size_t>(ref.array) >= k.arrays.size())
    throw SemanticError(std::string(what) + " references an unknown array");
  const auto& decl = k.array(ref.array);
  if (decl.role != role)
    throw SemanticError("array '" + decl.name + "' used as " +
                        (role == ArrayRole::Input ? "input" : "output") + " but declared " +
                        (decl.role == ArrayRole::Input ? "input" : "output"));
  if (ref.indices.size() != decl.extents.size())
    throw SemanticError("array '" + decl.name + "' expects " +
                        std::to_string(decl.extents.size()) + " indices, got " +
                        std::to_string(ref.indices.size()));
  for (std::size_t d = 0; d < ref.indices.size(); ++d) {
    const auto& idx = ref.indices[d];
    if (idx.coeffs.size() != k.depth())
      throw SemanticError("index coefficient vector does not match loop depth");
    std::int64_t lo = idx.constant;
    std::int64_t hi = idx.constant;
    for (std::size_t v = 0; v < k.depth(); ++v) {
      const std::int64_t span = idx.coeffs[v] * (k.bounds[v] - 1);
      (span < 0 ? lo : hi) += span;
    }
    if (lo < 0 || hi >= decl.extents[d])
      throw SemanticError("reference to '" + decl.name + "' dimension " + std::to_string(d) +
                          " spans [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] outside [0, " + std::to_string(decl.extents[d]) + ")");
  }
}

void check_expr(const LoopKernel& k, const Expr& e, std::vector<bool>& bound_inner,
                const std::vector<bool>& inner, bool& has_ref) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return;
    case Expr::Kind::Ref:
      has_ref = true;
      check_ref(k, e.ref, ArrayRole::Input, "expression");
      for (std::size_t v = 0; v < k.depth(); ++v)
        if (inner[v] && !bound_inner[v] && e.ref.uses(v))
          throw SemanticError("variable '" + k.vars[v] + "' is reduced by sum() but used outside it");
      return;
    case Expr::Kind::Apply:
      if (e.op == Op::NOP) throw SemanticError("unsupported op NOP");
      if (static_cast<int>(e.args.size()) != op_arity(e.op))
        throw SemanticError("op " + std::string(op_name(e.op)) + " expects " +
                            std::to_string(op_arity(e.op)) + " operands");
      for (const auto& a : e.args) check_expr(k, a, bound_inner, inner, has_ref);
      return;
    case Expr::Kind::Sum: {
      if (e.sum_var < 0 || static_cast<std::size_t>(e.sum_var) >= k.depth())
        throw SemanticError("sum() over an unknown variable");
      const auto v = static_cast<std::size_t>(e.sum_var);
      if (bound_inner[v]) throw SemanticError("nested sum() over the same variable");
      if (e.args.size() != 1) throw SemanticError("sum() takes one body");
      bound_inner[v] = true;
      check_expr(k, e.args[0], bound_inner, inner, has_ref);
      bound_inner[v] = false;
      return;
    }
  }
}

}  // namespace

void validate_kernel(const LoopKernel& k) {
  if (k.depth() == 0) throw SemanticError("kernel needs at least one loop level");
  if (k.vars.size() != k.depth()) throw SemanticError("loop variable count mismatch");
  for (std::size_t v = 0; v < k.depth(); ++v) {
    if (k.bounds[v] < 1) throw SemanticError("loop bound of '" + k.vars[v] + "' must be >= 1");
    for (std::size_t w = 0; w < v; ++w)
      if (k.vars[w] == k.vars[v]) throw SemanticError("duplicate loop variable '" + k.vars[v] + "'");
  }
  for (std::size_t a = 0; a < k.arrays.size(); ++a) {
    const auto& decl = k.arrays[a];
    if (decl.extents.empty()) throw SemanticError("array '" + decl.name + "' has no dimensions");
    for (auto e : decl.extents)
      if (e < 1) throw SemanticError("array '" + decl.name + "' has a non-positive extent");
    for (std::size_t b = 0; b < a; ++b)
      if (k.arrays[b].name == decl.name) throw SemanticError("duplicate array '" + decl.name + "'");
  }
  if (k.statements.empty()) throw SemanticError("kernel has no statements");

  std::vector<int> writers(k.arrays.size(), 0);
  for (const auto& s : k.statements) {
    check_ref(k, s.target, ArrayRole::Output, "statement target");
    ++writers[static_cast<std::size_t>(s.target.array)];
    const auto inner = k.inner_vars(s);
    for (std::size_t v = 0; v < k.depth(); ++v)
      if (inner[v] && s.target.uses(v))
        throw SemanticError("sum() variable '" + k.vars[v] + "' indexes the statement target");
    std::vector<bool> bound(k.depth(), false);
    bool has_ref = false;
    check_expr(k, s.value, bound, inner, has_ref);
    if (!has_ref) throw SemanticError("statement value reads no input array");

    const auto red = k.reduction_vars(s);
    std::vector<std::size_t> spatial;
    for (std::size_t v = 0; v < k.depth(); ++v) {
      if (!red[v]) {
        spatial.push_back(v);
        continue;
      }
      if (inner[v]) continue;
      if (s.update == Update::Assign)
        throw SemanticError("assignment to '" + k.array(s.target.array).name +
                            "' does not depend on '" + k.vars[v] +
                            "'; use += or min= for reductions");
      if (s.update == Update::ArgMin && static_cast<int>(v) != s.arg_var)
        throw SemanticError("argmin statement may only reduce over its arg variable");
    }
    if (s.update == Update::ArgMin) {
      if (s.arg_var < 0 || static_cast<std::size_t>(s.arg_var) >= k.depth())
        throw SemanticError("argmin over an unknown variable");
      if (!red[static_cast<std::size_t>(s.arg_var)] || inner[static_cast<std::size_t>(s.arg_var)])
        throw SemanticError("argmin variable must be a free reduction variable");
    }
    // Target must be injective over the non-reduced variables.
    std::vector<std::vector<double>> m;
    for (const auto& idx : s.target.indices) {
      std::vector<double> row;
      for (auto v : spatial) row.push_back(static_cast<double>(idx.coeffs[v]));
      m.push_back(std::move(row));
    }
    if (!spatial.empty() && matrix_rank(m) < static_cast<int>(spatial.size()))
      throw SemanticError("target '" + k.array(s.target.array).name +
                          "' is written more than once per iteration tuple");
  }
  // Every reference to one array must share the same linear part so that a
  // tile's element set is a translate of the origin tile's set.
  std::vector<const AffineRef*> first_ref(k.arrays.size(), nullptr);
  auto check_uniform = [&](const AffineRef& r) {
    auto& f = first_ref[static_cast<std::size_t>(r.array)];
    if (!f) {
      f = &r;
      return;
    }
    for (std::size_t d = 0; d < r.indices.size(); ++d)
      if (r.indices[d].coeffs != f->indices[d].coeffs)
        throw SemanticError("references to '" + k.array(r.array).name +
                            "' must differ only by constant offsets");
  };
  for (const auto& s : k.statements) {
    check_uniform(s.target);
    visit_refs(s.value, check_uniform);
  }
  for (std::size_t a = 0; a < k.arrays.size(); ++a) {
    if (k.arrays[a].role == ArrayRole::Output && writers[a] != 1)
      throw SemanticError("output array '" + k.arrays[a].name + "' must be written by exactly one statement");
  }
}

// --- builtin benchmarks -------------------------------------------------------

namespace {

const std::map<std::string, KernelParams>& builtin_defaults() {
  static const std::map<std::string, KernelParams> d = {
      {"MM", {{"size", 100}}},
      {"FIR", {{"inputs", 10000}, {"taps", 50}}},
      {"SE", {{"rows", 128}, {"cols", 128}}},
      {"KM", {{"nodes", 5000}, {"centroids", 4}, {"dims", 2}}},
  };
  return d;
}

}  // namespace

LoopKernel builtin_kernel(std::string_view name, const KernelParams& params) {
  const auto& defaults = builtin_defaults();
  auto it = defaults.find(std::string(name));
  if (it == defaults.end()) throw InvalidArgument("unknown builtin kernel '" + std::string(name) + "'");
  KernelParams p = it->second;
  for (const auto& [key, value] : params) {
    if (!p.count(key))
      throw InvalidArgument("unknown parameter '" + key + "' for builtin " + std::string(name));
    if (value <= 0) throw InvalidArgument("parameter '" + key + "' must be positive");
    p[key] = value;
  }
  std::ostringstream os;
  if (name == "MM") {
    const auto n = p["size"];
    os << "kernel MM;\n"
       << "in A[" << n << "][" << n << "];\n"
       << "in B[" << n << "][" << n << "];\n"
       << "out C[" << n << "][" << n << "];\n"
       << "loop i in 0.." << n << ", j in 0.." << n << ", k in 0.." << n << " {\n"
       << "  C[i][j] += A[i][k] * B[k][j];\n}\n";
  } else if (name == "FIR") {
    const auto n = p["inputs"];
    const auto taps = p["taps"];
    os << "kernel FIR;\n"
       << "in X[" << n + taps - 1 << "];\n"
       << "in H[" << taps << "];\n"
       << "out Y[" << n << "];\n"
       << "loop i in 0.." << n << ", j in 0.." << taps << " {\n"
       << "  Y[i] += H[j] * X[i + j];\n}\n";
  } else if (name == "SE") {
    const auto rows = p["rows"];
    const auto cols = p["cols"];
    os << "kernel SE;\n"
       << "in IMG[" << rows + 2 << "][" << cols + 2 << "];\n"
       << "in KX[3][3];\n"
       << "in KY[3][3];\n"
       << "out GX[" << rows << "][" << cols << "];\n"
       << "out GY[" << rows << "][" << cols << "];\n"
       << "loop i in 0.." << rows << ", j in 0.." << cols << ", p in 0..3, q in 0..3 {\n"
       << "  GX[i][j] += KX[p][q] * IMG[i + p][j + q];\n"
       << "  GY[i][j] += KY[p][q] * IMG[i + p][j + q];\n}\n";
  } else {  // KM
    const auto nodes = p["nodes"];
    const auto k = p["centroids"];
    const auto dims = p["dims"];
    os << "kernel KM;\n"
       << "in P[" << nodes << "][" << dims << "];\n"
       << "in M[" << k << "][" << dims << "];\n"
       << "out ASSIGN[" << nodes << "];\n"
       << "loop n in 0.." << nodes << ", c in 0.." << k << ", d in 0.." << dims << " {\n"
       << "  ASSIGN[n] argmin(c)= sum(d, (P[n][d] - M[c][d]) * (P[n][d] - M[c][d]));\n}\n";
  }
  return parse_kernel(os.str(), name);
}

LoopKernel builtin_kernel_from_spec(std::string_view spec) {
  const auto q = spec.find('?');
  const std::string name(spec.substr(0, q));
  KernelParams params;
  if (q != std::string_view::npos) {
    std::string rest(spec.substr(q + 1));
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, '&')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InvalidArgument("malformed builtin parameter '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string val = item.substr(eq + 1);
      std::size_t used = 0;
      std::int64_t v = 0;
      try {
        v = std::stoll(val, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != val.size() || val.empty())
        throw InvalidArgument("parameter '" + key + "' is not an integer");
      params[key] = v;
    }
  }
  return builtin_kernel(name, params);
}

// --- factors ------------------------------------------------------------------

std::vector<std::int64_t> divisors(std::int64_t n) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    out.push_back(d);
    if (d != n / d) out.push_back(n / d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_valid_unroll(const LoopKernel& k, const Factor& u) {
  if (u.size() != k.depth()) return false;
  const auto full = k.full_tile_dims();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 1 || k.bounds[i] % u[i] != 0) return false;
    if (full[i] && u[i] != k.bounds[i]) return false;
  }
  return true;
}

bool is_valid_group(const LoopKernel& k, const Factor& u, const Factor& g) {
  if (!is_valid_unroll(k, u) || g.size() != k.depth()) return false;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] < 1 || g[i] % u[i] != 0 || k.bounds[i] % g[i] != 0) return false;
  return true;
}

Factor minimal_unroll(const LoopKernel& k) {
  const auto full = k.full_tile_dims();
  Factor u(k.depth(), 1);
  for (std::size_t i = 0; i < u.size(); ++i)
    if (full[i]) u[i] = k.bounds[i];
  return u;
}

namespace {

bool canonical_less(const Factor& a, const Factor& b) {
  const auto pa = product(a);
  const auto pb = product(b);
  if (pa != pb) return pa < pb;
  return a < b;
}

std::vector<Factor> cartesian(const std::vector<std::vector<std::int64_t>>& choices,
                              std::int64_t cap) {
  std::vector<Factor> out;
  Factor cur;
  std::function<void(std::size_t, std::int64_t)> rec = [&](std::size_t d, std::int64_t prod) {
    if (d == choices.size()) {
      out.push_back(cur);
      return;
    }
    for (auto c : choices[d]) {
      if (cap > 0 && prod * c > cap) break;  // choices are ascending
      cur.push_back(c);
      rec(d + 1, prod * c);
      cur.pop_back();
    }
  };
  rec(0, 1);
  return out;
}

}  // namespace

std::vector<Factor> enumerate_unroll_factors(const LoopKernel& k, const UnrollLimits& limits) {
  const auto full = k.full_tile_dims();
  std::vector<std::vector<std::int64_t>> choices;
  for (std::size_t i = 0; i < k.depth(); ++i)
    choices.push_back(full[i] ? std::vector<std::int64_t>{k.bounds[i]} : divisors(k.bounds[i]));
  auto out = cartesian(choices, std::max<std::int64_t>(limits.max_product, 1));
  const auto minimal = minimal_unroll(k);
  if (std::find(out.begin(), out.end(), minimal) == out.end()) out.push_back(minimal);
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

std::vector<Factor> unroll_successors(const LoopKernel& k, const Factor& u,
                                      const UnrollLimits& limits) {
  const auto full = k.full_tile_dims();
  std::vector<Factor> out;
  for (std::size_t i = 0; i < k.depth(); ++i) {
    if (full[i]) continue;
    const auto divs = divisors(k.bounds[i]);
    auto it = std::upper_bound(divs.begin(), divs.end(), u[i]);
    if (it == divs.end()) continue;
    Factor next = u;
    next[i] = *it;
    if (product(next) <= limits.max_product) out.push_back(std::move(next));
  }
  return out;
}

std::vector<Factor> enumerate_group_factors(const LoopKernel& k, const Factor& u,
                                            const GroupLimits& limits) {
  std::vector<std::vector<std::int64_t>> choices;
  for (std::size_t i = 0; i < k.depth(); ++i) {
    std::vector<std::int64_t> c;
    for (auto d : divisors(k.bounds[i]))
      if (d % u[i] == 0) c.push_back(d);
    choices.push_back(std::move(c));
  }
  auto all = cartesian(choices, 0);
  std::vector<Factor> out;
  for (auto& g : all) {
    if (limits.max_in_words && io_counts(k, g).in > *limits.max_in_words) continue;
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

bool needs_accumulator(const LoopKernel& k, const Statement& s, const Factor& factor) {
  if (s.update != Update::Sum && s.update != Update::Min) return false;
  const auto red = k.reduction_vars(s);
  const auto inner = k.inner_vars(s);
  for (std::size_t v = 0; v < k.depth(); ++v)
    if (red[v] && !inner[v] && factor[v] < k.bounds[v]) return true;
  return false;
}

namespace {

// Distinct elements of one array touched by `refs` over a tile box.
Words count_elements(const LoopKernel& k, const ArrayDecl& decl,
                     const std::vector<const AffineRef*>& refs, const Factor& factor) {
  if (refs.empty()) return 0;
  std::vector<std::size_t> used;
  for (std::size_t v = 0; v < k.depth(); ++v)
    if (std::any_of(refs.begin(), refs.end(), [&](const AffineRef* r) { return r->uses(v); }))
      used.push_back(v);
  Shape box;
  for (auto v : used) box.push_back(factor[v]);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(decl.size()), 0);
  Words count = 0;
  std::vector<std::int64_t> point(k.depth(), 0);
  for_each_point(box, [&](const std::vector<std::int64_t>& sub) {
    for (std::size_t i = 0; i < used.size(); ++i) point[used[i]] = sub[i];
    for (const auto* r : refs) {
      const auto idx = static_cast<std::size_t>(linear_index(decl.extents, r->eval(point)));
      if (!seen[idx]) {
        seen[idx] = 1;
        ++count;
      }
    }
  });
  return count;
}

}  // namespace

IoCounts io_counts(const LoopKernel& k, const Factor& factor) {
  if (factor.size() != k.depth()) throw InvalidArgument("factor rank does not match loop depth");
  std::vector<std::vector<const AffineRef*>> reads(k.arrays.size());
  std::vector<std::vector<const AffineRef*>> writes(k.arrays.size());
  std::vector<bool> accum(k.arrays.size(), false);
  for (const auto& s : k.statements) {
    visit_refs(s.value, [&](const AffineRef& r) { reads[static_cast<std::size_t>(r.array)].push_back(&r); });
    writes[static_cast<std::size_t>(s.target.array)].push_back(&s.target);
    if (needs_accumulator(k, s, factor)) accum[static_cast<std::size_t>(s.target.array)] = true;
  }
  IoCounts io;
  for (std::size_t a = 0; a < k.arrays.size(); ++a) {
    const auto& decl = k.arrays[a];
    if (decl.role == ArrayRole::Input) {
      io.in += count_elements(k, decl, reads[a], factor);
    } else {
      const Words n = count_elements(k, decl, writes[a], factor);
      io.out += n;
      if (accum[a]) io.in += n;
    }
  }
  return io;
}

// --- reference execution ------------------------------------------------------

std::int64_t linear_index(const Shape& extents, const std::vector<std::int64_t>& coords) {
  std::int64_t idx = 0;
  for (std::size_t d = 0; d < extents.size(); ++d) {
    if (coords[d] < 0 || coords[d] >= extents[d]) throw Error("array index out of bounds");
    idx = idx * extents[d] + coords[d];
  }
  return idx;
}

std::int64_t& ArrayImage::at(const std::vector<std::int64_t>& coords) {
  return data[static_cast<std::size_t>(linear_index(extents, coords))];
}

std::int64_t ArrayImage::at(const std::vector<std::int64_t>& coords) const {
  return data[static_cast<std::size_t>(linear_index(extents, coords))];
}

std::int64_t update_identity(Update update, const WordArith& arith) {
  return update == Update::Min ? arith.max_value() : 0;
}

ArraySet random_inputs(const LoopKernel& k, std::uint64_t seed, std::int64_t lo, std::int64_t hi,
                       int width) {
  WordArith arith(width);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  ArraySet out;
  for (const auto& decl : k.arrays) {
    if (decl.role != ArrayRole::Input) continue;
    ArrayImage img{decl.extents, std::vector<std::int64_t>(static_cast<std::size_t>(decl.size()))};
    for (auto& v : img.data) v = arith.wrap(dist(rng));
    out.emplace(decl.name, std::move(img));
  }
  return out;
}

namespace {

struct Evaluator {
  const LoopKernel& k;
  const std::vector<const ArrayImage*>& images;
  const WordArith& arith;

  std::int64_t eval(const Expr& e, std::vector<std::int64_t>& point) const {
    switch (e.kind) {
      case Expr::Kind::Const:
        return arith.wrap(e.value);
      case Expr::Kind::Ref:
        return images[static_cast<std::size_t>(e.ref.array)]->at(e.ref.eval(point));
      case Expr::Kind::Apply: {
        if (e.op == Op::SELECT)
          return arith.select(eval(e.args[0], point), eval(e.args[1], point), eval(e.args[2], point));
        const auto a = eval(e.args[0], point);
        const auto b = e.args.size() > 1 ? eval(e.args[1], point) : 0;
        return arith.apply(e.op, a, b);
      }
      case Expr::Kind::Sum: {
        const auto v = static_cast<std::size_t>(e.sum_var);
        const auto saved = point[v];
        std::int64_t acc = 0;
        for (std::int64_t x = 0; x < k.bounds[v]; ++x) {
          point[v] = x;
          acc = arith.apply(Op::ADD, acc, eval(e.args[0], point));
        }
        point[v] = saved;
        return acc;
      }
    }
    return 0;
  }
};

}  // namespace

ArraySet reference_execute(const LoopKernel& k, const ArraySet& inputs, int width) {
  const WordArith arith(width);
  std::vector<const ArrayImage*> images(k.arrays.size(), nullptr);
  ArraySet outputs;
  for (const auto& s : k.statements) {
    const auto& decl = k.array(s.target.array);
    outputs[decl.name] = ArrayImage{
        decl.extents,
        std::vector<std::int64_t>(static_cast<std::size_t>(decl.size()), update_identity(s.update, arith))};
  }
  for (std::size_t a = 0; a < k.arrays.size(); ++a) {
    const auto& decl = k.arrays[a];
    if (decl.role == ArrayRole::Output) {
      images[a] = &outputs.at(decl.name);
      continue;
    }
    auto it = inputs.find(decl.name);
    if (it == inputs.end()) throw InvalidArgument("missing input array '" + decl.name + "'");
    if (it->second.extents != decl.extents ||
        it->second.data.size() != static_cast<std::size_t>(decl.size()))
      throw InvalidArgument("input array '" + decl.name + "' has the wrong shape");
    images[a] = &it->second;
  }

  struct StmtInfo {
    std::vector<bool> inner;
    ArrayImage* out;
    std::vector<std::int64_t> best;
    std::vector<std::uint8_t> has_best;
  };
  std::vector<StmtInfo> info;
  for (const auto& s : k.statements) {
    auto& img = outputs.at(k.array(s.target.array).name);
    info.push_back({k.inner_vars(s), &img, std::vector<std::int64_t>(img.data.size(), 0),
                    std::vector<std::uint8_t>(img.data.size(), 0)});
  }

  const Evaluator ev{k, images, arith};
  std::vector<std::int64_t> scratch;
  for_each_point(k.bounds, [&](const std::vector<std::int64_t>& point) {
    for (std::size_t si = 0; si < k.statements.size(); ++si) {
      const auto& s = k.statements[si];
      auto& st = info[si];
      bool skip = false;
      for (std::size_t v = 0; v < k.depth(); ++v)
        if (st.inner[v] && point[v] != 0) skip = true;
      if (skip) continue;
      scratch = point;
      const auto value = ev.eval(s.value, scratch);
      const auto idx = static_cast<std::size_t>(linear_index(st.out->extents, s.target.eval(point)));
      auto& slot = st.out->data[idx];
      switch (s.update) {
        case Update::Assign:
          slot = value;
          break;
        case Update::Sum:
          slot = arith.apply(Op::ADD, slot, value);
          break;
        case Update::Min:
          slot = arith.apply(Op::MIN, slot, value);
          break;
        case Update::ArgMin:
          if (!st.has_best[idx] || value < st.best[idx]) {
            st.has_best[idx] = 1;
            st.best[idx] = value;
            slot = arith.wrap(point[static_cast<std::size_t>(s.arg_var)]);
          }
          break;
      }
    }
  });
  return outputs;
}

}  // namespace dough
