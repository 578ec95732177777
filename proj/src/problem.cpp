#include "qnipm/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace qnipm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& where, int line, const std::string& what) {
  throw ParseError(where + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

double parse_num(const std::string& tok, const std::string& where, int line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.empty())
    fail(where, line, "bad numeric field '" + tok + "'");
  return v;
}

enum class Section { None, Name, Rows, Columns, Rhs, Ranges, Bounds, Quadobj, Qmatrix, Endata };

}  // namespace

double QuadraticProgram::objective(const Vec& x) const {
  double quad = Q.nonZeros() ? 0.5 * x.dot(Q * x) : 0.0;
  return quad + c.dot(x);
}

void QuadraticProgram::validate() const {
  if (n <= 0) throw std::invalid_argument("problem has no variables");
  if (m < 0 || Q.rows() != n || Q.cols() != n || A.rows() != m || A.cols() != n ||
      b.size() != m || c.size() != n)
    throw std::invalid_argument("inconsistent problem dimensions");
  for (int j = 0; j < Q.outerSize(); ++j)
    for (SpMat::InnerIterator itq(Q, j); itq; ++itq) {
      double mirror = Q.coeff(itq.col(), itq.row());
      double scale = std::max({1.0, std::abs(itq.value()), std::abs(mirror)});
      if (std::abs(itq.value() - mirror) > 1e-12 * scale)
        throw std::invalid_argument("Q is not symmetric at (" +
                                    std::to_string(itq.row()) + "," +
                                    std::to_string(itq.col()) + ")");
    }
  std::vector<bool> row_nonzero(m, false);
  for (int j = 0; j < A.outerSize(); ++j)
    for (SpMat::InnerIterator ita(A, j); ita; ++ita)
      if (ita.value() != 0.0) row_nonzero[ita.row()] = true;
  for (int i = 0; i < m; ++i)
    if (!row_nonzero[i])
      throw std::invalid_argument("row " + std::to_string(i) + " of A is all zero");
}

RawProblem parse_qps(std::istream& in, std::string stream_name) {
  const std::string& W = stream_name;
  RawProblem raw;
  Section section = Section::None;
  bool seen_rows = false, seen_cols = false, seen_rhs = false, ended = false;

  std::string obj_name;
  std::unordered_map<std::string, int> row_idx;      // constraint rows only
  std::unordered_map<std::string, int> row_ordinal;  // every named row
  std::unordered_set<std::string> ignored_n;         // extra N rows
  std::unordered_map<std::string, int> col_idx;
  std::vector<Triplet> a_entries, q_entries;
  std::vector<double> c_entries;  // by column index
  std::unordered_set<long long> seen_pair;           // duplicate detection
  std::unordered_set<long long> seen_qpair;
  std::vector<RowType> row_types;
  std::unordered_map<int, double> rhs_map, range_map;
  std::vector<double> lower, upper;
  double obj_rhs = 0.0;

  auto col_of = [&](const std::string& name, int line) {
    auto it = col_idx.find(name);
    if (it == col_idx.end()) fail(W, line, "unknown column name '" + name + "'");
    return it->second;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (ended) break;
    if (line.empty() || line[0] == '*') continue;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;

    if (!std::isspace(static_cast<unsigned char>(line[0]))) {
      auto toks = tokens_of(line);
      const std::string& head = toks[0];
      if (head == "NAME") {
        section = Section::Name;
        if (toks.size() > 1) raw.name = toks[1];
      } else if (head == "ROWS") {
        section = Section::Rows;
        seen_rows = true;
      } else if (head == "COLUMNS") {
        section = Section::Columns;
        seen_cols = true;
      } else if (head == "RHS") {
        section = Section::Rhs;
        seen_rhs = true;
      } else if (head == "RANGES") {
        section = Section::Ranges;
      } else if (head == "BOUNDS") {
        section = Section::Bounds;
      } else if (head == "QUADOBJ") {
        section = Section::Quadobj;
      } else if (head == "QMATRIX") {
        section = Section::Qmatrix;
      } else if (head == "ENDATA") {
        ended = true;
      } else {
        fail(W, line_no, "malformed section header '" + head + "'");
      }
      continue;
    }

    auto toks = tokens_of(line);
    if (toks.empty()) continue;

    switch (section) {
      case Section::Rows: {
        if (toks.size() != 2) fail(W, line_no, "ROWS line needs type and name");
        const std::string& type = toks[0];
        const std::string& name = toks[1];
        if (row_ordinal.count(name)) fail(W, line_no, "duplicate row '" + name + "'");
        row_ordinal.emplace(name, static_cast<int>(row_ordinal.size()));
        if (type == "N") {
          if (obj_name.empty())
            obj_name = name;
          else
            ignored_n.insert(name);  // extra free rows are ignored
        } else if (type == "E" || type == "L" || type == "G") {
          row_idx.emplace(name, static_cast<int>(raw.row_names.size()));
          raw.row_names.push_back(name);
          row_types.push_back(type == "E" ? RowType::Eq
                                          : type == "L" ? RowType::Le : RowType::Ge);
        } else {
          fail(W, line_no, "unknown row type '" + type + "'");
        }
        break;
      }
      case Section::Columns: {
        if (toks.size() >= 2 && toks[1].find("MARKER") != std::string::npos)
          fail(W, line_no, "integer markers are not supported");
        if (toks.size() != 3 && toks.size() != 5)
          fail(W, line_no, "COLUMNS line needs one or two row/value pairs");
        const std::string& cname = toks[0];
        auto [cit, fresh] = col_idx.try_emplace(cname, static_cast<int>(raw.col_names.size()));
        if (fresh) {
          raw.col_names.push_back(cname);
          c_entries.push_back(0.0);
        }
        int col = cit->second;
        for (size_t f = 1; f + 1 < toks.size(); f += 2) {
          const std::string& rname = toks[f];
          double val = parse_num(toks[f + 1], W, line_no);
          auto ord = row_ordinal.find(rname);
          if (ord == row_ordinal.end())
            fail(W, line_no, "unknown row name '" + rname + "'");
          long long key = static_cast<long long>(col) *
                              static_cast<long long>(row_ordinal.size() + 1) +
                          ord->second;
          if (!seen_pair.insert(key).second)
            fail(W, line_no, "duplicate column entry " + cname + "/" + rname);
          if (rname == obj_name)
            c_entries[col] += val;
          else if (ignored_n.count(rname))
            ;  // entry on an ignored free row
          else
            a_entries.emplace_back(row_idx.at(rname), col, val);
        }
        break;
      }
      case Section::Rhs: {
        if (toks.size() != 3 && toks.size() != 5)
          fail(W, line_no, "RHS line needs one or two row/value pairs");
        for (size_t f = 1; f + 1 < toks.size(); f += 2) {
          const std::string& rname = toks[f];
          double val = parse_num(toks[f + 1], W, line_no);
          if (rname == obj_name) {
            obj_rhs = val;  // negated objective constant, Netlib convention
          } else if (ignored_n.count(rname)) {
            ;
          } else {
            auto it = row_idx.find(rname);
            if (it == row_idx.end()) fail(W, line_no, "unknown row name '" + rname + "'");
            rhs_map[it->second] = val;
          }
        }
        break;
      }
      case Section::Ranges: {
        if (toks.size() != 3 && toks.size() != 5)
          fail(W, line_no, "RANGES line needs one or two row/value pairs");
        for (size_t f = 1; f + 1 < toks.size(); f += 2) {
          auto it = row_idx.find(toks[f]);
          if (it == row_idx.end()) fail(W, line_no, "unknown row name '" + toks[f] + "'");
          range_map[it->second] = parse_num(toks[f + 1], W, line_no);
        }
        break;
      }
      case Section::Bounds: {
        if (toks.size() < 3) fail(W, line_no, "BOUNDS line needs type, set name, column");
        const std::string& btype = toks[0];
        int col = col_of(toks[2], line_no);
        lower.resize(raw.col_names.size(), 0.0);
        upper.resize(raw.col_names.size(), kInf);
        auto need_val = [&]() {
          if (toks.size() < 4) fail(W, line_no, btype + " bound needs a value");
          return parse_num(toks[3], W, line_no);
        };
        if (btype == "UP")
          upper[col] = need_val();
        else if (btype == "LO")
          lower[col] = need_val();
        else if (btype == "FX")
          lower[col] = upper[col] = need_val();
        else if (btype == "FR") {
          lower[col] = -kInf;
          upper[col] = kInf;
        } else if (btype == "MI")
          lower[col] = -kInf;
        else if (btype == "PL")
          upper[col] = kInf;
        else if (btype == "BV" || btype == "LI" || btype == "UI")
          fail(W, line_no, "integer bound type '" + btype + "' is not supported");
        else
          fail(W, line_no, "unknown bound type '" + btype + "'");
        break;
      }
      case Section::Quadobj:
      case Section::Qmatrix: {
        if (toks.size() != 3) fail(W, line_no, "quadratic line needs two columns and a value");
        int i = col_of(toks[0], line_no);
        int j = col_of(toks[1], line_no);
        double v = parse_num(toks[2], W, line_no);
        long long key = static_cast<long long>(std::max(i, j)) * (1LL << 31) +
                        std::min(i, j) + (section == Section::Qmatrix && i < j ? (1LL << 62) : 0);
        if (!seen_qpair.insert(key).second)
          fail(W, line_no, "duplicate quadratic entry " + toks[0] + "/" + toks[1]);
        if (section == Section::Quadobj) {
          // lower triangle given; mirror off-diagonal entries
          q_entries.emplace_back(i, j, v);
          if (i != j) q_entries.emplace_back(j, i, v);
        } else {
          q_entries.emplace_back(i, j, v);
        }
        break;
      }
      case Section::Name:
      case Section::None:
        fail(W, line_no, "data line before any section header");
      case Section::Endata:
        break;
    }
  }

  if (!seen_rows) fail(W, line_no, "missing required section ROWS");
  if (!seen_cols) fail(W, line_no, "missing required section COLUMNS");
  if (!seen_rhs) fail(W, line_no, "missing required section RHS");

  raw.n = static_cast<int>(raw.col_names.size());
  raw.m = static_cast<int>(raw.row_names.size());
  raw.A.resize(raw.m, raw.n);
  raw.A.setFromTriplets(a_entries.begin(), a_entries.end());
  raw.Q.resize(raw.n, raw.n);
  raw.Q.setFromTriplets(q_entries.begin(), q_entries.end());
  raw.b = Vec::Zero(raw.m);
  for (auto& [i, v] : rhs_map) raw.b[i] = v;
  raw.c = Vec::Zero(raw.n);
  for (int j = 0; j < raw.n; ++j) raw.c[j] = c_entries[j];
  raw.objective_constant = -obj_rhs;
  lower.resize(raw.n, 0.0);
  upper.resize(raw.n, kInf);
  raw.lower = Eigen::Map<Vec>(lower.data(), raw.n);
  raw.upper = Eigen::Map<Vec>(upper.data(), raw.n);
  raw.range = Vec::Constant(raw.m, std::numeric_limits<double>::quiet_NaN());
  for (auto& [i, v] : range_map) raw.range[i] = v;
  raw.row_types = std::move(row_types);
  return raw;
}

RawProblem parse_qps_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_qps(in, path);
}

std::string write_qps(const RawProblem& raw) {
  std::ostringstream out;
  out << "NAME          " << raw.name << "\n";
  out << "ROWS\n N  OBJ\n";
  for (int i = 0; i < raw.m; ++i) {
    char t = raw.row_types[i] == RowType::Eq ? 'E' : raw.row_types[i] == RowType::Le ? 'L' : 'G';
    out << " " << t << "  " << raw.row_names[i] << "\n";
  }
  out << "COLUMNS\n";
  Mat dense_a = Mat(raw.A);
  for (int j = 0; j < raw.n; ++j) {
    if (raw.c[j] != 0.0)
      out << "    " << raw.col_names[j] << "  OBJ  " << fmt_num(raw.c[j]) << "\n";
    for (int i = 0; i < raw.m; ++i)
      if (dense_a(i, j) != 0.0)
        out << "    " << raw.col_names[j] << "  " << raw.row_names[i] << "  "
            << fmt_num(dense_a(i, j)) << "\n";
  }
  out << "RHS\n";
  for (int i = 0; i < raw.m; ++i)
    if (raw.b[i] != 0.0)
      out << "    RHS  " << raw.row_names[i] << "  " << fmt_num(raw.b[i]) << "\n";
  if (raw.objective_constant != 0.0)
    out << "    RHS  OBJ  " << fmt_num(-raw.objective_constant) << "\n";
  bool any_range = false;
  for (int i = 0; i < raw.m; ++i) any_range |= !std::isnan(raw.range[i]);
  if (any_range) {
    out << "RANGES\n";
    for (int i = 0; i < raw.m; ++i)
      if (!std::isnan(raw.range[i]))
        out << "    RNG  " << raw.row_names[i] << "  " << fmt_num(raw.range[i]) << "\n";
  }
  bool any_bound = false;
  for (int j = 0; j < raw.n; ++j)
    any_bound |= raw.lower[j] != 0.0 || std::isfinite(raw.upper[j]);
  if (any_bound) {
    out << "BOUNDS\n";
    for (int j = 0; j < raw.n; ++j) {
      double l = raw.lower[j], u = raw.upper[j];
      const std::string& cn = raw.col_names[j];
      if (l == u) {
        out << " FX BND  " << cn << "  " << fmt_num(l) << "\n";
        continue;
      }
      if (std::isinf(l) && std::isinf(u)) {
        out << " FR BND  " << cn << "\n";
        continue;
      }
      if (std::isinf(l))
        out << " MI BND  " << cn << "\n";
      else if (l != 0.0)
        out << " LO BND  " << cn << "  " << fmt_num(l) << "\n";
      if (std::isfinite(u)) out << " UP BND  " << cn << "  " << fmt_num(u) << "\n";
    }
  }
  if (raw.Q.nonZeros()) {
    out << "QUADOBJ\n";
    Mat dense_q = Mat(raw.Q);
    for (int j = 0; j < raw.n; ++j)
      for (int i = j; i < raw.n; ++i)
        if (dense_q(i, j) != 0.0)
          out << "    " << raw.col_names[i] << "  " << raw.col_names[j] << "  "
              << fmt_num(dense_q(i, j)) << "\n";
  }
  out << "ENDATA\n";
  return out.str();
}

std::pair<QuadraticProgram, TransformRecord> to_standard_form(const RawProblem& raw) {
  if (raw.n < 1) throw std::invalid_argument("problem has no variables");
  for (int j = 0; j < raw.n; ++j)
    if (raw.lower[j] > raw.upper[j])
      throw InfeasibleBounds("bounds cross on column " + std::to_string(j) +
                             ": " + fmt_num(raw.lower[j]) + " > " + fmt_num(raw.upper[j]));

  // Row stage: every constraint row becomes an equality; inequality and
  // ranged rows get a slack column with bounds of its own.
  int n_pre = raw.n;
  std::vector<Triplet> a_pre;      // m x n_pre
  std::vector<double> lo_pre(raw.lower.data(), raw.lower.data() + raw.n);
  std::vector<double> up_pre(raw.upper.data(), raw.upper.data() + raw.n);
  Vec b_pre = Vec::Zero(raw.m);
  for (int jo = 0; jo < raw.A.outerSize(); ++jo)
    for (SpMat::InnerIterator it(raw.A, jo); it; ++it)
      a_pre.emplace_back(it.row(), it.col(), it.value());

  for (int i = 0; i < raw.m; ++i) {
    double lo, hi, b = raw.b[i], r = raw.range[i];
    switch (raw.row_types[i]) {
      case RowType::Eq:
        lo = hi = b;
        if (!std::isnan(r)) { lo = std::min(b, b + r); hi = std::max(b, b + r); }
        break;
      case RowType::Le:
        hi = b;
        lo = std::isnan(r) ? -kInf : b - std::abs(r);
        break;
      case RowType::Ge:
        lo = b;
        hi = std::isnan(r) ? kInf : b + std::abs(r);
        break;
      default: lo = hi = b;
    }
    if (lo == hi) {
      b_pre[i] = lo;
    } else if (std::isinf(lo)) {
      // a'x + s = hi, s >= 0
      a_pre.emplace_back(i, n_pre, 1.0);
      lo_pre.push_back(0.0);
      up_pre.push_back(kInf);
      ++n_pre;
      b_pre[i] = hi;
    } else {
      // a'x - s = lo, 0 <= s <= hi - lo
      a_pre.emplace_back(i, n_pre, -1.0);
      lo_pre.push_back(0.0);
      up_pre.push_back(hi - lo);  // +inf when hi is
      ++n_pre;
      b_pre[i] = lo;
    }
  }

  // Column stage: affine map x_pre = M x_std + t.
  TransformRecord rec;
  rec.n_orig = raw.n;
  rec.m_orig = raw.m;
  std::vector<Triplet> m_entries;
  Vec t = Vec::Zero(n_pre);
  std::vector<std::pair<int, double>> upper_rows;  // (std col, remaining upper)
  int next_col = 0;
  std::vector<VariableMap> maps(n_pre);
  for (int j = 0; j < n_pre; ++j) {
    double l = lo_pre[j], u = up_pre[j];
    VariableMap vm;
    if (std::isfinite(l)) {
      vm.kind = VariableMap::Shifted;
      vm.col = next_col++;
      vm.shift = l;
      m_entries.emplace_back(j, vm.col, 1.0);
      t[j] = l;
      if (std::isfinite(u)) upper_rows.emplace_back(vm.col, u - l);
    } else if (std::isfinite(u)) {
      vm.kind = VariableMap::Mirrored;
      vm.col = next_col++;
      vm.mirror_offset = u;
      m_entries.emplace_back(j, vm.col, -1.0);
      t[j] = u;
    } else {
      vm.kind = VariableMap::Split;
      vm.col = next_col++;
      vm.neg_col = next_col++;
      m_entries.emplace_back(j, vm.col, 1.0);
      m_entries.emplace_back(j, vm.neg_col, -1.0);
    }
    maps[j] = vm;
  }
  int n_std = next_col + static_cast<int>(upper_rows.size());
  int m_std = raw.m + static_cast<int>(upper_rows.size());

  SpMat M(n_pre, n_std);
  M.setFromTriplets(m_entries.begin(), m_entries.end());
  SpMat A_pre(raw.m, n_pre);
  A_pre.setFromTriplets(a_pre.begin(), a_pre.end());
  SpMat Q_pre(n_pre, n_pre);
  {
    std::vector<Triplet> q_entries;
    for (int jo = 0; jo < raw.Q.outerSize(); ++jo)
      for (SpMat::InnerIterator it(raw.Q, jo); it; ++it)
        q_entries.emplace_back(it.row(), it.col(), it.value());
    Q_pre.setFromTriplets(q_entries.begin(), q_entries.end());
  }

  QuadraticProgram qp;
  qp.name = raw.name;
  qp.n = n_std;
  qp.m = m_std;
  qp.Q = SpMat(M.transpose() * Q_pre * M);
  qp.Q.prune(0.0);
  Vec c_shift = raw.c;
  c_shift.conservativeResize(n_pre);
  c_shift.tail(n_pre - raw.n).setZero();
  Vec c_full = c_shift + Q_pre * t;
  qp.c = M.transpose() * c_full;
  rec.objective_offset = 0.5 * t.dot(Q_pre * t) + c_shift.dot(t) + raw.objective_constant;

  SpMat A_main = SpMat(A_pre * M);
  std::vector<Triplet> a_std;
  for (int jo = 0; jo < A_main.outerSize(); ++jo)
    for (SpMat::InnerIterator it(A_main, jo); it; ++it)
      if (it.value() != 0.0) a_std.emplace_back(it.row(), it.col(), it.value());
  qp.b = Vec::Zero(m_std);
  qp.b.head(raw.m) = b_pre - A_pre * t;
  for (size_t r = 0; r < upper_rows.size(); ++r) {
    int row = raw.m + static_cast<int>(r);
    int slack_col = next_col + static_cast<int>(r);
    a_std.emplace_back(row, upper_rows[r].first, 1.0);
    a_std.emplace_back(row, slack_col, 1.0);
    qp.b[row] = upper_rows[r].second;
  }
  qp.A.resize(m_std, n_std);
  qp.A.setFromTriplets(a_std.begin(), a_std.end());
  qp.validate();

  rec.vars.assign(maps.begin(), maps.begin() + raw.n);
  rec.n_std = n_std;
  rec.m_std = m_std;
  return {std::move(qp), std::move(rec)};
}

RecoveredSolution recover_solution(const TransformRecord& rec,
                                   const QuadraticProgram& std_qp,
                                   const Vec& x_std, const Vec& lambda_std) {
  if (x_std.size() != rec.n_std || lambda_std.size() != rec.m_std ||
      std_qp.n != rec.n_std || std_qp.m != rec.m_std)
    throw std::invalid_argument("recover_solution: dimension mismatch");
  RecoveredSolution out;
  out.x = Vec::Zero(rec.n_orig);
  for (int j = 0; j < rec.n_orig; ++j) {
    const VariableMap& vm = rec.vars[j];
    switch (vm.kind) {
      case VariableMap::Shifted: out.x[j] = x_std[vm.col] + vm.shift; break;
      case VariableMap::Mirrored: out.x[j] = vm.mirror_offset - x_std[vm.col]; break;
      case VariableMap::Split: out.x[j] = x_std[vm.col] - x_std[vm.neg_col]; break;
    }
  }
  out.lambda = lambda_std.head(rec.m_orig);
  out.objective = std_qp.objective(x_std) + rec.objective_offset;
  return out;
}

}  // namespace qnipm
