#include "ifproj/graph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ifproj/errors.hpp"

namespace ifproj {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool valid_vertex_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

// Kahn topological check; on failure walks back through unprocessed vertices
// to extract one directed cycle for the message.
void check_acyclic(const Dag& g) {
  std::vector<int> indeg(g.size(), 0);
  for (int v = 0; v < g.size(); ++v) indeg[v] = static_cast<int>(g.parents[v].size());
  std::deque<int> q;
  for (int v = 0; v < g.size(); ++v)
    if (indeg[v] == 0) q.push_back(v);
  int done = 0;
  std::vector<int> deg = indeg;
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    ++done;
    for (int c : g.children[v])
      if (--deg[c] == 0) q.push_back(c);
  }
  if (done == g.size()) return;

  // every remaining vertex has a remaining parent; follow parents until repeat
  std::vector<bool> stuck(g.size(), false);
  for (int v = 0; v < g.size(); ++v) stuck[v] = deg[v] > 0;
  int v = 0;
  while (!stuck[v]) ++v;
  std::vector<int> path;
  std::vector<int> seen_at(g.size(), -1);
  while (seen_at[v] < 0) {
    seen_at[v] = static_cast<int>(path.size());
    path.push_back(v);
    for (int p : g.parents[v])
      if (stuck[p]) {
        v = p;
        break;
      }
  }
  std::string msg = "graph has a cycle: ";
  for (std::size_t i = seen_at[v]; i < path.size(); ++i) msg += g.names[path[i]] + " <- ";
  msg += g.names[v];
  throw CycleError(msg);
}

}  // namespace

int Dag::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw SchemaError("graph has no vertex named '" + name + "'");
  return static_cast<int>(it - names.begin());
}

Dag make_dag(std::vector<std::string> names, const std::vector<std::pair<int, int>>& edges) {
  Dag g;
  g.names = std::move(names);
  std::set<std::string> uniq;
  for (const auto& nm : g.names) {
    if (!valid_vertex_name(nm)) throw ParseError("invalid vertex name '" + nm + "'");
    if (!uniq.insert(nm).second) throw ParseError("duplicate vertex '" + nm + "'");
  }
  g.parents.assign(g.size(), {});
  g.children.assign(g.size(), {});
  std::set<std::pair<int, int>> edge_set;
  for (auto [a, b] : edges) {
    if (a < 0 || a >= g.size() || b < 0 || b >= g.size())
      throw SchemaError("edge endpoint index out of range");
    if (a == b) throw CycleError("graph has a cycle: self-loop at " + g.names[a]);
    if (!edge_set.insert({a, b}).second) continue;  // repeated edge is harmless
    g.parents[b].push_back(a);
    g.children[a].push_back(b);
  }
  for (auto& v : g.parents) std::sort(v.begin(), v.end());
  for (auto& v : g.children) std::sort(v.begin(), v.end());
  check_acyclic(g);
  return g;
}

Dag parse_dag(const std::string& text) {
  // statements split on ';' and newlines, '#' to end of line is a comment
  std::vector<std::string> statements;
  {
    std::string cur;
    bool comment = false;
    for (char c : text) {
      if (c == '#') comment = true;
      if (c == '\n') comment = false;
      if (comment) continue;
      if (c == ';' || c == '\n') {
        statements.push_back(trim(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    statements.push_back(trim(cur));
  }

  std::vector<std::string> names;
  std::map<std::string, int> id;
  auto intern = [&](const std::string& nm) {
    if (!valid_vertex_name(nm)) throw ParseError("graph: invalid vertex name '" + nm + "'");
    const auto it = id.find(nm);
    if (it != id.end()) return it->second;
    id[nm] = static_cast<int>(names.size());
    names.push_back(nm);
    return id[nm];
  };

  std::vector<std::pair<int, int>> edges;
  for (const auto& stmt : statements) {
    if (stmt.empty()) continue;
    const auto arrow = stmt.find("->");
    if (arrow != std::string::npos) {
      const std::string a = trim(stmt.substr(0, arrow));
      const std::string b = trim(stmt.substr(arrow + 2));
      if (a.empty() || b.empty()) throw ParseError("graph: malformed edge statement '" + stmt + "'");
      edges.emplace_back(intern(a), intern(b));
      continue;
    }
    if (stmt.rfind("vertex", 0) == 0) {
      const std::string nm = trim(stmt.substr(6));
      if (nm.empty()) throw ParseError("graph: malformed vertex statement '" + stmt + "'");
      intern(nm);
      continue;
    }
    throw ParseError("graph: cannot parse statement '" + stmt + "'");
  }
  if (names.empty()) throw ParseError("graph file declares no vertices");
  return make_dag(std::move(names), edges);
}

Dag load_dag(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dag(ss.str());
}

bool d_separated(const Dag& g, int a, int b, const std::vector<int>& given) {
  const int n = g.size();
  if (a < 0 || a >= n || b < 0 || b >= n) throw SchemaError("d_separated: vertex out of range");
  if (a == b) throw DomainError("d_separated: endpoints coincide");
  std::vector<bool> observed(n, false);
  for (int s : given) {
    if (s < 0 || s >= n) throw SchemaError("d_separated: conditioning vertex out of range");
    if (s == a || s == b) throw DomainError("d_separated: endpoint inside conditioning set");
    observed[s] = true;
  }

  // anc[v]: v is observed or has an observed descendant (collider opener)
  std::vector<bool> anc(n, false);
  {
    std::deque<int> q;
    for (int v = 0; v < n; ++v)
      if (observed[v]) {
        anc[v] = true;
        q.push_back(v);
      }
    while (!q.empty()) {
      const int v = q.front();
      q.pop_front();
      for (int p : g.parents[v])
        if (!anc[p]) {
          anc[p] = true;
          q.push_back(p);
        }
    }
  }

  // Trail reachability. State (v, dir): dir=0 means the trail enters v from a
  // child (or v is the source), dir=1 means it enters from a parent. A
  // non-collider passes iff unobserved; a collider (parent in, parent out)
  // passes iff v has an observed descendant-or-self.
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<int, int>> q;
  auto push = [&](int v, int dir) {
    if (!visited[v][dir]) {
      visited[v][dir] = true;
      q.emplace_back(v, dir);
    }
  };
  push(a, 0);
  while (!q.empty()) {
    auto [v, dir] = q.front();
    q.pop_front();
    if (v == b) return false;  // reachable -> connected
    if (dir == 0) {
      if (!observed[v]) {
        for (int p : g.parents[v]) push(p, 0);
        for (int c : g.children[v]) push(c, 1);
      }
    } else {
      if (!observed[v])
        for (int c : g.children[v]) push(c, 1);
      if (anc[v])
        for (int p : g.parents[v]) push(p, 0);
    }
  }
  return true;
}

CiConstraint canonical_constraint(int i, int j, std::vector<int> cond, int p) {
  if (i < 0 || j < 0 || i >= p || j >= p) throw SchemaError("constraint index out of range");
  if (i == j) throw DomainError("constraint relates a covariate to itself");
  CiConstraint c;
  c.i = std::min(i, j);
  c.j = std::max(i, j);
  std::sort(cond.begin(), cond.end());
  cond.erase(std::unique(cond.begin(), cond.end()), cond.end());
  for (int s : cond) {
    if (s < 0 || s >= p) throw SchemaError("constraint conditioning index out of range");
    if (s == c.i || s == c.j)
      throw DomainError("constraint conditions on one of its own endpoints");
  }
  c.cond = std::move(cond);
  return c;
}

std::vector<CiConstraint> implied_constraints(const Dag& g,
                                              const std::vector<std::string>& covariates,
                                              int max_cond) {
  if (max_cond < 0) throw DomainError("max_cond must be >= 0");
  const int p = static_cast<int>(covariates.size());
  std::vector<int> vid(p);
  for (int i = 0; i < p; ++i) vid[i] = g.index_of(covariates[i]);

  std::vector<CiConstraint> out;
  std::vector<int> pool;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      pool.clear();
      for (int s = 0; s < p; ++s)
        if (s != i && s != j) pool.push_back(s);
      const int m = static_cast<int>(pool.size());
      // subsets of the remaining covariates by increasing size
      for (int size = 0; size <= std::min(max_cond, m); ++size) {
        std::vector<int> pick(size);
        // iterative combination enumeration in lexicographic order
        std::vector<int> idx(size);
        for (int t = 0; t < size; ++t) idx[t] = t;
        while (true) {
          std::vector<int> cond_cov(size);
          std::vector<int> cond_vid(size);
          for (int t = 0; t < size; ++t) {
            cond_cov[t] = pool[idx[t]];
            cond_vid[t] = vid[pool[idx[t]]];
          }
          if (d_separated(g, vid[i], vid[j], cond_vid))
            out.push_back(canonical_constraint(i, j, cond_cov, p));
          if (size == 0) break;
          int t = size - 1;
          while (t >= 0 && idx[t] == m - size + t) --t;
          if (t < 0) break;
          ++idx[t];
          for (int u = t + 1; u < size; ++u) idx[u] = idx[u - 1] + 1;
        }
      }
    }
  std::sort(out.begin(), out.end(), [](const CiConstraint& a, const CiConstraint& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    return a.cond < b.cond;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<CiConstraint> parse_constraints(const std::string& text,
                                            const std::vector<std::string>& names) {
  auto name_index = [&](const std::string& nm, int lineno) {
    const auto it = std::find(names.begin(), names.end(), nm);
    if (it == names.end())
      throw SchemaError("constraints line " + std::to_string(lineno) + ": unknown covariate '" +
                        nm + "'");
    return static_cast<int>(it - names.begin());
  };

  std::vector<CiConstraint> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto indep = line.find("_||_");
    if (indep == std::string::npos)
      throw ParseError("constraints line " + std::to_string(lineno) + ": expected 'a _||_ b [| s, ...]'");
    const std::string lhs = trim(line.substr(0, indep));
    std::string rhs = trim(line.substr(indep + 4));
    std::vector<int> cond;
    const auto bar = rhs.find('|');
    if (bar != std::string::npos) {
      std::string cond_str = trim(rhs.substr(bar + 1));
      rhs = trim(rhs.substr(0, bar));
      if (cond_str.empty())
        throw ParseError("constraints line " + std::to_string(lineno) + ": empty conditioning set after '|'");
      std::istringstream cs(cond_str);
      std::string tok;
      while (std::getline(cs, tok, ',')) {
        tok = trim(tok);
        if (tok.empty())
          throw ParseError("constraints line " + std::to_string(lineno) + ": empty conditioning name");
        cond.push_back(name_index(tok, lineno));
      }
    }
    if (lhs.empty() || rhs.empty())
      throw ParseError("constraints line " + std::to_string(lineno) + ": missing endpoint name");
    try {
      out.push_back(canonical_constraint(name_index(lhs, lineno), name_index(rhs, lineno),
                                         std::move(cond), static_cast<int>(names.size())));
    } catch (const DomainError& e) {
      throw ParseError("constraints line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CiConstraint> load_constraints(const std::string& path,
                                           const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open constraints file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_constraints(ss.str(), names);
}

std::string format_constraint(const CiConstraint& c, const std::vector<std::string>& names) {
  const int p = static_cast<int>(names.size());
  if (c.i < 0 || c.j < 0 || c.i >= p || c.j >= p)
    throw SchemaError("constraint index out of range for name list");
  std::string s = names[c.i] + " _||_ " + names[c.j];
  if (!c.cond.empty()) {
    s += " | ";
    for (std::size_t k = 0; k < c.cond.size(); ++k) {
      if (c.cond[k] < 0 || c.cond[k] >= p)
        throw SchemaError("constraint conditioning index out of range for name list");
      if (k) s += ", ";
      s += names[c.cond[k]];
    }
  }
  return s;
}

std::string format_constraints(const std::vector<CiConstraint>& cs,
                               const std::vector<std::string>& names) {
  std::string out;
  for (const auto& c : cs) out += format_constraint(c, names) + "\n";
  return out;
}

}  // namespace ifproj
