// SPDX-License-Identifier: Apache-2.0
#include "delaytk/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "delaytk/error.hpp"

namespace delaytk {

namespace {

using boost::multiprecision::cpp_int;

cpp_int bareiss(const Eigen::MatrixXi& a) {
  const auto n = a.rows();
  if (n == 0) return 1;
  std::vector<cpp_int> m(static_cast<std::size_t>(n * n));
  auto at = [&](Eigen::Index r, Eigen::Index c) -> cpp_int& { return m[static_cast<std::size_t>(r * n + c)]; };
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) at(r, c) = a(r, c);

  cpp_int prev = 1;
  int sign = 1;
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    if (at(k, k) == 0) {
      Eigen::Index swap = k + 1;
      while (swap < n && at(swap, k) == 0) ++swap;
      if (swap == n) return 0;
      for (Eigen::Index c = 0; c < n; ++c) std::swap(at(k, c), at(swap, c));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      for (Eigen::Index j = k + 1; j < n; ++j) {
        // exact division, Sylvester's identity
        at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
      }
    }
    prev = at(k, k);
  }
  return sign * at(n - 1, n - 1);
}

std::vector<Edge> canonical(int n, std::span<const std::pair<int, int>> pairs) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [a, b] : pairs) {
    if (a < 1 || a > n || b < 1 || b > n)
      throw Error(ErrorCode::IndexOutOfRange,
                  "edge (" + std::to_string(a) + "," + std::to_string(b) + ") outside 1.." + std::to_string(n));
    if (a == b) throw Error(ErrorCode::SelfLoop, "self-loop at agent " + std::to_string(a));
    edges.push_back({std::min(a, b) - 1, std::max(a, b) - 1});
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end())
    throw Error(ErrorCode::DuplicateEdge,
                "edge (" + std::to_string(dup->i + 1) + "," + std::to_string(dup->j + 1) + ") listed twice");
  return edges;
}

}  // namespace

std::string exact_determinant(const Eigen::MatrixXi& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "determinant of non-square matrix");
  return bareiss(a).str();
}

bool is_singular_exact(const Eigen::MatrixXi& a) { return bareiss(a) == 0; }

bool is_connected(int n, std::span<const Edge> edges) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n;
  for (const auto& e : edges) {
    const int a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

Graph Graph::validated(int n, std::vector<Edge> edges) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 agents, got " + std::to_string(n));
  if (!is_connected(n, edges)) throw Error(ErrorCode::Disconnected, "graph has more than one component");
  Graph g(n, std::move(edges));
  if (is_singular_exact(g.adjacency()))
    throw Error(ErrorCode::SingularAdjacency, "adjacency matrix has zero determinant");
  return g;
}

Graph Graph::cycle(int n) {
  if (n < 3) throw Error(ErrorCode::InvalidArgument, "cycle needs n >= 3");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 1; i <= n; ++i) pairs.emplace_back(i, i % n + 1);
  return from_edge_list(n, pairs);
}

Graph Graph::path(int n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "path needs n >= 2");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 1; i < n; ++i) pairs.emplace_back(i, i + 1);
  return from_edge_list(n, pairs);
}

Graph Graph::from_edge_list(int n, std::span<const std::pair<int, int>> pairs) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 agents, got " + std::to_string(n));
  return validated(n, canonical(n, pairs));
}

Graph Graph::random(int n, double p, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 agents");
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "edge probability must be in (0, 1]");
  std::mt19937_64 rng(seed);
  // raw 53-bit draws: distribution objects are not portable across standard libraries
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (uniform() < p) edges.push_back({i, j});
    if (!is_connected(n, edges)) continue;
    Graph g(n, std::move(edges));
    if (!is_singular_exact(g.adjacency())) return g;
  }
  throw Error(ErrorCode::InvalidArgument, "no connected invertible graph found for these parameters");
}

Eigen::MatrixXi Graph::adjacency() const {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n_, n_);
  for (const auto& e : edges_) a(e.i, e.j) = a(e.j, e.i) = 1;
  return a;
}

Eigen::VectorXi Graph::degrees() const { return adjacency().rowwise().sum(); }

std::vector<int> Graph::neighbors(int i) const {
  std::vector<int> out;
  for (const auto& e : edges_) {
    if (e.i == i) out.push_back(e.j);
    if (e.j == i) out.push_back(e.i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Graph parse_edge_list(std::string_view text) {
  std::vector<long long> numbers;
  int line_no = 0;
  std::size_t pos = 0;
  std::vector<std::pair<int, int>> pairs;
  int n = -1;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    numbers.clear();
    std::size_t k = 0;
    while (k < line.size()) {
      while (k < line.size() && (line[k] == ' ' || line[k] == '\t' || line[k] == '\r')) ++k;
      if (k == line.size()) break;
      long long value = 0;
      auto [ptr, ec] = std::from_chars(line.data() + k, line.data() + line.size(), value);
      if (ec != std::errc() || (ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t' && *ptr != '\r'))
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected integers");
      numbers.push_back(value);
      k = static_cast<std::size_t>(ptr - line.data());
    }
    if (numbers.empty()) continue;
    if (n < 0) {
      if (numbers.size() != 1 || numbers[0] < 2 || numbers[0] > 100000)
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": first entry must be agent count n >= 2");
      n = static_cast<int>(numbers[0]);
      continue;
    }
    if (numbers.size() != 2)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected one 'i j' pair");
    auto narrow = [&](long long v) {
      if (v < 1 || v > n)
        throw Error(ErrorCode::IndexOutOfRange, "line " + std::to_string(line_no) + ": index " + std::to_string(v));
      return static_cast<int>(v);
    };
    pairs.emplace_back(narrow(numbers[0]), narrow(numbers[1]));
  }
  if (n < 0) throw Error(ErrorCode::ParseError, "empty edge list");
  return Graph::from_edge_list(n, pairs);
}

Graph load_edge_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open graph file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str());
}

std::string format_edge_list(const Graph& g) {
  std::ostringstream out;
  out << g.size() << '\n';
  for (const auto& e : g.edges()) out << e.i + 1 << ' ' << e.j + 1 << '\n';
  return out.str();
}

}  // namespace delaytk
