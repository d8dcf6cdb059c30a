#include "lsec/graph_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lsec/binary_io.hpp"

namespace lsec {

const char* to_string(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::User: return "user";
    case EntityKind::Item: return "item";
    case EntityKind::Streamer: return "streamer";
  }
  return "?";
}

const char* to_string(Relation rel) noexcept {
  switch (rel) {
    case Relation::Buy: return "buy";
    case Relation::Follow: return "follow";
    case Relation::Sell: return "sell";
  }
  return "?";
}

Relation relation_from_string(std::string_view name) {
  if (name == "buy") return Relation::Buy;
  if (name == "follow") return Relation::Follow;
  if (name == "sell") return Relation::Sell;
  throw ArgumentError("unknown relation '" + std::string(name) + "'");
}

EntityKind left_kind(Relation rel) noexcept {
  return rel == Relation::Sell ? EntityKind::Streamer : EntityKind::User;
}

EntityKind right_kind(Relation rel) noexcept {
  return rel == Relation::Follow ? EntityKind::Streamer : EntityKind::Item;
}

bool touches(Relation rel, EntityKind kind) noexcept {
  return left_kind(rel) == kind || right_kind(rel) == kind;
}

std::int32_t IdDictionary::encode(std::string_view raw) {
  auto it = index_.find(std::string(raw));
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<std::int32_t>(raw_.size());
  raw_.emplace_back(raw);
  index_.emplace(raw_.back(), idx);
  return idx;
}

std::optional<std::int32_t> IdDictionary::find(std::string_view raw) const {
  auto it = index_.find(std::string(raw));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& IdDictionary::decode(std::int32_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= raw_.size()) {
    throw IndexError("id index " + std::to_string(index) + " outside dictionary of size " +
                     std::to_string(raw_.size()));
  }
  return raw_[static_cast<std::size_t>(index)];
}

void IdDictionary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : raw_) out << r << '\n';
}

IdDictionary IdDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  IdDictionary d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (d.find(line)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + line +
                       "'");
    }
    d.encode(line);
  }
  return d;
}

IdDictionary& Dictionaries::of(EntityKind kind) {
  switch (kind) {
    case EntityKind::User: return users;
    case EntityKind::Item: return items;
    case EntityKind::Streamer: return streamers;
  }
  return users;
}

const IdDictionary& Dictionaries::of(EntityKind kind) const {
  return const_cast<Dictionaries*>(this)->of(kind);
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    parts.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return parts;
}

}  // namespace

void collapse_duplicates(EdgeList& list) {
  auto& e = list.edges;
  std::stable_sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) {
    if (a.left != b.left) return a.left < b.left;
    if (a.right != b.right) return a.right < b.right;
    return a.timestamp < b.timestamp;
  });
  e.erase(std::unique(e.begin(), e.end(),
                      [](const Edge& a, const Edge& b) {
                        return a.left == b.left && a.right == b.right;
                      }),
          e.end());
}

EdgeList load_edges(const std::filesystem::path& path, Relation schema, Dictionaries& dicts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  IdDictionary& left = dicts.of(left_kind(schema));
  IdDictionary& right = dicts.of(right_kind(schema));

  EdgeList list;
  std::optional<bool> timed;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.filename().string() + ":" + std::to_string(line_no);
    const auto parts = split_tabs(line);
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty() || parts[1].empty()) {
      throw ParseError(where + ": expected left<TAB>right[<TAB>timestamp]");
    }
    const bool has_ts = parts.size() == 3;
    if (timed && *timed != has_ts) {
      throw ParseError(where + ": timestamp column present on some lines only");
    }
    timed = has_ts;
    Edge e;
    if (has_ts) {
      const auto ts = parts[2];
      const auto res = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
      if (res.ec != std::errc() || res.ptr != ts.data() + ts.size()) {
        throw ParseError(where + ": timestamp '" + std::string(ts) + "' is not an integer");
      }
    }
    e.left = left.encode(parts[0]);
    e.right = right.encode(parts[1]);
    list.edges.push_back(e);
  }
  list.has_timestamps = timed.value_or(false);
  collapse_duplicates(list);
  return list;
}

bool Csr::contains(std::size_t row, std::int32_t col) const noexcept {
  const auto nb = neighbors(row);
  return std::binary_search(nb.begin(), nb.end(), col);
}

EdgeList BipartiteGraph::edges() const {
  EdgeList list;
  list.has_timestamps = has_timestamps();
  list.edges.reserve(edge_count());
  for (std::size_t l = 0; l < left_count; ++l) {
    for (auto e = forward.indptr[l]; e < forward.indptr[l + 1]; ++e) {
      list.edges.push_back({static_cast<std::int32_t>(l), forward.indices[e],
                            has_timestamps() ? timestamps[e] : 0});
    }
  }
  return list;
}

namespace {

void validate_csr(const Csr& csr, std::size_t rows, std::size_t cols, const char* name) {
  if (csr.indptr.size() != rows + 1 || csr.indptr.front() != 0 ||
      static_cast<std::size_t>(csr.indptr.back()) != csr.indices.size()) {
    throw ContractError(std::string(name) + ": malformed indptr");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (csr.indptr[r + 1] < csr.indptr[r]) {
      throw ContractError(std::string(name) + ": indptr decreases");
    }
    const auto nb = csr.neighbors(r);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] < 0 || static_cast<std::size_t>(nb[k]) >= cols) {
        throw ContractError(std::string(name) + ": neighbor out of range in row " +
                            std::to_string(r));
      }
      if (k > 0 && nb[k] <= nb[k - 1]) {
        throw ContractError(std::string(name) + ": neighbors not strictly ascending in row " +
                            std::to_string(r));
      }
    }
  }
}

Csr transpose(const Csr& csr, std::size_t cols) {
  Csr t;
  t.indptr.assign(cols + 1, 0);
  for (auto c : csr.indices) ++t.indptr[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.indptr[c + 1] += t.indptr[c];
  t.indices.resize(csr.indices.size());
  std::vector<std::int64_t> cursor(t.indptr.begin(), t.indptr.end() - 1);
  for (std::size_t r = 0; r < csr.rows(); ++r) {
    for (auto c : csr.neighbors(r)) t.indices[cursor[c]++] = static_cast<std::int32_t>(r);
  }
  return t;
}

}  // namespace

void BipartiteGraph::validate() const {
  validate_csr(forward, left_count, right_count, "forward csr");
  validate_csr(reverse, right_count, left_count, "reverse csr");
  if (forward.nnz() != reverse.nnz()) throw ContractError("csr directions differ in edge count");
  const Csr t = transpose(forward, right_count);
  if (t.indptr != reverse.indptr || t.indices != reverse.indices) {
    throw ContractError("reverse csr is not the transpose of forward csr");
  }
  if (has_timestamps() && timestamps.size() != forward.nnz()) {
    throw ContractError("timestamps not aligned with edges");
  }
}

BipartiteGraph build_bipartite(const EdgeList& edges, EntityKind lk, EntityKind rk,
                               std::size_t left_count, std::size_t right_count) {
  EdgeList sorted = edges;
  for (std::size_t k = 0; k < sorted.edges.size(); ++k) {
    const Edge& e = sorted.edges[k];
    if (e.left < 0 || static_cast<std::size_t>(e.left) >= left_count || e.right < 0 ||
        static_cast<std::size_t>(e.right) >= right_count) {
      throw IndexError("edge " + std::to_string(k) + " (" + std::to_string(e.left) + ", " +
                       std::to_string(e.right) + ") outside " + std::to_string(left_count) +
                       "x" + std::to_string(right_count));
    }
  }
  collapse_duplicates(sorted);

  BipartiteGraph g;
  g.left_kind = lk;
  g.right_kind = rk;
  g.left_count = left_count;
  g.right_count = right_count;
  g.forward.indptr.assign(left_count + 1, 0);
  g.forward.indices.reserve(sorted.edges.size());
  for (const Edge& e : sorted.edges) {
    ++g.forward.indptr[e.left + 1];
    g.forward.indices.push_back(e.right);
    if (sorted.has_timestamps) g.timestamps.push_back(e.timestamp);
  }
  for (std::size_t l = 0; l < left_count; ++l) g.forward.indptr[l + 1] += g.forward.indptr[l];
  g.reverse = transpose(g.forward, right_count);
  return g;
}

const BipartiteGraph& TripartiteGraph::relation(Relation rel) const noexcept {
  switch (rel) {
    case Relation::Buy: return buy;
    case Relation::Follow: return follow;
    case Relation::Sell: return sell;
  }
  return buy;
}

BipartiteGraph& TripartiteGraph::relation(Relation rel) noexcept {
  return const_cast<BipartiteGraph&>(std::as_const(*this).relation(rel));
}

std::size_t TripartiteGraph::count(EntityKind kind) const noexcept {
  switch (kind) {
    case EntityKind::User: return n_users;
    case EntityKind::Item: return n_items;
    case EntityKind::Streamer: return n_streamers;
  }
  return 0;
}

void TripartiteGraph::validate() const {
  for (Relation rel : kAllRelations) {
    const auto& g = relation(rel);
    if (g.left_kind != left_kind(rel) || g.right_kind != right_kind(rel) ||
        g.left_count != count(left_kind(rel)) || g.right_count != count(right_kind(rel))) {
      throw ContractError(std::string(to_string(rel)) + " graph counts or kinds inconsistent");
    }
    g.validate();
  }
}

TripartiteGraph build_tripartite(std::size_t n_users, std::size_t n_items, std::size_t n_streamers,
                                 const EdgeList& buy, const EdgeList& follow,
                                 const EdgeList& sell) {
  TripartiteGraph t;
  t.n_users = n_users;
  t.n_items = n_items;
  t.n_streamers = n_streamers;
  t.buy = build_bipartite(buy, EntityKind::User, EntityKind::Item, n_users, n_items);
  t.follow = build_bipartite(follow, EntityKind::User, EntityKind::Streamer, n_users, n_streamers);
  t.sell = build_bipartite(sell, EntityKind::Streamer, EntityKind::Item, n_streamers, n_items);
  return t;
}

std::int64_t degree_quantile(const BipartiteGraph& graph, Direction dir, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ArgumentError("quantile level " + std::to_string(p) + " outside (0,1]");
  }
  const Csr& csr = graph.csr(dir);
  const std::size_t n = csr.rows();
  if (n == 0) throw ArgumentError("degree quantile of an empty node set");
  std::vector<std::int64_t> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = csr.degree(i);
  std::sort(deg.begin(), deg.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return std::max<std::int64_t>(deg[rank - 1], 1);
}

SparseMatrix normalized_blocks(const BipartiteGraph& graph, bool self_loops) {
  const std::size_t L = graph.left_count;
  const std::size_t n = L + graph.right_count;
  const double loop = self_loops ? 1.0 : 0.0;
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    const double d = static_cast<double>(a < L ? graph.forward.degree(a)
                                               : graph.reverse.degree(a - L)) +
                     loop;
    inv_sqrt[a] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }

  SparseMatrix s;
  s.rows = s.cols = n;
  s.indptr.assign(1, 0);
  s.indices.reserve(2 * graph.edge_count() + (self_loops ? n : 0));
  s.values.reserve(s.indices.capacity());
  auto push = [&](std::size_t a, std::size_t b) {
    s.indices.push_back(static_cast<std::int32_t>(b));
    s.values.push_back(inv_sqrt[a] * inv_sqrt[b]);
  };
  for (std::size_t a = 0; a < L; ++a) {
    if (self_loops) push(a, a);
    for (auto r : graph.forward.neighbors(a)) push(a, L + static_cast<std::size_t>(r));
    s.indptr.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  for (std::size_t r = 0; r < graph.right_count; ++r) {
    for (auto l : graph.reverse.neighbors(r)) push(L + r, static_cast<std::size_t>(l));
    if (self_loops) push(L + r, L + r);
    s.indptr.push_back(static_cast<std::int64_t>(s.indices.size()));
  }
  return s;
}

namespace {

const char* file_name(Relation rel) {
  switch (rel) {
    case Relation::Buy: return "buy.tsv";
    case Relation::Follow: return "follow.tsv";
    case Relation::Sell: return "sell.tsv";
  }
  return "";
}

const char* dict_name(EntityKind kind) {
  switch (kind) {
    case EntityKind::User: return "users.txt";
    case EntityKind::Item: return "items.txt";
    case EntityKind::Streamer: return "streamers.txt";
  }
  return "";
}

constexpr EntityKind kKinds[] = {EntityKind::User, EntityKind::Item, EntityKind::Streamer};

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  for (EntityKind k : kKinds) {
    const auto p = dir / dict_name(k);
    if (std::filesystem::exists(p)) data.dicts.of(k) = IdDictionary::load(p);
  }
  EdgeList lists[3];
  for (Relation rel : kAllRelations) {
    lists[static_cast<int>(rel)] = load_edges(dir / file_name(rel), rel, data.dicts);
  }
  data.graph = build_tripartite(data.dicts.users.size(), data.dicts.items.size(),
                                data.dicts.streamers.size(), lists[0], lists[1], lists[2]);
  return data;
}

void write_edges(const std::filesystem::path& path, const EdgeList& edges, Relation schema,
                 const Dictionaries& dicts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto& l = dicts.of(left_kind(schema));
  const auto& r = dicts.of(right_kind(schema));
  for (const Edge& e : edges.edges) {
    out << l.decode(e.left) << '\t' << r.decode(e.right);
    if (edges.has_timestamps) out << '\t' << e.timestamp;
    out << '\n';
  }
}

void write_edges(const std::filesystem::path& path, const BipartiteGraph& graph,
                 const Dictionaries& dicts) {
  Relation schema = Relation::Buy;
  if (graph.right_kind == EntityKind::Streamer) schema = Relation::Follow;
  if (graph.left_kind == EntityKind::Streamer) schema = Relation::Sell;
  write_edges(path, graph.edges(), schema, dicts);
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  for (Relation rel : kAllRelations) {
    write_edges(dir / file_name(rel), data.graph.relation(rel), data.dicts);
  }
  for (EntityKind k : kKinds) data.dicts.of(k).save(dir / dict_name(k));
}

namespace {

constexpr char kSnapshotMagic[8] = {'L', 'S', 'E', 'C', 'G', 'R', 'P', 'H'};
constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace

void save_snapshot(const std::filesystem::path& path, const TripartiteGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  binio::write_le<std::uint32_t>(out, kSnapshotVersion);
  binio::write_le<std::uint64_t>(out, graph.n_users);
  binio::write_le<std::uint64_t>(out, graph.n_items);
  binio::write_le<std::uint64_t>(out, graph.n_streamers);
  for (Relation rel : kAllRelations) {
    const auto& g = graph.relation(rel);
    binio::write_le<std::uint64_t>(out, g.edge_count());
    binio::write_le<std::uint8_t>(out, g.has_timestamps() ? 1 : 0);
    binio::write_array<std::int64_t>(out, g.forward.indptr);
    binio::write_array<std::int32_t>(out, g.forward.indices);
    if (g.has_timestamps()) binio::write_array<std::int64_t>(out, g.timestamps);
  }
}

TripartiteGraph load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kSnapshotMagic)) {
    throw ParseError(path.string() + ": not a graph snapshot");
  }
  const auto version = binio::read_le<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw ParseError(path.string() + ": unsupported snapshot version " + std::to_string(version));
  }
  TripartiteGraph t;
  t.n_users = binio::read_le<std::uint64_t>(in);
  t.n_items = binio::read_le<std::uint64_t>(in);
  t.n_streamers = binio::read_le<std::uint64_t>(in);
  for (Relation rel : kAllRelations) {
    auto& g = t.relation(rel);
    g.left_kind = left_kind(rel);
    g.right_kind = right_kind(rel);
    g.left_count = t.count(g.left_kind);
    g.right_count = t.count(g.right_kind);
    const auto nnz = binio::read_le<std::uint64_t>(in);
    const bool timed = binio::read_le<std::uint8_t>(in) != 0;
    g.forward.indptr = binio::read_array<std::int64_t>(in, g.left_count + 1);
    g.forward.indices = binio::read_array<std::int32_t>(in, nnz);
    if (timed) g.timestamps = binio::read_array<std::int64_t>(in, nnz);
    validate_csr(g.forward, g.left_count, g.right_count, "snapshot forward csr");
    g.reverse = transpose(g.forward, g.right_count);
  }
  return t;
}

Dictionaries synthetic_dictionaries(std::size_t n_users, std::size_t n_items,
                                    std::size_t n_streamers) {
  Dictionaries d;
  for (std::size_t i = 0; i < n_users; ++i) d.users.encode("u" + std::to_string(i));
  for (std::size_t i = 0; i < n_items; ++i) d.items.encode("i" + std::to_string(i));
  for (std::size_t i = 0; i < n_streamers; ++i) d.streamers.encode("s" + std::to_string(i));
  return d;
}

}  // namespace lsec
