#include "lsec/model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "lsec/binary_io.hpp"
#include "lsec/config_io.hpp"
#include "lsec/rng.hpp"

namespace lsec {

const char* to_string(Aggregator a) noexcept {
  switch (a) {
    case Aggregator::GCN: return "gcn";
    case Aggregator::LightGCN: return "lightgcn";
    case Aggregator::None: return "none";
  }
  return "?";
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "gcn" || s == "GCN") return Aggregator::GCN;
  if (s == "lightgcn" || s == "LightGCN") return Aggregator::LightGCN;
  if (s == "none" || s == "None") return Aggregator::None;
  throw ConfigError("unknown aggregator '" + s + "'");
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || mlp_hidden == 0) throw ConfigError("dimensions must be positive");
  if (aggregator != Aggregator::None) {
    if (layer_dims.empty()) throw ConfigError("graph aggregators need at least one layer");
    for (auto d : layer_dims) {
      if (d == 0) throw ConfigError("layer dimensions must be positive");
    }
  }
  if (!tasks[0] && !tasks[1]) throw ConfigError("at least one task must be active");
  if (tasks[0] && !relations[0]) throw ConfigError("task 0 (buy) requires relation 0");
  if (tasks[1] && !relations[1]) throw ConfigError("task 1 (follow) requires relation 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  if (negative_ratio < 1) throw ConfigError("negative_ratio must be at least 1");
}

std::size_t ModelConfig::relation_width() const noexcept {
  return aggregator == Aggregator::None || layer_dims.empty() ? embed_dim : layer_dims.back();
}

std::size_t ModelConfig::unified_width(EntityKind kind) const noexcept {
  std::size_t w = 0;
  for (Relation rel : kAllRelations) {
    if (relation(rel) && touches(rel, kind)) w += relation_width();
  }
  return w;
}

std::vector<ParamTensor*> ModelParams::all() {
  std::vector<ParamTensor*> out;
  for (auto& e : embeddings) out.push_back(&e);
  for (auto& per_rel : weights) {
    for (auto& w : per_rel) out.push_back(&w);
  }
  if (projection) out.push_back(&*projection);
  for (auto& mlp : mlps) {
    if (!mlp) continue;
    for (ParamTensor* p : {&mlp->w1, &mlp->b1, &mlp->w2, &mlp->b2}) out.push_back(p);
  }
  return out;
}

std::vector<const ParamTensor*> ModelParams::all() const {
  auto mut = const_cast<ModelParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

void ModelParams::zero_grad() {
  for (ParamTensor* p : all()) p->zero_grad();
}

namespace {

EntityKind task_right_kind(Task t) {
  return t == Task::Buy ? EntityKind::Item : EntityKind::Streamer;
}

constexpr Task kTasks[] = {Task::Buy, Task::Follow};

DenseMatrix gather_rows(const std::vector<std::int32_t>& ids, std::size_t left_count,
                        const DenseMatrix& left, const DenseMatrix& right) {
  const std::size_t d = left.cols();
  DenseMatrix out(ids.size(), d);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto id = static_cast<std::size_t>(ids[k]);
    const auto src = id < left_count ? left.row(id) : right.row(id - left_count);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

void scatter_rows(const std::vector<std::int32_t>& ids, std::size_t left_count,
                  const DenseMatrix& grad, ParamTensor& left, ParamTensor& right) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto id = static_cast<std::size_t>(ids[k]);
    auto dst = id < left_count ? left.grad.row(id) : right.grad.row(id - left_count);
    const auto g = grad.row(k);
    for (std::size_t c = 0; c < g.size(); ++c) dst[c] += g[c];
  }
}

// Column offset of a relation's part inside a kind's unified embedding.
std::size_t part_offset(const ModelConfig& cfg, EntityKind kind, Relation rel) {
  std::size_t off = 0;
  for (Relation r : kAllRelations) {
    if (r == rel) break;
    if (cfg.relation(r) && touches(r, kind)) off += cfg.relation_width();
  }
  return off;
}

void encoder_backward(const ModelConfig& cfg, ModelParams& params, Relation rel,
                      const RelationBlocks& blocks, const EncoderCache& cache,
                      const DenseMatrix& grad_out) {
  const int r = static_cast<int>(rel);
  ParamTensor& lt = params.embeddings[static_cast<int>(left_kind(rel))];
  ParamTensor& rt = params.embeddings[static_cast<int>(right_kind(rel))];
  const std::size_t K = blocks.n_layers();

  switch (cfg.aggregator) {
    case Aggregator::None:
      scatter_rows(blocks.targets(), blocks.left_count, grad_out, lt, rt);
      return;
    case Aggregator::GCN: {
      DenseMatrix g = grad_out;
      for (std::size_t l = K; l-- > 0;) {
        ParamTensor& w = params.weights[r][l];
        const DenseMatrix gy = activation_backward(cache.pre[l], g, Activation::LeakyReLU);
        const DenseMatrix gw = matmul_tn(cache.agg[l], gy);
        for (std::size_t i = 0; i < gw.size(); ++i) w.grad.values()[i] += gw.values()[i];
        g = spmm_backward(cache.norm[l], matmul_nt(gy, w.value));
      }
      scatter_rows(blocks.inputs(), blocks.left_count, g, lt, rt);
      return;
    }
    case Aggregator::LightGCN: {
      ParamTensor& proj = *params.projection;
      const DenseMatrix gp = matmul_tn(cache.mean, grad_out);
      for (std::size_t i = 0; i < gp.size(); ++i) proj.grad.values()[i] += gp.values()[i];
      DenseMatrix share = matmul_nt(grad_out, proj.value);
      const double inv = 1.0 / static_cast<double>(K + 1);
      for (double& v : share.values()) v *= inv;
      DenseMatrix g = share;
      for (std::size_t l = K; l-- > 0;) {
        g = spmm_backward(cache.norm[l], g);
        for (std::size_t i = 0; i < share.size(); ++i) g.values()[i] += share.values()[i];
      }
      scatter_rows(blocks.inputs(), blocks.left_count, g, lt, rt);
      return;
    }
  }
}

}  // namespace

Model::Model(ModelConfig config, ModelParams params, std::array<std::size_t, 3> counts)
    : config_(std::move(config)), params_(std::move(params)), counts_(counts) {}

DenseMatrix Model::encode_bipartite(Relation rel, const RelationBlocks& blocks,
                                    EncoderCache* cache) const {
  const int r = static_cast<int>(rel);
  const DenseMatrix& lt = params_.embeddings[static_cast<int>(left_kind(rel))].value;
  const DenseMatrix& rt = params_.embeddings[static_cast<int>(right_kind(rel))].value;

  if (config_.aggregator == Aggregator::None) {
    DenseMatrix out = gather_rows(blocks.targets(), blocks.left_count, lt, rt);
    if (cache) cache->output = out;
    return out;
  }

  const std::size_t K = blocks.n_layers();
  if (K != config_.n_layers()) {
    throw ShapeError("blocks have " + std::to_string(K) + " layers, model expects " +
                     std::to_string(config_.n_layers()));
  }
  DenseMatrix h = gather_rows(blocks.inputs(), blocks.left_count, lt, rt);

  if (config_.aggregator == Aggregator::GCN) {
    for (std::size_t l = 0; l < K; ++l) {
      SparseMatrix norm = blocks.layers[l].normalized(true);
      DenseMatrix agg = spmm(norm, h);
      DenseMatrix pre = matmul(agg, params_.weights[r][l].value);
      DenseMatrix next = activation(pre, Activation::LeakyReLU);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->norm.push_back(std::move(norm));
        cache->agg.push_back(std::move(agg));
        cache->pre.push_back(std::move(pre));
      }
      h = std::move(next);
    }
    check_finite(h, "gcn encoder");
    if (cache) cache->output = h;
    return h;
  }

  // LightGCN: propagate without weights, average layers over the targets.
  const std::size_t n_targets = blocks.targets().size();
  const std::size_t d = h.cols();
  DenseMatrix mean(n_targets, d);
  auto accumulate = [&](const DenseMatrix& layer) {
    for (std::size_t i = 0; i < n_targets * d; ++i) mean.values()[i] += layer.values()[i];
  };
  accumulate(h);
  for (std::size_t l = 0; l < K; ++l) {
    SparseMatrix norm = blocks.layers[l].normalized(false);
    DenseMatrix next = spmm(norm, h);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->norm.push_back(std::move(norm));
    }
    h = std::move(next);
    accumulate(h);
  }
  const double inv = 1.0 / static_cast<double>(K + 1);
  for (double& v : mean.values()) v *= inv;
  DenseMatrix out = matmul(mean, params_.projection->value);
  check_finite(out, "lightgcn encoder");
  if (cache) {
    cache->inputs.push_back(std::move(h));
    cache->mean = std::move(mean);
    cache->output = out;
  }
  return out;
}

std::array<DenseMatrix, 3> unify_embeddings(const std::array<const DenseMatrix*, 3>& outputs,
                                            const SeedNodes& seeds) {
  std::array<DenseMatrix, 3> unified;
  for (EntityKind kind : {EntityKind::User, EntityKind::Item, EntityKind::Streamer}) {
    const auto& ids = seeds.of(kind);
    std::size_t width = 0;
    for (Relation rel : kAllRelations) {
      if (outputs[static_cast<int>(rel)] && touches(rel, kind)) {
        width += outputs[static_cast<int>(rel)]->cols();
      }
    }
    if (width == 0 && !ids.empty()) {
      throw ContractError(std::string(to_string(kind)) +
                          " nodes are absent from every active relation");
    }
    DenseMatrix u(ids.size(), width);
    std::size_t off = 0;
    for (Relation rel : kAllRelations) {
      const DenseMatrix* out = outputs[static_cast<int>(rel)];
      if (!out || !touches(rel, kind)) continue;
      const std::size_t base = kind == left_kind(rel) ? 0 : seeds.of(left_kind(rel)).size();
      if (out->rows() != seeds.of(left_kind(rel)).size() + seeds.of(right_kind(rel)).size()) {
        throw ShapeError(std::string(to_string(rel)) + " output rows do not match the seeds");
      }
      for (std::size_t p = 0; p < ids.size(); ++p) {
        const auto src = out->row(base + p);
        std::copy(src.begin(), src.end(), u.row(p).begin() + static_cast<std::ptrdiff_t>(off));
      }
      off += out->cols();
    }
    unified[static_cast<int>(kind)] = std::move(u);
  }
  return unified;
}

std::vector<std::size_t> seed_positions(const std::vector<std::int32_t>& seeds,
                                        const std::vector<LabeledEdge>& edges, bool left) {
  std::vector<std::size_t> rows(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto id = left ? edges[k].left : edges[k].right;
    const auto it = std::lower_bound(seeds.begin(), seeds.end(), id);
    if (it == seeds.end() || *it != id) {
      throw ContractError("pair endpoint " + std::to_string(id) + " is not a seed node");
    }
    rows[k] = static_cast<std::size_t>(it - seeds.begin());
  }
  return rows;
}

namespace {

DenseMatrix row_slice(const DenseMatrix& m, std::size_t begin, std::size_t end) {
  DenseMatrix out(end - begin, m.cols());
  std::copy(m.values().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()),
            m.values().begin() + static_cast<std::ptrdiff_t>(end * m.cols()), out.values().begin());
  return out;
}

}  // namespace

DenseMatrix predict_pairs(const DenseMatrix& left, const DenseMatrix& right,
                          const std::vector<std::size_t>& left_rows,
                          const std::vector<std::size_t>& right_rows, const TaskMlp& mlp,
                          PairCache* cache) {
  const std::size_t wl = left.cols();
  const std::size_t wr = right.cols();
  if (wl + wr != mlp.w1.rows()) {
    throw ShapeError("predictor expects width " + std::to_string(mlp.w1.rows()) + ", got " +
                     std::to_string(wl + wr));
  }
  if (left_rows.size() != right_rows.size()) throw ShapeError("pair row lists differ in length");
  const std::size_t h = mlp.w1.cols();
  DenseMatrix pl = matmul(left, row_slice(mlp.w1.value, 0, wl));
  DenseMatrix pr = matmul(right, row_slice(mlp.w1.value, wl, wl + wr));
  DenseMatrix hidden(left_rows.size(), h);
  DenseMatrix logits(left_rows.size(), 1);
  const double* b1 = mlp.b1.value.data();
  const double* w2 = mlp.w2.value.data();
  const double b2 = mlp.b2.value(0, 0);
  const auto n = static_cast<std::int64_t>(left_rows.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    const double* a = pl.data() + left_rows[k] * h;
    const double* b = pr.data() + right_rows[k] * h;
    double* z = hidden.data() + k * static_cast<std::int64_t>(h);
    double acc = 0.0;
    for (std::size_t c = 0; c < h; ++c) {
      z[c] = a[c] + b[c] + b1[c];
      acc += (z[c] > 0.0 ? z[c] : 0.0) * w2[c];
    }
    logits(static_cast<std::size_t>(k), 0) = acc + b2;
  }
  if (cache) {
    cache->left = left;
    cache->right = right;
    cache->proj_left = std::move(pl);
    cache->proj_right = std::move(pr);
    cache->hidden = std::move(hidden);
    cache->logits = logits;
  }
  return logits;
}

std::pair<DenseMatrix, DenseMatrix> predict_pairs_backward(const PairCache& c,
                                                           const std::vector<std::size_t>& left_rows,
                                                           const std::vector<std::size_t>& right_rows,
                                                           TaskMlp& mlp,
                                                           const DenseMatrix& grad_logits) {
  const std::size_t h = mlp.w1.cols();
  const std::size_t wl = c.left.cols();
  const std::size_t n = left_rows.size();
  if (grad_logits.rows() != n || grad_logits.cols() != 1) {
    throw ShapeError("logit gradient has the wrong shape");
  }
  DenseMatrix g_pl(c.proj_left.rows(), h);
  DenseMatrix g_pr(c.proj_right.rows(), h);
  const double* w2 = mlp.w2.value.data();
  double* gw2 = mlp.w2.grad.data();
  double* gb1 = mlp.b1.grad.data();
  double gb2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double g = grad_logits(k, 0);
    gb2 += g;
    const double* z = c.hidden.data() + k * h;
    double* da = g_pl.data() + left_rows[k] * h;
    double* db = g_pr.data() + right_rows[k] * h;
    for (std::size_t j = 0; j < h; ++j) {
      if (z[j] <= 0.0) continue;
      gw2[j] += g * z[j];
      const double dz = g * w2[j];
      gb1[j] += dz;
      da[j] += dz;
      db[j] += dz;
    }
  }
  mlp.b2.grad(0, 0) += gb2;
  const DenseMatrix gwl = matmul_tn(c.left, g_pl);
  const DenseMatrix gwr = matmul_tn(c.right, g_pr);
  double* gw1 = mlp.w1.grad.data();
  for (std::size_t i = 0; i < gwl.size(); ++i) gw1[i] += gwl.values()[i];
  for (std::size_t i = 0; i < gwr.size(); ++i) gw1[wl * h + i] += gwr.values()[i];
  return {matmul_nt(g_pl, row_slice(mlp.w1.value, 0, wl)),
          matmul_nt(g_pr, row_slice(mlp.w1.value, wl, mlp.w1.rows()))};
}

ForwardState Model::forward(const MiniBatch& batch) const {
  ForwardState st;
  std::array<const DenseMatrix*, 3> outputs{};
  for (Relation rel : kAllRelations) {
    const int r = static_cast<int>(rel);
    if (!config_.relation(rel)) continue;
    if (!batch.blocks[r]) {
      throw ContractError(std::string("batch lacks blocks for relation ") + to_string(rel));
    }
    st.encoders[r].emplace();
    encode_bipartite(rel, *batch.blocks[r], &*st.encoders[r]);
    outputs[r] = &st.encoders[r]->output;
  }
  st.unified = unify_embeddings(outputs, batch.seeds);
  for (Task t : kTasks) {
    const int ti = static_cast<int>(t);
    if (!config_.task(t)) continue;
    const auto& edges = batch.task_edges[ti];
    const EntityKind rk = task_right_kind(t);
    const auto lrows = seed_positions(batch.seeds.users, edges, true);
    const auto rrows = seed_positions(batch.seeds.of(rk), edges, false);
    st.tasks[ti].emplace();
    predict_pairs(st.unified[0], st.unified[static_cast<int>(rk)], lrows, rrows,
                  *params_.mlps[ti], &*st.tasks[ti]);
  }
  return st;
}

void Model::backward(const MiniBatch& batch, const ForwardState& st,
                     const std::array<DenseMatrix, 2>& grad_logits) {
  std::array<DenseMatrix, 3> grad_unified;
  for (int k = 0; k < 3; ++k) {
    grad_unified[k] = DenseMatrix(st.unified[k].rows(), st.unified[k].cols());
  }
  for (Task t : kTasks) {
    const int ti = static_cast<int>(t);
    if (!config_.task(t)) continue;
    const auto& edges = batch.task_edges[ti];
    const EntityKind rk = task_right_kind(t);
    const auto lrows = seed_positions(batch.seeds.users, edges, true);
    const auto rrows = seed_positions(batch.seeds.of(rk), edges, false);
    auto [gl, gr] = predict_pairs_backward(*st.tasks[ti], lrows, rrows, *params_.mlps[ti],
                                           grad_logits[ti]);
    DenseMatrix& ul = grad_unified[0];
    DenseMatrix& ur = grad_unified[static_cast<int>(rk)];
    for (std::size_t i = 0; i < gl.size(); ++i) ul.values()[i] += gl.values()[i];
    for (std::size_t i = 0; i < gr.size(); ++i) ur.values()[i] += gr.values()[i];
  }

  const std::size_t w = config_.relation_width();
  for (Relation rel : kAllRelations) {
    const int r = static_cast<int>(rel);
    if (!config_.relation(rel)) continue;
    const RelationBlocks& blocks = *batch.blocks[r];
    const EntityKind lk = left_kind(rel);
    const EntityKind rk = right_kind(rel);
    const auto& lseeds = batch.seeds.of(lk);
    const auto& rseeds = batch.seeds.of(rk);
    DenseMatrix g(lseeds.size() + rseeds.size(), w);
    const std::size_t loff = part_offset(config_, lk, rel);
    const std::size_t roff = part_offset(config_, rk, rel);
    for (std::size_t p = 0; p < lseeds.size(); ++p) {
      const auto src = grad_unified[static_cast<int>(lk)].row(p);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(loff),
                src.begin() + static_cast<std::ptrdiff_t>(loff + w), g.row(p).begin());
    }
    for (std::size_t p = 0; p < rseeds.size(); ++p) {
      const auto src = grad_unified[static_cast<int>(rk)].row(p);
      std::copy(src.begin() + static_cast<std::ptrdiff_t>(roff),
                src.begin() + static_cast<std::ptrdiff_t>(roff + w),
                g.row(lseeds.size() + p).begin());
    }
    encoder_backward(config_, params_, rel, blocks, *st.encoders[r], g);
  }
}

RelationBlocks full_relation_blocks(const TripartiteGraph& graph, Relation rel,
                                    std::size_t n_layers) {
  SeedNodes all;
  const auto& g = graph.relation(rel);
  all.of(g.left_kind).resize(g.left_count);
  std::iota(all.of(g.left_kind).begin(), all.of(g.left_kind).end(), 0);
  all.of(g.right_kind).resize(g.right_count);
  std::iota(all.of(g.right_kind).begin(), all.of(g.right_kind).end(), 0);
  return build_relation_blocks(graph, rel, all, FanoutPlan::unlimited(), n_layers, 0);
}

std::array<DenseMatrix, 3> Model::embed_all(const TripartiteGraph& graph) const {
  SeedNodes all;
  for (EntityKind kind : {EntityKind::User, EntityKind::Item, EntityKind::Streamer}) {
    auto& ids = all.of(kind);
    bool used = false;
    for (Relation rel : kAllRelations) used |= config_.relation(rel) && touches(rel, kind);
    if (!used) continue;
    ids.resize(graph.count(kind));
    std::iota(ids.begin(), ids.end(), 0);
  }
  const std::size_t K = config_.aggregator == Aggregator::None ? 0 : config_.n_layers();
  std::array<DenseMatrix, 3> outs;
  std::array<const DenseMatrix*, 3> ptrs{};
  for (Relation rel : kAllRelations) {
    const int r = static_cast<int>(rel);
    if (!config_.relation(rel)) continue;
    outs[r] = encode_bipartite(rel, full_relation_blocks(graph, rel, K));
    ptrs[r] = &outs[r];
  }
  return unify_embeddings(ptrs, all);
}

Model init_model(const ModelConfig& config, const TripartiteGraph& graph, std::uint64_t seed) {
  return init_model(config, std::array<std::size_t, 3>{graph.n_users, graph.n_items, graph.n_streamers},
                    seed);
}

Model init_model(const ModelConfig& config, std::array<std::size_t, 3> counts,
                 std::uint64_t seed) {
  config.validate();
  auto glorot = [&](std::size_t rows, std::size_t cols, std::uint64_t tag) {
    if (rows == 0) return DenseMatrix(0, cols);
    return glorot_init(rows, cols, derive_seed({seed, tag}));
  };
  ModelParams p;
  const char* kind_names[] = {"emb.user", "emb.item", "emb.streamer"};
  for (int k = 0; k < 3; ++k) {
    p.embeddings[k] =
        ParamTensor(kind_names[k], glorot(counts[k], config.embed_dim, 100 + k));
  }
  if (config.aggregator == Aggregator::GCN) {
    for (Relation rel : kAllRelations) {
      const int r = static_cast<int>(rel);
      if (!config.relation(rel)) continue;
      std::size_t in = config.embed_dim;
      for (std::size_t l = 0; l < config.layer_dims.size(); ++l) {
        const std::size_t out = config.layer_dims[l];
        p.weights[r].emplace_back(
            std::string("w.") + to_string(rel) + "." + std::to_string(l),
            glorot(in, out, 200 + 10 * static_cast<std::uint64_t>(r) + l));
        in = out;
      }
    }
  }
  if (config.aggregator == Aggregator::LightGCN) {
    p.projection.emplace("proj", glorot(config.embed_dim, config.relation_width(), 300));
  }
  for (Task t : kTasks) {
    const int ti = static_cast<int>(t);
    if (!config.task(t)) continue;
    const std::size_t in =
        config.unified_width(EntityKind::User) + config.unified_width(task_right_kind(t));
    const std::string base = std::string("mlp.") + (t == Task::Buy ? "buy" : "follow");
    TaskMlp mlp;
    mlp.w1 = ParamTensor(base + ".w1", glorot(in, config.mlp_hidden, 400 + 10 * ti));
    mlp.b1 = ParamTensor(base + ".b1", DenseMatrix(1, config.mlp_hidden));
    mlp.w2 = ParamTensor(base + ".w2", glorot(config.mlp_hidden, 1, 401 + 10 * ti));
    mlp.b2 = ParamTensor(base + ".b2", DenseMatrix(1, 1));
    p.mlps[ti] = std::move(mlp);
  }
  return Model(config, std::move(p), counts);
}

LossResult compute_loss(const std::array<std::optional<DenseMatrix>, 2>& logits,
                        const std::array<std::vector<LabeledEdge>, 2>& edges, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  LossResult res;
  const bool both = logits[0].has_value() && logits[1].has_value();
  if (!logits[0] && !logits[1]) throw ContractError("no active task in loss");
  for (int t = 0; t < 2; ++t) {
    if (!logits[t]) continue;
    if (edges[t].empty()) throw ContractError("active task has an empty batch");
    DenseMatrix labels(edges[t].size(), 1);
    for (std::size_t k = 0; k < edges[t].size(); ++k) labels(k, 0) = edges[t][k].label;
    const double loss = bce_with_logits(*logits[t], labels);
    DenseMatrix g = bce_with_logits_backward(*logits[t], labels);
    const double weight = both ? (t == 0 ? alpha : 1.0 - alpha) : 1.0;
    for (double& v : g.values()) v *= weight;
    res.task_loss[t] = loss;
    res.total += weight * loss;
    res.grad_logits[t] = std::move(g);
  }
  return res;
}

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'S', 'E', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCheckpointMagic, 8);
  binio::write_le<std::uint32_t>(out, kCheckpointVersion);
  binio::write_string(out, model_config_to_json(config_).dump());
  for (auto c : counts_) binio::write_le<std::uint64_t>(out, c);
  const auto tensors = params_.all();
  binio::write_le<std::uint64_t>(out, tensors.size());
  for (const ParamTensor* t : tensors) {
    binio::write_string(out, t->name);
    binio::write_le<std::uint64_t>(out, t->rows());
    binio::write_le<std::uint64_t>(out, t->cols());
    binio::write_array<double>(out, t->value.values());
  }
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw ParseError(path.string() + ": not a model checkpoint");
  }
  const auto version = binio::read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " +
                     std::to_string(version));
  }
  const ModelConfig config = model_config_from_json(nlohmann::json::parse(binio::read_string(in)));
  std::array<std::size_t, 3> counts{};
  for (auto& c : counts) c = binio::read_le<std::uint64_t>(in);
  Model model = init_model(config, counts, 0);
  auto tensors = model.params().all();
  const auto n = binio::read_le<std::uint64_t>(in);
  if (n != tensors.size()) throw ParseError(path.string() + ": tensor count mismatch");
  for (ParamTensor* t : tensors) {
    const auto name = binio::read_string(in);
    const auto rows = binio::read_le<std::uint64_t>(in);
    const auto cols = binio::read_le<std::uint64_t>(in);
    if (name != t->name || rows != t->rows() || cols != t->cols()) {
      throw ParseError(path.string() + ": unexpected tensor '" + name + "'");
    }
    t->value = DenseMatrix(rows, cols, binio::read_array<double>(in, rows * cols));
  }
  return model;
}

}  // namespace lsec
