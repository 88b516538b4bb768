#include "splitlab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "splitlab/adam.hpp"

namespace splitlab {

void ModelConfig::validate() const {
  require(vocab_size >= 2, "config: vocab_size must be at least 2");
  require(hidden_dim > 0 && num_blocks > 0 && ffn_dim > 0 && max_seq_len > 0,
          "config: dimensions must be positive");
  require(split_point < num_blocks, "config: split_point must be in [0, Q)");
  require(num_heads > 0 && hidden_dim % num_heads == 0,
          "config: num_heads must divide hidden_dim");
}

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::RmsNorm1: return "rmsnorm-1";
    case LayerKind::QueryProj: return "query-proj";
    case LayerKind::KeyProj: return "key-proj";
    case LayerKind::ValueProj: return "value-proj";
    case LayerKind::OutputProj: return "output-proj";
    case LayerKind::RmsNorm2: return "rmsnorm-2";
    case LayerKind::UpProj: return "up-proj";
    case LayerKind::GateProj: return "gate-proj";
    case LayerKind::Activation: return "activation";
    case LayerKind::DownProj: return "down-proj";
  }
  throw Error("layer_kind_name: unknown kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  for (LayerKind k : kAllLayerKinds)
    if (layer_kind_name(k) == name) return k;
  throw Error("unknown layer kind: " + name);
}

std::string LayerRef::name() const {
  return "block" + std::to_string(block) + "." + layer_kind_name(kind);
}

std::vector<std::pair<std::string, Tensor*>> param_refs(SplitModel& model) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embedding", &model.embedding);
  out.emplace_back("pos_embedding", &model.pos_embedding);
  out.emplace_back("output_proj", &model.output_proj);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    std::string p = "block" + std::to_string(b) + ".";
    Block& bl = model.blocks[b];
    out.emplace_back(p + "norm1_gain", &bl.norm1_gain);
    out.emplace_back(p + "wq", &bl.wq);
    out.emplace_back(p + "wk", &bl.wk);
    out.emplace_back(p + "wv", &bl.wv);
    out.emplace_back(p + "wo", &bl.wo);
    out.emplace_back(p + "norm2_gain", &bl.norm2_gain);
    out.emplace_back(p + "w_up", &bl.w_up);
    out.emplace_back(p + "w_gate", &bl.w_gate);
    out.emplace_back(p + "w_down", &bl.w_down);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> param_refs(
    const SplitModel& model) {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : param_refs(const_cast<SplitModel&>(model)))
    out.emplace_back(name, t);
  return out;
}

Tensor embed(const std::vector<int>& x, const Tensor& table) {
  return t_row_select(table, x);
}

Tensor input_embedding(const SplitModel& model, const std::vector<int>& x) {
  require(x.size() <= model.config.max_seq_len,
          "input_embedding: sequence too long");
  Tensor e = embed(x, model.embedding);
  Tensor p = t_slice_rows(model.pos_embedding, 0, x.size());
  return t_add(e, p);
}

namespace {

bool bypassed_here(const SplitModel& model, std::size_t block_idx, LayerKind k) {
  return model.bypassed && model.bypassed->block == block_idx &&
         model.bypassed->kind == k;
}

// Intermediates of one block on the untraced path.
struct BlockTrace {
  Tensor t;      // after rmsnorm-1
  Tensor q, k, v;
  Tensor attn;   // concatenated head outputs
  Tensor h1;     // after attention residual
  Tensor t2;     // after rmsnorm-2
  Tensor g;      // gate pre-activation
  Tensor a;      // after activation
  Tensor u;      // up projection
  Tensor mixed;  // a (*) u
  Tensor out;    // block output
};

BlockTrace run_block(const SplitModel& model, std::size_t bidx, const Tensor& h) {
  const Block& bl = model.blocks[bidx];
  const ModelConfig& cfg = model.config;
  BlockTrace tr;
  tr.t = bypassed_here(model, bidx, LayerKind::RmsNorm1)
             ? h
             : t_rmsnorm(h, bl.norm1_gain);
  tr.q = bypassed_here(model, bidx, LayerKind::QueryProj) ? tr.t
                                                          : t_matmul(tr.t, bl.wq);
  tr.k = bypassed_here(model, bidx, LayerKind::KeyProj) ? tr.t
                                                        : t_matmul(tr.t, bl.wk);
  tr.v = bypassed_here(model, bidx, LayerKind::ValueProj) ? tr.t
                                                          : t_matmul(tr.t, bl.wv);
  std::size_t hd = cfg.head_dim();
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> heads;
  for (std::size_t head = 0; head < cfg.num_heads; ++head) {
    Tensor qh = t_slice_cols(tr.q, head * hd, hd);
    Tensor kh = t_slice_cols(tr.k, head * hd, hd);
    Tensor vh = t_slice_cols(tr.v, head * hd, hd);
    Tensor scores = t_scale(t_matmul(qh, t_transpose(kh)), inv_sqrt);
    Tensor att = t_softmax_causal(scores);
    heads.push_back(t_matmul(att, vh));
  }
  tr.attn = t_concat_cols(heads);
  Tensor ao = bypassed_here(model, bidx, LayerKind::OutputProj)
                  ? tr.attn
                  : t_matmul(tr.attn, bl.wo);
  tr.h1 = t_add(h, ao);
  tr.t2 = bypassed_here(model, bidx, LayerKind::RmsNorm2)
              ? tr.h1
              : t_rmsnorm(tr.h1, bl.norm2_gain);
  bool ffn_zeroed = bypassed_here(model, bidx, LayerKind::UpProj) ||
                    bypassed_here(model, bidx, LayerKind::GateProj) ||
                    bypassed_here(model, bidx, LayerKind::DownProj);
  if (ffn_zeroed) {
    tr.out = tr.h1;
    return tr;
  }
  tr.g = t_matmul(tr.t2, bl.w_gate);
  tr.a = bypassed_here(model, bidx, LayerKind::Activation) ? tr.g : t_silu(tr.g);
  tr.u = t_matmul(tr.t2, bl.w_up);
  tr.mixed = t_mul(tr.a, tr.u);
  tr.out = t_add(tr.h1, t_matmul(tr.mixed, bl.w_down));
  return tr;
}

}  // namespace

Tensor client_forward(const SplitModel& model, const Tensor& h0) {
  require(h0.shape.size() == 2 && h0.cols() == model.config.hidden_dim,
          "client_forward: shape mismatch");
  Tensor h = h0;
  for (std::size_t b = 0; b < model.config.split_point; ++b)
    h = run_block(model, b, h).out;
  return h;
}

Tensor server_forward(const SplitModel& model, const Tensor& h) {
  require(h.shape.size() == 2 && h.cols() == model.config.hidden_dim,
          "server_forward: shape mismatch");
  Tensor x = h;
  for (std::size_t b = model.config.split_point; b < model.config.num_blocks; ++b)
    x = run_block(model, b, x).out;
  return t_matmul(x, model.output_proj);
}

Tensor full_forward(const SplitModel& model, const std::vector<int>& x) {
  return server_forward(model, client_forward(model, input_embedding(model, x)));
}

int greedy_next_token(const Tensor& logits) {
  std::size_t last = logits.rows() - 1;
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j)
    if (logits.at(last, j) > logits.at(last, best)) best = j;
  return static_cast<int>(best);
}

ModelValues lift_model(Tape& tape, const SplitModel& model, bool params_grad) {
  ModelValues mv;
  mv.embedding = tape.leaf(model.embedding, params_grad);
  mv.pos_embedding = tape.leaf(model.pos_embedding, params_grad);
  mv.output_proj = tape.leaf(model.output_proj, params_grad);
  for (const Block& bl : model.blocks) {
    BlockValues bv;
    bv.norm1_gain = tape.leaf(bl.norm1_gain, params_grad);
    bv.wq = tape.leaf(bl.wq, params_grad);
    bv.wk = tape.leaf(bl.wk, params_grad);
    bv.wv = tape.leaf(bl.wv, params_grad);
    bv.wo = tape.leaf(bl.wo, params_grad);
    bv.norm2_gain = tape.leaf(bl.norm2_gain, params_grad);
    bv.w_up = tape.leaf(bl.w_up, params_grad);
    bv.w_gate = tape.leaf(bl.w_gate, params_grad);
    bv.w_down = tape.leaf(bl.w_down, params_grad);
    mv.blocks.push_back(bv);
  }
  return mv;
}

Value block_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                    std::size_t block_idx, Value h) {
  const BlockValues& bl = mv.blocks[block_idx];
  const ModelConfig& cfg = model.config;
  Value t = bypassed_here(model, block_idx, LayerKind::RmsNorm1)
                ? h
                : tape.rmsnorm(h, bl.norm1_gain);
  Value q = bypassed_here(model, block_idx, LayerKind::QueryProj)
                ? t
                : tape.matmul(t, bl.wq);
  Value k = bypassed_here(model, block_idx, LayerKind::KeyProj)
                ? t
                : tape.matmul(t, bl.wk);
  Value v = bypassed_here(model, block_idx, LayerKind::ValueProj)
                ? t
                : tape.matmul(t, bl.wv);
  std::size_t hd = cfg.head_dim();
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Value> heads;
  for (std::size_t head = 0; head < cfg.num_heads; ++head) {
    Value qh = tape.slice_cols(q, head * hd, hd);
    Value kh = tape.slice_cols(k, head * hd, hd);
    Value vh = tape.slice_cols(v, head * hd, hd);
    Value scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
    Value att = tape.softmax_causal(scores);
    heads.push_back(tape.matmul(att, vh));
  }
  Value attn = tape.concat_cols(heads);
  Value ao = bypassed_here(model, block_idx, LayerKind::OutputProj)
                 ? attn
                 : tape.matmul(attn, bl.wo);
  Value h1 = tape.add(h, ao);
  Value t2 = bypassed_here(model, block_idx, LayerKind::RmsNorm2)
                 ? h1
                 : tape.rmsnorm(h1, bl.norm2_gain);
  bool ffn_zeroed = bypassed_here(model, block_idx, LayerKind::UpProj) ||
                    bypassed_here(model, block_idx, LayerKind::GateProj) ||
                    bypassed_here(model, block_idx, LayerKind::DownProj);
  if (ffn_zeroed) return h1;
  Value g = tape.matmul(t2, bl.w_gate);
  Value a = bypassed_here(model, block_idx, LayerKind::Activation) ? g
                                                                   : tape.silu(g);
  Value u = tape.matmul(t2, bl.w_up);
  Value mixed = tape.mul(a, u);
  return tape.add(h1, tape.matmul(mixed, bl.w_down));
}

Value client_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                     Value h0) {
  Value h = h0;
  for (std::size_t b = 0; b < model.config.split_point; ++b)
    h = block_forward(tape, model, mv, b, h);
  return h;
}

Value server_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                     Value h) {
  Value x = h;
  for (std::size_t b = model.config.split_point; b < model.config.num_blocks; ++b)
    x = block_forward(tape, model, mv, b, x);
  return tape.matmul(x, mv.output_proj);
}

Tensor layer_forward(const SplitModel& model, const LayerRef& layer,
                     const Tensor& z) {
  require(layer.block < model.blocks.size(), "layer_forward: invalid LayerRef");
  if (bypassed_here(model, layer.block, layer.kind)) return z;
  const Block& bl = model.blocks[layer.block];
  switch (layer.kind) {
    case LayerKind::RmsNorm1: return t_rmsnorm(z, bl.norm1_gain);
    case LayerKind::QueryProj: return t_matmul(z, bl.wq);
    case LayerKind::KeyProj: return t_matmul(z, bl.wk);
    case LayerKind::ValueProj: return t_matmul(z, bl.wv);
    case LayerKind::OutputProj: return t_matmul(z, bl.wo);
    case LayerKind::RmsNorm2: return t_rmsnorm(z, bl.norm2_gain);
    case LayerKind::UpProj: return t_matmul(z, bl.w_up);
    case LayerKind::GateProj: return t_matmul(z, bl.w_gate);
    case LayerKind::Activation: return t_silu(z);
    case LayerKind::DownProj: return t_matmul(z, bl.w_down);
  }
  throw Error("layer_forward: invalid LayerRef");
}

Value layer_forward(Tape& tape, const SplitModel& model, const ModelValues& mv,
                    const LayerRef& layer, Value z) {
  require(layer.block < model.blocks.size(), "layer_forward: invalid LayerRef");
  if (bypassed_here(model, layer.block, layer.kind)) return z;
  const BlockValues& bl = mv.blocks[layer.block];
  switch (layer.kind) {
    case LayerKind::RmsNorm1: return tape.rmsnorm(z, bl.norm1_gain);
    case LayerKind::QueryProj: return tape.matmul(z, bl.wq);
    case LayerKind::KeyProj: return tape.matmul(z, bl.wk);
    case LayerKind::ValueProj: return tape.matmul(z, bl.wv);
    case LayerKind::OutputProj: return tape.matmul(z, bl.wo);
    case LayerKind::RmsNorm2: return tape.rmsnorm(z, bl.norm2_gain);
    case LayerKind::UpProj: return tape.matmul(z, bl.w_up);
    case LayerKind::GateProj: return tape.matmul(z, bl.w_gate);
    case LayerKind::Activation: return tape.silu(z);
    case LayerKind::DownProj: return tape.matmul(z, bl.w_down);
  }
  throw Error("layer_forward: invalid LayerRef");
}

Tensor layer_input(const SplitModel& model, const LayerRef& layer,
                   const Tensor& h0) {
  require(layer.block < model.blocks.size(), "layer_input: invalid LayerRef");
  Tensor h = h0;
  for (std::size_t b = 0; b < layer.block; ++b) h = run_block(model, b, h).out;
  BlockTrace tr = run_block(model, layer.block, h);
  switch (layer.kind) {
    case LayerKind::RmsNorm1: return h;
    case LayerKind::QueryProj:
    case LayerKind::KeyProj:
    case LayerKind::ValueProj: return tr.t;
    case LayerKind::OutputProj: return tr.attn;
    case LayerKind::RmsNorm2: return tr.h1;
    case LayerKind::UpProj:
    case LayerKind::GateProj: return tr.t2;
    case LayerKind::Activation: return tr.g;
    case LayerKind::DownProj: return tr.mixed;
  }
  throw Error("layer_input: invalid LayerRef");
}

std::vector<LayerRef> client_layers(const SplitModel& model) {
  std::vector<LayerRef> out;
  for (std::size_t b = 0; b < model.config.split_point; ++b)
    for (LayerKind k : kAllLayerKinds) out.push_back(LayerRef{b, k});
  return out;
}

SplitModel bypass(const SplitModel& model, const LayerRef& layer) {
  require(layer.block < model.config.split_point,
          "bypass: layer outside the client submodel");
  SplitModel out = model;
  out.bypassed = layer;
  return out;
}

SplitModel init_model(const ModelConfig& config) {
  config.validate();
  SplitModel m;
  m.config = config;
  Rng rng(config.seed);
  std::size_t d = config.hidden_dim;
  double wscale = 1.0 / std::sqrt(static_cast<double>(d));
  auto gauss = [&](std::vector<std::size_t> shape, double scale) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = scale * rng.normal();
    return t;
  };
  m.embedding = gauss({config.vocab_size, d}, 1.0);
  m.pos_embedding = gauss({config.max_seq_len, d}, 0.02);
  m.output_proj = gauss({d, config.vocab_size}, wscale);
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    Block bl;
    bl.norm1_gain = Tensor({d});
    bl.norm2_gain = Tensor({d});
    for (std::size_t j = 0; j < d; ++j) bl.norm1_gain[j] = bl.norm2_gain[j] = 1.0;
    bl.wq = gauss({d, d}, wscale);
    bl.wk = gauss({d, d}, wscale);
    bl.wv = gauss({d, d}, wscale);
    bl.wo = gauss({d, d}, wscale);
    bl.w_up = gauss({d, config.ffn_dim}, wscale);
    bl.w_gate = gauss({d, config.ffn_dim}, wscale);
    bl.w_down = gauss({config.ffn_dim, d},
                      1.0 / std::sqrt(static_cast<double>(config.ffn_dim)));
    m.blocks.push_back(std::move(bl));
  }
  return m;
}

TrainReport toy_train(SplitModel& model,
                      const std::vector<std::vector<int>>& corpus,
                      std::size_t steps, double lr) {
  std::vector<std::vector<int>> seqs;
  for (const auto& s : corpus) {
    if (s.size() < 2) continue;
    std::vector<int> t = s;
    if (t.size() > model.config.max_seq_len)
      t.resize(model.config.max_seq_len);
    seqs.push_back(std::move(t));
  }
  require(!seqs.empty(), "toy_train: empty corpus");

  std::vector<std::pair<std::string, Tensor*>> params = param_refs(model);
  std::vector<AdamState> states(params.size(), AdamState(lr));

  TrainReport report;
  double ema = 0.0;
  double ema_start = 0.0;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<int>& seq = seqs[step % seqs.size()];
    Tape tape;
    ModelValues mv = lift_model(tape, model, true);
    Value e = tape.row_select(mv.embedding, seq);
    Value p = tape.slice_rows(mv.pos_embedding, 0, seq.size());
    Value h0 = tape.add(e, p);
    Value logits =
        server_forward(tape, model, mv, client_forward(tape, model, mv, h0));
    Value loss = tape.cross_entropy_next(logits, seq);
    double lv = tape.val(loss).data[0];
    tape.backward(loss);
    std::vector<Value> pv;
    pv.push_back(mv.embedding);
    pv.push_back(mv.pos_embedding);
    pv.push_back(mv.output_proj);
    for (const BlockValues& bv : mv.blocks)
      for (Value v : {bv.norm1_gain, bv.wq, bv.wk, bv.wv, bv.wo, bv.norm2_gain,
                      bv.w_up, bv.w_gate, bv.w_down})
        pv.push_back(v);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tape.has_grad(pv[i]))
        adam_step(*params[i].second, tape.grad(pv[i]), states[i]);
    }
    if (step == 0) {
      report.initial_loss = lv;
      ema = lv;
      ema_start = lv;
    } else {
      ema = 0.9 * ema + 0.1 * lv;
    }
    report.final_loss = lv;
  }
  report.converged = steps < 2 || ema < ema_start;
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "SPLK", u16 version, named integer config fields, then
// per-tensor records (name, rank, dims, dtype tag, raw little-endian data).

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', 'K'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(is.good(), "checkpoint: truncated file");
  return v;
}

void write_name(std::ostream& os, const std::string& name) {
  write_pod<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string read_name(std::istream& is) {
  auto len = read_pod<std::uint16_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  require(is.good(), "checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const SplitModel& model, const std::string& path,
                     bool compact32) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_pod<std::uint16_t>(os, kVersion);
  const ModelConfig& c = model.config;
  std::vector<std::pair<std::string, std::int64_t>> fields = {
      {"vocab_size", static_cast<std::int64_t>(c.vocab_size)},
      {"hidden_dim", static_cast<std::int64_t>(c.hidden_dim)},
      {"num_blocks", static_cast<std::int64_t>(c.num_blocks)},
      {"split_point", static_cast<std::int64_t>(c.split_point)},
      {"num_heads", static_cast<std::int64_t>(c.num_heads)},
      {"ffn_dim", static_cast<std::int64_t>(c.ffn_dim)},
      {"max_seq_len", static_cast<std::int64_t>(c.max_seq_len)},
      {"seed", static_cast<std::int64_t>(c.seed)},
  };
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(fields.size()));
  for (auto& [name, value] : fields) {
    write_name(os, name);
    write_pod<std::int64_t>(os, value);
  }
  auto params = param_refs(model);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (auto& [name, t] : params) {
    write_name(os, name);
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t->shape.size()));
    for (std::size_t dim : t->shape)
      write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(dim));
    write_pod<std::uint8_t>(os, compact32 ? 1 : 0);
    if (compact32) {
      for (double v : t->data) write_pod<float>(os, static_cast<float>(v));
    } else {
      for (double v : t->data) write_pod<double>(os, v);
    }
  }
  require(os.good(), "checkpoint: write failure");
}

SplitModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, kMagic, 4) == 0,
          "checkpoint: corrupt header");
  auto version = read_pod<std::uint16_t>(is);
  require(version == kVersion, "checkpoint: version mismatch");

  ModelConfig c;
  auto nfields = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nfields; ++i) {
    std::string name = read_name(is);
    auto value = read_pod<std::int64_t>(is);
    auto u = static_cast<std::uint64_t>(value);
    if (name == "vocab_size") c.vocab_size = static_cast<std::size_t>(u);
    else if (name == "hidden_dim") c.hidden_dim = static_cast<std::size_t>(u);
    else if (name == "num_blocks") c.num_blocks = static_cast<std::size_t>(u);
    else if (name == "split_point") c.split_point = static_cast<std::size_t>(u);
    else if (name == "num_heads") c.num_heads = static_cast<std::size_t>(u);
    else if (name == "ffn_dim") c.ffn_dim = static_cast<std::size_t>(u);
    else if (name == "max_seq_len") c.max_seq_len = static_cast<std::size_t>(u);
    else if (name == "seed") c.seed = u;
    else throw Error("checkpoint: unknown config field " + name);
  }
  c.validate();

  SplitModel model;
  model.config = c;
  model.blocks.resize(c.num_blocks);
  auto params = param_refs(model);
  auto ntensors = read_pod<std::uint32_t>(is);
  require(ntensors == params.size(), "checkpoint: tensor count mismatch");
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    std::string name = read_name(is);
    require(name == params[i].first, "checkpoint: unexpected tensor " + name);
    auto rank = read_pod<std::uint8_t>(is);
    std::vector<std::size_t> shape;
    for (std::uint8_t r = 0; r < rank; ++r)
      shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));
    auto dtype = read_pod<std::uint8_t>(is);
    require(dtype <= 1, "checkpoint: unknown dtype tag");
    Tensor t(shape);
    for (double& v : t.data)
      v = dtype == 1 ? static_cast<double>(read_pod<float>(is))
                     : read_pod<double>(is);
    *params[i].second = std::move(t);
  }
  return model;
}

}  // namespace splitlab
