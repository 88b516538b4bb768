#include "splitlab/attack.hpp"

#include <chrono>
#include <cmath>

#include "splitlab/adam.hpp"

namespace splitlab {

std::string distance_kind_name(DistanceKind k) {
  return k == DistanceKind::Cosine ? "cosine" : "euclidean";
}

DistanceKind distance_kind_from_name(const std::string& name) {
  if (name == "cosine") return DistanceKind::Cosine;
  if (name == "euclidean") return DistanceKind::Euclidean;
  throw Error("unknown distance kind: " + name);
}

double activation_distance(const Tensor& a, const Tensor& b, DistanceKind kind) {
  return kind == DistanceKind::Cosine ? cosine_row_distance(a, b)
                                      : euclidean_row_distance(a, b);
}

namespace {

Tensor init_embeddings(const SplitModel& model, std::size_t seq_len,
                       const AttackConfig& cfg, Rng& rng) {
  std::size_t d = model.config.hidden_dim;
  if (cfg.init == AttackInit::SampleEmbeddingRows) {
    std::vector<int> ids(seq_len);
    for (std::size_t i = 0; i < seq_len; ++i)
      ids[i] = static_cast<int>(rng.uniform_int(model.config.vocab_size));
    return t_row_select(model.embedding, ids);
  }
  Tensor t({seq_len, d});
  for (double& v : t.data) v = rng.normal();
  return t;
}

double token_accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    if (a[i] == b[i]) ++hit;
  return a.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace

Tensor invert_activations(const SplitModel& model, const Tensor& h_obs,
                          const AttackConfig& cfg, Rng& rng,
                          std::vector<TracePoint>* trace,
                          const std::vector<int>* ground_truth) {
  cfg.validate();
  require(h_obs.shape.size() == 2 && h_obs.cols() == model.config.hidden_dim,
          "invert_activations: observation shape mismatch");
  std::size_t seq_len = h_obs.rows();
  require(seq_len <= model.config.max_seq_len,
          "invert_activations: sequence too long");
  Tensor pos = t_slice_rows(model.pos_embedding, 0, seq_len);

  // With no client blocks the observation is h0 itself, so the unique
  // optimum is available in closed form.
  if (model.client_block_count() == 0) return t_sub(h_obs, pos);

  auto eval_distance = [&](const Tensor& emb) {
    return activation_distance(client_forward(model, t_add(emb, pos)), h_obs,
                               cfg.distance);
  };

  Tensor best;
  double best_dist = 0.0;
  bool have_best = false;
  bool any_completed = false;
  std::size_t attempts = cfg.restarts + 1;
  std::size_t extra_budget = 2;  // fresh inits granted after divergence

  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    Tensor emb = init_embeddings(model, seq_len, cfg, rng);
    double d0 = eval_distance(emb);
    if (!have_best || d0 < best_dist) {
      best = emb;
      best_dist = d0;
      have_best = true;
    }
    AdamState state(cfg.learning_rate);
    bool bad = false;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      Tape tape;
      ModelValues mv = lift_model(tape, model, false);
      Value ev = tape.leaf(emb, true);
      Value h0 = tape.add(ev, tape.leaf(pos, false));
      Value out = client_forward(tape, model, mv, h0);
      Value obs = tape.leaf(h_obs, false);
      Value loss;
      try {
        loss = cfg.distance == DistanceKind::Cosine
                   ? tape.cosine_distance(out, obs)
                   : tape.euclidean_distance(out, obs);
        tape.backward(loss);
      } catch (const Error&) {
        bad = true;  // non-finite loss: abandon this restart
        break;
      }
      adam_step(emb, tape.grad(ev), state);
      double dist = eval_distance(emb);
      if (!std::isfinite(dist)) {
        bad = true;
        break;
      }
      if (dist < best_dist) {
        best = emb;
        best_dist = dist;
      }
      if (trace && cfg.trace_every > 0 &&
          ((it + 1) % cfg.trace_every == 0 || it + 1 == cfg.iterations)) {
        double acc = -1.0;
        if (ground_truth) {
          std::vector<int> toks =
              project_to_tokens(emb, model.embedding, cfg.distance);
          acc = token_accuracy(toks, *ground_truth);
        }
        trace->push_back(TracePoint{it + 1, dist, acc});
      }
    }
    if (bad) {
      if (extra_budget > 0) {
        --extra_budget;
        ++attempts;  // restart from a fresh init
      }
    } else {
      any_completed = true;
    }
  }
  require(any_completed, "invert_activations: all restarts diverged");
  return best;
}

std::vector<int> project_to_tokens(const Tensor& h_star, const Tensor& table,
                                   DistanceKind kind) {
  require(h_star.cols() == table.cols(), "project_to_tokens: width mismatch");
  std::size_t seq_len = h_star.rows(), v = table.rows(), d = table.cols();
  std::vector<int> out(seq_len, 0);
  for (std::size_t i = 0; i < seq_len; ++i) {
    double best = 0.0;
    int best_id = -1;
    for (std::size_t tok = 0; tok < v; ++tok) {
      double dist;
      if (kind == DistanceKind::Cosine) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dot += h_star.at(i, j) * table.at(tok, j);
          na += h_star.at(i, j) * h_star.at(i, j);
          nb += table.at(tok, j) * table.at(tok, j);
        }
        dist = (na == 0.0 || nb == 0.0) ? 1.0 : 1.0 - dot / std::sqrt(na * nb);
      } else {
        double d2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double diff = h_star.at(i, j) - table.at(tok, j);
          d2 += diff * diff;
        }
        dist = d2;
      }
      if (best_id < 0 || dist < best) {
        best = dist;
        best_id = static_cast<int>(tok);
      }
    }
    out[i] = best_id;
  }
  return out;
}

AttackResult actinv(const SplitModel& model, const Tensor& h_obs,
                    const AttackConfig& cfg, Rng& rng,
                    const std::vector<int>* ground_truth) {
  auto t0 = std::chrono::steady_clock::now();
  AttackResult res;
  res.optimized_embeddings =
      invert_activations(model, h_obs, cfg, rng, &res.trace, ground_truth);
  res.tokens = project_to_tokens(res.optimized_embeddings, model.embedding,
                                 cfg.distance);
  Tensor pos = t_slice_rows(model.pos_embedding, 0, h_obs.rows());
  res.final_distance = activation_distance(
      client_forward(model, t_add(res.optimized_embeddings, pos)), h_obs,
      cfg.distance);
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

std::vector<int> brute_force_invert(const SplitModel& model, const Tensor& h_obs,
                                    std::size_t seq_len, DistanceKind kind,
                                    std::uint64_t cap, double* best_distance) {
  std::size_t v = model.config.vocab_size;
  double total = std::pow(static_cast<double>(v), static_cast<double>(seq_len));
  require(total <= static_cast<double>(cap),
          "brute_force_invert: V^L exceeds the enumeration cap");
  Tensor pos = t_slice_rows(model.pos_embedding, 0, seq_len);
  std::vector<int> cand(seq_len, 0);
  std::vector<int> best = cand;
  double best_dist = 0.0;
  bool first = true;
  while (true) {
    Tensor h0 = t_add(t_row_select(model.embedding, cand), pos);
    double dist = activation_distance(client_forward(model, h0), h_obs, kind);
    if (first || dist < best_dist) {  // strict <: ties keep the earliest,
      best = cand;                    // which is lexicographically smallest
      best_dist = dist;
      first = false;
    }
    std::size_t pos_idx = seq_len;
    while (pos_idx > 0) {
      --pos_idx;
      if (static_cast<std::size_t>(++cand[pos_idx]) < v) break;
      cand[pos_idx] = 0;
      if (pos_idx == 0) {
        if (best_distance) *best_distance = best_dist;
        return best;
      }
    }
  }
}

}  // namespace splitlab
