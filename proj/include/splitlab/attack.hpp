#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitlab/model.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

enum class DistanceKind { Cosine, Euclidean };
enum class AttackInit { SampleEmbeddingRows, Gaussian };

std::string distance_kind_name(DistanceKind k);
DistanceKind distance_kind_from_name(const std::string& name);

struct AttackConfig {
  std::size_t iterations = 2000;
  double learning_rate = 0.01;
  DistanceKind distance = DistanceKind::Cosine;
  AttackInit init = AttackInit::SampleEmbeddingRows;
  std::size_t restarts = 0;
  std::size_t trace_every = 0;  // 0 disables

  void validate() const {
    require(iterations >= 1, "attack: iterations must be >= 1");
    require(learning_rate > 0.0, "attack: learning rate must be positive");
  }
};

struct TracePoint {
  std::size_t iteration;
  double distance;
  double token_accuracy;  // -1 when no ground truth supplied
};

struct AttackResult {
  std::vector<int> tokens;
  Tensor optimized_embeddings;  // L x D token-embedding component
  double final_distance = 0.0;
  std::vector<TracePoint> trace;
  double wall_seconds = 0.0;
};

// Mean per-row distance between two L x D activation tensors.
double activation_distance(const Tensor& a, const Tensor& b, DistanceKind kind);

// Activation matching: optimize dummy token embeddings so the client
// forward output approaches h_obs; returns the best iterate seen.
Tensor invert_activations(const SplitModel& model, const Tensor& h_obs,
                          const AttackConfig& cfg, Rng& rng,
                          std::vector<TracePoint>* trace = nullptr,
                          const std::vector<int>* ground_truth = nullptr);

// Nearest-row projection onto the embedding table, ties to the smaller id.
std::vector<int> project_to_tokens(const Tensor& h_star, const Tensor& table,
                                   DistanceKind kind);

AttackResult actinv(const SplitModel& model, const Tensor& h_obs,
                    const AttackConfig& cfg, Rng& rng,
                    const std::vector<int>* ground_truth = nullptr);

inline constexpr std::uint64_t kBruteForceCap = 1ULL << 20;

// Exact argmin of activation distance over all V^L candidate sequences.
std::vector<int> brute_force_invert(const SplitModel& model, const Tensor& h_obs,
                                    std::size_t seq_len,
                                    DistanceKind kind = DistanceKind::Cosine,
                                    std::uint64_t cap = kBruteForceCap,
                                    double* best_distance = nullptr);

}  // namespace splitlab
