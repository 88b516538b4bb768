#pragma once

#include <vector>

#include "splitlab/defense.hpp"
#include "splitlab/model.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

struct ReconScore {
  double precision = 0.0;  // percent
  double recall = 0.0;     // percent
  double rouge_l = 0.0;    // [0, 1]
};

// Bag-of-tokens precision/recall in percent.
std::pair<double, double> precision_recall(const std::vector<int>& predicted,
                                           const std::vector<int>& reference);

// LCS-based ROUGE-L F1 in [0, 1].
double rouge_l(const std::vector<int>& predicted,
               const std::vector<int>& reference);

ReconScore recon_score(const std::vector<int>& predicted,
                       const std::vector<int>& reference);

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // zero variance on either side
};
PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys);

struct UtilityScore {
  double agreement = 1.0;      // greedy next-token match fraction
  double kl_divergence = 0.0;  // mean KL(clean || defended), last position
};

// Proxy utility: greedy next-token agreement and logit divergence between
// the defended and clean pipelines over a prompt set.
UtilityScore utility_proxy(const SplitModel& model,
                           const std::vector<std::vector<int>>& prompts,
                           const DefenseSpec& defense, Rng& rng);

}  // namespace splitlab
