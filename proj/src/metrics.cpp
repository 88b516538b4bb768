#include "splitlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace splitlab {

std::pair<double, double> precision_recall(const std::vector<int>& predicted,
                                           const std::vector<int>& reference) {
  require(!predicted.empty() && !reference.empty(),
          "precision_recall: empty sequence");
  std::map<int, std::size_t> ref_counts;
  for (int t : reference) ref_counts[t]++;
  std::size_t common = 0;
  for (int t : predicted) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      ++common;
      --it->second;
    }
  }
  double p = 100.0 * static_cast<double>(common) /
             static_cast<double>(predicted.size());
  double r = 100.0 * static_cast<double>(common) /
             static_cast<double>(reference.size());
  return {p, r};
}

double rouge_l(const std::vector<int>& predicted,
               const std::vector<int>& reference) {
  require(!predicted.empty() && !reference.empty(), "rouge_l: empty sequence");
  std::size_t n = predicted.size(), m = reference.size();
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = predicted[i - 1] == reference[j - 1]
                   ? prev[j - 1] + 1
                   : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  std::size_t lcs = prev[m];
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / static_cast<double>(n);
  double r = static_cast<double>(lcs) / static_cast<double>(m);
  return 2.0 * p * r / (p + r);
}

ReconScore recon_score(const std::vector<int>& predicted,
                       const std::vector<int>& reference) {
  auto [p, r] = precision_recall(predicted, reference);
  return ReconScore{p, r, rouge_l(predicted, reference)};
}

PearsonResult pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  require(xs.size() == ys.size(), "pearson: length mismatch");
  require(xs.size() >= 2, "pearson: need at least two points");
  double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return PearsonResult{0.0, true};
  return PearsonResult{sxy / std::sqrt(sxx * syy), false};
}

UtilityScore utility_proxy(const SplitModel& model,
                           const std::vector<std::vector<int>>& prompts,
                           const DefenseSpec& defense, Rng& rng) {
  require(!prompts.empty(), "utility_proxy: empty prompt set");
  double agree = 0.0, kl = 0.0;
  std::size_t used = 0;
  for (std::size_t s = 0; s < prompts.size(); ++s) {
    const std::vector<int>& x = prompts[s];
    if (x.empty() || x.size() > model.config.max_seq_len) continue;
    ++used;
    Tensor h0 = input_embedding(model, x);
    Tensor h = client_forward(model, h0);
    Rng stream = rng.derive(s);
    DefenseContext ctx{&model, &h0, nullptr};
    Tensor hd = apply_defense(h, defense, ctx, stream);
    Tensor clean = server_forward(model, h);
    Tensor defended = server_forward(model, hd);
    if (greedy_next_token(clean) == greedy_next_token(defended)) agree += 1.0;
    // KL between next-token distributions at the last position.
    std::size_t last = clean.rows() - 1, v = clean.cols();
    auto logsumexp = [&](const Tensor& t) {
      double mx = t.at(last, 0);
      for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, t.at(last, j));
      double d = 0.0;
      for (std::size_t j = 0; j < v; ++j) d += std::exp(t.at(last, j) - mx);
      return mx + std::log(d);
    };
    double lse_c = logsumexp(clean), lse_d = logsumexp(defended);
    double div = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      double lp = clean.at(last, j) - lse_c;
      double lq = defended.at(last, j) - lse_d;
      div += std::exp(lp) * (lp - lq);
    }
    kl += std::max(0.0, div);
  }
  require(used > 0, "utility_proxy: no usable prompt");
  return UtilityScore{agree / static_cast<double>(used),
                      kl / static_cast<double>(used)};
}

}  // namespace splitlab
