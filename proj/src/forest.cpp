#include "ctmsm/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ctmsm {

double RelativeRiskTree::predict(const double* x) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    k = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

double LtrcForest::raw_predict(const double* x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

double node_deviance(const std::vector<double>& delta, const std::vector<double>& mu) {
  double d = 0.0;
  for (std::size_t l = 0; l < delta.size(); ++l) {
    if (delta[l] > 0.0) d += delta[l] * std::log(delta[l] / mu[l]);
    d -= delta[l] - mu[l];
  }
  return 2.0 * d;
}

namespace {

double xlogx_ratio(double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; }

// Feature values mapped to at most max_bins ordered bins; cut[b] is the
// largest value in bin b.
struct Binning {
  std::vector<std::vector<double>> cuts;
  std::vector<std::vector<std::uint8_t>> bin;  // [feature][row]
};

Binning make_bins(const RowMatrix& X, int max_bins) {
  Binning B;
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = static_cast<std::size_t>(X.cols());
  B.cuts.resize(p);
  B.bin.assign(p, std::vector<std::uint8_t>(n));
  std::vector<double> v(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) v[i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    std::sort(v.begin(), v.end());
    std::vector<double> uniq = v;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& cuts = B.cuts[j];
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
      cuts = uniq;
    } else {
      for (int b = 1; b <= max_bins; ++b) {
        const auto pos = std::min(n - 1, (n * static_cast<std::size_t>(b)) / static_cast<std::size_t>(max_bins));
        const double c = b == max_bins ? v.back() : v[pos];
        if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double x = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      B.bin[j][i] = static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    }
  }
  return B;
}

struct TreeBuilder {
  const Binning& bins;
  const std::vector<std::uint8_t>& y;
  const std::vector<double>& e;  // exposure, or 1 for classification
  const ForestParams& params;
  SplitRule rule;
  int mtry;

  double gain_term(double D, double E, double n) const {
    if (rule == SplitRule::Poisson) return xlogx_ratio(D, E);
    return xlogx_ratio(D, n) + xlogx_ratio(n - D, n);
  }

  bool child_ok(double D, double n) const {
    if (n < params.min_node || D < 1.0) return false;
    return rule == SplitRule::Poisson || n - D >= 1.0;
  }

  // Rows drawn without replacement for one tree.
  std::vector<std::uint32_t> in_bag(CounterRng& rng) const {
    const std::size_t N = y.size();
    std::vector<std::uint32_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0u);
    auto m = static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(N)));
    m = std::clamp<std::size_t>(m, 1, N);
    for (std::size_t i = 0; i < m && m < N; ++i) std::swap(idx[i], idx[i + rng.below(N - i)]);
    idx.resize(m);
    return idx;
  }

  RelativeRiskTree build(std::size_t tree_index) const {
    const std::size_t p = bins.cuts.size();
    CounterRng rng(params.seed, tree_index, 0x7ee);
    auto idx = in_bag(rng);
    const std::size_t m = idx.size();

    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), 0);
    RelativeRiskTree tree;
    struct Task {
      std::size_t begin, end;
      int node;
    };
    tree.nodes.emplace_back();
    std::vector<Task> stack{{0, m, 0}};
    std::vector<double> hc, hd, he;
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      double D = 0.0, E = 0.0;
      for (std::size_t a = task.begin; a < task.end; ++a) {
        D += y[idx[a]];
        E += e[idx[a]];
      }
      const auto n = static_cast<double>(task.end - task.begin);
      const double leaf_value = rule == SplitRule::Poisson ? (E > 0.0 ? D / E : 0.0) : D / n;
      tree.nodes[static_cast<std::size_t>(task.node)].value = leaf_value;
      if (n < 2.0 * params.min_node || D < 2.0 || (rule == SplitRule::Bernoulli && n - D < 2.0)) continue;

      for (int k = 0; k < mtry; ++k)
        std::swap(features[static_cast<std::size_t>(k)],
                  features[static_cast<std::size_t>(k) + rng.below(p - static_cast<std::size_t>(k))]);
      const double parent = gain_term(D, E, n);
      double best = 0.0;
      int best_f = -1;
      std::size_t best_bin = 0;
      for (int k = 0; k < mtry; ++k) {
        const std::size_t f = features[static_cast<std::size_t>(k)];
        const std::size_t nb = bins.cuts[f].size();
        if (nb < 2) continue;
        hc.assign(nb, 0.0);
        hd.assign(nb, 0.0);
        he.assign(nb, 0.0);
        const auto& col = bins.bin[f];
        for (std::size_t a = task.begin; a < task.end; ++a) {
          const auto i = idx[a];
          const auto b = col[i];
          hc[b] += 1.0;
          hd[b] += y[i];
          he[b] += e[i];
        }
        double cl = 0.0, dl = 0.0, el = 0.0;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          cl += hc[b];
          dl += hd[b];
          el += he[b];
          if (hc[b] == 0.0) continue;
          if (!child_ok(dl, cl) || !child_ok(D - dl, n - cl)) continue;
          if (rule == SplitRule::Poisson && (el <= 0.0 || E - el <= 0.0)) continue;
          const double red = 2.0 * (gain_term(dl, el, cl) + gain_term(D - dl, E - el, n - cl) - parent);
          if (red > best) {
            best = red;
            best_f = static_cast<int>(f);
            best_bin = b;
          }
        }
      }
      if (best_f < 0 || !(best > 1e-10)) continue;
      const auto& col = bins.bin[static_cast<std::size_t>(best_f)];
      const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                      idx.begin() + static_cast<std::ptrdiff_t>(task.end),
                                      [&](std::uint32_t i) { return col[i] <= best_bin; });
      const auto split = static_cast<std::size_t>(mid - idx.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.feature = best_f;
      node.threshold = bins.cuts[static_cast<std::size_t>(best_f)][best_bin];
      node.left = left;
      node.right = left + 1;
      node.reduction = best;
      stack.push_back({split, task.end, left + 1});
      stack.push_back({task.begin, split, left});
    }
    return tree;
  }
};

void check_params(const ForestParams& params, std::size_t p) {
  if (params.n_trees < 1) fail(ErrorKind::Config, "hyperparameters out of range: n_trees must be >= 1");
  if (params.mtry < 0 || static_cast<std::size_t>(params.mtry) > std::max<std::size_t>(p, 1))
    fail(ErrorKind::Config, "hyperparameters out of range: mtry must lie in [1, p]");
  if (params.min_node < 0) fail(ErrorKind::Config, "hyperparameters out of range: min_node must be >= 0 (0 = automatic)");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0))
    fail(ErrorKind::Config, "hyperparameters out of range: subsample must lie in (0, 1]");
  if (params.max_bins < 2 || params.max_bins > 255)
    fail(ErrorKind::Config, "hyperparameters out of range: max_bins must lie in [2, 255]");
}

LtrcForest grow(const RowMatrix& X, const std::vector<std::uint8_t>& y, const std::vector<double>& e,
                const ForestParams& given, SplitRule rule) {
  const auto p = static_cast<std::size_t>(X.cols());
  check_params(given, p);
  ForestParams params = given;
  if (params.min_node == 0)
    params.min_node = std::max(15, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(X.rows())))));
  const Binning bins = make_bins(X, params.max_bins);
  const int mtry = p == 0 ? 0
                   : params.mtry > 0
                       ? params.mtry
                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  const TreeBuilder builder{bins, y, e, params, rule, mtry};
  std::vector<RelativeRiskTree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), params.threads, [&](std::size_t t) { trees[t] = builder.build(t); });
  if (!params.out_of_bag) return LtrcForest(std::move(trees), rule, p, 1.0);

  // Out-of-bag averages for the training rows; rows in every subsample fall
  // back to the full average.
  const auto N = static_cast<std::size_t>(X.rows());
  std::vector<double> sum(N, 0.0);
  std::vector<std::uint32_t> count(N, 0);
  std::vector<std::uint8_t> bag(N);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    CounterRng rng(params.seed, t, 0x7ee);
    std::fill(bag.begin(), bag.end(), 0);
    for (auto i : builder.in_bag(rng)) bag[i] = 1;
    for (std::size_t i = 0; i < N; ++i)
      if (!bag[i]) {
        sum[i] += trees[t].predict(X.row(static_cast<Eigen::Index>(i)).data());
        ++count[i];
      }
  }
  LtrcForest forest(std::move(trees), rule, p, 1.0);
  for (std::size_t i = 0; i < N; ++i)
    sum[i] = count[i] ? sum[i] / count[i] : forest.raw_predict(X.row(static_cast<Eigen::Index>(i)).data());
  forest.set_oob_raw(std::move(sum));
  return forest;
}

}  // namespace

LtrcForest fit_ltrc_forest(const RowMatrix& X, const std::vector<std::uint8_t>& events,
                           const std::vector<double>& exposure, const ForestParams& params) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (events.size() != n || exposure.size() != n) fail(ErrorKind::Config, "forest inputs differ in length");
  if (std::count(events.begin(), events.end(), std::uint8_t{1}) == 0)
    fail(ErrorKind::Numerical, "no events to fit the forest");
  auto forest = grow(X, events, exposure, params, SplitRule::Poisson);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += exposure[i];
    den += exposure[i] * (params.out_of_bag ? forest.oob_raw()[i]
                                           : forest.raw_predict(X.row(static_cast<Eigen::Index>(i)).data()));
  }
  if (!(den > 0.0)) fail(ErrorKind::Numerical, "forest predicts zero relative risk everywhere");
  forest.set_scale(num / den);
  return forest;
}

LtrcForest fit_forest_classifier(const RowMatrix& X, const std::vector<std::uint8_t>& outcome,
                                 const ForestParams& params) {
  if (outcome.size() != static_cast<std::size_t>(X.rows())) fail(ErrorKind::Config, "classifier inputs differ in length");
  const std::vector<double> unit(outcome.size(), 1.0);
  return grow(X, outcome, unit, params, SplitRule::Bernoulli);
}

}  // namespace ctmsm
