#include <algorithm>
#include <cmath>

#include "maglab/errors.hpp"
#include "maglab/lab/lab.hpp"

namespace maglab::lab {

namespace {

std::vector<double> in_window(const std::vector<double>& values, std::pair<double, double> w) {
  std::vector<double> out;
  for (double v : values) {
    if (v >= w.first && v <= w.second) out.push_back(v);
  }
  return out;
}

std::vector<SpectralCluster> cluster(const std::vector<double>& values, double tol) {
  std::vector<SpectralCluster> out;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i + 1;
    double sum = values[i];
    while (j < values.size() && values[j] - values[j - 1] <= tol) sum += values[j++];
    out.push_back({sum / static_cast<double>(j - i), static_cast<int>(j - i)});
    i = j;
  }
  return out;
}

int count_in(const std::vector<double>& sorted, double lo, double hi) {
  return static_cast<int>(std::upper_bound(sorted.begin(), sorted.end(), hi) -
                          std::lower_bound(sorted.begin(), sorted.end(), lo));
}

double nearest_distance(double v, const std::vector<double>& others, std::pair<double, double> w) {
  if (others.empty()) return std::min(std::abs(v - w.first), std::abs(v - w.second));
  double best = INFINITY;
  for (double o : others) best = std::min(best, std::abs(v - o));
  return best;
}

void require_sorted(const SpectrumResult& s, const char* which) {
  if (!std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end())) {
    throw PreconditionError(std::string("compare_spectra: list ") + which + " is not sorted");
  }
}

}  // namespace

ComparisonReport compare_spectra(const SpectrumResult& a, const SpectrumResult& b,
                                 std::pair<double, double> window, std::optional<double> cluster_tol) {
  require_sorted(a, "a");
  require_sorted(b, "b");
  if (!(window.first <= window.second)) throw PreconditionError("compare_spectra: empty window");
  const double tol = cluster_tol ? *cluster_tol : 10.0 * std::max(a.tolerance, b.tolerance);
  if (!(tol >= 0.0) || !std::isfinite(tol)) throw PreconditionError("compare_spectra: bad cluster_tol");

  ComparisonReport r;
  r.window = window;
  r.label_a = a.source;
  r.label_b = b.source;
  r.cluster_tol = tol;
  r.values_a = in_window(a.eigenvalues, window);
  r.values_b = in_window(b.eigenvalues, window);
  r.clusters_a = cluster(r.values_a, tol);
  r.clusters_b = cluster(r.values_b, tol);

  const std::size_t paired = std::min(r.clusters_a.size(), r.clusters_b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < paired; ++i) {
    r.pairing.emplace_back(static_cast<int>(i), static_cast<int>(i));
    d = std::max(d, std::abs(r.clusters_a[i].center - r.clusters_b[i].center));
  }
  for (std::size_t i = paired; i < r.clusters_a.size(); ++i) {
    d = std::max(d, nearest_distance(r.clusters_a[i].center, b.eigenvalues, window));
  }
  for (std::size_t i = paired; i < r.clusters_b.size(); ++i) {
    d = std::max(d, nearest_distance(r.clusters_b[i].center, a.eigenvalues, window));
  }
  r.hausdorff_like = d;

  // Intervals with endpoints at in-window eigenvalues of either list, widened by tol.
  std::vector<double> ends = r.values_a;
  ends.insert(ends.end(), r.values_b.begin(), r.values_b.end());
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  const auto& full_a = a.eigenvalues;
  const auto& full_b = b.eigenvalues;
  for (std::size_t i = 0; i < ends.size() && r.rank_check; ++i) {
    for (std::size_t j = i; j < ends.size(); ++j) {
      const double lo = ends[i] - tol, hi = ends[j] + tol;
      const int na = count_in(full_a, lo, hi), nb = count_in(full_b, lo, hi);
      const int na_wide = count_in(full_a, lo - tol, hi + tol);
      const int nb_wide = count_in(full_b, lo - tol, hi + tol);
      if (na > nb_wide || nb > na_wide) {
        r.rank_check = false;
        r.offending_interval = std::make_pair(lo, hi);
        break;
      }
    }
  }
  return r;
}

nlohmann::json to_json(const ComparisonReport& r) {
  auto clusters = [](const std::vector<SpectralCluster>& cs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cs) out.push_back({{"center", c.center}, {"multiplicity", c.multiplicity}});
    return out;
  };
  nlohmann::json pairing = nlohmann::json::array();
  for (const auto& [i, j] : r.pairing) pairing.push_back({i, j});
  return {{"schema", "maglab.comparison"},
          {"version", 1},
          {"window", {r.window.first, r.window.second}},
          {"label_a", r.label_a},
          {"label_b", r.label_b},
          {"values_a", r.values_a},
          {"values_b", r.values_b},
          {"clusters_a", clusters(r.clusters_a)},
          {"clusters_b", clusters(r.clusters_b)},
          {"pairing", pairing},
          {"hausdorff_like", r.hausdorff_like},
          {"cluster_tol", r.cluster_tol},
          {"rank_check", r.rank_check},
          {"offending_interval", r.offending_interval
                                     ? nlohmann::json{r.offending_interval->first, r.offending_interval->second}
                                     : nlohmann::json()}};
}

}  // namespace maglab::lab
