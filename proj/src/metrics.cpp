#include "culturekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "culturekit/errors.hpp"

namespace culturekit::metrics {

namespace {

// Counts inversions (strictly decreasing pairs) via bottom-up merge sort.
// Equal elements are not inversions.
uint64_t count_inversions(std::vector<double>& v) {
  uint64_t inversions = 0;
  std::vector<double> buf(v.size());
  for (size_t width = 1; width < v.size(); width *= 2) {
    for (size_t lo = 0; lo + width < v.size(); lo += 2 * width) {
      size_t mid = lo + width;
      size_t hi = std::min(lo + 2 * width, v.size());
      size_t a = lo, b = mid, k = lo;
      while (a < mid && b < hi) {
        if (v[b] < v[a]) {
          inversions += mid - a;
          buf[k++] = v[b++];
        } else {
          buf[k++] = v[a++];
        }
      }
      while (a < mid) buf[k++] = v[a++];
      while (b < hi) buf[k++] = v[b++];
      std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
                v.begin() + static_cast<long>(lo));
    }
  }
  return inversions;
}

uint64_t tie_pair_count(std::vector<double> sorted) {
  uint64_t pairs = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    uint64_t g = j - i;
    pairs += g * (g - 1) / 2;
    i = j;
  }
  return pairs;
}

}  // namespace

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("kendall_tau_b: length mismatch");
  size_t n = x.size();
  if (n < 2) throw UsageError("kendall_tau_b: need at least two observations");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  uint64_t n0 = static_cast<uint64_t>(n) * (n - 1) / 2;

  // Pairs tied in x, and jointly tied in (x, y), from the sorted order.
  uint64_t n1 = 0, n3 = 0;
  {
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j < n && x[order[j]] == x[order[i]]) ++j;
      uint64_t g = j - i;
      n1 += g * (g - 1) / 2;
      size_t a = i;
      while (a < j) {
        size_t b = a;
        while (b < j && y[order[b]] == y[order[a]]) ++b;
        uint64_t h = b - a;
        n3 += h * (h - 1) / 2;
        a = b;
      }
      i = j;
    }
  }

  std::vector<double> y_in_x_order(n), y_sorted(y.begin(), y.end());
  for (size_t i = 0; i < n; ++i) y_in_x_order[i] = y[order[i]];
  std::sort(y_sorted.begin(), y_sorted.end());
  uint64_t n2 = tie_pair_count(std::move(y_sorted));

  // Within an x-tie group y ascends, so inversions are exactly the
  // discordant pairs D. C - D = n0 - n1 - n2 + n3 - 2D.
  uint64_t discordant = count_inversions(y_in_x_order);

  if (n0 == n1)
    throw UndefinedCorrelationError("kendall_tau_b: x is fully tied, tau undefined");
  if (n0 == n2)
    throw UndefinedCorrelationError("kendall_tau_b: y is fully tied, tau undefined");

  double numer = static_cast<double>(static_cast<int64_t>(n0) - static_cast<int64_t>(n1) -
                                     static_cast<int64_t>(n2) + static_cast<int64_t>(n3)) -
                 2.0 * static_cast<double>(discordant);
  double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return numer / denom;
}

std::vector<double> average_ranks(std::span<const double> v) {
  size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;  // 1-based
    for (size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw UsageError("spearman_rho: length mismatch");
  if (x.size() < 2) throw UsageError("spearman_rho: need at least two observations");
  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);

  size_t n = rx.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedCorrelationError("spearman_rho: constant vector, rho undefined");
  return sxy / std::sqrt(sxx * syy);
}

DiversityTable diversity(std::span<const SymbolRef> symbols, const roster::Roster& roster,
                         const std::vector<std::string>& cultures,
                         const std::vector<std::string>& topics,
                         const std::vector<std::string>& models) {
  DiversityTable table;
  for (const auto& model : models)
    for (const auto& topic : topics)
      for (const auto& culture : cultures)
        table.entries[{model, topic, culture}] = 0;

  std::map<std::tuple<std::string, std::string, std::string>, std::set<std::string>> norms;
  for (const auto& s : symbols) norms[{s.model_id, s.topic, s.culture}].insert(s.norm);
  for (const auto& [key, set] : norms) {
    auto it = table.entries.find(key);
    if (it != table.entries.end()) it->second = static_cast<long>(set.size());
  }

  // region -> member cultures restricted to the requested universe
  std::map<std::string, std::vector<std::string>> region_members;
  for (const auto& id : cultures) region_members[roster.culture(id).region].push_back(id);
  for (const auto& model : models) {
    for (const auto& topic : topics) {
      for (const auto& [region, members] : region_members) {
        double sum = 0.0;
        for (const auto& id : members)
          sum += static_cast<double>(table.entries[{model, topic, id}]);
        table.region_rollups[{model, topic, region}] =
            sum / static_cast<double>(members.size());
      }
    }
  }
  return table;
}

std::optional<double> overlap_rate(const std::set<std::string>& culture_symbols,
                                   const std::set<std::string>& agnostic_symbols) {
  if (culture_symbols.empty()) return std::nullopt;
  size_t common = 0;
  for (const auto& s : culture_symbols) common += agnostic_symbols.count(s);
  return static_cast<double>(common) / static_cast<double>(culture_symbols.size());
}

AblationRates ablation_rates(const std::set<std::string>& condition_symbols,
                             const std::set<std::string>& neutral_symbols,
                             const std::set<std::string>& all_known_symbols) {
  AblationRates rates;
  if (!neutral_symbols.empty()) {
    size_t hit = 0;
    for (const auto& s : neutral_symbols) hit += condition_symbols.count(s);
    rates.hit_rate = static_cast<double>(hit) / static_cast<double>(neutral_symbols.size());
  }
  if (!condition_symbols.empty()) {
    size_t fresh = 0;
    for (const auto& s : condition_symbols) fresh += !all_known_symbols.count(s);
    rates.new_rate = static_cast<double>(fresh) / static_cast<double>(condition_symbols.size());
  }
  return rates;
}

std::string strength_label(double tau) {
  double a = std::fabs(tau);
  if (a < 0.06) return "weak";
  if (a < 0.26) return "weak-to-moderate";
  return "moderate-to-strong";
}

std::vector<CorrelationResult> correlate_diversity_frequency(
    const DiversityTable& div,
    const std::map<std::pair<std::string, std::string>, long>& counts,
    const std::vector<std::string>& cultures, const std::vector<std::string>& topics,
    const std::vector<std::string>& models) {
  std::vector<CorrelationResult> results;
  for (const auto& model : models) {
    for (const auto& topic : topics) {
      std::vector<double> x, y;
      std::vector<std::string> missing;
      for (const auto& culture : cultures) {
        auto dit = div.entries.find({model, topic, culture});
        if (dit == div.entries.end()) {
          missing.push_back(culture);
          continue;
        }
        auto cit = counts.find({culture, topic});
        if (cit == counts.end()) {
          missing.push_back(culture);
          continue;
        }
        x.push_back(static_cast<double>(dit->second));
        y.push_back(static_cast<double>(cit->second));
      }
      if (!missing.empty()) {
        std::string ids;
        for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
        throw DataError("correlate_diversity_frequency: topic '" + topic +
                        "' is missing cultures: " + ids);
      }
      CorrelationResult r;
      r.model_id = model;
      r.topic = topic;
      r.n = static_cast<int>(x.size());
      r.tau = kendall_tau_b(x, y);
      r.strength_label = strength_label(r.tau);
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace culturekit::metrics
