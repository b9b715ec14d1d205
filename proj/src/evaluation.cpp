#include "ehrgraph/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace ehrgraph {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) {
    return std::nullopt;
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

SummaryStat stat_of(const std::vector<double>& values) {
  SummaryStat s;
  s.count = values.size();
  if (values.empty()) {
    return s;
  }
  double sum = 0.0;
  for (const double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (const double v : values) {
    sq += (v - s.mean) * (v - s.mean);
  }
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
      ++j;
    }
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k]] = rank;
    }
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string to_string(CutoffPolicy policy) { return policy == CutoffPolicy::fixed ? "0.5" : "avg"; }

CutoffPolicy parse_cutoff_policy(const std::string& name) {
  if (name == "0.5" || name == "fixed") {
    return CutoffPolicy::fixed;
  }
  if (name == "avg" || name == "train_frequency") {
    return CutoffPolicy::train_frequency;
  }
  throw ConfigError("unknown cutoff policy '" + name + "' (expected 0.5 or avg)");
}

MetricsReport evaluate(const Matrix& scores, const Dataset& test_visible, std::span<const Edge> heldout,
                       CutoffPolicy policy, std::span<const double> train_frequencies,
                       const EvaluateOptions& options) {
  const std::size_t m = test_visible.num_patients;
  const std::size_t n = test_visible.num_events;
  if (static_cast<std::size_t>(scores.rows()) != m || static_cast<std::size_t>(scores.cols()) != n) {
    throw Error("score grid is " + std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
                ", expected " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (train_frequencies.size() != n) {
    throw Error("train frequencies do not cover every event");
  }
  if (!(options.negative_sample_rate > 0.0 && options.negative_sample_rate <= 1.0)) {
    throw ConfigError("negative_sample_rate must lie in (0,1]");
  }

  // Per-patient row offsets into the sorted visible / held-out lists.
  auto offsets = [m](std::span<const Edge> edges) {
    std::vector<std::size_t> off(m + 1, 0);
    for (const auto& e : edges) {
      if (e.patient >= m) {
        throw Error("evaluation edge out of range");
      }
      ++off[e.patient + 1];
    }
    std::partial_sum(off.begin(), off.end(), off.begin());
    return off;
  };
  EdgeList held(heldout.begin(), heldout.end());
  normalize_edges(held);
  const auto visible_off = offsets(test_visible.positives);
  const auto held_off = offsets(held);

  const std::size_t chunks = resolve_workers(options.workers, std::max<std::size_t>(m, 1));
  std::vector<std::vector<std::array<std::size_t, 4>>> partial(chunks);
  parallel_chunks(m, chunks, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& counts = partial[chunk];
    counts.assign(n, {0, 0, 0, 0});  // tp, fn, tn, fp
    std::vector<std::uint8_t> status(n);  // 0 negative, 1 positive, 2 skip
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(status.begin(), status.end(), 0);
      for (std::size_t k = visible_off[i]; k < visible_off[i + 1]; ++k) {
        status[test_visible.positives[k].event] = 2;
      }
      for (std::size_t k = held_off[i]; k < held_off[i + 1]; ++k) {
        if (status[held[k].event] == 2) {
          throw Error("held-out pair is also visible");
        }
        status[held[k].event] = 1;
      }
      Rng rng(derive_seed(options.seed, "eval.negatives", i));
      const auto row = scores.row(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < n; ++j) {
        if (status[j] == 2) {
          continue;
        }
        if (status[j] == 0 && options.negative_sample_rate < 1.0 && uniform01(rng) >= options.negative_sample_rate) {
          continue;
        }
        const double cutoff = policy == CutoffPolicy::fixed ? 0.5 : train_frequencies[j];
        const bool predicted = row[static_cast<Eigen::Index>(j)] > cutoff;
        if (status[j] == 1) {
          ++counts[j][predicted ? 0 : 1];
        } else {
          ++counts[j][predicted ? 3 : 2];
        }
      }
    }
  });

  MetricsReport report;
  report.policy = policy;
  report.per_event.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& ev = report.per_event[j];
    ev.train_frequency = train_frequencies[j];
    for (const auto& counts : partial) {
      if (counts.empty()) {
        continue;
      }
      ev.tp += counts[j][0];
      ev.fn += counts[j][1];
      ev.tn += counts[j][2];
      ev.fp += counts[j][3];
    }
    if (ev.tp + ev.fn > 0) {
      ev.sensitivity = static_cast<double>(ev.tp) / static_cast<double>(ev.tp + ev.fn);
    }
    if (ev.tn + ev.fp > 0) {
      ev.specificity = static_cast<double>(ev.tn) / static_cast<double>(ev.tn + ev.fp);
    }
    if (ev.sensitivity && ev.specificity) {
      ev.balanced_accuracy = 0.5 * (*ev.sensitivity + *ev.specificity);
    }
  }
  summarize(report);
  return report;
}

void summarize(MetricsReport& report) {
  std::vector<double> sens;
  std::vector<double> spec;
  std::vector<double> bal;
  report.events_without_positives = 0;
  for (const auto& ev : report.per_event) {
    if (ev.sensitivity) {
      sens.push_back(*ev.sensitivity);
    } else {
      ++report.events_without_positives;
    }
    if (ev.specificity) {
      spec.push_back(*ev.specificity);
    }
    if (ev.balanced_accuracy) {
      bal.push_back(*ev.balanced_accuracy);
    }
  }
  report.sensitivity = stat_of(sens);
  report.specificity = stat_of(spec);
  report.balanced_accuracy = stat_of(bal);
  report.frequency_bins = frequency_bins(report.per_event);
}

std::vector<FrequencyBin> frequency_bins(std::span<const EventMetrics> per_event, std::size_t bins) {
  if (per_event.empty() || bins == 0) {
    return {};
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& ev : per_event) {
    if (ev.train_frequency > 0.0) {
      lo = std::min(lo, ev.train_frequency);
      hi = std::max(hi, ev.train_frequency);
    }
  }
  std::vector<FrequencyBin> out;
  std::vector<std::size_t> assignment(per_event.size(), 0);
  if (!(hi > lo)) {
    out.resize(1);
    out[0].lower = std::isfinite(lo) ? lo : 0.0;
    out[0].upper = std::max(hi, out[0].lower);
  } else {
    out.resize(bins);
    const double log_lo = std::log(lo);
    const double width = (std::log(hi) - log_lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      out[b].lower = std::exp(log_lo + width * static_cast<double>(b));
      out[b].upper = std::exp(log_lo + width * static_cast<double>(b + 1));
    }
    out.front().lower = lo;
    out.back().upper = hi;
    for (std::size_t k = 0; k < per_event.size(); ++k) {
      const double f = per_event[k].train_frequency;
      if (f <= 0.0) {
        continue;
      }
      const auto b = static_cast<std::size_t>(std::floor((std::log(f) - log_lo) / width));
      assignment[k] = std::min(b, bins - 1);
    }
  }
  std::vector<std::vector<double>> recalls(out.size());
  std::vector<std::vector<double>> specs(out.size());
  for (std::size_t k = 0; k < per_event.size(); ++k) {
    auto& bin = out[assignment[k]];
    ++bin.events;
    if (per_event[k].sensitivity) {
      recalls[assignment[k]].push_back(*per_event[k].sensitivity);
    }
    if (per_event[k].specificity) {
      specs[assignment[k]].push_back(*per_event[k].specificity);
    }
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].mean_recall = mean_of(recalls[b]);
    out[b].mean_specificity = mean_of(specs[b]);
  }
  return out;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("spearman inputs differ in length");
  }
  if (x.size() < 2) {
    return std::nullopt;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    return std::nullopt;
  }
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> frequency_recall_correlation(const MetricsReport& report) {
  std::vector<double> freq;
  std::vector<double> recall;
  for (const auto& ev : report.per_event) {
    if (ev.sensitivity) {
      freq.push_back(ev.train_frequency);
      recall.push_back(*ev.sensitivity);
    }
  }
  return spearman(freq, recall);
}

BiasProfile bias_profile(const MetricsReport& v1, const MetricsReport& v2) {
  if (v1.per_event.size() != v2.per_event.size()) {
    throw Error("bias profile needs reports over the same events");
  }
  for (std::size_t j = 0; j < v1.per_event.size(); ++j) {
    if (v1.per_event[j].train_frequency != v2.per_event[j].train_frequency) {
      throw Error("bias profile needs reports over the same events (frequency of event " + std::to_string(j) +
                  " differs)");
    }
  }
  const auto bins1 = frequency_bins(v1.per_event);
  const auto bins2 = frequency_bins(v2.per_event);
  BiasProfile profile;
  for (std::size_t b = 0; b < bins1.size(); ++b) {
    BiasRow row;
    row.lower = bins1[b].lower;
    row.upper = bins1[b].upper;
    row.events = bins1[b].events;
    row.recall_v1 = bins1[b].mean_recall;
    row.specificity_v1 = bins1[b].mean_specificity;
    row.recall_v2 = bins2[b].mean_recall;
    row.specificity_v2 = bins2[b].mean_specificity;
    profile.bins.push_back(row);
  }
  profile.spearman_v1 = frequency_recall_correlation(v1);
  profile.spearman_v2 = frequency_recall_correlation(v2);
  return profile;
}

void write_per_event_csv(const std::filesystem::path& path, const MetricsReport& report,
                         const std::vector<std::string>& event_labels) {
  auto out = open_output(path);
  out << "event_id,train_frequency,tp,fn,tn,fp,sensitivity,specificity,balanced_accuracy\n";
  for (std::size_t j = 0; j < report.per_event.size(); ++j) {
    const auto& ev = report.per_event[j];
    out << (event_labels.empty() ? std::to_string(j) : event_labels[j]) << ',' << format_double(ev.train_frequency)
        << ',' << ev.tp << ',' << ev.fn << ',' << ev.tn << ',' << ev.fp << ',' << opt(ev.sensitivity) << ','
        << opt(ev.specificity) << ',' << opt(ev.balanced_accuracy) << '\n';
  }
}

void write_summary_csv(const std::filesystem::path& path, std::span<const MethodReports> methods) {
  auto out = open_output(path);
  out << "method,cutoff,sensitivity_mean,sensitivity_std,specificity_mean,specificity_std,"
         "balanced_accuracy_mean,balanced_accuracy_std,events_with_sensitivity,events_with_specificity,"
         "events_without_positives\n";
  for (const auto& [method, reports] : methods) {
    for (const auto& r : reports) {
      out << method << ',' << to_string(r.policy) << ',' << format_double(r.sensitivity.mean) << ','
          << format_double(r.sensitivity.stddev) << ',' << format_double(r.specificity.mean) << ','
          << format_double(r.specificity.stddev) << ',' << format_double(r.balanced_accuracy.mean) << ','
          << format_double(r.balanced_accuracy.stddev) << ',' << r.sensitivity.count << ',' << r.specificity.count
          << ',' << r.events_without_positives << '\n';
    }
  }
}

void write_bias_csv(const std::filesystem::path& path, const BiasProfile& profile) {
  auto out = open_output(path);
  out << "bin,frequency_lower,frequency_upper,events,recall_v1,recall_v2,recall_delta,specificity_v1,"
         "specificity_v2,specificity_delta\n";
  for (std::size_t b = 0; b < profile.bins.size(); ++b) {
    const auto& r = profile.bins[b];
    auto delta = [](const std::optional<double>& a, const std::optional<double>& c) -> std::optional<double> {
      if (a && c) {
        return *a - *c;
      }
      return std::nullopt;
    };
    out << b << ',' << format_double(r.lower) << ',' << format_double(r.upper) << ',' << r.events << ','
        << opt(r.recall_v1) << ',' << opt(r.recall_v2) << ',' << opt(delta(r.recall_v1, r.recall_v2)) << ','
        << opt(r.specificity_v1) << ',' << opt(r.specificity_v2) << ','
        << opt(delta(r.specificity_v1, r.specificity_v2)) << '\n';
  }
}

std::vector<std::vector<std::pair<std::size_t, double>>> cosine_neighbors(const Matrix& embeddings, std::size_t k) {
  const auto n = embeddings.rows();
  Matrix unit = embeddings;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = unit.row(j).norm();
    if (norm > 0.0) {
      unit.row(j) /= norm;
    }
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> out(static_cast<std::size_t>(n));
  std::vector<std::size_t> order;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector sims = unit * unit.row(j).transpose();
    order.clear();
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != j) {
        order.push_back(static_cast<std::size_t>(c));
      }
    }
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double sa = sims[static_cast<Eigen::Index>(a)];
                        const double sb = sims[static_cast<Eigen::Index>(b)];
                        return sa != sb ? sa > sb : a < b;
                      });
    for (std::size_t t = 0; t < take; ++t) {
      out[static_cast<std::size_t>(j)].emplace_back(order[t], sims[static_cast<Eigen::Index>(order[t])]);
    }
  }
  return out;
}

void export_event_embeddings(const std::filesystem::path& prefix, const Matrix& embeddings,
                             const std::vector<std::string>& event_labels,
                             const std::vector<std::string>& event_categories, std::size_t k) {
  auto label = [&](std::size_t j) { return event_labels.empty() ? std::to_string(j) : event_labels[j]; };
  {
    auto out = open_output(prefix.string() + "_embeddings.csv");
    out << "event_id,category";
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
      out << ",z" << c;
    }
    out << '\n';
    for (Eigen::Index j = 0; j < embeddings.rows(); ++j) {
      const auto jj = static_cast<std::size_t>(j);
      out << label(jj) << ',' << (event_categories.empty() ? "" : event_categories[jj]);
      for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
        out << ',' << format_double(embeddings(j, c));
      }
      out << '\n';
    }
  }
  const auto neighbors = cosine_neighbors(embeddings, k);
  auto out = open_output(prefix.string() + "_neighbors.csv");
  out << "event_id,rank,neighbor_id,cosine\n";
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    for (std::size_t r = 0; r < neighbors[j].size(); ++r) {
      out << label(j) << ',' << r + 1 << ',' << label(neighbors[j][r].first) << ','
          << format_double(neighbors[j][r].second) << '\n';
    }
  }
}

}  // namespace ehrgraph
