#include "ehrgraph/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace ehrgraph {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return fields;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_header(const std::vector<std::string>& fields, std::initializer_list<const char*> names) {
  if (fields.size() != names.size()) {
    return false;
  }
  std::size_t k = 0;
  for (const char* name : names) {
    if (lower(fields[k++]) != name) {
      return false;
    }
  }
  return true;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  return out;
}

[[noreturn]] void parse_error(const fs::path& path, std::size_t line, const std::string& what) {
  throw Error(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const fs::path& path, std::size_t line, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(value)) {
      parse_error(path, line, "invalid number '" + text + "'");
    }
    return value;
  } catch (const std::logic_error&) {
    parse_error(path, line, "invalid number '" + text + "'");
  }
}

std::size_t parse_index(const fs::path& path, std::size_t line, const std::string& text) {
  const double value = parse_number(path, line, text);
  if (value < 0 || value != std::floor(value)) {
    parse_error(path, line, "invalid index '" + text + "'");
  }
  return static_cast<std::size_t>(value);
}

// Reads a CSV with a fixed column count, skipping blank lines and the header.
template <class RowFn>
void read_csv(const fs::path& path, std::size_t columns, std::initializer_list<const char*> header,
              RowFn&& on_row) {
  auto in = open_input(path);
  std::string raw;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) {
      continue;
    }
    auto fields = split_fields(line);
    if (first && is_header(fields, header)) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() != columns) {
      parse_error(path, line_no,
                  "expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    on_row(line_no, fields);
  }
}

double parse_sex(const fs::path& path, std::size_t line, const std::string& text) {
  const auto s = lower(text);
  if (s == "m" || s == "1") {
    return 1.0;
  }
  if (s == "f" || s == "0") {
    return 0.0;
  }
  parse_error(path, line, "sex must be one of M,F,0,1, got '" + text + "'");
}

}  // namespace

double Dataset::density() const {
  if (num_patients == 0 || num_events == 0) {
    return 0.0;
  }
  return static_cast<double>(positives.size()) /
         (static_cast<double>(num_patients) * static_cast<double>(num_events));
}

std::vector<std::size_t> Dataset::event_counts() const {
  std::vector<std::size_t> counts(num_events, 0);
  for (const auto& e : positives) {
    ++counts[e.event];
  }
  return counts;
}

std::vector<std::size_t> Dataset::patient_counts() const {
  std::vector<std::size_t> counts(num_patients, 0);
  for (const auto& e : positives) {
    ++counts[e.patient];
  }
  return counts;
}

void Dataset::validate() const {
  for (std::size_t k = 0; k < positives.size(); ++k) {
    const auto& e = positives[k];
    if (e.patient >= num_patients || e.event >= num_events) {
      throw Error("positive (" + std::to_string(e.patient) + "," + std::to_string(e.event) +
                  ") out of range");
    }
    if (k > 0 && !(positives[k - 1] < e)) {
      throw Error("positives must be sorted and unique");
    }
  }
  if (static_cast<std::size_t>(demographics.rows()) != num_patients ||
      static_cast<std::size_t>(demographics.cols()) != kDemographicsDim) {
    throw Error("demographics shape does not match patient count");
  }
  if (!patient_ids.empty() && patient_ids.size() != num_patients) {
    throw Error("patient id count does not match patient count");
  }
  if (!event_labels.empty() && event_labels.size() != num_events) {
    throw Error("event label count does not match event count");
  }
  if (!event_categories.empty() && event_categories.size() != num_events) {
    throw Error("event category count does not match event count");
  }
}

void SplitSpec::validate() const {
  auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(train_fraction)) {
    throw ConfigError("split.train_fraction must lie in (0,1)");
  }
  if (!in_unit(test_mask_fraction)) {
    throw ConfigError("split.test_mask_fraction must lie in (0,1)");
  }
  if (!(min_event_frequency >= 0.0 && min_event_frequency < 1.0)) {
    throw ConfigError("split.min_event_frequency must lie in [0,1)");
  }
}

Dataset load_triplets(const fs::path& triplets, const fs::path& demographics) {
  Dataset data;
  std::unordered_map<std::string, std::uint32_t> patient_index;
  std::vector<double> ages;
  std::vector<double> sexes;
  read_csv(demographics, 3, {"patient_id", "age", "sex"},
           [&](std::size_t line, const std::vector<std::string>& f) {
             if (f[0].empty()) {
               parse_error(demographics, line, "empty patient id");
             }
             const auto [it, inserted] =
                 patient_index.emplace(f[0], static_cast<std::uint32_t>(data.patient_ids.size()));
             if (!inserted) {
               parse_error(demographics, line, "duplicate patient '" + f[0] + "'");
             }
             data.patient_ids.push_back(f[0]);
             ages.push_back(parse_number(demographics, line, f[1]));
             sexes.push_back(parse_sex(demographics, line, f[2]));
           });
  data.num_patients = data.patient_ids.size();
  data.demographics.resize(static_cast<Eigen::Index>(data.num_patients), kDemographicsDim);
  for (std::size_t i = 0; i < data.num_patients; ++i) {
    data.demographics(static_cast<Eigen::Index>(i), kAgeColumn) = ages[i];
    data.demographics(static_cast<Eigen::Index>(i), kSexColumn) = sexes[i];
  }

  std::unordered_map<std::string, std::uint32_t> event_index;
  std::vector<std::string> missing;
  read_csv(triplets, 2, {"patient_id", "event_id"},
           [&](std::size_t line, const std::vector<std::string>& f) {
             if (f[0].empty() || f[1].empty()) {
               parse_error(triplets, line, "empty identifier");
             }
             const auto p = patient_index.find(f[0]);
             if (p == patient_index.end()) {
               missing.push_back(f[0]);
               return;
             }
             const auto [e, inserted] =
                 event_index.emplace(f[1], static_cast<std::uint32_t>(data.event_labels.size()));
             if (inserted) {
               data.event_labels.push_back(f[1]);
             }
             data.positives.push_back({p->second, e->second});
           });
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (const auto& id : missing) {
      list += (list.empty() ? "" : ",") + id;
    }
    throw Error("patients missing from demographics: " + list);
  }
  data.num_events = data.event_labels.size();
  normalize_edges(data.positives);
  return data;
}

EventFilterResult filter_rare_events(const Dataset& data, double min_event_frequency) {
  if (!(min_event_frequency >= 0.0 && min_event_frequency < 1.0)) {
    throw ConfigError("min_event_frequency must lie in [0,1)");
  }
  const auto threshold = static_cast<std::size_t>(
      std::ceil(min_event_frequency * static_cast<double>(data.num_patients) - 1e-9));
  const auto counts = data.event_counts();

  EventFilterResult result;
  result.event_index_map.assign(data.num_events, -1);
  Dataset& out = result.dataset;
  std::int64_t next = 0;
  for (std::size_t j = 0; j < data.num_events; ++j) {
    if (counts[j] >= threshold) {
      result.event_index_map[j] = next++;
      if (!data.event_labels.empty()) {
        out.event_labels.push_back(data.event_labels[j]);
      }
      if (!data.event_categories.empty()) {
        out.event_categories.push_back(data.event_categories[j]);
      }
    }
  }
  if (next == 0) {
    throw Error("empty dataset after filtering");
  }
  out.num_patients = data.num_patients;
  out.num_events = static_cast<std::size_t>(next);
  out.demographics = data.demographics;
  out.patient_ids = data.patient_ids;
  out.positives.reserve(data.positives.size());
  for (const auto& e : data.positives) {
    const auto mapped = result.event_index_map[e.event];
    if (mapped >= 0) {
      out.positives.push_back({e.patient, static_cast<std::uint32_t>(mapped)});
    }
  }
  // Remapping is monotone, so patient-major order is preserved.
  return result;
}

std::size_t heldout_count(std::size_t degree, double mask_fraction) {
  if (degree == 0) {
    return 0;
  }
  auto held = static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(degree)));
  return std::min(held, degree - 1);
}

SplitDataset split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  if (data.num_patients < 2) {
    throw Error("split needs at least 2 patients");
  }
  const std::size_t m = data.num_patients;
  auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(m)));
  n_train = std::clamp<std::size_t>(n_train, 1, m - 1);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(spec.seed, "split.patients"));
  shuffle(order, rng);

  SplitDataset out;
  out.train_patients.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test_patients.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(out.train_patients.begin(), out.train_patients.end());
  std::sort(out.test_patients.begin(), out.test_patients.end());
  out.event_index_map.resize(data.num_events);
  std::iota(out.event_index_map.begin(), out.event_index_map.end(), 0);

  // source patient -> (is_train, local index)
  std::vector<std::pair<bool, std::uint32_t>> where(m);
  for (std::size_t k = 0; k < out.train_patients.size(); ++k) {
    where[out.train_patients[k]] = {true, static_cast<std::uint32_t>(k)};
  }
  for (std::size_t k = 0; k < out.test_patients.size(); ++k) {
    where[out.test_patients[k]] = {false, static_cast<std::uint32_t>(k)};
  }

  auto make_part = [&](const std::vector<std::size_t>& patients) {
    Dataset part;
    part.num_patients = patients.size();
    part.num_events = data.num_events;
    part.event_labels = data.event_labels;
    part.event_categories = data.event_categories;
    part.demographics.resize(static_cast<Eigen::Index>(patients.size()), kDemographicsDim);
    for (std::size_t k = 0; k < patients.size(); ++k) {
      part.demographics.row(static_cast<Eigen::Index>(k)) =
          data.demographics.row(static_cast<Eigen::Index>(patients[k]));
      if (!data.patient_ids.empty()) {
        part.patient_ids.push_back(data.patient_ids[patients[k]]);
      }
    }
    return part;
  };
  out.train = make_part(out.train_patients);
  out.test_visible = make_part(out.test_patients);

  Rng mask_rng(derive_seed(spec.seed, "split.mask"));
  std::vector<std::vector<std::uint32_t>> test_events(out.test_patients.size());
  for (const auto& e : data.positives) {
    const auto [is_train, local] = where[e.patient];
    if (is_train) {
      out.train.positives.push_back({local, e.event});
    } else {
      test_events[local].push_back(e.event);
    }
  }
  for (std::size_t k = 0; k < test_events.size(); ++k) {
    auto& events = test_events[k];
    const std::size_t held = heldout_count(events.size(), spec.test_mask_fraction);
    shuffle(events, mask_rng);
    const auto patient = static_cast<std::uint32_t>(k);
    for (std::size_t t = 0; t < events.size(); ++t) {
      (t < held ? out.test_heldout : out.test_visible.positives).push_back({patient, events[t]});
    }
  }
  normalize_edges(out.test_heldout);
  normalize_edges(out.test_visible.positives);

  // Age standardization from train statistics only.
  const auto train_age = out.train.demographics.col(kAgeColumn);
  const double mean = train_age.mean();
  const double var = (train_age.array() - mean).square().mean();
  out.age_scaler.mean = mean;
  out.age_scaler.stddev = var > 1e-24 ? std::sqrt(var) : 1.0;
  for (Dataset* part : {&out.train, &out.test_visible}) {
    auto age = part->demographics.col(kAgeColumn);
    age = (age.array() - out.age_scaler.mean) / out.age_scaler.stddev;
  }
  return out;
}

SplitDataset filter_and_split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  auto filtered = filter_rare_events(data, spec.min_event_frequency);
  auto result = split(filtered.dataset, spec);
  result.event_index_map = std::move(filtered.event_index_map);
  return result;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t m = spec.num_patients;
  const std::size_t n = spec.num_events;
  const std::size_t r = spec.rank;
  if (m == 0 || n == 0 || r == 0 || r > std::min(m, n)) {
    throw ConfigError("synthetic generator needs 0 < rank <= min(patients, events)");
  }
  if (!(spec.target_density > 0.0 && spec.target_density < 0.5)) {
    throw ConfigError("synthetic density must lie in (0, 0.5)");
  }
  if (!(spec.observe_probability > 0.0 && spec.observe_probability <= 1.0)) {
    throw ConfigError("synthetic observe probability must lie in (0, 1]");
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Rng factor_rng(derive_seed(spec.seed, "synthetic.factors"));
  Matrix u(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(r));
  Matrix v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    u.data()[k] = normal(factor_rng);
  }
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    v.data()[k] = normal(factor_rng);
  }

  // Heavy-tailed (log-normal) per-event prevalence, rescaled to the target
  // mean inside [target/50, 0.5].
  Rng prevalence_rng(derive_seed(spec.seed, "synthetic.prevalence"));
  std::vector<double> prevalence(n);
  for (auto& p : prevalence) {
    p = std::exp(1.1 * normal(prevalence_rng));
  }
  const double lo = spec.target_density / 50.0;
  for (int pass = 0; pass < 20; ++pass) {
    const double mean = std::accumulate(prevalence.begin(), prevalence.end(), 0.0) / static_cast<double>(n);
    for (auto& p : prevalence) {
      p = std::clamp(p * spec.target_density / mean, lo, 0.5);
    }
  }

  // Event-major logits so each bisection scans contiguous memory.
  const Matrix logits = v * u.transpose();  // n x m
  std::vector<double> bias(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto row = logits.row(static_cast<Eigen::Index>(j));
    double lo_b = -60.0;
    double hi_b = 60.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo_b + hi_b);
      double mean = 0.0;
      for (Eigen::Index i = 0; i < row.size(); ++i) {
        mean += sigmoid(row[i] + mid);
      }
      mean /= static_cast<double>(m);
      (mean < prevalence[j] ? lo_b : hi_b) = mid;
    }
    bias[j] = 0.5 * (lo_b + hi_b);
  }

  SyntheticData out;
  Dataset& data = out.dataset;
  data.num_patients = m;
  data.num_events = n;
  Rng truth_rng(derive_seed(spec.seed, "synthetic.truth"));
  Rng observe_rng(derive_seed(spec.seed, "synthetic.observe"));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = sigmoid(logits(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) + bias[j]);
      if (uniform01(truth_rng) < p) {
        const Edge e{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
        out.ground_truth.push_back(e);
        if (uniform01(observe_rng) < spec.observe_probability) {
          data.positives.push_back(e);
        }
      }
    }
  }

  Rng demo_rng(derive_seed(spec.seed, "synthetic.demographics"));
  data.demographics.resize(static_cast<Eigen::Index>(m), kDemographicsDim);
  char buf[32];
  for (std::size_t i = 0; i < m; ++i) {
    const double driver = u(static_cast<Eigen::Index>(i), 0);
    const double age = 55.0 + 12.0 * (0.7 * driver + std::sqrt(1.0 - 0.49) * normal(demo_rng));
    const double sex = uniform01(demo_rng) < sigmoid(1.5 * driver) ? 1.0 : 0.0;
    data.demographics(static_cast<Eigen::Index>(i), kAgeColumn) = age;
    data.demographics(static_cast<Eigen::Index>(i), kSexColumn) = sex;
    std::snprintf(buf, sizeof(buf), "P%06zu", i);
    data.patient_ids.emplace_back(buf);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::snprintf(buf, sizeof(buf), "E%04zu", j);
    data.event_labels.emplace_back(buf);
    Eigen::Index dominant = 0;
    v.row(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff(&dominant);
    std::snprintf(buf, sizeof(buf), "C%ld", static_cast<long>(dominant));
    data.event_categories.emplace_back(buf);
  }
  return out;
}

std::vector<double> event_frequencies(const Dataset& train) {
  std::vector<double> freq(train.num_events, 0.0);
  if (train.num_patients == 0) {
    return freq;
  }
  const auto counts = train.event_counts();
  for (std::size_t j = 0; j < train.num_events; ++j) {
    freq[j] = static_cast<double>(counts[j]) / static_cast<double>(train.num_patients);
  }
  return freq;
}

void write_triplets(const fs::path& path, const Dataset& data) {
  write_edges(path, data.positives, data.patient_ids, data.event_labels);
}

void write_edges(const fs::path& path, const EdgeList& edges, const std::vector<std::string>& patient_ids,
                 const std::vector<std::string>& event_labels) {
  auto out = open_output(path);
  out << "patient_id,event_id\n";
  for (const auto& e : edges) {
    if (patient_ids.empty()) {
      out << e.patient;
    } else {
      out << patient_ids[e.patient];
    }
    out << ',';
    if (event_labels.empty()) {
      out << e.event;
    } else {
      out << event_labels[e.event];
    }
    out << '\n';
  }
}

void write_demographics(const fs::path& path, const Dataset& data) {
  auto out = open_output(path);
  out << "patient_id,age,sex\n";
  for (std::size_t i = 0; i < data.num_patients; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << (data.patient_ids.empty() ? std::to_string(i) : data.patient_ids[i]) << ','
        << format_double(data.demographics(row, kAgeColumn)) << ','
        << (data.demographics(row, kSexColumn) > 0.5 ? "M" : "F") << '\n';
  }
}

void write_events(const fs::path& path, const Dataset& data) {
  auto out = open_output(path);
  out << "index,event_id,category\n";
  for (std::size_t j = 0; j < data.num_events; ++j) {
    out << j << ',' << (data.event_labels.empty() ? std::to_string(j) : data.event_labels[j]) << ','
        << (data.event_categories.empty() ? "" : data.event_categories[j]) << '\n';
  }
}

namespace {

void save_patients(const fs::path& path, const Dataset& part, const std::vector<std::size_t>& source) {
  auto out = open_output(path);
  out << "index,patient_id,source_index,age_std,sex\n";
  for (std::size_t i = 0; i < part.num_patients; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << i << ',' << (part.patient_ids.empty() ? std::to_string(source[i]) : part.patient_ids[i]) << ','
        << source[i] << ',' << format_double(part.demographics(row, kAgeColumn)) << ','
        << format_double(part.demographics(row, kSexColumn)) << '\n';
  }
}

void save_index_edges(const fs::path& path, const EdgeList& edges) {
  auto out = open_output(path);
  out << "patient,event\n";
  for (const auto& e : edges) {
    out << e.patient << ',' << e.event << '\n';
  }
}

void load_patients(const fs::path& path, Dataset& part, std::vector<std::size_t>& source) {
  std::vector<std::array<double, 2>> demo;
  read_csv(path, 5, {"index", "patient_id", "source_index", "age_std", "sex"},
           [&](std::size_t line, const std::vector<std::string>& f) {
             if (parse_index(path, line, f[0]) != part.patient_ids.size()) {
               parse_error(path, line, "patient indices must be dense and ordered");
             }
             part.patient_ids.push_back(f[1]);
             source.push_back(parse_index(path, line, f[2]));
             demo.push_back({parse_number(path, line, f[3]), parse_number(path, line, f[4])});
           });
  part.num_patients = part.patient_ids.size();
  part.demographics.resize(static_cast<Eigen::Index>(part.num_patients), kDemographicsDim);
  for (std::size_t i = 0; i < demo.size(); ++i) {
    part.demographics(static_cast<Eigen::Index>(i), kAgeColumn) = demo[i][0];
    part.demographics(static_cast<Eigen::Index>(i), kSexColumn) = demo[i][1];
  }
}

EdgeList load_index_edges(const fs::path& path) {
  EdgeList edges;
  read_csv(path, 2, {"patient", "event"}, [&](std::size_t line, const std::vector<std::string>& f) {
    edges.push_back({static_cast<std::uint32_t>(parse_index(path, line, f[0])),
                     static_cast<std::uint32_t>(parse_index(path, line, f[1]))});
  });
  normalize_edges(edges);
  return edges;
}

}  // namespace

void save_split(const fs::path& dir, const SplitDataset& s, const SplitSpec& spec) {
  fs::create_directories(dir);
  write_events(dir / "events.csv", s.train);
  save_patients(dir / "train_patients.csv", s.train, s.train_patients);
  save_patients(dir / "test_patients.csv", s.test_visible, s.test_patients);
  save_index_edges(dir / "train_edges.csv", s.train.positives);
  save_index_edges(dir / "test_visible_edges.csv", s.test_visible.positives);
  save_index_edges(dir / "test_heldout_edges.csv", s.test_heldout);
  {
    auto out = open_output(dir / "event_map.csv");
    out << "source_index,index\n";
    for (std::size_t j = 0; j < s.event_index_map.size(); ++j) {
      out << j << ',' << s.event_index_map[j] << '\n';
    }
  }
  auto out = open_output(dir / "manifest.txt");
  out << "seed=" << spec.seed << '\n'
      << "train_fraction=" << format_double(spec.train_fraction) << '\n'
      << "test_mask_fraction=" << format_double(spec.test_mask_fraction) << '\n'
      << "min_event_frequency=" << format_double(spec.min_event_frequency) << '\n'
      << "source_events=" << s.event_index_map.size() << '\n'
      << "events=" << s.train.num_events << '\n'
      << "train_patients=" << s.train.num_patients << '\n'
      << "test_patients=" << s.test_visible.num_patients << '\n'
      << "train_positives=" << s.train.positives.size() << '\n'
      << "test_visible_positives=" << s.test_visible.positives.size() << '\n'
      << "test_heldout_positives=" << s.test_heldout.size() << '\n'
      << "train_density=" << format_double(s.train.density()) << '\n'
      << "age_mean=" << format_double(s.age_scaler.mean) << '\n'
      << "age_std=" << format_double(s.age_scaler.stddev) << '\n';
}

SplitDataset load_split(const fs::path& dir) {
  SplitDataset s;
  Dataset events_only;
  std::vector<std::string> labels;
  std::vector<std::string> categories;
  read_csv(dir / "events.csv", 3, {"index", "event_id", "category"},
           [&](std::size_t line, const std::vector<std::string>& f) {
             if (parse_index(dir / "events.csv", line, f[0]) != labels.size()) {
               parse_error(dir / "events.csv", line, "event indices must be dense and ordered");
             }
             labels.push_back(f[1]);
             categories.push_back(f[2]);
           });
  const bool any_category =
      std::any_of(categories.begin(), categories.end(), [](const std::string& c) { return !c.empty(); });
  if (!any_category) {
    categories.clear();
  }
  for (Dataset* part : {&s.train, &s.test_visible}) {
    part->num_events = labels.size();
    part->event_labels = labels;
    part->event_categories = categories;
  }
  load_patients(dir / "train_patients.csv", s.train, s.train_patients);
  load_patients(dir / "test_patients.csv", s.test_visible, s.test_patients);
  s.train.positives = load_index_edges(dir / "train_edges.csv");
  s.test_visible.positives = load_index_edges(dir / "test_visible_edges.csv");
  s.test_heldout = load_index_edges(dir / "test_heldout_edges.csv");
  s.train.validate();
  s.test_visible.validate();
  for (const auto& e : s.test_heldout) {
    if (e.patient >= s.test_visible.num_patients || e.event >= s.test_visible.num_events) {
      throw Error("held-out edge out of range in " + dir.string());
    }
  }
  const fs::path map_path = dir / "event_map.csv";
  read_csv(map_path, 2, {"source_index", "index"}, [&](std::size_t line, const std::vector<std::string>& f) {
    if (parse_index(map_path, line, f[0]) != s.event_index_map.size()) {
      parse_error(map_path, line, "event map must be dense and ordered");
    }
    s.event_index_map.push_back(static_cast<std::int64_t>(parse_number(map_path, line, f[1])));
  });
  std::ifstream manifest(dir / "manifest.txt");
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      continue;
    }
    const auto key = line.substr(0, eq);
    if (key == "age_mean") {
      s.age_scaler.mean = std::stod(line.substr(eq + 1));
    } else if (key == "age_std") {
      s.age_scaler.stddev = std::stod(line.substr(eq + 1));
    }
  }
  return s;
}

}  // namespace ehrgraph
