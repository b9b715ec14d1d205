#include "ehrgraph/config.hpp"

#include <fstream>
#include <set>

namespace ehrgraph {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError("config field '" + display() + "' must be an object");
    }
  }

  const json& required(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end()) {
      throw ConfigError("missing config field '" + qualified(key) + "'");
    }
    return *it;
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  double number(const std::string& key) {
    const auto& v = required(key);
    if (!v.is_number()) {
      throw ConfigError("config field '" + qualified(key) + "' must be a number");
    }
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key) {
    const auto& v = required(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("config field '" + qualified(key) + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key) {
    const auto& v = required(key);
    if (!v.is_boolean()) {
      throw ConfigError("config field '" + qualified(key) + "' must be true or false");
    }
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const auto& v = required(key);
    if (!v.is_string()) {
      throw ConfigError("config field '" + qualified(key) + "' must be a string");
    }
    return v.get<std::string>();
  }

  ObjectReader object(const std::string& key) { return ObjectReader(required(key), qualified(key)); }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("unknown config field '" + qualified(key) + "'");
      }
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

// Rethrows library validation errors so they carry ConfigError semantics.
template <class Fn>
void validated(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

void RunConfig::resolve_seeds() {
  split.seed = derive_seed(seed, "split");
  train.seed = derive_seed(seed, "train");
  data.synthetic.seed = derive_seed(seed, "synthetic");
}

void RunConfig::validate() const {
  validated([&] {
    split.validate();
    model.validate();
    train.validate();
    knn.validate();
  });
  if (data.kind == DataSource::Kind::synthetic) {
    const auto& s = data.synthetic;
    if (s.num_patients < 2 || s.num_events == 0 || s.rank == 0 || s.rank > std::min(s.num_patients, s.num_events)) {
      throw ConfigError("data.synthetic needs patients >= 2, events >= 1 and 1 <= rank <= min(patients, events)");
    }
    if (!(s.target_density > 0.0 && s.target_density < 0.5)) {
      throw ConfigError("data.synthetic.density must lie in (0, 0.5)");
    }
    if (!(s.observe_probability > 0.0 && s.observe_probability <= 1.0)) {
      throw ConfigError("data.synthetic.observe_probability must lie in (0, 1]");
    }
  }
}

RunConfig parse_run_config(const json& doc) {
  RunConfig c;
  ObjectReader root(doc, "");
  c.seed = root.count("seed");
  c.output_dir = root.string("output_dir");

  {
    auto data = root.object("data");
    const auto source = data.string("source");
    if (source == "synthetic") {
      c.data.kind = DataSource::Kind::synthetic;
      auto syn = data.object("synthetic");
      c.data.synthetic.num_patients = syn.count("patients");
      c.data.synthetic.num_events = syn.count("events");
      c.data.synthetic.rank = syn.count("rank");
      c.data.synthetic.target_density = syn.number("density");
      c.data.synthetic.observe_probability = syn.number("observe_probability");
      syn.finish();
    } else if (source == "files") {
      c.data.kind = DataSource::Kind::files;
      c.data.triplets = data.string("triplets");
      c.data.demographics = data.string("demographics");
    } else {
      throw ConfigError("config field 'data.source' must be 'synthetic' or 'files'");
    }
    data.finish();
  }
  {
    auto split = root.object("split");
    c.split.train_fraction = split.number("train_fraction");
    c.split.test_mask_fraction = split.number("test_mask_fraction");
    c.split.min_event_frequency = split.number("min_event_frequency");
    split.finish();
  }
  {
    auto model = root.object("model");
    c.model.embedding_dim = model.count("embedding_dim");
    c.model.num_layers = model.count("num_layers");
    c.model.scorer_hidden = model.count("scorer_hidden");
    c.model.layer_bias = model.boolean("layer_bias");
    validated([&] { c.model.embedding_init = parse_embedding_init(model.string("embedding_init")); });
    c.model.svd_power_iters = model.count("svd_power_iters");
    model.finish();
  }
  {
    auto train = root.object("train");
    c.train.learning_rate = train.number("learning_rate");
    c.train.mask_probability = train.number("mask_probability");
    c.train.epochs = train.count("epochs");
    c.train.adam_beta1 = train.number("adam_beta1");
    c.train.adam_beta2 = train.number("adam_beta2");
    c.train.adam_epsilon = train.number("adam_epsilon");
    if (const auto& clip = train.required("grad_clip"); !clip.is_null()) {
      c.train.grad_clip = train.number("grad_clip");
    }
    validated([&] { c.train.negative_sampler = parse_negative_sampler(train.string("negative_sampler")); });
    c.train.max_repair_sweeps = train.count("max_repair_sweeps");
    train.finish();
  }
  {
    auto knn = root.object("knn");
    c.knn.k_neighbors = knn.count("k_neighbors");
    validated([&] { c.knn.distance = parse_distance(knn.string("distance")); });
    knn.finish();
  }
  {
    auto runtime = root.object("runtime");
    c.runtime.workers = runtime.count("workers");
    c.runtime.deterministic = runtime.boolean("deterministic");
    runtime.finish();
  }
  root.finish();
  c.resolve_seeds();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json data;
  if (c.data.kind == DataSource::Kind::synthetic) {
    data = {{"source", "synthetic"},
            {"synthetic",
             {{"patients", c.data.synthetic.num_patients},
              {"events", c.data.synthetic.num_events},
              {"rank", c.data.synthetic.rank},
              {"density", c.data.synthetic.target_density},
              {"observe_probability", c.data.synthetic.observe_probability}}}};
  } else {
    data = {{"source", "files"}, {"triplets", c.data.triplets.string()}, {"demographics", c.data.demographics.string()}};
  }
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"data", data},
      {"split",
       {{"train_fraction", c.split.train_fraction},
        {"test_mask_fraction", c.split.test_mask_fraction},
        {"min_event_frequency", c.split.min_event_frequency}}},
      {"model",
       {{"embedding_dim", c.model.embedding_dim},
        {"num_layers", c.model.num_layers},
        {"scorer_hidden", c.model.scorer_hidden},
        {"layer_bias", c.model.layer_bias},
        {"embedding_init", to_string(c.model.embedding_init)},
        {"svd_power_iters", c.model.svd_power_iters}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"mask_probability", c.train.mask_probability},
        {"epochs", c.train.epochs},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"adam_epsilon", c.train.adam_epsilon},
        {"grad_clip", c.train.grad_clip ? json(*c.train.grad_clip) : json(nullptr)},
        {"negative_sampler", to_string(c.train.negative_sampler)},
        {"max_repair_sweeps", c.train.max_repair_sweeps}}},
      {"knn", {{"k_neighbors", c.knn.k_neighbors}, {"distance", to_string(c.knn.distance)}}},
      {"runtime", {{"workers", c.runtime.workers}, {"deterministic", c.runtime.deterministic}}},
  };
}

json read_config_document(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  // A run manifest carries the resolved config under "config".
  if (doc.is_object() && doc.contains("command") && doc.contains("config")) {
    doc = doc["config"];
  }
  apply_overrides(doc, overrides);
  return doc;
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + item + "' must look like key.path=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json::json_pointer pointer;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      pointer /= key.substr(start, dot - start);
      if (dot == std::string::npos) {
        break;
      }
      start = dot + 1;
    }
    if (!doc.contains(pointer.parent_pointer()) || !doc[pointer.parent_pointer()].is_object()) {
      throw ConfigError("override '" + key + "' does not name a config section");
    }
    doc[pointer] = value;
  }
}

json default_config_document() {
  RunConfig c;
  c.seed = 1;
  c.data.kind = DataSource::Kind::synthetic;
  return to_json(c);
}

}  // namespace ehrgraph
