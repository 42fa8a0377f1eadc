#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lofi/emergence.hpp"
#include "lofi/errors.hpp"
#include "lofi/gd.hpp"
#include "lofi/importance.hpp"
#include "lofi/lfmt.hpp"
#include "lofi/model_io.hpp"
#include "lofi/synth.hpp"

namespace lofi::cli {
namespace {

const std::vector<KeySpec> kCommon{
    {"seed", "0", "global seed"},
    {"report", "", "report path (default: next to --out, or stdout)"},
};

const std::vector<KeySpec> kModelKeys{
    {"depth", "", "number of LoFi layers (default: length of --widths)"},
    {"widths", "256", "comma-separated random-feature widths"},
    {"ranks", "8", "comma-separated retained directions per layer"},
    {"activation", "relu", "lift activation, one or one per layer"},
    {"include_linear", "false", "prepend the first-moment direction in every layer"},
    {"kernel", "none", "none | relu_arccos | monte_carlo (kernel LoFi)"},
    {"kernel_samples", "4096", "Monte-Carlo directions for kernel=monte_carlo"},
    {"kernel_activation", "relu", "activation for kernel=monte_carlo"},
    {"normalize_features", "false", "kernel LoFi: divide features by their RMS row norm"},
    {"ridge_grid", "default", "lo:hi:count or comma list of readout penalties"},
    {"folds", "5", "cross-validation folds"},
    {"task", "regression", "regression | binary (labels +-1)"},
    {"image", "", "input grid h,w,c for convolutional layers"},
    {"conv_layers", "0", "leading layers that are convolutional"},
    {"conv_kernel", "3", "convolution patch size (odd)"},
    {"conv_pool", "true", "2x2 max pooling after each convolutional layer"},
    {"conv_l2", "true", "L2-normalize convolutional features per location"},
};

std::vector<KeySpec> join(std::initializer_list<std::vector<KeySpec>> parts) {
  std::vector<KeySpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::map<std::string, std::vector<KeySpec>>& all_keys() {
  static const std::map<std::string, std::vector<KeySpec>> keys{
      {"fit", join({kCommon, kModelKeys,
                    {{"data", "", "training dataset (LFMT or CSV, labels in the last column)"},
                     {"test", "", "optional test dataset"},
                     {"out", "", "model output path"},
                     {"full_spectra", "true", "report the full spectrum of every dense layer"}}})},
      {"predict", join({kCommon,
                        {{"model", "", "saved model"},
                         {"data", "", "dataset to predict"},
                         {"out", "", "predictions output (LFMT column)"}}})},
      {"spectrum", join({kCommon, kModelKeys,
                         {{"data", "", "dataset"},
                          {"model", "", "saved model (otherwise one is fitted from the flags)"},
                          {"out", "", "report path"},
                          {"layer", "0", "representation index, 0 = raw inputs"},
                          {"top_k", "5", "number of leading eigenvalues to flag"},
                          {"importance", "false", "add the aggregate input-importance map"},
                          {"smooth", "false", "low-pass filter the importance map"},
                          {"grid", "", "h,w,c of the input grid for smoothing"},
                          {"f0", "0.15", "low-pass cutoff"},
                          {"smooth_exponent", "3", "low-pass exponent"}}})},
      {"emergence", join({kCommon, kModelKeys,
                          {{"data", "", "dataset"},
                           {"model", "", "saved model (otherwise one is fitted from the flags)"},
                           {"out", "", "report path"},
                           {"k_max", "5", "directions per layer"}}})},
      {"synth", join({kCommon,
                      {{"out", "", "training data output (LFMT)"},
                       {"test_out", "", "test data output (LFMT)"},
                       {"dim", "40", "input dimension d"},
                       {"epsilon", "0.5", "latent exponent: d1 = floor(d^epsilon)"},
                       {"alpha", "3", "sample exponent: n = floor(d^alpha)"},
                       {"n", "", "training size (overrides alpha)"},
                       {"link", "tanh", "tanh | identity"},
                       {"n_test", "4000", "test size"},
                       {"run", "false", "fit and evaluate the random-feature estimator"},
                       {"p1", "4096", "first-layer width"},
                       {"p2", "256", "second-layer width"},
                       {"rank", "0", "retained directions (0 = d1)"},
                       {"batch_norm", "true", "standardize the recovered latents"},
                       {"poly_degree", "5", "readout polynomial degree"},
                       {"spectrum_size", "0", "eigenvalues of C1 to keep (0 = all)"}}})},
      {"gdcheck", join({kCommon,
                        {{"out", "", "report path"},
                         {"dims", "20,16,12,1", "network dimensions"},
                         {"alphas", "1e-2,5e-3,2.5e-3", "initialization scales"},
                         {"ratio", "0.5", "scale ratio between consecutive layers"},
                         {"samples", "500", "antithetic sample size"},
                         {"seeds", "5", "seeds averaged"},
                         {"layer", "1", "trained layer"},
                         {"eta", "1", "step size"},
                         {"readout_threshold", "0.02", "degenerate effective-readout cutoff"}}})},
  };
  return keys;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw InvalidInput("'" + key + "' expects a number, got '" + s + "'");
  return v;
}

Index to_index(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw InvalidInput("'" + key + "' expects an integer, got '" + s + "'");
  return static_cast<Index>(v);
}

// ---------------------------------------------------------------------------

double mse(const Vector& pred, const Vector& y) {
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

double zero_one(const Vector& pred, const Vector& y) {
  Index wrong = 0;
  for (Index i = 0; i < y.size(); ++i) wrong += ((pred(i) >= 0.0 ? 1.0 : -1.0) != y(i));
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

Task parse_task(const RunConfig& c) {
  const std::string& t = c.str("task");
  if (t == "regression") return Task::regression;
  if (t == "binary") return Task::binary;
  throw InvalidInput("unknown task '" + t + "'");
}

Dataset load_checked(const RunConfig& c, const std::string& key) {
  if (c.str(key).empty()) throw InvalidInput("--" + key + " is required");
  return load_dataset(c.str(key));
}

void check_binary(const Vector& y) {
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != 1.0 && y(i) != -1.0) throw InvalidInput("binary task needs labels in {-1, +1}");
  }
}

template <class T>
std::vector<T> broadcast(std::vector<T> values, Index depth, const std::string& key) {
  if (depth == 0) return {};
  if (values.size() == 1) values.assign(static_cast<std::size_t>(depth), values.front());
  if (static_cast<Index>(values.size()) != depth) {
    throw InvalidInput("--" + key + " needs 1 or " + std::to_string(depth) + " entries");
  }
  return values;
}

Index model_depth(const RunConfig& c) {
  if (!c.str("depth").empty()) {
    const Index d = c.integer("depth");
    if (d < 0) throw InvalidInput("depth must be non-negative");
    return d;
  }
  return static_cast<Index>(std::max(c.index_list("widths").size(), c.index_list("ranks").size()));
}

std::optional<ImageShape> image_shape(const RunConfig& c) {
  if (c.str("image").empty()) return std::nullopt;
  const auto v = c.index_list("image");
  if (v.size() != 3) throw InvalidInput("--image expects h,w,c");
  return ImageShape{v[0], v[1], v[2]};
}

// Fits the model described by the model keys on `train` (raw labels).
AnyModel fit_from_config(const RunConfig& c, const Dataset& raw) {
  const Task task = parse_task(c);
  if (task == Task::binary) check_binary(raw.y);
  const double offset = raw.y.mean();
  const Dataset train = center_labels(raw);
  const Index depth = model_depth(c);
  const auto ranks = broadcast(c.index_list("ranks"), depth, "ranks");
  const std::string grid_text = c.str("ridge_grid");
  Rng rng(c.seed());

  if (c.str("kernel") != "none") {
    KernelModelConfig kc;
    kc.ranks = ranks;
    kc.kernel.kind = parse_kernel_kind(c.str("kernel"));
    kc.kernel.activation = parse_activation(c.str("kernel_activation"));
    kc.kernel.samples = c.integer("kernel_samples");
    kc.kernel.seed = c.seed();
    kc.normalize_features = c.flag("normalize_features");
    if (grid_text != "default") kc.lambda_grid = parse_grid(grid_text);
    kc.folds = c.integer("folds");
    KernelModel m = fit_kernel_model(train, kc, rng);
    m.label_offset = offset;
    return m;
  }

  const auto widths = broadcast(c.index_list("widths"), depth, "widths");
  const auto acts = broadcast(split(c.str("activation"), ','), depth, "activation");
  const Index conv_layers = c.integer("conv_layers");
  if (conv_layers < 0 || conv_layers > depth) throw InvalidInput("conv_layers out of range");
  std::vector<LayerSpec> specs(static_cast<std::size_t>(depth));
  for (Index l = 0; l < depth; ++l) {
    LayerSpec& s = specs[static_cast<std::size_t>(l)];
    s.width = widths[l];
    s.rank = ranks[l];
    s.activation = parse_activation(acts[l]);
    s.include_linear = c.flag("include_linear");
    if (l < conv_layers) {
      s.kind = LayerKind::conv;
      s.conv = {c.integer("conv_kernel"), c.flag("conv_pool"), c.flag("conv_l2")};
    }
  }
  ReadoutConfig rc;
  if (grid_text != "default") rc.lambda_grid = parse_grid(grid_text);
  rc.folds = c.integer("folds");
  LofiModel m = fit_model(train, specs, rc, rng, image_shape(c), task);
  m.label_offset = offset;
  return m;
}

AnyModel model_for(const RunConfig& c, const Dataset& data) {
  if (!c.str("model").empty()) return load_model(c.str("model"));
  return fit_from_config(c, data);
}

const LofiModel& neural(const AnyModel& m, const std::string& what) {
  if (!std::holds_alternative<LofiModel>(m)) throw InvalidInput(what + " needs a neural LoFi model");
  return std::get<LofiModel>(m);
}

constexpr Index kMaxDenseSpectrum = 4096;

Matrix layer_representation(const LofiModel& m, const Matrix& x, Index layer) {
  if (layer < 0 || layer > static_cast<Index>(m.layers.size())) {
    throw InvalidInput("layer " + std::to_string(layer) + " out of range 0.." +
                       std::to_string(m.layers.size()));
  }
  Matrix z = represent(m, x, layer);
  if (z.cols() > kMaxDenseSpectrum) {
    throw InvalidInput("representation of width " + std::to_string(z.cols()) +
                       " is too wide for a dense spectrum");
  }
  return z;
}

Json retained_eigenvalues(const Vector& values) {
  Json out = Json::array();
  for (Index i = 0; i < values.size(); ++i) {
    if (!std::isnan(values(i))) out.push_back(finite(values(i), "eigenvalue"));
  }
  return out;
}

void add_metrics(Json& metrics, const std::string& prefix, const AnyModel& model,
                 const Dataset& data, bool binary) {
  const Vector pred = predict(model, data.x);
  metrics[prefix + "_mse"] = finite(mse(pred, data.y), "mse");
  if (binary) metrics[prefix + "_zero_one"] = zero_one(pred, data.y);
  metrics[prefix + "_samples"] = data.size();
}

// ---------------------------------------------------------------------------

Report cmd_fit(const RunConfig& c) {
  Report report("fit", c.seed(), c.values);
  const Dataset train = load_checked(c, "data");
  const AnyModel model = fit_from_config(c, train);
  const bool binary = parse_task(c) == Task::binary;
  add_metrics(report.metrics(), "train", model, train, binary);
  if (!c.str("test").empty()) add_metrics(report.metrics(), "test", model, load_dataset(c.str("test")), binary);

  Json layers = Json::array();
  if (const auto* m = std::get_if<LofiModel>(&model)) {
    report.metrics()["readout_lambda"] = m->lambda;
    report.metrics()["label_offset"] = finite(m->label_offset, "label offset");
    const Vector yc = train.y.array() - m->label_offset;
    for (std::size_t l = 0; l < m->layers.size(); ++l) {
      const FittedLayer& fl = m->layers[l];
      Json j;
      j["index"] = l;
      j["kind"] = fl.kind == LayerKind::conv ? "conv" : "dense";
      j["activation"] = to_string(fl.activation);
      j["width"] = fl.width();
      j["directions"] = fl.directions();
      j["has_linear"] = fl.has_linear;
      j["rank_deficient"] = fl.rank_deficient;
      j["rms_norm"] = finite(fl.rms_norm, "rms norm");
      j["eigenvalues"] = retained_eigenvalues(fl.eigenvalues);
      if (fl.rank_deficient) report.warn("layer " + std::to_string(l) + " is rank deficient");
      if (c.flag("full_spectra") && fl.kind == LayerKind::dense) {
        const Matrix z = represent(*m, train.x, static_cast<Index>(l));
        if (z.cols() <= kMaxDenseSpectrum) {
          j["spectrum"] = to_json(sym_eigenvalues(moment_operator(z, yc)), "spectrum");
        } else {
          report.warn("layer " + std::to_string(l) + " too wide for a full spectrum");
        }
      }
      layers.push_back(j);
    }
  } else {
    const auto& km = std::get<KernelModel>(model);
    report.metrics()["readout_lambda"] = km.lambda;
    report.metrics()["label_offset"] = finite(km.label_offset, "label offset");
    for (std::size_t l = 0; l < km.layers.size(); ++l) {
      const KernelLayer& kl = km.layers[l];
      Json j;
      j["index"] = l;
      j["kind"] = "kernel";
      j["directions"] = kl.directions();
      j["rank_deficient"] = kl.rank_deficient;
      j["rms_norm"] = finite(kl.rms_norm, "rms norm");
      j["eigenvalues"] = retained_eigenvalues(kl.eigenvalues);
      layers.push_back(j);
    }
  }
  report.section("layers") = layers;
  if (!c.str("out").empty()) {
    std::visit([&](const auto& m) { save_model(m, c.str("out")); }, model);
    report.section("artifacts")["model"] = c.str("out");
  }
  return report;
}

Report cmd_predict(const RunConfig& c) {
  Report report("predict", c.seed(), c.values);
  if (c.str("model").empty()) throw InvalidInput("--model is required");
  const AnyModel model = load_model(c.str("model"));
  const Dataset data = load_checked(c, "data");
  const Vector pred = predict(model, data.x);
  const auto* m = std::get_if<LofiModel>(&model);
  report.metrics()["mse"] = finite(mse(pred, data.y), "mse");
  if (m && m->task == Task::binary) report.metrics()["zero_one"] = zero_one(pred, data.y);
  report.metrics()["samples"] = data.size();
  if (!c.str("out").empty()) {
    save_lfmt(pred, c.str("out"));
    report.section("artifacts")["predictions"] = c.str("out");
  }
  return report;
}

Report cmd_spectrum(const RunConfig& c) {
  Report report("spectrum", c.seed(), c.values);
  const Dataset data = load_checked(c, "data");
  const AnyModel any = model_for(c, data);
  const LofiModel& m = neural(any, "spectrum");
  const Index layer = c.integer("layer");
  const Matrix z = layer_representation(m, data.x, layer);
  const Vector yc = data.y.array() - m.label_offset;
  const Vector spectrum = sym_eigenvalues(moment_operator(z, yc));

  Index top_k = c.integer("top_k");
  if (top_k < 0) throw InvalidInput("top_k must be non-negative");
  if (top_k > spectrum.size()) {
    report.warn("top_k " + std::to_string(top_k) + " clipped to dimension " +
                std::to_string(spectrum.size()));
    top_k = spectrum.size();
  }
  Json& s = report.section("spectrum");
  s["layer"] = layer;
  s["dim"] = spectrum.size();
  s["eigenvalues"] = to_json(spectrum, "spectrum");
  s["top_k"] = top_k;
  s["top_indices"] = Json::array();
  for (Index i = 0; i < top_k; ++i) s["top_indices"].push_back(i);
  s["top_values"] = to_json(Vector(spectrum.head(top_k)), "spectrum");

  if (c.flag("importance")) {
    const Vector raw = aggregate_importance(m, data.x, layer);
    Json& imp = report.section("importance");
    imp["layer"] = layer;
    imp["raw"] = to_json(raw, "importance");
    if (c.flag("smooth")) {
      Grid grid;
      if (!c.str("grid").empty()) {
        const auto g = c.index_list("grid");
        if (g.size() != 3) throw InvalidInput("--grid expects h,w,c");
        grid = {g[0], g[1], g[2]};
      } else if (m.input_shape) {
        grid = {m.input_shape->height, m.input_shape->width, m.input_shape->channels};
      } else {
        throw InvalidInput("smoothing needs grid-shaped inputs: pass --grid h,w,c");
      }
      imp["smoothed"] =
          to_json(low_pass_smooth(raw, grid, c.number("f0"), c.number("smooth_exponent")),
                  "importance");
    }
  }
  return report;
}

Report cmd_emergence(const RunConfig& c) {
  Report report("emergence", c.seed(), c.values);
  const Dataset data = load_checked(c, "data");
  const AnyModel any = model_for(c, data);
  const LofiModel& m = neural(any, "emergence");
  const Index k_max = c.integer("k_max");
  if (k_max < 1) throw InvalidInput("k_max must be positive");
  const Vector yc = data.y.array() - m.label_offset;
  const Index last = std::max<Index>(0, static_cast<Index>(m.layers.size()) - 1);

  Json layers = Json::array();
  for (Index l = 0; l <= last; ++l) {
    const Matrix z = layer_representation(m, data.x, l);
    const Matrix sigma = z.transpose() * z / static_cast<double>(z.rows());
    const Index k = std::min(k_max, z.cols());
    if (k < k_max) report.warn("k_max clipped to " + std::to_string(k) + " at layer " + std::to_string(l));
    const EmergenceReport e = predict_thresholds(moment_operator(z, yc), sigma, k);
    Json j;
    j["layer"] = l;
    j["rho"] = to_json(e.rho, "rho");
    j["r_star"] = to_json(e.r_star, "r_star");
    j["d_eff"] = to_json(e.d_eff, "d_eff");
    j["n_threshold"] = Json::array();
    j["unresolved"] = Json::array();
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e.unresolved[i] || !std::isfinite(e.n_threshold[i])) {
        j["n_threshold"].push_back(nullptr);
      } else {
        j["n_threshold"].push_back(e.n_threshold[i]);
      }
      j["unresolved"].push_back(static_cast<bool>(e.unresolved[i]));
    }
    layers.push_back(j);
  }
  report.metrics()["samples"] = data.size();
  report.section("emergence") = layers;
  return report;
}

Report cmd_synth(const RunConfig& c) {
  Report report("synth", c.seed(), c.values);
  const Index d = c.integer("dim");
  const Link link = parse_link(c.str("link"));
  const Index n = c.str("n").empty() ? synth_sample_size(d, c.number("alpha")) : c.integer("n");

  // Same stream layout as run_synth_experiment, so --run reproduces it.
  const Rng root(c.seed());
  Rng teacher_rng = root.fork(0), train_rng = root.fork(1), test_rng = root.fork(2),
      fit_rng = root.fork(3);
  const HierTeacher teacher = gen_teacher(d, c.number("epsilon"), link, teacher_rng);
  const SynthSample train = sample_synth(teacher, n, train_rng);
  const SynthSample test = sample_synth(teacher, c.integer("n_test"), test_rng);

  Json& t = report.section("teacher");
  t["d"] = d;
  t["d1"] = teacher.d1;
  t["hermite_dim"] = hermite2_dim(d);
  t["n_train"] = n;
  t["n_test"] = test.data.size();

  if (!c.str("out").empty()) {
    save_dataset(train.data, c.str("out"));
    report.section("artifacts")["train"] = c.str("out");
  }
  if (!c.str("test_out").empty()) {
    save_dataset(test.data, c.str("test_out"));
    report.section("artifacts")["test"] = c.str("test_out");
  }
  if (c.flag("run")) {
    RfConfig rf;
    rf.p1 = c.integer("p1");
    rf.p2 = c.integer("p2");
    rf.rank = c.integer("rank");
    rf.batch_norm = c.flag("batch_norm");
    rf.poly_degree = static_cast<int>(c.integer("poly_degree"));
    rf.spectrum_size = c.integer("spectrum_size");
    if (rf.p1 < hermite2_dim(d)) report.warn("p1 is below the degree-2 Hermite dimension");
    const Index rank = rf.rank > 0 ? rf.rank : teacher.d1;
    const RfEstimator est = fit_rf_estimator(train, rf, rank, fit_rng);
    const RfMetrics r = evaluate_rf(est, rf, test, rank);
    report.metrics()["test_mse"] = finite(r.test_mse, "test mse");
    report.metrics()["label_variance"] = finite(r.label_variance, "label variance");
    report.metrics()["overlap"] = finite(r.overlap, "overlap");
    report.metrics()["gap_ratio"] = finite(r.gap_ratio, "gap ratio");
    report.section("spectrum")["eigenvalues"] = to_json(r.spectrum, "spectrum");
    report.section("spectrum")["top_k"] = rank;
  }
  return report;
}

Report cmd_gdcheck(const RunConfig& c) {
  Report report("gdcheck", c.seed(), c.values);
  GdScalingConfig g;
  g.dims = c.index_list("dims");
  g.alphas = c.number_list("alphas");
  g.ratio = c.number("ratio");
  g.samples = c.integer("samples");
  g.seeds = c.integer("seeds");
  g.layer = c.integer("layer");
  g.eta = c.number("eta");
  g.readout_threshold = c.number("readout_threshold");
  const GdScalingReport r = gd_scaling_experiment(g, c.seed());
  report.metrics()["alphas"] = to_json(r.alphas, "alpha");
  report.metrics()["mean_relative_errors"] = to_json(r.mean_errors, "error");
  report.metrics()["error_ratios"] = to_json(r.error_ratios, "ratio");
  report.metrics()["ratio_band"] = Json::array({g.ratio_lo, g.ratio_hi});
  report.metrics()["neurons"] = r.neurons;
  report.metrics()["degenerate_neurons"] = r.degenerate;
  report.metrics()["pass"] = r.pass;
  return report;
}

}  // namespace

const std::vector<KeySpec>& verb_keys(const std::string& verb) {
  const auto it = all_keys().find(verb);
  if (it == all_keys().end()) throw InvalidInput("unknown command '" + verb + "'");
  return it->second;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values.find(key);
  if (it == values.end()) throw InvalidInput("unknown key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const { return to_double(str(key), key); }

Index RunConfig::integer(const std::string& key) const { return to_index(str(key), key); }

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("'" + key + "' expects true or false, got '" + v + "'");
}

std::uint64_t RunConfig::seed() const {
  const std::string& s = str("seed");
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s.front() == '-') throw InvalidInput("seed must be a non-negative integer");
  return v;
}

std::vector<Index> RunConfig::index_list(const std::string& key) const {
  std::vector<Index> out;
  for (const auto& item : split(str(key), ',')) out.push_back(to_index(item, key));
  return out;
}

std::vector<double> RunConfig::number_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split(str(key), ',')) out.push_back(to_double(item, key));
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw InvalidInput("ridge grid expects lo:hi:count");
    return log_grid(to_double(parts[0], "ridge_grid"), to_double(parts[1], "ridge_grid"),
                    to_index(parts[2], "ridge_grid"));
  }
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(item, "ridge_grid"));
  if (out.empty()) throw InvalidInput("empty ridge grid");
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::map<std::string, std::string> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("config") || !doc["config"].is_object()) {
      throw InvalidInput(path.string() + " is not a report with a config section");
    }
    for (const auto& [k, v] : doc["config"].items()) {
      if (!v.is_string()) throw InvalidInput("report config values must be strings");
      if (k == "report") continue;  // a rerun should not overwrite the source report
      out[k] = v.get<std::string>();
    }
    return out;
  }

  std::istringstream lines(text);
  std::string line;
  int number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig resolve_config(const std::string& verb,
                         const std::optional<std::filesystem::path>& config_file,
                         const std::map<std::string, std::string>& overrides) {
  RunConfig c;
  c.verb = verb;
  for (const KeySpec& k : verb_keys(verb)) c.values[k.key] = k.default_value;
  auto apply = [&](const std::map<std::string, std::string>& src, const std::string& origin) {
    for (const auto& [k, v] : src) {
      if (!c.values.count(k)) throw InvalidInput("unknown key '" + k + "' in " + origin);
      c.values[k] = v;
    }
  };
  if (config_file) apply(read_config_file(*config_file), config_file->string());
  apply(overrides, "flags");
  return c;
}

std::filesystem::path report_path(const RunConfig& c) {
  if (!c.str("report").empty()) return c.str("report");
  const std::string& out = c.str("out");
  if (out.empty()) return {};
  if (c.verb == "fit" || c.verb == "predict" || c.verb == "synth") return out + ".report";
  return out;
}

Report run_command(const RunConfig& c) {
  Report report = [&] {
    if (c.verb == "fit") return cmd_fit(c);
    if (c.verb == "predict") return cmd_predict(c);
    if (c.verb == "spectrum") return cmd_spectrum(c);
    if (c.verb == "emergence") return cmd_emergence(c);
    if (c.verb == "synth") return cmd_synth(c);
    if (c.verb == "gdcheck") return cmd_gdcheck(c);
    throw InvalidInput("unknown command '" + c.verb + "'");
  }();
  report.finish();
  return report;
}

}  // namespace lofi::cli
