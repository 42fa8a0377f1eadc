#include "lofi/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "lofi/errors.hpp"
#include "lofi/lfmt.hpp"

namespace lofi {
namespace {

constexpr const char* kMagicLine = "LOFI-MODEL 1";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class Writer {
 public:
  explicit Writer(const std::string& type) { text_ << kMagicLine << "\ntype " << type << "\n"; }

  std::ostringstream& line() { return text_; }

  void block(const std::string& name, const Matrix& m) {
    text_ << "block " << name << ' ' << blocks_.size() << ' ' << m.rows() << ' ' << m.cols()
          << "\n";
    blocks_ += encode_lfmt(m);
  }

  std::string finish() const { return text_.str() + "end\n" + blocks_; }

 private:
  std::ostringstream text_;
  std::string blocks_;
};

struct Manifest {
  std::string type;
  std::multimap<std::string, std::vector<std::string>> entries;
  std::map<std::string, Matrix> blocks;

  const std::vector<std::string>& get(const std::string& key, std::size_t count) const {
    const auto it = entries.find(key);
    if (it == entries.end()) throw FormatError("manifest lacks '" + key + "'", 0);
    if (it->second.size() != count) throw FormatError("manifest entry '" + key + "' malformed", 0);
    return it->second;
  }

  const Matrix& block(const std::string& name) const {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw FormatError("missing block '" + name + "'", 0);
    return it->second;
  }
};

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad number '" + s + "'", 0);
  return v;
}

long long parse_int(const std::string& s) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad integer '" + s + "'", 0);
  return v;
}

bool parse_flag(const std::string& s) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw FormatError("bad flag '" + s + "'", 0);
}

Manifest parse_manifest(const std::string& bytes) {
  Manifest m;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("manifest not terminated", pos);
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  if (next_line() != kMagicLine) throw FormatError("not a LOFI-MODEL v1 file", 0);
  struct Pending {
    std::string name;
    std::uint64_t offset, rows, cols;
  };
  std::vector<Pending> pending;
  for (;;) {
    const std::size_t line_start = pos;
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream in(line);
    std::string key;
    in >> key;
    std::vector<std::string> values;
    for (std::string v; in >> v;) values.push_back(v);
    if (key == "type" && values.size() == 1) {
      m.type = values[0];
    } else if (key == "block") {
      if (values.size() != 4) throw FormatError("malformed block line", line_start);
      pending.push_back({values[0], static_cast<std::uint64_t>(parse_int(values[1])),
                         static_cast<std::uint64_t>(parse_int(values[2])),
                         static_cast<std::uint64_t>(parse_int(values[3]))});
    } else if (!key.empty()) {
      m.entries.emplace(key, std::move(values));
    }
  }
  const std::size_t base = pos;
  for (const Pending& p : pending) {
    if (base + p.offset > bytes.size()) throw FormatError("block offset past end of file", base);
    std::istringstream in(bytes.substr(base + p.offset));
    Matrix mat = read_lfmt(in, base + p.offset);
    if (static_cast<std::uint64_t>(mat.rows()) != p.rows ||
        static_cast<std::uint64_t>(mat.cols()) != p.cols) {
      throw FormatError("block '" + p.name + "' shape differs from the manifest", base + p.offset);
    }
    m.blocks.emplace(p.name, std::move(mat));
  }
  return m;
}

Vector as_vector(const Matrix& m, const std::string& name) {
  if (m.cols() != 1) throw FormatError("block '" + name + "' is not a column", 0);
  return m.col(0);
}

std::string layer_key(Index i) { return "layer" + std::to_string(i); }

LofiModel decode_neural(const Manifest& m) {
  LofiModel model;
  const std::string task = m.get("task", 1)[0];
  if (task == "regression") {
    model.task = Task::regression;
  } else if (task == "binary") {
    model.task = Task::binary;
  } else {
    throw FormatError("unknown task '" + task + "'", 0);
  }
  model.input_dim = parse_int(m.get("input_dim", 1)[0]);
  const auto shape_it = m.entries.find("input_shape");
  if (shape_it != m.entries.end()) {
    if (shape_it->second.size() != 3) throw FormatError("malformed input_shape", 0);
    model.input_shape = ImageShape{parse_int(shape_it->second[0]), parse_int(shape_it->second[1]),
                                   parse_int(shape_it->second[2])};
  }
  model.lambda = parse_double(m.get("lambda", 1)[0]);
  model.label_offset = parse_double(m.get("label_offset", 1)[0]);
  const Index layers = parse_int(m.get("layers", 1)[0]);
  for (Index i = 0; i < layers; ++i) {
    const std::string key = layer_key(i);
    const auto& v = m.get(key, 8);
    FittedLayer fl;
    if (v[0] == "dense") {
      fl.kind = LayerKind::dense;
    } else if (v[0] == "conv") {
      fl.kind = LayerKind::conv;
    } else {
      throw FormatError("unknown layer kind '" + v[0] + "'", 0);
    }
    try {
      fl.activation = parse_activation(v[1]);
    } catch (const InvalidInput&) {
      throw FormatError("unknown activation '" + v[1] + "'", 0);
    }
    fl.has_linear = parse_flag(v[2]);
    fl.rank_deficient = parse_flag(v[3]);
    fl.rms_norm = parse_double(v[4]);
    fl.conv.kernel_size = parse_int(v[5]);
    fl.conv.max_pool = parse_flag(v[6]);
    fl.conv.l2_normalize = parse_flag(v[7]);
    fl.projection = m.block(key + ".projection");
    fl.eigenvalues = as_vector(m.block(key + ".eigenvalues"), key + ".eigenvalues");
    fl.lift = m.block(key + ".lift");
    model.layers.push_back(std::move(fl));
  }
  model.readout = as_vector(m.block("readout"), "readout");
  return model;
}

KernelModel decode_kernel(const Manifest& m) {
  KernelModel model;
  try {
    model.kernel.kind = parse_kernel_kind(m.get("kernel", 1)[0]);
    model.kernel.activation = parse_activation(m.get("kernel_activation", 1)[0]);
  } catch (const InvalidInput& e) {
    throw FormatError(e.what(), 0);
  }
  model.kernel.samples = parse_int(m.get("kernel_samples", 1)[0]);
  model.kernel.seed = std::strtoull(m.get("kernel_seed", 1)[0].c_str(), nullptr, 10);
  model.normalize_features = parse_flag(m.get("normalize_features", 1)[0]);
  model.lambda = parse_double(m.get("lambda", 1)[0]);
  model.label_offset = parse_double(m.get("label_offset", 1)[0]);
  model.anchors = m.block("anchors");
  const Index layers = parse_int(m.get("layers", 1)[0]);
  for (Index i = 0; i < layers; ++i) {
    const std::string key = layer_key(i);
    const auto& v = m.get(key, 2);
    KernelLayer kl;
    kl.rms_norm = parse_double(v[0]);
    kl.rank_deficient = parse_flag(v[1]);
    kl.alpha = m.block(key + ".alpha");
    kl.beta = m.block(key + ".beta");
    kl.eigenvalues = as_vector(m.block(key + ".eigenvalues"), key + ".eigenvalues");
    kl.features = m.block(key + ".features");
    model.layers.push_back(std::move(kl));
  }
  model.coefficients = as_vector(m.block("coefficients"), "coefficients");
  return model;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << bytes;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string encode_model(const LofiModel& model) {
  Writer w("neural");
  w.line() << "task " << (model.task == Task::binary ? "binary" : "regression") << "\n";
  w.line() << "input_dim " << model.input_dim << "\n";
  if (model.input_shape) {
    w.line() << "input_shape " << model.input_shape->height << ' ' << model.input_shape->width
             << ' ' << model.input_shape->channels << "\n";
  }
  w.line() << "lambda " << hex(model.lambda) << "\n";
  w.line() << "label_offset " << hex(model.label_offset) << "\n";
  w.line() << "layers " << model.layers.size() << "\n";
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const FittedLayer& fl = model.layers[i];
    w.line() << layer_key(static_cast<Index>(i)) << ' '
             << (fl.kind == LayerKind::conv ? "conv" : "dense") << ' ' << to_string(fl.activation)
             << ' ' << fl.has_linear << ' ' << fl.rank_deficient << ' ' << hex(fl.rms_norm) << ' '
             << fl.conv.kernel_size << ' ' << fl.conv.max_pool << ' ' << fl.conv.l2_normalize
             << "\n";
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const FittedLayer& fl = model.layers[i];
    const std::string key = layer_key(static_cast<Index>(i));
    w.block(key + ".projection", fl.projection);
    w.block(key + ".eigenvalues", fl.eigenvalues);
    w.block(key + ".lift", fl.lift);
  }
  w.block("readout", model.readout);
  return w.finish();
}

std::string encode_model(const KernelModel& model) {
  Writer w("kernel");
  w.line() << "kernel " << to_string(model.kernel.kind) << "\n";
  w.line() << "kernel_activation " << to_string(model.kernel.activation) << "\n";
  w.line() << "kernel_samples " << model.kernel.samples << "\n";
  w.line() << "kernel_seed " << model.kernel.seed << "\n";
  w.line() << "normalize_features " << model.normalize_features << "\n";
  w.line() << "lambda " << hex(model.lambda) << "\n";
  w.line() << "label_offset " << hex(model.label_offset) << "\n";
  w.line() << "layers " << model.layers.size() << "\n";
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const KernelLayer& kl = model.layers[i];
    w.line() << layer_key(static_cast<Index>(i)) << ' ' << hex(kl.rms_norm) << ' '
             << kl.rank_deficient << "\n";
  }
  w.block("anchors", model.anchors);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const KernelLayer& kl = model.layers[i];
    const std::string key = layer_key(static_cast<Index>(i));
    w.block(key + ".alpha", kl.alpha);
    w.block(key + ".beta", kl.beta);
    w.block(key + ".eigenvalues", kl.eigenvalues);
    w.block(key + ".features", kl.features);
  }
  w.block("coefficients", model.coefficients);
  return w.finish();
}

AnyModel decode_model(const std::string& bytes) {
  const Manifest m = parse_manifest(bytes);
  if (m.type == "neural") return decode_neural(m);
  if (m.type == "kernel") return decode_kernel(m);
  throw FormatError("unknown model type '" + m.type + "'", 0);
}

void save_model(const LofiModel& model, const std::filesystem::path& path) {
  write_file(encode_model(model), path);
}

void save_model(const KernelModel& model, const std::filesystem::path& path) {
  write_file(encode_model(model), path);
}

AnyModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

Vector predict(const AnyModel& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

}  // namespace lofi
