#include "ilap/learner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "ilap/errors.hpp"
#include "ilap/nn/optim.hpp"
#include "ilap/random.hpp"

namespace ilap {

namespace {

constexpr int kEvalChunk = 256;
constexpr char kCheckpointMagic[8] = {'I', 'L', 'A', 'P', 'L', 'R', 'N', '1'};
constexpr char kTensorMagic[8] = {'I', 'L', 'A', 'P', 'T', 'E', 'N', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

nn::Sequential build_mlp(const ImageShape& in, nn::RandomEngine& rng) {
  nn::Sequential s;
  s.add(std::make_unique<nn::Flatten>())
      .add(std::make_unique<nn::Linear>(static_cast<int>(in.numel()), 256, rng))
      .add(std::make_unique<nn::ReLU>())
      .add(std::make_unique<nn::Linear>(256, 128, rng))
      .add(std::make_unique<nn::ReLU>());
  return s;
}

nn::Sequential build_small_cnn(const ImageShape& in, nn::RandomEngine& rng) {
  if (in.height < 4 || in.width < 4) {
    throw ConfigError("small_cnn needs inputs of at least 4x4 pixels");
  }
  const int flat = 32 * (in.height / 4) * (in.width / 4);
  nn::Sequential s;
  s.add(std::make_unique<nn::Conv2d>(in.channels, 16, 3, 1, 1, rng))
      .add(std::make_unique<nn::ReLU>())
      .add(std::make_unique<nn::MaxPool2d>(2, 2))
      .add(std::make_unique<nn::Conv2d>(16, 32, 3, 1, 1, rng))
      .add(std::make_unique<nn::ReLU>())
      .add(std::make_unique<nn::MaxPool2d>(2, 2))
      .add(std::make_unique<nn::Flatten>())
      .add(std::make_unique<nn::Linear>(flat, 128, rng))
      .add(std::make_unique<nn::ReLU>());
  return s;
}

// torchvision naming so converted ImageNet weights load by name.
nn::Sequential build_resnet18(const ImageShape& in, nn::RandomEngine& rng) {
  if (in.channels != 1 && in.channels != 3) {
    throw ConfigError("resnet18 takes 1- or 3-channel images");
  }
  nn::Sequential s;
  s.add("adapter", std::make_unique<nn::InputAdapter>(224, 3))
      .add("conv1", std::make_unique<nn::Conv2d>(3, 64, 7, 2, 3, rng, false))
      .add("bn1", std::make_unique<nn::BatchNorm2d>(64))
      .add("relu", std::make_unique<nn::ReLU>())
      .add("maxpool", std::make_unique<nn::MaxPool2d>(3, 2, 1));
  int channels = 64;
  const int widths[4] = {64, 128, 256, 512};
  for (int stage = 0; stage < 4; ++stage) {
    auto layer = std::make_unique<nn::Sequential>();
    const int stride = stage == 0 ? 1 : 2;
    layer->add("0", std::make_unique<nn::BasicBlock>(channels, widths[stage], stride, rng));
    layer->add("1", std::make_unique<nn::BasicBlock>(widths[stage], widths[stage], 1, rng));
    channels = widths[stage];
    s.add("layer" + std::to_string(stage + 1), std::move(layer));
  }
  s.add("avgpool", std::make_unique<nn::GlobalAvgPool>());
  return s;
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in, const std::string& source) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw IngestionError("truncated file " + source);
  return v;
}
std::string read_str(std::istream& in, const std::string& source) {
  const auto n = read_u32(in, source);
  if (n > (1u << 20)) throw IngestionError("corrupt string field in " + source);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw IngestionError("truncated file " + source);
  return s;
}

}  // namespace

Architecture parse_architecture(const std::string& s) {
  if (s == "resnet18") return Architecture::resnet18;
  if (s == "small_cnn") return Architecture::small_cnn;
  if (s == "mlp") return Architecture::mlp;
  throw ConfigError("unknown architecture '" + s + "'");
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::resnet18: return "resnet18";
    case Architecture::small_cnn: return "small_cnn";
    case Architecture::mlp: return "mlp";
  }
  return "unknown";
}

// ---------------------------------------------------------------- tensor files

void write_tensor_file(std::ostream& out, const std::vector<nn::Param>& params) {
  out.write(kTensorMagic, 8);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_str(out, p.name);
    write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(p.value->size() * sizeof(float)));
  }
}

void read_tensor_file(std::istream& in, const std::vector<nn::Param>& params,
                      const std::string& source, bool allow_missing) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
    throw IngestionError("not a tensor file: " + source);
  }
  if (read_u32(in, source) != kFormatVersion) {
    throw IngestionError("unsupported tensor file version in " + source);
  }
  std::unordered_map<std::string, const nn::Param*> by_name;
  for (const auto& p : params) by_name[p.name] = &p;
  std::size_t loaded = 0;
  const auto count = read_u32(in, source);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = read_str(in, source);
    const auto rank = read_u32(in, source);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in, source));
    std::vector<float> data(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float)))) {
      throw IngestionError("truncated tensor '" + name + "' in " + source);
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) continue;  // e.g. an ImageNet classifier head
    if (it->second->shape != shape) {
      throw IngestionError("shape mismatch for tensor '" + name + "' in " + source);
    }
    *it->second->value = std::move(data);
    ++loaded;
  }
  if (!allow_missing && loaded != params.size()) {
    throw IngestionError(source + " provides " + std::to_string(loaded) + " of " +
                         std::to_string(params.size()) + " expected tensors");
  }
}

// ---------------------------------------------------------------- Learner

Learner Learner::build(const LearnerOptions& options) {
  if (options.num_initial_labels < 0) throw ConfigError("num_initial_labels must be >= 0");
  if (options.input.numel() == 0) throw ConfigError("learner input shape is empty");
  nn::RandomEngine rng(derive_seed(options.seed, {0x1ea7}));
  Learner l;
  l.arch_ = options.arch;
  l.input_ = options.input;
  switch (options.arch) {
    case Architecture::mlp: l.extractor_ = build_mlp(options.input, rng); break;
    case Architecture::small_cnn: l.extractor_ = build_small_cnn(options.input, rng); break;
    case Architecture::resnet18: l.extractor_ = build_resnet18(options.input, rng); break;
  }
  if (options.pretrained) {
    if (options.weights.empty() || !std::filesystem::exists(options.weights)) {
      throw IngestionError("pretrained weights unavailable for " + to_string(options.arch) +
                           (options.weights.empty() ? "" : ": " + options.weights.string()));
    }
    std::vector<nn::Param> params;
    l.extractor_.collect("", params);
    std::ifstream in(options.weights, std::ios::binary);
    read_tensor_file(in, params, options.weights.string());
    l.pretrained_ = true;
  }
  const Tensor probe({1, options.input.channels, options.input.height, options.input.width});
  l.feature_dim_ = static_cast<int>(l.extractor_.infer(probe).row_size());
  l.head_ = nn::Linear::zeros(l.feature_dim_, 0);
  for (int i = 0; i < options.num_initial_labels; ++i) l.add_label();
  return l;
}

int Learner::num_active() const {
  return static_cast<int>(std::count(active_.begin(), active_.end(), 1));
}

bool Learner::is_active(Label label) const {
  return label >= 0 && label < num_labels() && active_[label];
}

std::vector<Label> Learner::active_labels() const {
  std::vector<Label> out;
  for (Label l = 0; l < num_labels(); ++l) {
    if (active_[l]) out.push_back(l);
  }
  return out;
}

Label Learner::add_label() {
  head_.add_output();
  active_.push_back(1);
  return num_labels() - 1;
}

void Learner::deactivate(Label label) {
  if (label < 0 || label >= num_labels()) {
    throw InvariantError("cannot deactivate unknown label " + std::to_string(label));
  }
  active_[label] = 0;
}

Tensor Learner::features(const Tensor& images) const { return extractor_.infer(images); }

Tensor Learner::logits(const Tensor& images) const { return head_.infer(features(images)); }

std::vector<Label> Learner::predict(const Tensor& images) const {
  const Tensor z = logits(images);
  std::vector<Label> out(z.batch(), -1);
  for (int i = 0; i < z.batch(); ++i) {
    const auto row = z.row(i);
    float best = 0.0f;
    for (Label k = 0; k < num_labels(); ++k) {
      if (!active_[k]) continue;
      if (out[i] < 0 || row[k] > best) {
        best = row[k];
        out[i] = k;
      }
    }
  }
  return out;
}

std::vector<Label> Learner::predict(const ImageTable& table, std::span<const SampleId> ids) const {
  std::vector<Label> out;
  out.reserve(ids.size());
  for (std::size_t at = 0; at < ids.size(); at += kEvalChunk) {
    const auto chunk = ids.subspan(at, std::min<std::size_t>(kEvalChunk, ids.size() - at));
    const auto p = predict(table.gather(chunk));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

namespace {

template <typename F>
Tensor chunked_rows(const ImageTable& table, std::span<const SampleId> ids, F&& f) {
  std::vector<float> data;
  int width = 0;
  for (std::size_t at = 0; at < ids.size(); at += kEvalChunk) {
    const auto chunk = ids.subspan(at, std::min<std::size_t>(kEvalChunk, ids.size() - at));
    const Tensor t = f(table.gather(chunk));
    width = static_cast<int>(t.row_size());
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor({static_cast<int>(ids.size()), width}, std::move(data));
}

}  // namespace

Tensor Learner::features(const ImageTable& table, std::span<const SampleId> ids) const {
  if (ids.empty()) return Tensor({0, feature_dim_});
  return chunked_rows(table, ids, [this](const Tensor& x) { return features(x); });
}

Tensor Learner::logits(const ImageTable& table, std::span<const SampleId> ids) const {
  if (ids.empty()) return Tensor({0, num_labels()});
  return chunked_rows(table, ids, [this](const Tensor& x) { return logits(x); });
}

Tensor Learner::input_gradient(const Tensor& images,
                               const std::function<Tensor(const Tensor&)>& logit_grad) const {
  Learner scratch = *this;
  const Tensor feats = scratch.extractor_.forward(images, nn::Mode::eval);
  const Tensor z = scratch.head_.forward(feats, nn::Mode::eval);
  const Tensor g = logit_grad(z);
  return scratch.extractor_.backward(scratch.head_.backward(g));
}

std::vector<nn::Param> Learner::parameters() {
  std::vector<nn::Param> params;
  extractor_.collect("features.", params);
  head_.collect("head.", params);
  return params;
}

FitReport Learner::fit(const ImageTable& table, const LabeledSamples& train,
                       const LabeledSamples& val, const TrainConfig& cfg) {
  FitReport report;
  if (cfg.epochs <= 0) return report;
  if (train.empty()) throw InvariantError("fit called with an empty training set");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (Label y : train.labels) {
    if (!is_active(y)) throw InvariantError("training label " + std::to_string(y) + " is not registered");
  }
  report.early_stopping = cfg.early_stopping && !val.empty();
  if (cfg.early_stopping && val.empty()) {
    spdlog::warn("empty validation set; training a fixed {} epochs", cfg.epochs);
  }

  std::vector<nn::Param> feature_params, head_params;
  {
    std::vector<nn::Param> all;
    extractor_.collect("features.", all);
    for (auto& p : all) {
      if (p.trainable()) feature_params.push_back(p);
    }
    head_.collect("head.", head_params);
  }
  nn::Adam optimizer({{feature_params, cfg.lr_features()}, {head_params, cfg.lr_head}});

  RandomEngine rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  nn::Sequential best_extractor;
  nn::Linear best_head = head_;
  double best = -1.0;
  int since_best = 0;
  std::vector<SampleId> batch_ids;
  std::vector<int> batch_labels;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const auto end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      batch_ids.clear();
      batch_labels.clear();
      for (std::size_t k = at; k < end; ++k) {
        batch_ids.push_back(train.ids[order[k]]);
        batch_labels.push_back(train.labels[order[k]]);
      }
      const Tensor x = table.gather(batch_ids);
      optimizer.zero_grad();
      const Tensor feats = extractor_.forward(x, nn::Mode::train);
      const Tensor z = head_.forward(feats, nn::Mode::train);
      const auto loss = nn::masked_cross_entropy(z, batch_labels, active_);
      extractor_.backward(head_.backward(loss.grad));
      optimizer.step();
    }
    report.epochs_run = epoch;
    if (!report.early_stopping) continue;

    const double acc = accuracy(*this, table, val);
    report.val_accuracy.push_back(acc);
    if (acc >= best) {
      best = acc;
      report.best_epoch = epoch;
      best_extractor = extractor_;
      best_head = head_;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (report.early_stopping) {
    extractor_ = std::move(best_extractor);
    head_ = std::move(best_head);
    report.best_val_accuracy = best;
  } else {
    report.best_epoch = report.epochs_run;
  }
  return report;
}

// ---------------------------------------------------------------- persistence

void Learner::save(std::ostream& out) const {
  out.write(kCheckpointMagic, 8);
  write_u32(out, kFormatVersion);
  write_str(out, to_string(arch_));
  write_u32(out, static_cast<std::uint32_t>(input_.channels));
  write_u32(out, static_cast<std::uint32_t>(input_.height));
  write_u32(out, static_cast<std::uint32_t>(input_.width));
  write_u32(out, pretrained_ ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(num_labels()));
  out.write(active_.data(), static_cast<std::streamsize>(active_.size()));
  write_tensor_file(out, const_cast<Learner*>(this)->parameters());
}

Learner Learner::load(std::istream& in) {
  const std::string source = "learner checkpoint";
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IngestionError("not a learner checkpoint");
  }
  if (read_u32(in, source) != kFormatVersion) {
    throw IngestionError("unsupported learner checkpoint version");
  }
  LearnerOptions opts;
  opts.arch = parse_architecture(read_str(in, source));
  opts.input.channels = static_cast<int>(read_u32(in, source));
  opts.input.height = static_cast<int>(read_u32(in, source));
  opts.input.width = static_cast<int>(read_u32(in, source));
  const bool pretrained = read_u32(in, source) != 0;
  opts.num_initial_labels = static_cast<int>(read_u32(in, source));
  Learner l = build(opts);
  l.pretrained_ = pretrained;
  if (!in.read(l.active_.data(), static_cast<std::streamsize>(l.active_.size()))) {
    throw IngestionError("truncated learner checkpoint");
  }
  read_tensor_file(in, l.parameters(), source);
  return l;
}

void Learner::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  save(out);
}

Learner Learner::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  return load(in);
}

std::uint64_t Learner::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : const_cast<Learner*>(this)->parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value->data());
    for (std::size_t i = 0; i < p.value->size() * sizeof(float); ++i) {
      h = (h ^ bytes[i]) * 0x100000001b3ULL;
    }
  }
  return h;
}

// ---------------------------------------------------------------- evaluation

std::map<Label, double> per_class_accuracy(const Learner& learner, const ImageTable& table,
                                           const std::map<Label, std::vector<SampleId>>& val_banks) {
  std::map<Label, double> out;
  for (const auto& [label, ids] : val_banks) {
    if (ids.empty()) {
      throw InvariantError("label " + std::to_string(label) + " has an empty val bank");
    }
    const auto pred = learner.predict(table, ids);
    const auto hits = std::count(pred.begin(), pred.end(), label);
    out[label] = static_cast<double>(hits) / static_cast<double>(ids.size());
  }
  return out;
}

double accuracy(const Learner& learner, const ImageTable& table, const LabeledSamples& samples) {
  if (samples.empty()) return 0.0;
  const auto pred = learner.predict(table, samples.ids);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == samples.labels[i];
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace ilap
