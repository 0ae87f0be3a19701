#include "ilap/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "ilap/errors.hpp"

namespace fs = std::filesystem;

namespace ilap {

// ---------------------------------------------------------------- ImageTable

ImageTable::ImageTable(ImageShape shape, std::vector<float> pixels)
    : shape_(shape), pixels_(std::move(pixels)) {
  const auto per = shape_.numel();
  if (per == 0 || pixels_.size() % per != 0) {
    throw InvariantError("image buffer is not a whole number of images");
  }
  count_ = pixels_.size() / per;
}

std::span<const float> ImageTable::image(SampleId id) const {
  if (id >= count_) throw InvariantError("sample id " + std::to_string(id) + " out of range");
  const auto per = shape_.numel();
  return {pixels_.data() + id * per, per};
}

Tensor ImageTable::gather(std::span<const SampleId> ids) const {
  Tensor out({static_cast<int>(ids.size()), shape_.channels, shape_.height, shape_.width});
  const auto per = shape_.numel();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = image(ids[i]);
    std::copy(src.begin(), src.end(), out.data() + i * per);
  }
  return out;
}

std::vector<std::vector<SampleId>> LabeledImageSet::ids_by_class() const {
  std::vector<std::vector<SampleId>> out(num_classes);
  for (SampleId i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

// ---------------------------------------------------------------- helpers

namespace {

std::vector<std::uint8_t> read_maybe_gz(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw IngestionError("cannot open dataset file " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  int n = 0;
  while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw IngestionError("corrupt compressed file " + path.string());
  return out;
}

fs::path first_existing(const std::vector<fs::path>& candidates) {
  for (const auto& p : candidates) {
    if (fs::exists(p)) return p;
  }
  throw IngestionError("missing dataset file " + candidates.front().string());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void apply_normalization(std::vector<float>& px, const ImageShape& shape,
                         const Normalization& norm) {
  const std::size_t plane = static_cast<std::size_t>(shape.height) * shape.width;
  const std::size_t per = shape.numel();
  for (std::size_t base = 0; base < px.size(); base += per) {
    for (int c = 0; c < shape.channels; ++c) {
      const float m = norm.mean[c], s = norm.stddev[c];
      float* p = px.data() + base + c * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] = (p[k] - m) / s;
    }
  }
}

LabeledImageSet read_idx_split(const fs::path& dir, const std::string& prefix, Split split) {
  const auto img_path = first_existing({dir / (prefix + "-images-idx3-ubyte.gz"),
                                        dir / (prefix + "-images-idx3-ubyte")});
  const auto lbl_path = first_existing({dir / (prefix + "-labels-idx1-ubyte.gz"),
                                        dir / (prefix + "-labels-idx1-ubyte")});
  const auto img = read_maybe_gz(img_path);
  const auto lbl = read_maybe_gz(lbl_path);
  if (img.size() < 16 || be32(img, 0) != 0x803) {
    throw IngestionError("bad IDX image header in " + img_path.string());
  }
  if (lbl.size() < 8 || be32(lbl, 0) != 0x801) {
    throw IngestionError("bad IDX label header in " + lbl_path.string());
  }
  const std::size_t n = be32(img, 4);
  const int rows = static_cast<int>(be32(img, 8));
  const int cols = static_cast<int>(be32(img, 12));
  const ImageShape shape{1, rows, cols};
  if (img.size() != 16 + n * shape.numel()) {
    throw IngestionError("truncated IDX image payload in " + img_path.string());
  }
  if (be32(lbl, 4) != n || lbl.size() != 8 + n) {
    throw IngestionError("IDX label count mismatch in " + lbl_path.string());
  }
  std::vector<float> px(n * shape.numel());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(img[16 + i]) / 255.0f;
  LabeledImageSet set;
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    set.labels[i] = lbl[8 + i];
    if (set.labels[i] > 9) throw IngestionError("label out of range in " + lbl_path.string());
  }
  set.images = ImageTable(shape, std::move(px));
  set.split = split;
  set.num_classes = 10;
  return set;
}

/// Reads cifar-style records: `label_bytes` header bytes (the last one is the
/// class) followed by a 3x32x32 image.
LabeledImageSet read_cifar_records(const std::vector<fs::path>& files, int label_bytes,
                                   int num_classes, Split split) {
  constexpr std::size_t kImage = 3 * 32 * 32;
  const std::size_t record = label_bytes + kImage;
  std::vector<float> px;
  LabeledImageSet set;
  for (const auto& f : files) {
    const auto bytes = read_maybe_gz(f);
    if (bytes.empty() || bytes.size() % record != 0) {
      throw IngestionError("malformed record file " + f.string());
    }
    for (std::size_t at = 0; at < bytes.size(); at += record) {
      const int y = bytes[at + label_bytes - 1];
      if (y >= num_classes) throw IngestionError("label out of range in " + f.string());
      set.labels.push_back(y);
      for (std::size_t k = 0; k < kImage; ++k) {
        px.push_back(static_cast<float>(bytes[at + label_bytes + k]) / 255.0f);
      }
    }
  }
  set.images = ImageTable({3, 32, 32}, std::move(px));
  set.split = split;
  set.num_classes = num_classes;
  return set;
}

fs::path pick_dir(const fs::path& base, const std::string& nested) {
  return fs::exists(base / nested) ? base / nested : base;
}

}  // namespace

const std::vector<std::string>& supported_datasets() {
  static const std::vector<std::string> names = {"mnist",    "fashion_mnist", "cifar10",
                                                 "cifar100", "svhn",          "blobs2d"};
  return names;
}

Normalization default_normalization(const std::string& name) {
  if (name == "mnist") return {{0.1307f}, {0.3081f}};
  if (name == "fashion_mnist") return {{0.2860f}, {0.3530f}};
  if (name == "cifar10") return {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
  if (name == "cifar100") return {{0.5071f, 0.4865f, 0.4409f}, {0.2673f, 0.2564f, 0.2762f}};
  if (name == "svhn") return {{0.4377f, 0.4438f, 0.4728f}, {0.1980f, 0.2010f, 0.1970f}};
  if (name == "blobs2d") return {};
  throw ConfigError("unknown dataset '" + name + "'");
}

std::vector<std::pair<double, double>> blobs2d_centers(const Blobs2dParams& p) {
  std::vector<std::pair<double, double>> c(p.num_classes);
  for (int k = 0; k < p.num_classes; ++k) {
    const double a = 2.0 * std::numbers::pi * k / p.num_classes;
    c[k] = {p.radius * std::cos(a), p.radius * std::sin(a)};
  }
  return c;
}

Dataset make_blobs2d(const Blobs2dParams& p) {
  if (p.num_classes < 1 || p.train_per_class < 1 || p.test_per_class < 0 || p.sigma <= 0) {
    throw ConfigError("invalid blobs2d parameters");
  }
  const auto centers = blobs2d_centers(p);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> noise(0.0, p.sigma);
  auto make = [&](int per_class, Split split) {
    std::vector<float> px;
    LabeledImageSet set;
    // interleave classes so storage order carries no class blocks
    for (int i = 0; i < per_class; ++i) {
      for (int k = 0; k < p.num_classes; ++k) {
        px.push_back(static_cast<float>(centers[k].first + noise(rng)));
        px.push_back(static_cast<float>(centers[k].second + noise(rng)));
        set.labels.push_back(k);
      }
    }
    set.images = ImageTable({2, 1, 1}, std::move(px));
    set.split = split;
    set.num_classes = p.num_classes;
    return set;
  };
  Dataset d;
  d.name = "blobs2d";
  d.train = make(p.train_per_class, Split::train);
  d.test = make(p.test_per_class, Split::test);
  return d;
}

Dataset load_dataset(const DatasetOptions& options) {
  const auto& name = options.name;
  if (std::find(supported_datasets().begin(), supported_datasets().end(), name) ==
      supported_datasets().end()) {
    throw ConfigError("unknown dataset '" + name + "'");
  }
  if (name == "blobs2d") {
    auto blobs = options.blobs;
    return make_blobs2d(blobs);
  }

  Dataset d;
  d.name = name;
  const fs::path base = options.root / name;
  if (name == "mnist" || name == "fashion_mnist") {
    d.train = read_idx_split(base, "train", Split::train);
    d.test = read_idx_split(base, "t10k", Split::test);
  } else if (name == "cifar10" || name == "svhn") {
    const fs::path dir = pick_dir(base, "cifar-10-batches-bin");
    std::vector<fs::path> train_files;
    if (name == "cifar10") {
      for (int i = 1; i <= 5; ++i) {
        train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
      }
    } else {
      train_files.push_back(dir / "train.bin");
    }
    for (const auto& f : train_files) {
      if (!fs::exists(f)) throw IngestionError("missing dataset file " + f.string());
    }
    const fs::path test_file = dir / (name == "cifar10" ? "test_batch.bin" : "test.bin");
    if (!fs::exists(test_file)) throw IngestionError("missing dataset file " + test_file.string());
    d.train = read_cifar_records(train_files, 1, 10, Split::train);
    d.test = read_cifar_records({test_file}, 1, 10, Split::test);
  } else {  // cifar100
    const fs::path dir = pick_dir(base, "cifar-100-binary");
    for (const char* f : {"train.bin", "test.bin"}) {
      if (!fs::exists(dir / f)) throw IngestionError("missing dataset file " + (dir / f).string());
    }
    d.train = read_cifar_records({dir / "train.bin"}, 2, 100, Split::train);
    d.test = read_cifar_records({dir / "test.bin"}, 2, 100, Split::test);
  }

  if (options.normalize) {
    d.normalization = options.normalization.value_or(default_normalization(name));
    const auto shape = d.train.images.shape();
    if (static_cast<int>(d.normalization.mean.size()) != shape.channels ||
        static_cast<int>(d.normalization.stddev.size()) != shape.channels) {
      throw ConfigError("normalization constants do not match the channel count of " + name);
    }
    for (auto* set : {&d.train, &d.test}) {
      std::vector<float> px;
      px.reserve(set->size() * shape.numel());
      for (SampleId i = 0; i < set->size(); ++i) {
        const auto img = set->images.image(i);
        px.insert(px.end(), img.begin(), img.end());
      }
      apply_normalization(px, shape, d.normalization);
      set->images = ImageTable(shape, std::move(px));
    }
  }
  return d;
}

void write_cifar10_records(const fs::path& path, std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> pixels) {
  constexpr std::size_t kImage = 3 * 32 * 32;
  if (pixels.size() != labels.size() * kImage) {
    throw InvariantError("pixel buffer does not match label count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.put(static_cast<char>(labels[i]));
    out.write(reinterpret_cast<const char*>(pixels.data() + i * kImage), kImage);
  }
}

void write_synthetic_cifar10(const fs::path& dir, int train_per_class, int test_per_class,
                             std::uint64_t seed) {
  if (train_per_class < 5 || test_per_class < 1) throw ConfigError("invalid synthetic cifar10 sizes");
  constexpr int kSide = 32, kClasses = 10;
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 18.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  auto render = [&](int cls, std::vector<std::uint8_t>& px) {
    const double angle = cls * std::numbers::pi / kClasses;
    const double freq = 0.35 + 0.05 * (cls % 3);
    const double ph = phase(rng);
    const double base[3] = {60.0 + 18.0 * cls, 200.0 - 14.0 * cls, 90.0 + 30.0 * (cls % 4)};
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < kSide; ++y) {
        for (int x = 0; x < kSide; ++x) {
          const double t = std::cos(angle) * x + std::sin(angle) * y;
          const double v = base[c] + 45.0 * std::sin(freq * t + ph) + noise(rng);
          px.push_back(static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)));
        }
      }
    }
  };
  auto write = [&](const fs::path& path, int per_class) {
    std::vector<std::uint8_t> labels, px;
    for (int i = 0; i < per_class; ++i) {
      for (int k = 0; k < kClasses; ++k) {
        labels.push_back(static_cast<std::uint8_t>(k));
        render(k, px);
      }
    }
    write_cifar10_records(path, labels, px);
  };
  const int per_batch = train_per_class / 5;
  for (int b = 1; b <= 5; ++b) {
    write(dir / ("data_batch_" + std::to_string(b) + ".bin"),
          b < 5 ? per_batch : train_per_class - 4 * per_batch);
  }
  write(dir / "test_batch.bin", test_per_class);
}

}  // namespace ilap
