#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"

#include "ilap/data.hpp"
#include "ilap/errors.hpp"

using namespace ilap;

TEST_CASE("blobs2d has the configured classes as 2-channel 1x1 images") {
  const auto d = fixture::blobs(4, 50, 10);
  CHECK(d.num_classes() == 4);
  CHECK(d.train.size() == 200);
  CHECK(d.test.size() == 40);
  CHECK(d.train.images.shape() == ImageShape{2, 1, 1});
  const auto by_class = d.train.ids_by_class();
  REQUIRE(by_class.size() == 4);
  for (const auto& ids : by_class) CHECK(ids.size() == 50);
}

TEST_CASE("blobs2d is deterministic per seed") {
  const auto a = fixture::blobs(3, 20, 5, 0.25, 9);
  const auto b = fixture::blobs(3, 20, 5, 0.25, 9);
  const auto c = fixture::blobs(3, 20, 5, 0.25, 10);
  const std::vector<SampleId> ids{0, 7, 59};
  CHECK(a.train.images.gather(ids).values() == b.train.images.gather(ids).values());
  CHECK(a.train.images.gather(ids).values() != c.train.images.gather(ids).values());
}

TEST_CASE("blob samples lie near their class center") {
  Blobs2dParams p;
  p.num_classes = 5;
  p.train_per_class = 200;
  p.test_per_class = 1;
  const auto d = make_blobs2d(p);
  const auto centers = blobs2d_centers(p);
  for (SampleId i = 0; i < d.train.size(); ++i) {
    const auto img = d.train.images.image(i);
    const auto [cx, cy] = centers[d.train.labels[i]];
    CHECK(std::hypot(img[0] - cx, img[1] - cy) < 6 * p.sigma);
  }
}

TEST_CASE("unknown datasets and missing files are reported") {
  DatasetOptions o;
  o.name = "imagenet";
  CHECK_THROWS_AS(load_dataset(o), ConfigError);

  fixture::TempDir tmp("data_missing");
  o.name = "mnist";
  o.root = tmp.path();
  try {
    load_dataset(o);
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("mnist") != std::string::npos);
  }
}

TEST_CASE("cifar10 record files load with ten classes") {
  fixture::TempDir tmp("cifar");
  write_synthetic_cifar10(tmp / "cifar10", 10, 3, 1);
  DatasetOptions o;
  o.name = "cifar10";
  o.root = tmp.path();
  const auto d = load_dataset(o);
  CHECK(d.num_classes() == 10);
  CHECK(d.train.size() == 100);
  CHECK(d.test.size() == 30);
  CHECK(d.train.images.shape() == ImageShape{3, 32, 32});
  std::set<ClassId> seen(d.train.labels.begin(), d.train.labels.end());
  CHECK(seen.size() == 10);
}

TEST_CASE("cifar100 record files load with a hundred classes") {
  fixture::TempDir tmp("cifar100");
  std::filesystem::create_directories(tmp / "cifar100");
  for (const char* name : {"train.bin", "test.bin"}) {
    std::ofstream out(tmp / "cifar100" / name, std::ios::binary);
    for (int y = 0; y < 100; ++y) {
      out.put(static_cast<char>(y / 5));  // coarse label
      out.put(static_cast<char>(y));      // fine label
      for (int k = 0; k < 3 * 32 * 32; ++k) out.put(static_cast<char>(k % 251));
    }
  }
  DatasetOptions o;
  o.name = "cifar100";
  o.root = tmp.path();
  const auto d = load_dataset(o);
  CHECK(d.num_classes() == 100);
  CHECK(d.train.labels.back() == 99);
}

TEST_CASE("truncated record files are rejected") {
  fixture::TempDir tmp("cifar_bad");
  write_synthetic_cifar10(tmp / "cifar10", 5, 1, 1);
  std::filesystem::resize_file(tmp / "cifar10" / "test_batch.bin", 100);
  DatasetOptions o;
  o.name = "cifar10";
  o.root = tmp.path();
  CHECK_THROWS_AS(load_dataset(o), IngestionError);
}

#ifdef ILAP_TEST_DATA_ROOT
TEST_CASE("mnist has ten classes of 1x28x28 images") {
  DatasetOptions o;
  o.name = "mnist";
  o.root = ILAP_TEST_DATA_ROOT;
  if (!std::filesystem::exists(o.root / "mnist")) {
    MESSAGE("mnist not present under " << o.root << "; skipped");
    return;
  }
  const auto d = load_dataset(o);
  CHECK(d.num_classes() == 10);
  CHECK(d.train.images.shape() == ImageShape{1, 28, 28});
  std::set<ClassId> seen(d.train.labels.begin(), d.train.labels.end());
  CHECK(seen.size() == 10);
}
#endif
