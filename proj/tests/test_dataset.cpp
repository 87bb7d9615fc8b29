#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>

#include "cura/dataset.hpp"
#include "cura/rng.hpp"

using namespace cura;

namespace {

std::string thrown_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("synthetic generator hits the target rate on the reference config") {
  SynthConfig cfg;
  cfg.n_samples = 10000;
  cfg.dim = 16;
  cfg.n_clusters = 4;
  cfg.target_positive_rate = 0.03;
  cfg.ambiguity = 0.2;
  cfg.seed = 7;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  CHECK(ds.n() == 10000);
  CHECK(ds.dim == 16);
  CHECK(ds.positive_rate() >= 0.0225);
  CHECK(ds.positive_rate() <= 0.0375);
  ds.validate();
}

TEST_CASE("generator is bit-deterministic under an equal config") {
  SynthConfig cfg;
  cfg.n_samples = 3000;
  cfg.dim = 8;
  cfg.seed = 42;
  const EmbeddingDataset a = generate_synthetic(cfg);
  const EmbeddingDataset b = generate_synthetic(cfg);
  CHECK(a.embeddings == b.embeddings);
  CHECK(a.labels == b.labels);
  CHECK(a.ids == b.ids);

  SynthConfig other = cfg;
  other.seed = 43;
  CHECK(generate_synthetic(other).embeddings != a.embeddings);
}

TEST_CASE("zero ambiguity means labels follow the cluster structure") {
  SynthConfig cfg;
  cfg.n_samples = 400;
  cfg.dim = 8;
  cfg.n_clusters = 2;
  cfg.target_positive_rate = 0.5;
  cfg.ambiguity = 0.0;
  cfg.seed = 3;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  // Exact budget, no label noise.
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), 1) == 200);
  // Labels are a deterministic function of position: a nearest-centroid rule
  // fitted on the data itself recovers almost every label.
  std::vector<double> centroid[2]{std::vector<double>(ds.dim, 0.0),
                                  std::vector<double>(ds.dim, 0.0)};
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto row = ds.row(i);
    counts[ds.labels[i]] += 1;
    for (std::size_t j = 0; j < ds.dim; ++j) centroid[ds.labels[i]][j] += row[j];
  }
  for (int c = 0; c < 2; ++c) {
    for (double& v : centroid[c]) v /= static_cast<double>(counts[c]);
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto row = ds.row(i);
    double d2[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < ds.dim; ++j) {
        const double d = row[j] - centroid[c][j];
        d2[c] += d * d;
      }
    }
    agree += (d2[1] < d2[0] ? 1 : 0) == ds.labels[i];
  }
  CHECK(agree >= 396);  // fixed seed; boundary crossings are noise-tail events
}

TEST_CASE("generator rejects invalid configs") {
  SynthConfig cfg;
  cfg.n_samples = 6;
  cfg.n_clusters = 4;  // n < 2 * clusters
  CHECK_THROWS_AS(generate_synthetic(cfg), std::runtime_error);
  cfg = SynthConfig{};
  cfg.dim = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::runtime_error);
  cfg = SynthConfig{};
  cfg.target_positive_rate = 1.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::runtime_error);
  cfg = SynthConfig{};
  cfg.ambiguity = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::runtime_error);
}

TEST_CASE("csv round trip preserves numeric content exactly") {
  const std::string text =
      "id,label,e0,e1\n"
      "a,0,0.25,-1.75\n"
      "b,1,3.141592653589793,0.1\n"
      "c,0,1e-12,42\n";
  const EmbeddingDataset ds = dataset_from_csv(text, "inline");
  CHECK(ds.n() == 3);
  CHECK(ds.dim == 2);
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.embeddings[2] == 3.141592653589793);

  const EmbeddingDataset again = dataset_from_csv(dataset_to_csv(ds), "inline2");
  CHECK(again.embeddings == ds.embeddings);  // bitwise, stronger than 12 digits
  CHECK(again.ids == ds.ids);
  CHECK(dataset_to_csv(again) == dataset_to_csv(ds));
}

TEST_CASE("csv loader reports structured errors with line numbers") {
  CHECK(thrown_message([] { dataset_from_csv("", "f"); }).find("header") !=
        std::string::npos);
  CHECK(thrown_message([] {
          dataset_from_csv("id,label,e0,e3\na,0,1,2\n", "f");
        }).find("e1") != std::string::npos);
  const std::string msg = thrown_message([] {
    dataset_from_csv("id,label,e0,e1,e2,e3\na,0,1,2,3\n", "f");
  });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("columns") != std::string::npos);
  CHECK(thrown_message([] {
          dataset_from_csv("id,label,e0\na,2,1\n", "f");
        }).find("label") != std::string::npos);
  const std::string bad_cell = thrown_message([] {
    dataset_from_csv("id,label,e0\na,0,1\nb,1,abc\n", "f");
  });
  CHECK(bad_cell.find("line 3") != std::string::npos);
  CHECK(thrown_message([] {
          dataset_from_csv("id,label,e0\na,0,nan\n", "f");
        }) != "");
}

TEST_CASE("file round trip through disk") {
  SynthConfig cfg;
  cfg.n_samples = 50;
  cfg.dim = 3;
  cfg.seed = 9;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  const auto path = std::filesystem::temp_directory_path() / "cura_ds_test.csv";
  write_csv(ds, path);
  const EmbeddingDataset loaded = load_csv(path);
  CHECK(loaded.embeddings == ds.embeddings);
  CHECK(loaded.labels == ds.labels);
  std::filesystem::remove(path);
}

TEST_CASE("five folds of a 10-sample balanced set are exactly stratified") {
  EmbeddingDataset ds;
  ds.dim = 1;
  for (int i = 0; i < 10; ++i) {
    ds.ids.push_back("s" + std::to_string(i));
    ds.labels.push_back(i < 5 ? 1 : 0);
    ds.embeddings.push_back(static_cast<double>(i + 1));
  }
  const FoldSplit split = split_folds(ds, 5, 0.2, 13);
  for (std::size_t f = 0; f < 5; ++f) {
    REQUIRE(split.test_indices[f].size() == 2);
    int pos = 0;
    for (const std::size_t i : split.test_indices[f]) pos += ds.labels[i];
    CHECK(pos == 1);
  }
}

TEST_CASE("large imbalanced split keeps per-fold positive counts proportional") {
  SynthConfig cfg;
  cfg.n_samples = 100000;
  cfg.dim = 4;
  cfg.target_positive_rate = 0.03;
  cfg.ambiguity = 0.1;
  cfg.seed = 21;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  const FoldSplit split = split_folds(ds, 5, 0.125, 5);
  for (std::size_t f = 0; f < 5; ++f) {
    long pos = 0;
    for (const std::size_t i : split.test_indices[f]) pos += ds.labels[i];
    CHECK(pos >= 590);
    CHECK(pos <= 610);
  }
}

TEST_CASE("fold split is a partition with disjoint train/val/test per fold") {
  SynthConfig cfg;
  cfg.n_samples = 503;  // awkward size on purpose
  cfg.dim = 2;
  cfg.target_positive_rate = 0.2;
  cfg.seed = 8;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  const FoldSplit split = split_folds(ds, 4, 0.125, 99);

  std::set<std::size_t> all_test;
  for (std::size_t f = 0; f < split.n_folds; ++f) {
    std::set<std::size_t> fold_members;
    for (const auto& set :
         {split.train_indices[f], split.val_indices[f], split.test_indices[f]}) {
      for (const std::size_t i : set) {
        CHECK(fold_members.insert(i).second);  // pairwise disjoint
      }
    }
    CHECK(fold_members.size() == ds.n());  // covers every sample
    for (const std::size_t i : split.test_indices[f]) {
      CHECK(all_test.insert(i).second);  // test folds never overlap
      CHECK(split.assignments[i] == f);
    }
    const double expected =
        0.125 * static_cast<double>(ds.n() - split.test_indices[f].size());
    CHECK(std::abs(static_cast<double>(split.val_indices[f].size()) - expected) <=
          1.0);
  }
  CHECK(all_test.size() == ds.n());
}

TEST_CASE("split is deterministic in the seed") {
  SynthConfig cfg;
  cfg.n_samples = 200;
  cfg.dim = 2;
  cfg.target_positive_rate = 0.3;
  cfg.seed = 1;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  CHECK(split_folds(ds, 5, 0.125, 7).assignments ==
        split_folds(ds, 5, 0.125, 7).assignments);
  CHECK(split_folds(ds, 5, 0.125, 7).assignments !=
        split_folds(ds, 5, 0.125, 8).assignments);
}

TEST_CASE("split rejects datasets without enough minority samples") {
  EmbeddingDataset ds;
  ds.dim = 1;
  for (int i = 0; i < 20; ++i) {
    ds.ids.push_back("s" + std::to_string(i));
    ds.labels.push_back(i < 3 ? 1 : 0);  // 3 positives, 5 folds wanted
    ds.embeddings.push_back(static_cast<double>(i));
  }
  CHECK(thrown_message([&] { split_folds(ds, 5, 0.125, 0); })
            .find("stratification") != std::string::npos);
}

TEST_CASE("fold split json round trip reproduces the derived sets") {
  SynthConfig cfg;
  cfg.n_samples = 300;
  cfg.dim = 2;
  cfg.target_positive_rate = 0.25;
  cfg.seed = 17;
  const EmbeddingDataset ds = generate_synthetic(cfg);
  const FoldSplit split = split_folds(ds, 3, 0.2, 55);
  const FoldSplit back =
      fold_split_from_json(fold_split_to_json(split), ds, 0.2, 55);
  CHECK(back.n_folds == split.n_folds);
  CHECK(back.assignments == split.assignments);
  CHECK(back.train_indices == split.train_indices);
  CHECK(back.val_indices == split.val_indices);
  CHECK(back.test_indices == split.test_indices);
}

TEST_CASE("subset gathers rows in the given order") {
  EmbeddingDataset ds;
  ds.dim = 2;
  for (int i = 0; i < 4; ++i) {
    ds.ids.push_back("s" + std::to_string(i));
    ds.labels.push_back(i % 2);
    ds.embeddings.push_back(i);
    ds.embeddings.push_back(10.0 + i);
  }
  const std::vector<std::size_t> idx{3, 1};
  const EmbeddingDataset sub = subset(ds, idx);
  CHECK(sub.n() == 2);
  CHECK(sub.ids == std::vector<std::string>{"s3", "s1"});
  CHECK(sub.labels == std::vector<int>{1, 1});
  CHECK(sub.embeddings == std::vector<double>{3.0, 13.0, 1.0, 11.0});
}

TEST_CASE("dataset validation catches structural violations") {
  EmbeddingDataset ds;
  ds.dim = 1;
  ds.ids = {"a"};
  ds.labels = {2};
  ds.embeddings = {0.0};
  CHECK_THROWS_AS(ds.validate(), std::runtime_error);
  ds.labels = {1};
  ds.embeddings = {std::nan("")};
  CHECK_THROWS_AS(ds.validate(), std::runtime_error);
}
