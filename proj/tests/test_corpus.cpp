// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mdd/cli.hpp"
#include "mdd/corpus.hpp"
#include "mdd/synth.hpp"

using namespace mdd;

namespace {

DatasetManifest small_manifest(int records, int captions_per_record = 1) {
  DatasetManifest m;
  for (int i = 0; i < records; ++i) {
    ManifestRecord rec;
    rec.motion_path = "clips/m" + std::to_string(i) + ".mclp";
    for (int c = 0; c < captions_per_record; ++c) {
      CaptionEntry cap;
      cap.text = "caption " + std::to_string(i) + " variant " + std::to_string(c);
      cap.source = c == 0 ? "curated" : "wild";
      rec.captions.push_back(cap);
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

class FixedProbModel : public NextTokenModel {
 public:
  explicit FixedProbModel(std::vector<double> probs) : probs_(std::move(probs)) {}
  double prob(const std::vector<std::string>&, size_t i) const override { return probs_.at(i); }

 private:
  std::vector<double> probs_;
};

}  // namespace

TEST_CASE("manifest JSONL round trip is byte-identical") {
  DatasetManifest m = small_manifest(5, 2);
  m.records[1].captions[0].mm_dist = 3.25;
  m.records[3].uncaptioned = true;
  const std::string once = m.to_jsonl();
  const DatasetManifest back = DatasetManifest::from_jsonl(once);
  CHECK(back.to_jsonl() == once);
}

TEST_CASE("manifest rejects duplicate motion paths") {
  DatasetManifest m = small_manifest(2);
  m.records[1].motion_path = m.records[0].motion_path;
  CHECK_THROWS_AS(m.validate(), DataError);
}

TEST_CASE("filter_captions with infinite tau removes nothing") {
  DatasetManifest m = small_manifest(4, 3);
  auto motion_fn = [](const ManifestRecord&) { return Eigen::VectorXd::Zero(3).eval(); };
  auto text_fn = [](const std::string&) { return Eigen::VectorXd::Ones(3).eval(); };
  const int removed =
      filter_captions(m, motion_fn, text_fn, std::numeric_limits<double>::infinity());
  CHECK(removed == 0);
  for (const auto& rec : m.records) CHECK(rec.captions.size() == 3);
}

TEST_CASE("filter_captions with tau=0 and non-identical features removes everything") {
  DatasetManifest m = small_manifest(3, 2);
  auto motion_fn = [](const ManifestRecord&) { return Eigen::VectorXd::Zero(3).eval(); };
  auto text_fn = [](const std::string&) { return Eigen::VectorXd::Ones(3).eval(); };
  const int removed = filter_captions(m, motion_fn, text_fn, 0.0);
  CHECK(removed == 6);
  for (const auto& rec : m.records) {
    CHECK(rec.captions.empty());
    CHECK(rec.uncaptioned);  // flagged, not deleted
  }
  CHECK(m.records.size() == 3);
}

TEST_CASE("filter_captions drops exactly the caption beyond tau on the fixture") {
  DatasetManifest m = small_manifest(1, 3);
  auto motion_fn = [](const ManifestRecord&) { return Eigen::VectorXd::Zero(1).eval(); };
  // Hand-set distances 3, 4, 5 by caption text.
  auto text_fn = [](const std::string& text) {
    Eigen::VectorXd v(1);
    if (text.find("variant 0") != std::string::npos) v[0] = 3.0;
    else if (text.find("variant 1") != std::string::npos) v[0] = 4.0;
    else v[0] = 5.0;
    return v;
  };
  const int removed = filter_captions(m, motion_fn, text_fn, 4.5);
  CHECK(removed == 1);
  REQUIRE(m.records[0].captions.size() == 2);
  CHECK(m.records[0].captions[0].mm_dist == doctest::Approx(3.0));
  CHECK(m.records[0].captions[1].mm_dist == doctest::Approx(4.0));

  // Idempotent: the second pass removes nothing.
  DatasetManifest copy = m;
  CHECK(filter_captions(copy, motion_fn, text_fn, 4.5) == 0);
  CHECK(copy.to_jsonl() == m.to_jsonl());
}

TEST_CASE("caption_nll of a uniform model is log V") {
  UniformTokenModel model(50);
  const CaptionNll r = caption_nll({"a", "b", "c"}, model);
  CHECK(r.value == doctest::Approx(std::log(50.0)).epsilon(1e-12));
  CHECK_FALSE(r.zero_probability);
}

TEST_CASE("caption_nll of an oracle model is zero") {
  FixedProbModel model({1.0, 1.0});
  const CaptionNll r = caption_nll({"x", "y"}, model);
  CHECK(r.value == 0.0);
}

TEST_CASE("caption_nll matches the hand-computed three-token fixture") {
  FixedProbModel model({0.5, 0.25, 0.1});
  const CaptionNll r = caption_nll({"t1", "t2", "t3"}, model);
  const double expected = -(std::log(0.5) + std::log(0.25) + std::log(0.1)) / 3.0;
  CHECK(r.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("caption_nll flags zero probability with the +inf sentinel") {
  FixedProbModel model({0.5, 0.0});
  const CaptionNll r = caption_nll({"t1", "t2"}, model);
  CHECK(r.zero_probability);
  CHECK(std::isinf(r.value));
  CHECK_THROWS_AS(caption_nll({}, model), DataError);
}

TEST_CASE("split_and_batch with ratio (1,0) puts every record in train") {
  DatasetManifest m = small_manifest(10);
  Rng rng(3);
  ExampleMaterializer one = [](const ManifestRecord& rec) {
    TrainingExample ex;
    ex.u0.codebook_size = 4;
    ex.u0.tokens = {0, 1, 2};
    ex.source = rec.captions.empty() ? "curated" : rec.captions[0].source;
    return std::vector<TrainingExample>{ex};
  };
  const SplitBatches out = split_and_batch(m, {1.0, 0.0}, 4, rng, one);
  CHECK(out.train_records == 10);
  CHECK(out.eval_records == 0);
  for (const auto& rec : m.records) CHECK(rec.split == "train");
}

TEST_CASE("split_and_batch: 100 records at batch 16 gives 7 batches, last of 4") {
  DatasetManifest m = small_manifest(100);
  Rng rng(5);
  ExampleMaterializer one = [](const ManifestRecord&) {
    TrainingExample ex;
    ex.u0.codebook_size = 4;
    ex.u0.tokens = {0};
    return std::vector<TrainingExample>{ex};
  };
  const SplitBatches out = split_and_batch(m, {1.0}, 16, rng, one);
  REQUIRE(out.train_batches.size() == 7);
  for (int b = 0; b < 6; ++b) CHECK(out.train_batches[b].size() == 16);
  CHECK(out.train_batches[6].size() == 4);
}

TEST_CASE("split_and_batch is deterministic per seed and interleaves sources") {
  DatasetManifest m = small_manifest(40, 2);  // curated + wild per record
  ExampleMaterializer caps = [](const ManifestRecord& rec) {
    std::vector<TrainingExample> out;
    for (const auto& cap : rec.captions) {
      TrainingExample ex;
      ex.u0.codebook_size = 4;
      ex.u0.tokens = {0, 1};
      ex.source = cap.source;
      out.push_back(std::move(ex));
    }
    return out;
  };
  Rng r1(7), r2(7), r3(8);
  DatasetManifest m1 = m, m2 = m, m3 = m;
  const SplitBatches a = split_and_batch(m1, {0.8, 0.2}, 8, r1, caps);
  const SplitBatches b = split_and_batch(m2, {0.8, 0.2}, 8, r2, caps);
  const SplitBatches c = split_and_batch(m3, {0.8, 0.2}, 8, r3, caps);
  CHECK(a.train_records == 32);
  CHECK(a.eval_records == 8);
  REQUIRE(a.train_batches.size() == b.train_batches.size());
  bool same = true, differs = false;
  for (size_t i = 0; i < a.train_batches.size(); ++i)
    for (size_t j = 0; j < a.train_batches[i].size(); ++j) {
      same = same && a.train_batches[i][j].source == b.train_batches[i][j].source;
      if (i < c.train_batches.size() && j < c.train_batches[i].size())
        differs = differs || a.train_batches[i][j].source != c.train_batches[i][j].source;
    }
  CHECK(same);
  // First batch mixes curated and wild examples (interleaving smoke check).
  int curated = 0, wild = 0;
  for (const auto& ex : a.train_batches[0]) (ex.source == "curated" ? curated : wild)++;
  CHECK(curated > 0);
  CHECK(wild > 0);
  (void)differs;
}

TEST_CASE("split_and_batch rejects bad ratios and empty manifests") {
  DatasetManifest empty;
  Rng rng(9);
  ExampleMaterializer one = [](const ManifestRecord&) { return std::vector<TrainingExample>{}; };
  CHECK_THROWS_AS(split_and_batch(empty, {1.0}, 4, rng, one), DataError);
  DatasetManifest m = small_manifest(4);
  CHECK_THROWS_AS(split_and_batch(m, {0.5, 0.2}, 4, rng, one), DataError);
}

TEST_CASE("cli: missing config file exits 1 naming the path") {
  const int code = cli_dispatch({"train-vq", "--config", "nonexistent_config.json", "--data",
                                 "nowhere", "--out", "nowhere_out"});
  CHECK(code == 1);
}

TEST_CASE("cli: usage errors exit 1") {
  CHECK(cli_dispatch({"no-such-command"}) == 1);
  CHECK(cli_dispatch({}) == 1);
  CHECK(cli_dispatch({"generate"}) == 1);  // missing required flags
}

TEST_CASE("cli: data errors exit 2") {
  std::ofstream cfg("exit2_config.json");
  cfg << "{}\n";
  cfg.close();
  // Config exists but the data directory does not.
  const int code = cli_dispatch({"train-vq", "--config", "exit2_config.json", "--data",
                                 "no_such_dir", "--out", "exit2_out"});
  CHECK(code == 2);
  std::remove("exit2_config.json");
}
