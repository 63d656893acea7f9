#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "error_matchers.hpp"
#include "fixtures.hpp"
#include "ragrade/vindex.hpp"

using namespace ragrade;
using ragrade::testing::brute_force_top_k;
using ragrade::testing::code_of;
using ragrade::testing::TempDir;

namespace {

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dims) {
  std::normal_distribution<double> nd;
  std::vector<double> v(dims);
  for (auto& x : v) x = nd(rng);
  return EmbeddingVector::normalized(std::move(v));
}

Document make_doc(std::string id, DocType type, EmbeddingVector v) {
  Document d;
  d.id = std::move(id);
  d.doc_type = type;
  d.text = "text of " + d.id;
  d.source_name = d.id + ".md";
  if (type == DocType::approved_feedback) d.provenance = Provenance{"s", "r", 1};
  d.embedding = std::move(v);
  return d;
}

constexpr std::size_t kDims = 32;

}  // namespace

TEST(VectorIndex, EmptyIndexReturnsNothing) {
  VectorIndex index(kDims);
  std::mt19937_64 rng(1);
  EXPECT_TRUE(index.query(random_unit(rng, kDims), 5).empty());
}

TEST(VectorIndex, SelfRetrieval) {
  VectorIndex index(kDims);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10; ++i) index.upsert(make_doc("d" + std::to_string(i), DocType::rubric, random_unit(rng, kDims)));
  const auto a = index.find("d4");
  const auto r = index.query(*a->embedding, 5);
  ASSERT_FALSE(r.empty());
  EXPECT_EQ(r[0].doc_id, "d4");
  EXPECT_NEAR(r[0].similarity, 1.0, 1e-9);
  EXPECT_EQ(r[0].rank, 1u);
}

TEST(VectorIndex, UpsertReplacesWithoutGrowing) {
  VectorIndex index(kDims);
  std::mt19937_64 rng(3);
  index.upsert(make_doc("a", DocType::rubric, random_unit(rng, kDims)));
  auto second = make_doc("a", DocType::rubric, random_unit(rng, kDims));
  second.text = "replacement";
  index.upsert(second);
  EXPECT_EQ(index.size(), 1u);
  EXPECT_EQ(index.find("a")->embedding, second.embedding);
  EXPECT_EQ(index.find("a")->text, "replacement");
}

TEST(VectorIndex, RejectsWrongDimsAndMissingEmbedding) {
  VectorIndex index(256);
  std::mt19937_64 rng(4);
  EXPECT_EQ(code_of([&] { index.upsert(make_doc("a", DocType::rubric, random_unit(rng, 128))); }),
            ErrorCode::DimensionMismatch);
  auto d = make_doc("b", DocType::rubric, random_unit(rng, 256));
  d.embedding.reset();
  EXPECT_EQ(code_of([&] { index.upsert(d); }), ErrorCode::MissingEmbedding);
  EXPECT_EQ(code_of([&] { index.query(random_unit(rng, 128), 5); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(index.size(), 0u);
}

TEST(VectorIndex, ZeroKIsInvalid) {
  VectorIndex index(kDims);
  std::mt19937_64 rng(5);
  EXPECT_EQ(code_of([&] { index.query(random_unit(rng, kDims), 0); }), ErrorCode::InvalidInput);
}

TEST(VectorIndex, MatchesBruteForceOnRandomVectors) {
  std::mt19937_64 rng(6);
  VectorIndex index(kDims);
  std::vector<Document> docs;
  const std::array types = {DocType::rubric, DocType::exemplar_essay, DocType::instructor_feedback,
                            DocType::approved_feedback};
  for (int i = 0; i < 100; ++i) {
    auto d = make_doc("doc" + std::to_string(i), types[rng() % 4], random_unit(rng, kDims));
    index.upsert(d);
    docs.push_back(d);
  }
  for (int q = 0; q < 100; ++q) {
    const auto v = random_unit(rng, kDims);
    const std::size_t k = 1 + rng() % 12;
    QueryFilter f;
    if (q % 2) f.allowed_doc_types = {types[q % 4]};
    const auto got = index.query(v, k, f);
    EXPECT_EQ(got, brute_force_top_k(docs, v, k, f));
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].rank, i + 1);
      if (i) EXPECT_LE(got[i].similarity, got[i - 1].similarity);
      EXPECT_TRUE(f.admits(got[i].doc_type));
    }
  }
}

TEST(VectorIndex, TiesBreakByAscendingId) {
  VectorIndex index(4);
  const auto v = EmbeddingVector::from_unit({1, 0, 0, 0});
  for (const char* id : {"m", "c", "x", "a"}) index.upsert(make_doc(id, DocType::rubric, v));
  const auto r = index.query(v, 3);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].doc_id, "a");
  EXPECT_EQ(r[1].doc_id, "c");
  EXPECT_EQ(r[2].doc_id, "m");
}

TEST(VectorIndex, FilterLimitsTypes) {
  std::mt19937_64 rng(7);
  VectorIndex index(kDims);
  for (int i = 0; i < 3; ++i) index.upsert(make_doc("r" + std::to_string(i), DocType::rubric, random_unit(rng, kDims)));
  for (int i = 0; i < 3; ++i) {
    index.upsert(make_doc("e" + std::to_string(i), DocType::exemplar_essay, random_unit(rng, kDims)));
  }
  const auto r = index.query(random_unit(rng, kDims), 5, QueryFilter{{DocType::exemplar_essay}});
  ASSERT_EQ(r.size(), 3u);
  for (const auto& x : r) EXPECT_EQ(x.doc_type, DocType::exemplar_essay);
  EXPECT_EQ(index.count(DocType::rubric), 3u);
}

TEST(VectorIndex, Remove) {
  std::mt19937_64 rng(8);
  VectorIndex index(kDims);
  EXPECT_FALSE(index.remove("a"));
  const auto d = make_doc("a", DocType::rubric, random_unit(rng, kDims));
  index.upsert(d);
  EXPECT_TRUE(index.remove("a"));
  EXPECT_FALSE(index.remove("a"));
  EXPECT_TRUE(index.query(*d.embedding, 5).empty());
}

TEST(VectorIndex, PersistEmptyAndLoad) {
  TempDir dir;
  VectorIndex index(kDims);
  index.save(dir / "index.jsonl");
  EXPECT_EQ(VectorIndex::load(dir / "index.jsonl", kDims)->size(), 0u);
}

TEST(VectorIndex, PersistedQueriesReplayIdentically) {
  TempDir dir;
  std::mt19937_64 rng(9);
  VectorIndex index(kDims);
  for (int i = 0; i < 50; ++i) {
    index.upsert(make_doc("d" + std::to_string(i), i % 2 ? DocType::rubric : DocType::approved_feedback,
                          random_unit(rng, kDims)));
  }
  index.save(dir / "index.jsonl");
  const auto loaded = VectorIndex::load(dir / "index.jsonl", kDims);
  ASSERT_EQ(loaded->size(), 50u);
  for (int q = 0; q < 20; ++q) {
    const auto v = random_unit(rng, kDims);
    EXPECT_EQ(loaded->query(v, 5), index.query(v, 5));
  }
  EXPECT_EQ(loaded->documents(), index.documents());
}

TEST(VectorIndex, OpenPersistsEveryWrite) {
  TempDir dir;
  std::mt19937_64 rng(10);
  {
    auto index = VectorIndex::open(dir / "index.jsonl", kDims);
    index->upsert(make_doc("a", DocType::rubric, random_unit(rng, kDims)));
    index->upsert(make_doc("b", DocType::rubric, random_unit(rng, kDims)));
    index->remove("a");
  }
  const auto reopened = VectorIndex::open(dir / "index.jsonl", kDims);
  ASSERT_EQ(reopened->size(), 1u);
  EXPECT_TRUE(reopened->find("b").has_value());
}

TEST(VectorIndex, TruncatedFileIsCorrupt) {
  TempDir dir;
  std::mt19937_64 rng(11);
  VectorIndex index(kDims);
  for (int i = 0; i < 5; ++i) index.upsert(make_doc("d" + std::to_string(i), DocType::rubric, random_unit(rng, kDims)));
  const auto path = dir / "index.jsonl";
  index.save(path);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full / 2);
  EXPECT_EQ(code_of([&] { VectorIndex::load(path, kDims); }), ErrorCode::CorruptIndex);
}

TEST(VectorIndex, TamperedRecordIsCorrupt) {
  TempDir dir;
  std::mt19937_64 rng(12);
  VectorIndex index(kDims);
  index.upsert(make_doc("d0", DocType::rubric, random_unit(rng, kDims)));
  const auto path = dir / "index.jsonl";
  index.save(path);
  auto text = read_file(path);
  text.replace(text.find("text of d0"), 10, "text of dX");
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
  EXPECT_EQ(code_of([&] { VectorIndex::load(path, kDims); }), ErrorCode::CorruptIndex);
}

TEST(VectorIndex, LoadRejectsDimensionChange) {
  TempDir dir;
  std::mt19937_64 rng(13);
  VectorIndex index(kDims);
  index.upsert(make_doc("d0", DocType::rubric, random_unit(rng, kDims)));
  index.save(dir / "index.jsonl");
  EXPECT_THROW(VectorIndex::load(dir / "index.jsonl", 64), Error);
}

TEST(RanksBefore, OrdersBySimilarityThenId) {
  EXPECT_TRUE(ranks_before(0.9, "z", 0.8, "a"));
  EXPECT_TRUE(ranks_before(0.8, "a", 0.8, "b"));
  EXPECT_FALSE(ranks_before(0.8, "b", 0.8, "a"));
  EXPECT_FALSE(ranks_before(0.8, "a", 0.8, "a"));
}
