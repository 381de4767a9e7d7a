#include "test_util.hpp"

#include <set>
#include <sstream>

using namespace relife;
using namespace relife::testing;

namespace {

FeatureVector fv(int id, int cat = 1) { return FeatureVector{{id, cat}}; }

Schema two_field_schema() {
  Schema s;
  s.fields = {{"item_id", 50}, {"category", 5}};
  return s;
}

std::string record(int user, int m_labels = 3) {
  nlohmann::json j;
  j["user_id"] = user;
  j["history"] = {{{1, 1}, {2, 1}, {3, 2}}, {{4, 2}, {5, 3}, {6, 3}}};
  j["feedback"] = {{1, 0, 0}, {0, 0, 1}};
  j["candidate"] = {{7, 1}, {8, 2}, {9, 4}};
  j["labels"] = std::vector<int>(static_cast<std::size_t>(m_labels), 0);
  j["list_timestamps"] = {10, 20};
  return j.dump();
}

}  // namespace

// ---------------------------------------------------------------------------
// load_dataset

TEST(LoadDataset, TwoRecordsInFileOrder) {
  std::stringstream in(record(7) + "\n" + record(3) + "\n");
  const auto data = read_dataset(in, two_field_schema());
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].user_id, 7);
  EXPECT_EQ(data[1].user_id, 3);
  EXPECT_EQ(data[0].history[1][2], fv(6, 3));
}

TEST(LoadDataset, EmptyFileGivesEmptyList) {
  std::stringstream in("");
  EXPECT_TRUE(read_dataset(in, two_field_schema()).empty());
}

TEST(LoadDataset, LabelLengthMismatchNamesLineAndField) {
  std::stringstream in(record(1) + "\n" + record(2, 4) + "\n");
  try {
    read_dataset(in, two_field_schema());
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("labels"), std::string::npos) << msg;
  }
}

TEST(LoadDataset, MalformedJsonCarriesLineNumber) {
  std::stringstream in(record(1) + "\n{not json\n");
  try {
    read_dataset(in, two_field_schema());
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadDataset, OutOfVocabularyIdRejected) {
  Schema small = two_field_schema();
  small.fields[0].vocab = 5;
  std::stringstream in(record(1));
  EXPECT_THROW(read_dataset(in, small), DatasetError);
}

TEST(LoadDataset, WriteThenReadRoundTrips) {
  std::mt19937_64 rng(1);
  ModelConfig cfg = tiny_config();
  std::vector<Sample> data = {random_sample(cfg, rng, 1), random_sample(cfg, rng, 2)};
  std::stringstream buf;
  write_dataset(buf, data);
  Schema schema;
  schema.fields = {{"a", cfg.vocab_sizes[0]}, {"b", cfg.vocab_sizes[1]}};
  const auto back = read_dataset(buf, schema);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].history, data[i].history);
    EXPECT_EQ(back[i].feedback, data[i].feedback);
    EXPECT_EQ(back[i].candidate, data[i].candidate);
    EXPECT_EQ(back[i].labels, data[i].labels);
    EXPECT_EQ(back[i].list_timestamps, data[i].list_timestamps);
  }
}

TEST(Schema, RejectsVocabularyWithoutRealIds) {
  EXPECT_THROW(schema_from_json(nlohmann::json::parse(R"({"fields":[{"name":"x","vocab":1}]})")), DatasetError);
}

// ---------------------------------------------------------------------------
// validate_sample

TEST(ValidateSample, ConformingSampleIsOk) {
  std::mt19937_64 rng(2);
  const ModelConfig cfg = tiny_config();
  EXPECT_TRUE(validate_sample(random_sample(cfg, rng), cfg).empty());
}

TEST(ValidateSample, NonBinaryFeedbackReported) {
  std::mt19937_64 rng(2);
  const ModelConfig cfg = tiny_config();
  Sample s = random_sample(cfg, rng);
  s.feedback[0][1] = 2;
  const auto v = validate_sample(s, cfg);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(std::find(v.begin(), v.end(), "feedback not binary"), v.end());
}

TEST(ValidateSample, WrongListCountReported) {
  std::mt19937_64 rng(2);
  ModelConfig big = tiny_config();
  big.N = 5;
  const Sample s = random_sample(big, rng);
  const auto v = validate_sample(s, tiny_config());
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v.front().find("history list count"), std::string::npos);
}

TEST(ValidateSample, AcceptsEveryGeneratedSample) {
  clicksim::SynthConfig sc;
  sc.n_users = 50;
  const auto ds = clicksim::synth_generate(sc);
  ModelConfig cfg;
  cfg.vocab_sizes = ds.schema.vocab_sizes();
  for (const auto& s : ds.samples) EXPECT_TRUE(validate_sample(s, cfg).empty());
}

// ---------------------------------------------------------------------------
// split_by_feedback

TEST(SplitByFeedback, TwoByTwoExample) {
  const ItemGrid h = {{fv(11), fv(12)}, {fv(21), fv(22)}};
  const FeedbackGrid f = {{1, 0}, {0, 1}};
  const SplitHistory s = split_by_feedback(h, f, 3);
  EXPECT_EQ(s.pos_items, (std::vector<FeatureVector>{fv(11), fv(22), pad_item(2)}));
  EXPECT_EQ(s.neg_items, (std::vector<FeatureVector>{fv(12), fv(21), pad_item(2)}));
  EXPECT_EQ(s.pos_mask, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(s.neg_mask, (std::vector<bool>{true, true, false}));
}

TEST(SplitByFeedback, AllZeroFeedbackLeavesPositivesPadded) {
  const ItemGrid h = {{fv(1), fv(2)}};
  const SplitHistory s = split_by_feedback(h, {{0, 0}}, 2);
  EXPECT_EQ(s.pos_items, (std::vector<FeatureVector>{pad_item(2), pad_item(2)}));
  EXPECT_EQ(s.pos_mask, (std::vector<bool>{false, false}));
}

TEST(SplitByFeedback, TruncationKeepsMostRecentPositives) {
  // 7 clicks across two lists, oldest first: 1..4 then 5..7.
  const ItemGrid h = {{fv(1), fv(2), fv(3), fv(4)}, {fv(5), fv(6), fv(7), fv(8)}};
  const FeedbackGrid f = {{1, 1, 1, 1}, {1, 1, 1, 0}};
  const SplitHistory s = split_by_feedback(h, f, 4);
  EXPECT_EQ(s.pos_items, (std::vector<FeatureVector>{fv(4), fv(5), fv(6), fv(7)}));
  EXPECT_EQ(s.pos_mask, std::vector<bool>(4, true));
}

TEST(SplitByFeedback, SampleOverloadUsesTimestamps) {
  std::mt19937_64 rng(3);
  const ModelConfig cfg = tiny_config();
  Sample s = random_sample(cfg, rng);
  s.feedback = {{1, 0, 0}, {1, 0, 0}};
  s.list_timestamps = {50, 10};  // list 1 is older
  const SplitHistory split = split_by_feedback(s, 2);
  EXPECT_EQ(split.pos_items[0], s.history[1][0]);
  EXPECT_EQ(split.pos_items[1], s.history[0][0]);
}

TEST(SplitByFeedback, ShapeMismatchThrows) {
  EXPECT_THROW(split_by_feedback({{fv(1), fv(2)}}, {{1}}, 2), std::invalid_argument);
}

TEST(SplitByFeedback, MaskCountsMatchFeedbackCounts) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig cfg = tiny_config();
    cfg.N = 1 + static_cast<int>(rng() % 4);
    cfg.M = 1 + static_cast<int>(rng() % 5);
    const int L = 1 + static_cast<int>(rng() % 8);
    const Sample s = random_sample(cfg, rng);
    int pos = 0, neg = 0;
    for (const auto& row : s.feedback) {
      for (int f : row) (f ? pos : neg) += 1;
    }
    const SplitHistory split = split_by_feedback(s, L);
    EXPECT_EQ(std::count(split.pos_mask.begin(), split.pos_mask.end(), true), std::min(pos, L));
    EXPECT_EQ(std::count(split.neg_mask.begin(), split.neg_mask.end(), true), std::min(neg, L));
    for (std::size_t k = 0; k < split.pos_items.size(); ++k) {
      if (!split.pos_mask[k]) {
        EXPECT_EQ(split.pos_items[k], pad_item(2));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// flatten_chronological

TEST(Flatten, AscendingTimestampsKeepOrder) {
  const ItemGrid h = {{fv(11), fv(12)}, {fv(21), fv(22)}};
  const FlatHistory f = flatten_chronological(h, {{1, 0}, {0, 1}}, {10, 20});
  EXPECT_EQ(f.items, (std::vector<FeatureVector>{fv(11), fv(12), fv(21), fv(22)}));
  EXPECT_EQ(f.feedback, (std::vector<int>{1, 0, 0, 1}));
}

TEST(Flatten, DescendingTimestampsSwapLists) {
  const ItemGrid h = {{fv(11), fv(12)}, {fv(21), fv(22)}};
  const FlatHistory f = flatten_chronological(h, {{1, 0}, {0, 1}}, {20, 10});
  EXPECT_EQ(f.items, (std::vector<FeatureVector>{fv(21), fv(22), fv(11), fv(12)}));
}

TEST(Flatten, SingleListIsIdentity) {
  const ItemGrid h = {{fv(1), fv(2), fv(3)}};
  EXPECT_EQ(flatten_chronological(h, {{0, 1, 0}}, {5}).items, h[0]);
}

TEST(Flatten, SplitRealEntriesArePermutationOfFlatItems) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ModelConfig cfg = tiny_config();
    cfg.vocab_sizes = {1000, 1000};
    const Sample s = random_sample(cfg, rng);
    const FlatHistory flat = flatten_chronological(s);
    const SplitHistory split = split_by_feedback(s, cfg.N * cfg.M);
    std::multiset<std::vector<int>> a, b;
    for (const auto& it : flat.items) a.insert(it.field_values);
    for (std::size_t k = 0; k < split.pos_items.size(); ++k) {
      if (split.pos_mask[k]) b.insert(split.pos_items[k].field_values);
      if (split.neg_mask[k]) b.insert(split.neg_items[k].field_values);
    }
    EXPECT_EQ(a, b);
  }
}

TEST(Flatten, IsABijectionOfGridPositions) {
  // Tag every item with its grid position, then check each appears exactly once.
  ItemGrid h;
  FeedbackGrid f;
  for (int t = 0; t < 3; ++t) {
    h.emplace_back();
    f.emplace_back();
    for (int j = 0; j < 4; ++j) {
      h.back().push_back(fv(10 * t + j));
      f.back().push_back(0);
    }
  }
  const FlatHistory flat = flatten_chronological(h, f, {30, 10, 20});
  std::set<int> seen;
  for (const auto& it : flat.items) seen.insert(it.field_values[0]);
  EXPECT_EQ(seen.size(), 12u);
  // oldest list (index 1) first
  EXPECT_EQ(flat.items[0], fv(10));
  EXPECT_EQ(flat.items[4], fv(20));
  EXPECT_EQ(flat.items[8], fv(0));
}

TEST(RestrictHistory, KeepsMostRecentLists) {
  std::mt19937_64 rng(6);
  ModelConfig cfg = tiny_config();
  cfg.N = 3;
  Sample s = random_sample(cfg, rng);
  s.list_timestamps = {30, 10, 20};
  const Sample r = restrict_history(s, 2);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0], s.history[2]);
  EXPECT_EQ(r.history[1], s.history[0]);
  EXPECT_EQ(r.list_timestamps, (std::vector<std::int64_t>{20, 30}));
}
