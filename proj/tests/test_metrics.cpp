#include "test_util.hpp"

#include <cmath>

using namespace relife;
using namespace relife::testing;

namespace {

double ap_oracle(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  std::size_t relevant = 0;
  for (int y : labels) relevant += static_cast<std::size_t>(y);
  if (relevant == 0) return 0;
  double total = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    if (labels[order[k - 1]] != 1) continue;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j) hits += static_cast<std::size_t>(labels[order[j]]);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(std::min(K, relevant));
}

double ndcg_oracle(const Ranking& order, const std::vector<int>& labels, std::size_t K) {
  std::size_t relevant = 0;
  for (int y : labels) relevant += static_cast<std::size_t>(y);
  double dcg = 0, idcg = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    dcg += labels[order[k - 1]] / std::log2(static_cast<double>(k) + 1);
    if (k <= relevant) idcg += 1 / std::log2(static_cast<double>(k) + 1);
  }
  return idcg == 0 ? 0 : dcg / idcg;
}

Ranking random_ranking(std::size_t m, std::mt19937_64& rng) {
  Ranking r(m);
  std::iota(r.begin(), r.end(), 0);
  std::shuffle(r.begin(), r.end(), rng);
  return r;
}

}  // namespace

TEST(Rerank, SortsDescendingWithStableTies) {
  EXPECT_EQ(rerank({0.1, 0.9, 0.5}), (Ranking{1, 2, 0}));
  EXPECT_EQ(rerank({0.5, 0.5, 0.7, 0.5}), (Ranking{2, 0, 1, 3}));
  EXPECT_EQ(rerank({}), Ranking{});
  EXPECT_THROW(rerank({0.1, std::nan("")}), std::invalid_argument);
}

TEST(MapAtK, HandExamples) {
  EXPECT_NEAR(map_at_k({0, 1, 2}, {1, 0, 1}, 3), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(map_at_k({0, 1, 2}, {0, 1, 1}, 1), 0.0, 1e-15);
  EXPECT_NEAR(map_at_k({2, 1, 0}, {0, 1, 1}, 2), 1.0, 1e-15);
  EXPECT_EQ(map_at_k({0, 1}, {0, 0}, 2), 0.0);
  EXPECT_THROW(map_at_k({0, 1}, {0, 1}, 3), std::invalid_argument);
  EXPECT_THROW(map_at_k({0, 1}, {0, 1}, 0), std::invalid_argument);
}

TEST(NdcgAtK, HandExamples) {
  EXPECT_NEAR(ndcg_at_k({0, 1}, {0, 1}, 2), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(ndcg_at_k({1, 0}, {0, 1}, 2), 1.0, 1e-15);
  EXPECT_EQ(ndcg_at_k({0, 1, 2}, {0, 0, 0}, 3), 0.0);
}

TEST(Metrics, RandomListsMatchOracles) {
  std::mt19937_64 rng(81);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng() % 12;
    std::vector<int> labels(m);
    for (auto& y : labels) y = static_cast<int>(rng() % 2);
    const Ranking order = random_ranking(m, rng);
    const std::size_t K = 1 + rng() % m;
    const double ap = map_at_k(order, labels, K), nd = ndcg_at_k(order, labels, K);
    ASSERT_NEAR(ap, ap_oracle(order, labels, K), 1e-12);
    ASSERT_NEAR(nd, ndcg_oracle(order, labels, K), 1e-12);
    ASSERT_GE(ap, 0.0);
    ASSERT_LE(ap, 1.0 + 1e-12);
    ASSERT_GE(nd, 0.0);
    ASSERT_LE(nd, 1.0 + 1e-12);
  }
}

TEST(Metrics, PerfectRankingScoresOne) {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 9;
    std::vector<int> labels(m);
    for (auto& y : labels) y = static_cast<int>(rng() % 2);
    labels[rng() % m] = 1;
    std::vector<double> scores(labels.begin(), labels.end());
    const Ranking order = rerank(scores);
    for (std::size_t K = 1; K <= m; ++K) {
      EXPECT_NEAR(map_at_k(order, labels, K), 1.0, 1e-12);
      EXPECT_NEAR(ndcg_at_k(order, labels, K), 1.0, 1e-12);
    }
  }
}

TEST(Metrics, InvariantUnderJointRelabelingOfPositions) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 9;
    std::vector<int> labels(m);
    std::vector<double> scores(m);
    for (std::size_t i = 0; i < m; ++i) {
      labels[i] = static_cast<int>(rng() % 2);
      scores[i] = clicksim::uniform01(rng);
    }
    const Ranking perm = random_ranking(m, rng);
    std::vector<int> labels2(m);
    std::vector<double> scores2(m);
    for (std::size_t i = 0; i < m; ++i) {
      labels2[i] = labels[perm[i]];
      scores2[i] = scores[perm[i]];
    }
    const std::size_t K = 1 + rng() % m;
    EXPECT_NEAR(map_at_k(rerank(scores), labels, K), map_at_k(rerank(scores2), labels2, K), 1e-12);
    EXPECT_NEAR(ndcg_at_k(rerank(scores), labels, K), ndcg_at_k(rerank(scores2), labels2, K), 1e-12);
    EXPECT_EQ(click_at_k_logged(rerank(scores), labels, K), click_at_k_logged(rerank(scores2), labels2, K));
  }
}

TEST(ClickAtK, LoggedCountsTopK) {
  EXPECT_EQ(click_at_k_logged({2, 0, 1}, {1, 0, 1}, 1), 1.0);
  EXPECT_EQ(click_at_k_logged({1, 0, 2}, {1, 0, 1}, 2), 1.0);
  EXPECT_EQ(click_at_k_logged({1, 0, 2}, {1, 0, 1}, 3), 2.0);
}

TEST(ClickAtK, DcmIdentityOrderReproducesLoggedAttractions) {
  clicksim::SynthConfig c;
  c.n_users = 4;
  const auto ds = clicksim::synth_generate(c);
  Ranking identity(static_cast<std::size_t>(c.list_len));
  std::iota(identity.begin(), identity.end(), 0);
  for (std::int64_t u = 0; u < 4; ++u) {
    const auto& attr = ds.list_attractions[static_cast<std::size_t>(u)].back();
    EXPECT_NEAR(click_at_k_dcm(identity, ds.sidecar, u, 5), clicksim::dcm_expected_clicks_at_k(attr, c.dcm, 5), 1e-15);
  }
  EXPECT_THROW(click_at_k_dcm(identity, ds.sidecar, 99, 5), std::invalid_argument);
}

TEST(ClickAtK, DcmPrefersAffinityOrder) {
  clicksim::SynthConfig c;
  c.n_users = 50;
  const auto ds = clicksim::synth_generate(c);
  double best = 0, worst = 0;
  for (const auto& user : ds.sidecar.users) {
    const Ranking by_aff = rerank(user.candidate_affinity);
    const Ranking reversed(by_aff.rbegin(), by_aff.rend());
    best += click_at_k_dcm(by_aff, ds.sidecar, user.user_id, 5);
    worst += click_at_k_dcm(reversed, ds.sidecar, user.user_id, 5);
  }
  EXPECT_GT(best, worst);
}

TEST(Protocol, NamesRoundTrip) {
  EXPECT_EQ(parse_protocol("dcm"), Protocol::dcm);
  EXPECT_EQ(parse_protocol(to_string(Protocol::log_replay)), Protocol::log_replay);
  EXPECT_THROW(parse_protocol("online"), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Dataset evaluation

TEST(Evaluate, OracleScorerBeatsRandomScorer) {
  clicksim::SynthConfig c;
  c.n_users = 200;
  const auto ds = clicksim::synth_generate(c);
  std::mt19937_64 rng(84);
  std::vector<std::vector<double>> oracle, random;
  for (const auto& s : ds.samples) {
    std::vector<double> o, r;
    for (int y : s.labels) {
      o.push_back(y + 0.01 * clicksim::uniform01(rng));
      r.push_back(clicksim::uniform01(rng));
    }
    oracle.push_back(o);
    random.push_back(r);
  }
  const auto a = evaluate_scores(ds.samples, oracle, Protocol::log_replay);
  const auto b = evaluate_scores(ds.samples, random, Protocol::log_replay);
  for (const char* m : {"MAP", "NDCG", "Click"}) EXPECT_GT(a.get(m, 5), b.get(m, 5)) << m;
  EXPECT_EQ(a.samples, 200u);
  EXPECT_THROW((void)a.get("MAP", 3), std::out_of_range);
}

TEST(Evaluate, DcmProtocolNeedsSidecar) {
  clicksim::SynthConfig c;
  c.n_users = 3;
  const auto ds = clicksim::synth_generate(c);
  const std::vector<std::vector<double>> scores(3, std::vector<double>(10, 0.0));
  EXPECT_THROW(evaluate_scores(ds.samples, scores, Protocol::dcm), std::invalid_argument);
  const auto r = evaluate_scores(ds.samples, scores, Protocol::dcm, {5}, &ds.sidecar);
  double want = 0;
  for (int u = 0; u < 3; ++u) {
    want += clicksim::dcm_expected_clicks_at_k(ds.list_attractions[static_cast<std::size_t>(u)].back(), c.dcm, 5);
  }
  EXPECT_NEAR(r.get("Click", 5), want / 3, 1e-15);
}

TEST(Evaluate, CutoffBeyondListLengthThrows) {
  const ModelConfig cfg = tiny_config();
  ParamRegistry params = init_params(cfg);
  std::mt19937_64 rng(85);
  const std::vector<Sample> data = {random_sample(cfg, rng)};
  EXPECT_THROW(evaluate(data, params, cfg, Protocol::log_replay, {5}), std::invalid_argument);
  const auto r = evaluate(data, params, cfg, Protocol::log_replay, {1, 3});
  EXPECT_EQ(r.values.size(), 6u);
  EXPECT_EQ(r, evaluate(data, params, cfg, Protocol::log_replay, {1, 3}));
}

TEST(Evaluate, ReportSerialization) {
  MetricsReport r;
  r.samples = 2;
  r.values = {{"MAP@5", 0.5}, {"NDCG@5", 0.25}};
  const auto j = report_to_json(r);
  EXPECT_EQ(j["protocol"], "log_replay");
  EXPECT_EQ(j["metrics"]["MAP@5"], 0.5);
  std::ostringstream os;
  write_report_csv(os, r);
  EXPECT_EQ(os.str(), "metric,value\nMAP@5,0.5\nNDCG@5,0.25\n");
}

// ---------------------------------------------------------------------------
// Similarity export

TEST(Similarity, GridIsSymmetricWithUnitDiagonal) {
  const ModelConfig cfg = tiny_config();
  ParamRegistry params = init_params(cfg);
  std::mt19937_64 rng(86);
  Sample s = random_sample(cfg, rng);
  s.labels = {1, 0, 1};
  s.feedback = {{1, 0, 0}, {0, 1, 0}};
  const SimilarityGrid g = export_pattern_similarity(s, params, cfg);
  for (std::size_t a = 0; a < 4; ++a) {
    ASSERT_TRUE(g.present[a]);
    EXPECT_DOUBLE_EQ(*g.cosine[a][a], 1.0);
    for (std::size_t b = 0; b < 4; ++b) {
      EXPECT_NEAR(*g.cosine[a][b], *g.cosine[b][a], 1e-15);
      EXPECT_LE(std::abs(*g.cosine[a][b]), 1.0 + 1e-12);
    }
  }
}

TEST(Similarity, CosineMatchesMeanEmbeddingOracle) {
  const ModelConfig cfg = tiny_config();
  ParamRegistry params = init_params(cfg);
  std::mt19937_64 rng(87);
  Sample s = random_sample(cfg, rng);
  s.labels = {1, 1, 0};
  s.feedback = {{0, 0, 1}, {0, 1, 1}};
  const SimilarityGrid g = export_pattern_similarity(s, params, cfg);
  Tape tape(false);
  const Matrix pos = encoders::embed_items(tape, {s.candidate[0], s.candidate[1]}, params, cfg).value().colwise().mean();
  const Matrix neg = encoders::embed_items(tape, {s.candidate[2]}, params, cfg).value();
  EXPECT_NEAR(*g.cosine[0][1], (pos * neg.transpose())(0, 0) / (pos.norm() * neg.norm()), 1e-12);
}

TEST(Similarity, AbsentClassesAreMarked) {
  const ModelConfig cfg = tiny_config();
  ParamRegistry params = init_params(cfg);
  std::mt19937_64 rng(88);
  Sample s = random_sample(cfg, rng);
  s.labels = {0, 0, 0};
  s.feedback = {{1, 0, 0}, {0, 0, 0}};
  const SimilarityGrid g = export_pattern_similarity(s, params, cfg);
  EXPECT_FALSE(g.present[0]);
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_FALSE(g.cosine[0][b].has_value());
    EXPECT_FALSE(g.cosine[b][0].has_value());
  }
  EXPECT_TRUE(g.cosine[1][2].has_value());
  std::ostringstream os;
  write_similarity_csv(os, g);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,pos-candidate,neg-candidate,pos-history,neg-history");
  EXPECT_NE(csv.find("pos-candidate,absent,absent,absent,absent"), std::string::npos);
  EXPECT_TRUE(similarity_to_json(g)["cosine"][0][0].is_null());
}
