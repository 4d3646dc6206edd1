#include <map>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "georel/partonomy.hpp"
#include "support.hpp"

using namespace georel;

namespace {

using Touches = std::vector<std::pair<UserId, NodeId>>;

// Random forest of depth 3 (layers 3..0) with random user touches on leaves.
struct RandomFootprints {
  Partonomy p;
  std::vector<NodeId> leaves;
  std::size_t users{0};
  Touches touches;
};

RandomFootprints random_footprints(std::mt19937_64& rng) {
  RandomFootprints r;
  std::uniform_int_distribution<int> fan(1, 3);
  int serial = 0;
  auto name = [&] { return "n" + std::to_string(serial++); };
  for (int a = fan(rng); a > 0; --a) {
    const NodeId country = r.p.add_node(name(), "", 3);
    for (int b = fan(rng); b > 0; --b) {
      const NodeId state = r.p.add_node(name(), "", 2, country);
      for (int c = fan(rng); c > 0; --c) {
        const NodeId city = r.p.add_node(name(), "", 1, state);
        for (int d = fan(rng) + 1; d > 0; --d) r.leaves.push_back(r.p.add_node(name(), "", 0, city));
      }
    }
  }
  r.users = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
  std::uniform_int_distribution<std::size_t> leaf(0, r.leaves.size() - 1);
  std::uniform_int_distribution<int> count(0, 5);
  for (std::size_t u = 0; u < r.users; ++u)
    for (int k = count(rng); k > 0; --k) r.touches.emplace_back(UserId{u}, r.leaves[leaf(rng)]);
  return r;
}

// Closure of each user's touches under the parent relation.
std::vector<std::set<NodeId>> closure(const Partonomy& p, std::size_t users, const Touches& touches) {
  std::vector<std::set<NodeId>> out(users);
  for (auto [u, n] : touches)
    for (std::optional<NodeId> x = n; x; x = p.node(*x).parent) out[u.index()].insert(*x);
  return out;
}

// Ratio of shared to total information among g's children, from sets.
double sim_inf_oracle(const Partonomy& p, const std::set<NodeId>& a, const std::set<NodeId>& b, NodeId g) {
  double shared = 0.0, total = 0.0;
  for (NodeId c : p.node(g).children) {
    const bool in_a = a.contains(c), in_b = b.contains(c);
    if (in_a && in_b) shared += p.information(c);
    if (in_a || in_b) total += p.information(c);
  }
  return total > 0.0 ? shared / total : 0.0;
}

double two_layer_oracle(const Partonomy& p, const std::set<NodeId>& a, const std::set<NodeId>& b,
                        std::size_t layer) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const NodeId g{i};
    if (p.node(g).layer != layer) continue;
    num += p.information(g) * sim_inf_oracle(p, a, b, g);
    den += p.information(g);
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

TEST(Information, InverseOfVisitingUsers) {
  Partonomy p;
  const NodeId city = p.add_node("city", "", 1);
  const NodeId a = p.add_node("a", "", 0, city);
  const NodeId b = p.add_node("b", "", 0, city);
  const Touches t{{UserId{0}, a}, {UserId{0}, b}, {UserId{1}, b}, {UserId{2}, b}, {UserId{3}, b}};
  const Footprints f(p, 4, t);
  build_information(p, f);
  EXPECT_DOUBLE_EQ(p.information(a), 1.0);
  EXPECT_DOUBLE_EQ(p.information(b), 0.25);
  EXPECT_DOUBLE_EQ(p.information(city), 0.25);
}

TEST(Information, RatioFollowsUserCounts) {
  // 10 users: 2 visit A, the other 8 visit B
  Partonomy p;
  const NodeId root = p.add_node("root", "", 1);
  const NodeId a = p.add_node("A", "", 0, root);
  const NodeId b = p.add_node("B", "", 0, root);
  Touches t;
  for (std::size_t u = 0; u < 10; ++u) t.emplace_back(UserId{u}, u < 2 ? a : b);
  const Footprints f(p, 10, t);
  build_information(p, f);
  std::map<NodeId, int> visitors;
  for (auto [u, n] : t) ++visitors[n];
  EXPECT_DOUBLE_EQ(p.information(a) / p.information(b),
                   static_cast<double>(visitors[b]) / visitors[a]);
  EXPECT_DOUBLE_EQ(p.information(a) / p.information(b), 4.0);
}

TEST(Information, UntouchedNodesCarryNone) {
  Partonomy p;
  const NodeId root = p.add_node("root", "", 1);
  const NodeId a = p.add_node("A", "", 0, root);
  const NodeId b = p.add_node("B", "", 0, root);
  const Footprints f(p, 1, Touches{{UserId{0}, a}});
  build_information(p, f);
  EXPECT_GT(p.information(a), 0.0);
  EXPECT_EQ(p.information(b), 0.0);
}

TEST(Information, LogInverseOption) {
  Partonomy p;
  const NodeId root = p.add_node("root", "", 1);
  const NodeId a = p.add_node("A", "", 0, root);
  const NodeId b = p.add_node("B", "", 0, root);
  const Footprints f(p, 3, Touches{{UserId{0}, a}, {UserId{1}, b}, {UserId{2}, b}});
  build_information(p, f, InformationMode::LogInverse);
  EXPECT_NEAR(p.information(a), std::log1p(3.0 / 1.0), 1e-12);
  EXPECT_NEAR(p.information(b), std::log1p(3.0 / 2.0), 1e-12);
  EXPECT_NEAR(p.information(root), std::log1p(1.0), 1e-12);
}

TEST(SimInf, HandEvaluatedFixture) {
  Partonomy p;
  const NodeId g = p.add_node("g", "", 1);
  const NodeId c1 = p.add_node("c1", "", 0, g);
  const NodeId c2 = p.add_node("c2", "", 0, g);
  const NodeId c3 = p.add_node("c3", "", 0, g);
  const Footprints f(p, 2, Touches{{UserId{0}, c1}, {UserId{0}, c2}, {UserId{1}, c2}, {UserId{1}, c3}});
  p.set_information(c1, 1.0);
  p.set_information(c2, 0.5);
  p.set_information(c3, 0.25);
  EXPECT_NEAR(sim_inf(p, f, UserId{0}, UserId{1}, g), 0.5 / 1.75, 1e-12);
  EXPECT_NEAR(sim_inf(p, f, UserId{0}, UserId{1}, g), 0.2857, 1e-4);
}

TEST(SimInf, DisjointAndIdenticalChildren) {
  Partonomy p;
  const NodeId g = p.add_node("g", "", 1);
  const NodeId c1 = p.add_node("c1", "", 0, g);
  const NodeId c2 = p.add_node("c2", "", 0, g);
  const Footprints f(p, 3, Touches{{UserId{0}, c1}, {UserId{1}, c2}, {UserId{2}, c1}});
  build_information(p, f);
  EXPECT_EQ(sim_inf(p, f, UserId{0}, UserId{1}, g), 0.0);
  EXPECT_EQ(sim_inf(p, f, UserId{0}, UserId{2}, g), 1.0);
}

TEST(SimTwoLayer, HandEvaluatedFixture) {
  // g1 (0.5) shared identically, g2 (0.25) touched disjointly
  Partonomy p;
  const NodeId g1 = p.add_node("g1", "", 1);
  const NodeId g2 = p.add_node("g2", "", 1);
  const NodeId a = p.add_node("a", "", 0, g1);
  const NodeId b = p.add_node("b", "", 0, g2);
  const NodeId c = p.add_node("c", "", 0, g2);
  const Footprints f(p, 2, Touches{{UserId{0}, a}, {UserId{1}, a}, {UserId{0}, b}, {UserId{1}, c}});
  build_information(p, f);
  p.set_information(g1, 0.5);
  p.set_information(g2, 0.25);
  EXPECT_EQ(sim_inf(p, f, UserId{0}, UserId{1}, g1), 1.0);
  EXPECT_EQ(sim_inf(p, f, UserId{0}, UserId{1}, g2), 0.0);
  EXPECT_NEAR(sim_two_layer(p, f, UserId{0}, UserId{1}, 1), 0.5 / 0.75, 1e-12);
  EXPECT_NEAR(sim_two_layer(p, f, UserId{0}, UserId{1}, 1), 0.6667, 1e-4);
}

TEST(SimTwoLayer, ExtremesAndInvalidLayers) {
  Partonomy p;
  const NodeId g = p.add_node("g", "", 1);
  const NodeId a = p.add_node("a", "", 0, g);
  const NodeId b = p.add_node("b", "", 0, g);
  const Footprints f(p, 3, Touches{{UserId{0}, a}, {UserId{1}, b}, {UserId{2}, a}});
  build_information(p, f);
  EXPECT_EQ(sim_two_layer(p, f, UserId{0}, UserId{1}, 1), 0.0);
  EXPECT_EQ(sim_two_layer(p, f, UserId{0}, UserId{2}, 1), 1.0);
  EXPECT_THROW(sim_two_layer(p, f, UserId{0}, UserId{2}, 0), std::out_of_range);
  EXPECT_THROW(sim_two_layer(p, f, UserId{0}, UserId{2}, 2), std::out_of_range);
}

TEST(SimilarityProperty, AgreesWithSetOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    auto r = random_footprints(rng);
    const Footprints f(r.p, r.users, r.touches);
    build_information(r.p, f, t % 2 ? InformationMode::Inverse : InformationMode::LogInverse);
    const auto sets = closure(r.p, r.users, r.touches);
    for (std::size_t a = 0; a < r.users; ++a)
      for (std::size_t b = 0; b < r.users; ++b) {
        for (std::size_t g = 0; g < r.p.size(); ++g)
          if (r.p.node(NodeId{g}).layer > 0) {
            ASSERT_NEAR(sim_inf(r.p, f, UserId{a}, UserId{b}, NodeId{g}),
                        sim_inf_oracle(r.p, sets[a], sets[b], NodeId{g}), 1e-12);
          }
        for (std::size_t layer = 1; layer <= 3; ++layer)
          ASSERT_NEAR(sim_two_layer(r.p, f, UserId{a}, UserId{b}, layer),
                      two_layer_oracle(r.p, sets[a], sets[b], layer), 1e-12);
      }
  }
}

TEST(SimilarityProperty, SymmetricBoundedAndScaleFree) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 300; ++t) {
    auto r = random_footprints(rng);
    const Footprints f(r.p, r.users, r.touches);
    build_information(r.p, f);
    Partonomy scaled = r.p;
    const double k = scale(rng);
    for (std::size_t i = 0; i < r.p.size(); ++i)
      scaled.set_information(NodeId{i}, k * r.p.information(NodeId{i}));
    for (std::size_t a = 0; a < r.users; ++a)
      for (std::size_t b = 0; b < r.users; ++b)
        for (std::size_t layer = 1; layer <= 3; ++layer) {
          const double s = sim_two_layer(r.p, f, UserId{a}, UserId{b}, layer);
          EXPECT_EQ(s, sim_two_layer(r.p, f, UserId{b}, UserId{a}, layer));
          EXPECT_GE(s, 0.0);
          EXPECT_LE(s, 1.0);
          EXPECT_NEAR(s, sim_two_layer(scaled, f, UserId{a}, UserId{b}, layer), 1e-12);
          for (std::size_t g = 0; g < r.p.size(); ++g) {
            if (r.p.node(NodeId{g}).layer != layer) continue;
            const double x = sim_inf(r.p, f, UserId{a}, UserId{b}, NodeId{g});
            EXPECT_EQ(x, sim_inf(r.p, f, UserId{b}, UserId{a}, NodeId{g}));
            EXPECT_NEAR(x, sim_inf(scaled, f, UserId{a}, UserId{b}, NodeId{g}), 1e-12);
            if (!f.children_touched(UserId{a}, NodeId{g}).empty()) {
              EXPECT_EQ(sim_inf(r.p, f, UserId{a}, UserId{a}, NodeId{g}), 1.0);
            }
          }
        }
  }
}

TEST(Partonomy, LayersMustDescendByOne) {
  Partonomy p;
  const NodeId country = p.add_node("c", "", 3);
  EXPECT_THROW(p.add_node("city", "", 1, country), std::invalid_argument);
  EXPECT_THROW(p.add_node("c", "", 3), std::invalid_argument);
}

TEST(Partonomy, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"([
    {"id": "br", "name": "Brazil", "layer": 3, "children": [
      {"id": "rj", "name": "Rio de Janeiro", "layer": 2, "children": [
        {"id": "rio", "name": "Rio", "layer": 1, "children": [
          {"id": "cristo", "layer": 0, "cluster_id": "rio/0"}]}]}]},
    {"id": "us", "name": "USA", "layer": 3}
  ])");
  const Partonomy p = Partonomy::from_json(j);
  EXPECT_EQ(p.size(), 5u);
  EXPECT_EQ(p.max_layer(), 3u);
  EXPECT_EQ(p.node(*p.find("cristo")).cluster_id, "rio/0");
  EXPECT_EQ(Partonomy::from_json(p.to_json()).to_json(), p.to_json());
  EXPECT_THROW(Partonomy::from_json(nlohmann::json::parse(
                   R"({"id": "x", "layer": 2, "children": [{"id": "y", "layer": 0}]})")),
               std::invalid_argument);
}

TEST(Partonomy, UnitsAttachBelowTheirCity) {
  fixtures::DatasetBuilder b;
  const Coordinate o{10, 10};
  b.context("rio", {9, 9}, {11, 11}).context("sp", {12, 12}, {13, 13});
  for (int k = 0; k < 3; ++k) {
    b.select("u" + std::to_string(k), "rio", "a" + std::to_string(k), o);
    b.select("u" + std::to_string(k), "rio", "b" + std::to_string(k), fixtures::offset_km(o, 20, 0));
  }
  const Model m(b.build(), UnitOptions{});
  Partonomy p;
  const NodeId state = p.add_node("rj", "", 2);
  const NodeId city = p.add_node("rio", "", 1, state);
  p.add_node("cristo", "", 0, city);
  auto j = p.to_json();
  j[0]["children"][0]["children"][0]["cluster_id"] = "rio/1";
  Partonomy q = Partonomy::from_json(j);
  q.attach_units(m.units(), m.dataset().vocabulary());
  ASSERT_EQ(m.units().size(), 2u);
  EXPECT_EQ(q.unit_node(UnitId{1}), q.find("cristo"));
  ASSERT_TRUE(q.unit_node(UnitId{0}));
  EXPECT_EQ(q.node(*q.unit_node(UnitId{0})).parent, q.find("rio"));
  EXPECT_EQ(q.size(), 4u);

  const Footprints f = Footprints::build(q, m);
  EXPECT_EQ(f.users_touching(*q.find("rio")), 3u);
  EXPECT_EQ(f.children_touched(UserId{0}, *q.find("rio")).size(), 2u);
}
