#include <gtest/gtest.h>

#include <random>

#include "flowtracer/analysis.hpp"
#include "flowtracer/error.hpp"
#include "flowtracer/experiment.hpp"
#include "maxmin_reference.hpp"
#include "test_support.hpp"

using namespace flowtracer;
using flowtracer::testing::bottleneck_reference;
using flowtracer::testing::maxmin_certified;
using flowtracer::testing::testbed;

namespace {

// Builds a complete path by following the given egress choices.
TracedPath walk(const std::string& src, const std::string& src_iface, const std::vector<std::string>& egresses,
                std::uint16_t sport = 50000) {
  TracedPath p;
  p.flow.source_host = src;
  p.flow.source_interface = src_iface;
  p.flow.tuple.src_port = sport;
  p.hops.push_back(Hop{src, std::nullopt, src_iface});
  Endpoint at = testbed().neighbor(src, src_iface);
  for (const auto& e : egresses) {
    p.hops.push_back(Hop{at.device, at.interface, e});
    at = testbed().neighbor(at.device, e);
  }
  p.hops.push_back(Hop{at.device, at.interface, std::nullopt});
  p.flow.dest_host = at.device;
  p.complete = true;
  return p;
}

}  // namespace

TEST(Fim, WorkedExamples) {
  EXPECT_DOUBLE_EQ(fim(std::vector<double>{4, 4, 4, 4}, 4.0), 0.0);
  EXPECT_DOUBLE_EQ(fim(std::vector<double>{2, 6, 4, 4}, 4.0), 25.0);
  EXPECT_DOUBLE_EQ(fim(std::vector<double>{0, 8}, std::vector<double>{4, 4}), 100.0);
  EXPECT_THROW(fim(std::vector<double>{1, 2}, 0.0), ZeroIdeal);
  EXPECT_THROW(fim(std::vector<double>{1, 2}, std::vector<double>{1, 0}), ZeroIdeal);
  EXPECT_THROW(fim(std::vector<double>{}, 1.0), std::invalid_argument);
  EXPECT_THROW(fim(std::vector<double>{1}, std::vector<double>{1, 1}), std::invalid_argument);
}

TEST(LinkHistogram, CoversEveryDirectedLink) {
  const auto h = link_histogram({}, testbed());
  ASSERT_EQ(h.size(), 4u);
  for (const auto& [layer, links] : h) {
    EXPECT_EQ(links.size(), 64u) << to_string(layer);
    for (const auto& l : links) {
      EXPECT_EQ(l.flow_count, 0);
      EXPECT_EQ(l.capacity_gbps, 100);
    }
  }
  TracedPath broken = walk("host-00", "eth0", {"up-spine-0-a"});
  broken.complete = false;
  EXPECT_THROW(link_histogram(std::vector<TracedPath>{broken}, testbed()), IncompletePath);
}

TEST(Report, SingleFlowOnReferenceTestbed) {
  WorkloadSpec w;
  w.pairs = {{"host-00", "host-08", 1}};
  const auto paths = oracle_paths(w, testbed(), RoutingPolicy::ecmp({}));
  const ImbalanceReport r = report(paths, testbed());
  EXPECT_DOUBLE_EQ(*r.layer(LinkLayer::leaf_to_spine).fim, 196.875);
  EXPECT_DOUBLE_EQ(r.layer(LinkLayer::leaf_to_spine).ideal_flows, 1.0 / 64);
  EXPECT_EQ(r.layer(LinkLayer::leaf_to_spine).total_flows, 1);
  EXPECT_DOUBLE_EQ(*r.aggregate_fim, 196.875);
}

TEST(Report, ZeroTrafficLayersAreAbsent) {
  WorkloadSpec w;
  w.pairs = {{"host-00", "host-01", 4}};
  const auto r = report(oracle_paths(w, testbed(), RoutingPolicy::ecmp({})), testbed());
  EXPECT_FALSE(r.layer(LinkLayer::leaf_to_spine).fim.has_value());
  EXPECT_FALSE(r.layer(LinkLayer::spine_to_leaf).fim.has_value());
  EXPECT_TRUE(r.layer(LinkLayer::host_to_leaf).fim.has_value());
  EXPECT_TRUE(r.aggregate_fim.has_value());

  const auto empty = report({}, testbed());
  EXPECT_FALSE(empty.aggregate_fim.has_value());
  for (const auto& l : empty.layers) EXPECT_FALSE(l.fim.has_value());
}

TEST(Report, AggregateUsesEachLayersIdeal) {
  WorkloadSpec w = make_bipartite_workload(testbed(), 3, 4);
  const auto paths = oracle_paths(w, testbed(), RoutingPolicy::ecmp({FieldSet::full_five_tuple, false, 4}));
  const auto r = report(paths, testbed());
  std::vector<double> actual, ideal;
  for (const auto& l : r.layers) {
    for (const auto& link : l.links) {
      actual.push_back(link.flow_count);
      ideal.push_back(l.ideal_flows);
    }
  }
  EXPECT_NEAR(*r.aggregate_fim, fim(actual, ideal), 1e-12);
  EXPECT_EQ(r.flow_count, 48u);
}

TEST(Report, BalancedStaticIsPerfect) {
  const WorkloadSpec w = make_bipartite_workload(testbed(), 16, 8);
  const auto tables = build_balanced_static_tables(testbed(), generate_flows(w, testbed()));
  const auto r = report(oracle_paths(w, testbed(), RoutingPolicy::from_tables(tables)), testbed());
  EXPECT_NEAR(*r.aggregate_fim, 0.0, 1e-9);
}

TEST(MaxMin, TwoFlowsShareOneLink) {
  EXPECT_EQ(maxmin_rates({{0}, {0}}, std::vector<double>{100}), (std::vector<double>{50, 50}));
  // Classic three-link line: long flow crosses both links.
  const auto r = maxmin_rates({{0, 1}, {0}, {1}}, std::vector<double>{100, 100});
  EXPECT_DOUBLE_EQ(r[0], 50);
  EXPECT_DOUBLE_EQ(r[1], 50);
  EXPECT_DOUBLE_EQ(r[2], 50);
  const auto s = maxmin_rates({{0, 1}, {0}, {1}}, std::vector<double>{100, 40});
  EXPECT_DOUBLE_EQ(s[0], 20);
  EXPECT_DOUBLE_EQ(s[1], 80);
  EXPECT_DOUBLE_EQ(s[2], 20);
  EXPECT_THROW(maxmin_rates({{}}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_THROW(maxmin_rates({{3}}, std::vector<double>{1}), std::invalid_argument);
  EXPECT_TRUE(maxmin_rates({}, std::vector<double>{1}).empty());
}

TEST(MaxMin, CollisionOnFabricUplink) {
  const std::vector<TracedPath> paths{
      walk("host-00", "eth0", {"up-spine-0-a", "down-leaf-2-a", "down-host-08-a"}, 50000),
      walk("host-01", "eth0", {"up-spine-0-a", "down-leaf-2-b", "down-host-09-a"}, 50001),
      walk("host-02", "eth0", {"up-spine-1-a", "down-leaf-2-c", "down-host-10-a"}, 50002),
  };
  const auto t = maxmin_throughput(paths, testbed());
  EXPECT_DOUBLE_EQ(t.flow_rates[0], 50);
  EXPECT_DOUBLE_EQ(t.flow_rates[1], 50);
  EXPECT_DOUBLE_EQ(t.flow_rates[2], 100);
  EXPECT_DOUBLE_EQ((t.pair_rates.at({"host-00", "host-08"})), 50);
  const auto shared = std::find_if(t.links.begin(), t.links.end(), [](const LinkUtilization& u) {
    return u.from == Endpoint{"leaf-0", "up-spine-0-a"};
  });
  ASSERT_NE(shared, t.links.end());
  EXPECT_DOUBLE_EQ(shared->load_gbps, 100);
}

TEST(MaxMin, CertificatesOnRandomInstances) {
  std::mt19937 rng(2024);
  for (int instance = 0; instance < 10000; ++instance) {
    const int links = 1 + static_cast<int>(rng() % 6);
    const int flows = 1 + static_cast<int>(rng() % 8);
    std::vector<double> cap(links);
    for (auto& c : cap) c = 1 + static_cast<double>(rng() % 100);
    std::vector<std::vector<std::size_t>> fl(flows);
    for (auto& f : fl) {
      for (int l = 0; l < links; ++l) {
        if (rng() % 3 == 0) f.push_back(l);
      }
      if (f.empty()) f.push_back(rng() % links);
    }
    const auto rates = maxmin_rates(fl, cap);
    const auto expected = bottleneck_reference(fl, cap);
    for (int f = 0; f < flows; ++f) {
      ASSERT_NEAR(rates[f], expected[f], 1e-9 * (1 + expected[f])) << "instance " << instance;
    }
    ASSERT_TRUE(maxmin_certified(fl, cap, rates)) << "instance " << instance;
  }
}

TEST(Quantiles, MedianOfEvenAndOdd) {
  const auto q = quantiles({4, 1, 3, 2});
  EXPECT_DOUBLE_EQ(q.min, 1);
  EXPECT_DOUBLE_EQ(q.median, 2.5);
  EXPECT_DOUBLE_EQ(q.max, 4);
  EXPECT_DOUBLE_EQ(quantiles({5, 1, 3}).median, 3);
}

TEST(Compare, StaticBeatsEcmpAndShapesMustMatch) {
  const WorkloadSpec w = make_bipartite_workload(testbed(), 16, 12);
  const auto flows = generate_flows(w, testbed());
  const RunResult ecmp = trace_in_process(w, testbed(), RoutingPolicy::ecmp({FieldSet::full_five_tuple, false, 12}), {});
  const RunResult stat =
      trace_in_process(w, testbed(), RoutingPolicy::from_tables(build_balanced_static_tables(testbed(), flows)), {});
  const Comparison c = compare(analyze(ecmp, testbed()), analyze(stat, testbed()));
  EXPECT_EQ(c.winner.at("aggregate_fim"), "b");
  EXPECT_EQ(c.winner.at("fim_host_to_leaf"), "tie");
  EXPECT_LT(*c.aggregate_delta(), 0);
  EXPECT_DOUBLE_EQ(c.pair_throughput_b.min, 400);
  EXPECT_EQ(c.winner.at("pair_throughput_min"), "b");

  const auto json = comparison_to_json(c);
  EXPECT_EQ(json["winner"]["aggregate_fim"], "b");
  const std::string csv = comparison_csv(c);
  EXPECT_TRUE(csv.starts_with("metric,a,b,delta,winner\n"));
  EXPECT_NE(csv.find("aggregate_fim,"), std::string::npos);

  const RunResult other = trace_in_process(make_bipartite_workload(testbed(), 2, 12), testbed(),
                                           RoutingPolicy::ecmp({}), {});
  EXPECT_THROW(compare(analyze(ecmp, testbed()), analyze(other, testbed())), ShapeMismatch);

  RunResult partial = stat;
  partial.paths.pop_back();
  EXPECT_THROW(compare(analyze(ecmp, testbed()), analyze(partial, testbed())), ShapeMismatch);
}

TEST(Output, LinksCsvAndJson) {
  const WorkloadSpec w = make_bipartite_workload(testbed(), 2, 1);
  const auto r = report(oracle_paths(w, testbed(), RoutingPolicy::ecmp({})), testbed());
  const std::string csv = links_csv(r);
  EXPECT_TRUE(csv.starts_with("from,to,layer,flow_count,ideal,deviation_pct\n"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 64);
  const auto j = imbalance_to_json(r);
  EXPECT_EQ(j["flow_count"], 32);
  EXPECT_EQ(j["layers"]["leaf_to_spine"]["link_count"], 64);
  EXPECT_DOUBLE_EQ(j["layers"]["leaf_to_spine"]["ideal"].get<double>(), 0.5);
}
