#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "flowtracer/error.hpp"
#include "flowtracer/flowgen.hpp"
#include "test_support.hpp"

using namespace flowtracer;
using flowtracer::testing::testbed;

TEST(Ipv4Address, ParseAndFormat) {
  EXPECT_EQ(Ipv4Address::parse("10.1.7.1").to_string(), "10.1.7.1");
  EXPECT_EQ(Ipv4Address::parse("1.2.3.4").value, 0x01020304u);
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.0.0.1", "a.b.c.d", "1..2.3", " 1.2.3.4"}) {
    EXPECT_THROW(Ipv4Address::parse(bad), ParseError) << bad;
  }
}

TEST(AddressPlan, RackAndHostIndices) {
  const auto plan = address_plan(testbed());
  ASSERT_EQ(plan.size(), 16u);
  EXPECT_EQ(plan.at("host-00").to_string(), "10.0.0.1");
  EXPECT_EQ(plan.at("host-07").to_string(), "10.0.7.1");
  EXPECT_EQ(plan.at("host-08").to_string(), "10.1.0.1");
  EXPECT_EQ(plan.at("host-15").to_string(), "10.1.7.1");
}

TEST(BipartiteWorkload, Shapes) {
  const WorkloadSpec both = make_bipartite_workload(testbed(), 16, 0);
  EXPECT_EQ(both.pairs.size(), 16u);
  EXPECT_EQ(both.total_flows(), 256u);
  EXPECT_EQ(both.pairs[0], (PairSpec{"host-00", "host-08", 16}));
  EXPECT_EQ(both.pairs[8], (PairSpec{"host-08", "host-00", 16}));

  const WorkloadSpec one = make_bipartite_workload(testbed(), 1, 0, false);
  EXPECT_EQ(one.pairs.size(), 8u);
  for (const auto& p : one.pairs) EXPECT_EQ(testbed().device(p.src).rack, "r0");

  EXPECT_THROW(make_bipartite_workload(flowtracer::testing::mini_fabric(), 1, 0), NotBipartiteCapable);
}

TEST(GenerateFlows, CountsPortsAndClasses) {
  const WorkloadSpec spec = make_bipartite_workload(testbed(), 16, 42);
  const auto flows = generate_flows(spec, testbed());
  ASSERT_EQ(flows.size(), 256u);
  std::set<FiveTuple> tuples;
  for (const auto& f : flows) {
    EXPECT_GE(f.tuple.src_port, 49152);
    EXPECT_EQ(f.tuple.dst_port, kDefaultTcpPort);
    EXPECT_EQ(f.tuple.protocol, Protocol::tcp);
    EXPECT_EQ(f.flow_class, FlowClass::kernel_visible);
    EXPECT_NE(testbed().device(f.source_host).find_interface(f.source_interface), nullptr);
    tuples.insert(f.tuple);
  }
  EXPECT_EQ(tuples.size(), 256u);
}

TEST(GenerateFlows, OrdinalsFollowPairOrder) {
  const WorkloadSpec spec = make_bipartite_workload(testbed(), 3, 1);
  const auto flows = generate_flows(spec, testbed());
  for (std::size_t i = 0; i < flows.size(); ++i) {
    EXPECT_EQ(flows[i].flow_ordinal, static_cast<int>(i % 3));
    EXPECT_EQ(flows[i].source_host, spec.pairs[i / 3].src);
    EXPECT_EQ(flows[i].dest_host, spec.pairs[i / 3].dst);
  }
}

TEST(GenerateFlows, RoundRobinInterfaces) {
  WorkloadSpec spec;
  spec.pairs = {{"host-00", "host-08", 4}};
  auto flows = generate_flows(spec, testbed());
  std::map<std::string, int> bound;
  for (const auto& f : flows) ++bound[f.source_interface];
  EXPECT_EQ(bound.size(), 4u);
  for (const auto& [_, n] : bound) EXPECT_EQ(n, 1);
  EXPECT_EQ(flows[0].source_interface, "eth0");

  // the second pair starts one interface later
  spec.pairs = {{"host-01", "host-09", 1}, {"host-00", "host-08", 2}};
  flows = generate_flows(spec, testbed());
  EXPECT_EQ(flows[0].source_interface, "eth0");
  EXPECT_EQ(flows[1].source_interface, "eth1");
  EXPECT_EQ(flows[2].source_interface, "eth2");
}

TEST(GenerateFlows, DeterministicAndSeedSensitive) {
  const auto a = generate_flows(make_bipartite_workload(testbed(), 16, 7), testbed());
  const auto b = generate_flows(make_bipartite_workload(testbed(), 16, 7), testbed());
  const auto c = generate_flows(make_bipartite_workload(testbed(), 16, 8), testbed());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(GenerateFlows, PortCollisionsProbeLinearly) {
  WorkloadSpec spec;
  spec.pairs = {{"host-00", "host-08", 5000}};
  const auto flows = generate_flows(spec, testbed());
  std::set<std::uint16_t> ports;
  for (const auto& f : flows) ports.insert(f.tuple.src_port);
  EXPECT_EQ(ports.size(), 5000u);
}

TEST(GenerateFlows, KernelBypassIsRoce) {
  WorkloadSpec spec = make_bipartite_workload(testbed(), 2, 0);
  spec.flow_class = FlowClass::kernel_bypass;
  for (const auto& f : generate_flows(spec, testbed())) {
    EXPECT_EQ(f.tuple.protocol, Protocol::udp);
    EXPECT_EQ(f.tuple.dst_port, kRoceV2Port);
    EXPECT_EQ(f.flow_class, FlowClass::kernel_bypass);
  }
}

TEST(GenerateFlows, FilterOverridesPortAndProtocol) {
  WorkloadSpec spec = make_bipartite_workload(testbed(), 2, 0);
  spec.filter = FilterSpec{6000, 6010, Protocol::udp};
  for (const auto& f : generate_flows(spec, testbed())) {
    EXPECT_EQ(f.tuple.dst_port, 6000);
    EXPECT_EQ(f.tuple.protocol, Protocol::udp);
  }
}

TEST(ValidateWorkload, Rejections) {
  WorkloadSpec spec;
  spec.pairs = {{"host-00", "host-99", 1}};
  EXPECT_THROW(validate_workload(spec, testbed()), UnknownHost);
  spec.pairs = {{"host-00", "leaf-0", 1}};
  EXPECT_THROW(validate_workload(spec, testbed()), UnknownHost);
  spec.pairs = {{"host-00", "host-00", 1}};
  EXPECT_THROW(validate_workload(spec, testbed()), ValidationError);
  spec.pairs = {{"host-00", "host-08", 0}};
  EXPECT_THROW(validate_workload(spec, testbed()), ValidationError);
  spec.pairs = {{"host-00", "host-08", 1}, {"host-00", "host-08", 2}};
  EXPECT_THROW(validate_workload(spec, testbed()), ValidationError);
  spec.pairs = {{"host-00", "host-08", 1}};
  spec.filter = FilterSpec{10, 5, std::nullopt};
  EXPECT_THROW(validate_workload(spec, testbed()), ValidationError);
}

TEST(ApplyFilter, SubsetsFlows) {
  auto flows = generate_flows(make_bipartite_workload(testbed(), 2, 0), testbed());
  EXPECT_EQ(apply_filter(flows, FilterSpec{}).size(), flows.size());
  EXPECT_TRUE(apply_filter(flows, FilterSpec{1, 65535, Protocol::udp}).empty());
  EXPECT_TRUE(apply_filter(flows, FilterSpec{5202, 6000, std::nullopt}).empty());
  EXPECT_EQ(apply_filter(flows, FilterSpec{5201, 5201, Protocol::tcp}).size(), flows.size());
}

TEST(WorkloadJson, RoundTrip) {
  WorkloadSpec spec = make_bipartite_workload(testbed(), 3, 99);
  spec.filter = FilterSpec{100, 200, Protocol::tcp};
  spec.flow_class = FlowClass::kernel_bypass;
  EXPECT_EQ(workload_from_json(workload_to_json(spec)), spec);
  const auto path = std::filesystem::temp_directory_path() / "flowtracer_workload_rt.json";
  save_workload(spec, path);
  EXPECT_EQ(load_workload(path), spec);
  std::filesystem::remove(path);

  auto doc = workload_to_json(spec);
  doc["bogus"] = true;
  EXPECT_THROW(workload_from_json(doc), ParseError);
}
