#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "brute_force_filter.hpp"
#include "posverify/protocol.hpp"
#include "posverify/theta_oracle.hpp"

using namespace posverify;

namespace {

AccusationMatrix cascade_matrix()
{
    const bruteforce::Table t{
        {0, 0, 1, 1, 1}, {0, 0, 1, 1, 1}, {0, 0, 0, 1, 1}, {1, 1, 0, 0, 0}, {1, 1, 0, 0, 0}};
    return bruteforce::to_matrix(t);
}

std::vector<Node> layout(int genuine, int malicious, double spacing)
{
    std::vector<Node> nodes;
    for (int k = 0; k < genuine + malicious; ++k) {
        Node node;
        node.id = 100 + k;
        node.kind = k < genuine ? NodeKind::Genuine : NodeKind::Malicious;
        node.true_position = Point2d(spacing * (k % 5) + 1.0, spacing * (k / 5) + 1.0);
        node.claimed_position = node.kind == NodeKind::Genuine ? node.true_position
                                                               : Point2d(node.true_position.x() + 30.0, 3.0);
        nodes.push_back(node);
    }
    return nodes;
}

SignalParamsd field_params(double sigma)
{
    return SignalParamsd::make(1.0, 0.125, sigma);
}

} // namespace

TEST_CASE("AccusationMatrix construction")
{
    AccusationMatrix m({7, 3, 9});
    CHECK(m.size() == 3);
    CHECK(m.index_of(9) == 2);
    CHECK_THROWS_AS(m.index_of(4), std::out_of_range);
    CHECK_FALSE(m.accuses(0, 1));
    m.set(0, 1, true);
    CHECK(m.accuses(0, 1));

    CHECK_THROWS_AS(AccusationMatrix({1, 1}, AccusationMatrix::Grid::Constant(2, 2, false)),
                    std::invalid_argument);
    CHECK_THROWS_AS(AccusationMatrix({1, 2}, AccusationMatrix::Grid::Constant(2, 3, false)),
                    std::invalid_argument);
    CHECK(AccusationMatrix({1, 2}) == AccusationMatrix({1, 2}, AccusationMatrix::Grid::Constant(2, 2, false)));
}

TEST_CASE("count_approvals")
{
    const auto m = cascade_matrix();
    const auto all = count_approvals(m, std::set<NodeId>{0, 1, 2, 3, 4});
    CHECK(all == std::map<NodeId, int>{{0, 3}, {1, 3}, {2, 3}, {3, 2}, {4, 2}});
    const auto sub = count_approvals(m, std::set<NodeId>{0, 1, 2});
    CHECK(sub == std::map<NodeId, int>{{0, 3}, {1, 3}, {2, 1}});

    SUBCASE("all-approve matrix gives k approvals")
    {
        AccusationMatrix clean({0, 1, 2, 3});
        for (const auto& [id, a] : count_approvals(clean, std::set<NodeId>{0, 1, 2, 3})) {
            CHECK(a == 4);
        }
    }
    SUBCASE("dropping one row changes only what that row approved")
    {
        std::mt19937_64 rng(4);
        const auto t = bruteforce::random_table(7, 0.4, rng);
        const auto r = bruteforce::to_matrix(t);
        ActiveMask full = ActiveMask::Constant(7, true);
        ActiveMask less = full;
        less(3) = false;
        const auto a = count_approvals(r, full);
        const auto b = count_approvals(r, less);
        for (int i = 0; i < 7; ++i) {
            if (i == 3) {
                CHECK(b(i) == 0);
            } else {
                CHECK(a(i) - b(i) == (t[3][static_cast<std::size_t>(i)] ? 0 : 1));
            }
        }
    }
    CHECK_THROWS_AS(count_approvals(m, ActiveMask::Constant(4, true)), std::invalid_argument);
    CHECK_THROWS_AS(count_approvals(m, std::set<NodeId>{0, 42}), std::out_of_range);
}

TEST_CASE("filter_fixpoint on the hand-traced cascade")
{
    const auto r = filter_fixpoint(cascade_matrix(), 0.0);
    REQUIRE(r.rounds.size() == 3);
    CHECK(r.rounds[0].active_count == 5);
    CHECK(r.rounds[0].threshold == 2.5);
    CHECK(r.rounds[0].removed == std::vector<NodeId>{3, 4});
    CHECK(r.rounds[0].removed_approvals == std::vector<int>{2, 2});
    CHECK(r.rounds[1].active_count == 3);
    CHECK(r.rounds[1].threshold == 1.5);
    CHECK(r.rounds[1].removed == std::vector<NodeId>{2});
    CHECK(r.rounds[1].removed_approvals == std::vector<int>{1});
    CHECK(r.rounds[2].threshold == 1.0);
    CHECK(r.rounds[2].removed.empty());
    CHECK(r.final_genuine_set == std::vector<NodeId>{0, 1});
    CHECK(r.final_filtered_set == std::vector<NodeId>{2, 3, 4});
}

TEST_CASE("ties at the threshold survive")
{
    // 4 nodes, node 3 accused by nodes 0 and 1: 2 approvals, threshold (4 + 0)/2 = 2
    AccusationMatrix m({0, 1, 2, 3});
    m.set(0, 3, true);
    m.set(1, 3, true);
    CHECK(filter_fixpoint(m, 0.0).final_filtered_set.empty());
    CHECK(filter_fixpoint(m, 0.5).final_filtered_set == std::vector<NodeId>{3});
}

TEST_CASE("literal negligible-noise round structure")
{
    // 52 genuine approve each other; 48 malicious accuse all genuine and are
    // approved by exactly two genuine nodes each.
    const int n0 = 52;
    const int n = 100;
    std::vector<NodeId> ids(n);
    for (int i = 0; i < n; ++i) {
        ids[static_cast<std::size_t>(i)] = i;
    }
    AccusationMatrix m(ids);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (j >= n0) {
                m.set(j, i, i < n0);
            } else if (i >= n0) {
                const bool deceived = j == (i - n0) % n0 || j == (i - n0 + 1) % n0;
                m.set(j, i, !deceived);
            }
        }
    }
    const auto r = filter_fixpoint(m, 2.0);
    REQUIRE(r.rounds.size() == 2);
    CHECK(r.rounds[0].threshold == 51.0);
    CHECK(r.rounds[0].removed.size() == 48);
    for (int a : r.rounds[0].removed_approvals) {
        CHECK(a == 50);
    }
    CHECK(r.rounds[1].threshold == 27.0);
    CHECK(r.rounds[1].removed.empty());
    CHECK(r.final_genuine_set.size() == 52);
}

TEST_CASE("filter_fixpoint agrees with the brute-force simulator")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(1, 8);
    std::uniform_real_distribution<double> dens(0.0, 1.0);
    std::uniform_real_distribution<double> th(0.0, 4.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = size(rng);
        const auto t = bruteforce::random_table(n, dens(rng), rng);
        const double theta = th(rng);
        const auto expected = bruteforce::filter(t, theta);
        const auto got = filter_fixpoint(bruteforce::to_matrix(t), theta);

        CHECK(std::set<NodeId>(got.final_genuine_set.begin(), got.final_genuine_set.end()) ==
              std::set<NodeId>(expected.genuine.begin(), expected.genuine.end()));
        CHECK(std::set<NodeId>(got.final_filtered_set.begin(), got.final_filtered_set.end()) ==
              std::set<NodeId>(expected.filtered.begin(), expected.filtered.end()));
        CHECK(static_cast<int>(got.rounds.size()) == expected.passes);
    }
}

TEST_CASE("FilterResult invariants on random matrices")
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 30;
        const auto m = bruteforce::to_matrix(bruteforce::random_table(n, 0.05 * (trial % 15), rng), 1000);
        const double theta = 0.1 * (trial % 40);
        const auto r = filter_fixpoint(m, theta);

        std::set<NodeId> all(m.ids().begin(), m.ids().end());
        std::set<NodeId> g(r.final_genuine_set.begin(), r.final_genuine_set.end());
        std::set<NodeId> f(r.final_filtered_set.begin(), r.final_filtered_set.end());
        CHECK(g.size() + f.size() == all.size());
        for (NodeId id : all) {
            CHECK(g.count(id) + f.count(id) == 1);
        }
        CHECK(static_cast<int>(r.rounds.size()) <= n + 1);
        REQUIRE_FALSE(r.rounds.empty());
        CHECK(r.rounds.back().removed.empty());
        for (std::size_t k = 0; k + 1 < r.rounds.size(); ++k) {
            CHECK_FALSE(r.rounds[k].removed.empty());
            CHECK(r.rounds[k + 1].active_count ==
                  r.rounds[k].active_count - static_cast<int>(r.rounds[k].removed.size()));
        }

        // a larger theta never removes fewer nodes in the first pass
        const auto higher = filter_fixpoint(m, theta + 0.7);
        const std::set<NodeId> first(r.rounds[0].removed.begin(), r.rounds[0].removed.end());
        const std::set<NodeId> first_hi(higher.rounds[0].removed.begin(), higher.rounds[0].removed.end());
        CHECK(std::includes(first_hi.begin(), first_hi.end(), first.begin(), first.end()));
    }
}

TEST_CASE("empty survivor set is a legal outcome")
{
    AccusationMatrix m({0, 1});
    m.set(0, 1, true);
    m.set(1, 0, true);
    const auto r = filter_fixpoint(m, 1.0);
    CHECK(r.final_genuine_set.empty());
    CHECK(r.final_filtered_set == std::vector<NodeId>{0, 1});
}

TEST_CASE("quantile schedule")
{
    ThetaTable table;
    table.n = 5;
    table.theta_star = 3;
    for (int d = 1; d <= 9; ++d) {
        table.quantiles[static_cast<std::size_t>(d - 1)] = 0.2 * d;
    }
    const auto s = quantile_schedule(table);
    REQUIRE(s.size() == 11);
    CHECK(s.front() == 0.0);
    CHECK(s[1] == doctest::Approx(0.2));
    CHECK(s[9] == doctest::Approx(1.8));
    CHECK(s.back() == 3.0);

    SUBCASE("all-approve matrix removes nobody at any step")
    {
        const auto r = quantile_filter(AccusationMatrix({0, 1, 2, 3, 4}), table);
        CHECK(r.rounds.size() == 11);
        CHECK(r.final_filtered_set.empty());
        for (std::size_t k = 0; k < r.rounds.size(); ++k) {
            CHECK(r.rounds[k].step == static_cast<int>(k));
        }
    }
    SUBCASE("flat table matches the plain fixpoint when step 0 is idle")
    {
        std::mt19937_64 rng(9);
        ThetaTable flat = table;
        flat.quantiles.fill(3.0);
        for (int t = 0; t < 50; ++t) {
            const auto m = bruteforce::to_matrix(bruteforce::random_table(8, 0.15, rng));
            const auto q = quantile_filter(m, flat);
            const bool step0_idle = q.rounds.front().removed.empty();
            if (step0_idle) {
                const auto p = filter_fixpoint(m, 3.0);
                CHECK(q.final_genuine_set == p.final_genuine_set);
            }
        }
    }
    SUBCASE("later steps act on the previous survivors")
    {
        // step 0 leaves {0, 1}, which the deciles keep; theta* = 3 asks for 2.5 of 2
        const auto r = quantile_filter(cascade_matrix(), table);
        CHECK(r.rounds[0].removed == std::vector<NodeId>{3, 4});
        CHECK(r.rounds[1].removed == std::vector<NodeId>{2});
        int last_step = -1;
        for (const auto& round : r.rounds) {
            if (!round.removed.empty()) {
                last_step = round.step;
            }
        }
        CHECK(last_step == 10);
        CHECK(r.final_genuine_set.empty());
    }
}

TEST_CASE("accuse_approve")
{
    SUBCASE("noiseless all-genuine network approves everything")
    {
        const auto nodes = layout(10, 0, 7.0);
        const auto m = accuse_approve(nodes, field_params(0.0), 1);
        CHECK_FALSE(m.grid().any());
        CHECK(m.ids().front() == 100);
    }
    SUBCASE("malicious rows accuse exactly the genuine ids")
    {
        const auto nodes = layout(6, 4, 9.0);
        const auto m = accuse_approve(nodes, field_params(1e-8), 3);
        for (Eigen::Index j = 6; j < 10; ++j) {
            for (Eigen::Index i = 0; i < 10; ++i) {
                CHECK(m.accuses(j, i) == (i < 6));
            }
        }
        for (Eigen::Index i = 0; i < 10; ++i) {
            CHECK_FALSE(m.accuses(i, i));
        }
    }
    SUBCASE("deterministic given the seed")
    {
        const auto nodes = layout(12, 3, 8.0);
        const auto p = field_params(2e-7);
        CHECK(accuse_approve(nodes, p, 11) == accuse_approve(nodes, p, 11));
    }
    SUBCASE("genuine links are accused at rate 1 - 0.9973")
    {
        const auto nodes = layout(25, 0, 19.0);
        const auto p = field_params(1e-11);
        long accused = 0;
        long links = 0;
        for (std::uint64_t s = 0; s < 400; ++s) {
            const auto m = accuse_approve(nodes, p, s);
            accused += m.grid().count();
            links += 25 * 24;
        }
        const double rate = static_cast<double>(accused) / static_cast<double>(links);
        CHECK(rate == doctest::Approx(0.0026998).epsilon(0.12));
    }
    SUBCASE("errors")
    {
        auto nodes = layout(3, 0, 5.0);
        CHECK_THROWS_AS(accuse_approve(std::span<const Node>(nodes.data(), 1), field_params(0.0), 1),
                        std::invalid_argument);
        nodes[1].true_position = nodes[0].true_position;
        nodes[1].claimed_position = nodes[0].true_position;
        CHECK_THROWS_AS(accuse_approve(nodes, field_params(0.0), 1), std::domain_error);
    }
}
