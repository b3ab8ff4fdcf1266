#include "qoscomp/baseline.hpp"
#include "qoscomp/composition.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace {

using namespace qoscomp;

using Grid = std::vector<std::vector<std::optional<double>>>;
constexpr std::nullopt_t X = std::nullopt;

TrustMatrix matrix_from(const Grid &g, std::vector<NodeId> cols = {})
{
    std::vector<ServiceType> rows;
    for (std::uint32_t r = 0; r < g.size(); ++r)
    {
        rows.push_back(stype(r + 1));
    }
    if (cols.empty())
    {
        for (std::uint32_t c = 0; c < g.front().size(); ++c)
        {
            cols.push_back(node(c + 1));
        }
    }
    TrustMatrix m(rows, cols);
    for (std::size_t r = 0; r < g.size(); ++r)
    {
        for (std::size_t c = 0; c < g[r].size(); ++c)
        {
            if (g[r][c])
            {
                m.set(r, c, {*g[r][c], sid(static_cast<std::uint32_t>(100 * r + c)), 0.0});
            }
        }
    }
    return m;
}

const Grid kReferenceMatrix{
    {58, 84, X, 48, 64},
    {75, X, 80, 62, X},
    {90, X, X, X, X},
    {X, 75, 54, X, X},
};

TEST(Selection, ReferenceMatrix)
{
    const auto m = matrix_from(kReferenceMatrix);
    const auto a = select_providers(m);
    std::vector<std::uint32_t> chosen;
    for (std::size_t r = 0; r < a.size(); ++r)
    {
        chosen.push_back(raw(m.columns()[a[r]]));
    }
    EXPECT_EQ(chosen, (std::vector<std::uint32_t>{2, 3, 1, 2}));
}

TEST(Selection, ReferencePathAndHandoffs)
{
    const auto m = matrix_from(kReferenceMatrix);
    const auto path = build_composition_path(m, select_providers(m));
    ASSERT_EQ(path.size(), 4u);
    EXPECT_EQ(path[0], (PathEntry{stype(1), node(2), sid(1), 84}));
    EXPECT_EQ(path[1], (PathEntry{stype(2), node(3), sid(102), 80}));
    EXPECT_EQ(path[2], (PathEntry{stype(3), node(1), sid(200), 90}));
    EXPECT_EQ(path[3], (PathEntry{stype(4), node(2), sid(301), 75}));

    const auto plan = execution_plan(path);
    ASSERT_EQ(plan.size(), 5u);
    const std::vector<std::pair<Endpoint, Endpoint>> expect{
        {std::nullopt, node(2)}, {node(2), node(3)}, {node(3), node(1)}, {node(1), node(2)}, {node(2), std::nullopt}};
    for (std::size_t i = 0; i < plan.size(); ++i)
    {
        EXPECT_EQ(plan[i].from, expect[i].first) << i;
        EXPECT_EQ(plan[i].to, expect[i].second) << i;
        EXPECT_EQ(plan[i].next_stage, i);
        EXPECT_EQ(plan[i].remaining_stages, 4 - i);
    }
}

TEST(Selection, SingleCandidate)
{
    const auto m = matrix_from({{X, X, 12, X}});
    EXPECT_EQ(select_providers(m), Assignment{2});
}

TEST(Selection, TieGoesToLowerNodeId)
{
    const auto m = matrix_from({{X, X, 80, X, 80}});
    EXPECT_EQ(raw(m.columns()[select_providers(m)[0]]), 3u);
}

TEST(Selection, TieOnSameNodeGoesToEarlierReply)
{
    TrustCell a{50, sid(1), 2.0}, b{50, sid(2), 1.0};
    EXPECT_TRUE(better_candidate(b, node(4), a, node(4)));
    EXPECT_FALSE(better_candidate(a, node(4), b, node(4)));
}

TEST(Selection, AllAbsentRowNamesService)
{
    const auto m = matrix_from({{1, X}, {X, X}});
    try
    {
        select_providers(m);
        FAIL() << "expected NoProviderError";
    }
    catch (const NoProviderError &e)
    {
        EXPECT_EQ(e.service(), stype(2));
    }
}

TEST(Path, SingleServiceAndRepeatedNode)
{
    const auto one = matrix_from({{X, 40}});
    const auto p = build_composition_path(one, select_providers(one));
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(execution_plan(p).size(), 2u);

    const auto same = matrix_from({{90, 1}, {90, 1}, {90, 1}});
    const auto q = build_composition_path(same, select_providers(same));
    for (const auto &e : q)
    {
        EXPECT_EQ(e.node, node(1));
    }
    EXPECT_TRUE(execution_plan({}).empty());
}

TEST(Path, RejectsBadAssignments)
{
    const auto m = matrix_from({{1, X}, {X, 2}});
    EXPECT_THROW(build_composition_path(m, {0}), std::invalid_argument);
    EXPECT_THROW(build_composition_path(m, {0, 0}), std::invalid_argument);
}

TEST(Matrix, CellRangeChecked)
{
    TrustMatrix m({stype(1)}, {node(1)});
    EXPECT_THROW(m.set(0, 0, {101, sid(0), 0}), std::invalid_argument);
    EXPECT_THROW(m.set(0, 0, {-1, sid(0), 0}), std::invalid_argument);
    EXPECT_NO_THROW(m.set(0, 0, {100, sid(0), 0}));
}

// Oracle: exhaustive scan with the documented ordering written out as a key.
std::size_t oracle_argmax(const Grid &g, std::size_t r, const std::vector<NodeId> &cols)
{
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cols.size(); ++c)
    {
        if (!g[r][c])
        {
            continue;
        }
        if (!best)
        {
            best = c;
            continue;
        }
        const auto key = [&](std::size_t k) { return std::make_pair(-*g[r][k], raw(cols[k])); };
        if (key(c) < key(*best))
        {
            best = c;
        }
    }
    return *best;
}

Grid random_grid(std::mt19937_64 &rng, std::size_t rows, std::size_t cols)
{
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> coarse(0, 10); // coarse values force ties
    Grid g(rows, std::vector<std::optional<double>>(cols));
    for (auto &row : g)
    {
        for (auto &cell : row)
        {
            if (u(rng) < 0.6)
            {
                cell = u(rng) < 0.5 ? coarse(rng) * 10.0 : u(rng) * 100.0;
            }
        }
        if (std::none_of(row.begin(), row.end(), [](const auto &c) { return c.has_value(); }))
        {
            row[std::uniform_int_distribution<std::size_t>(0, cols - 1)(rng)] = u(rng) * 100.0;
        }
    }
    return g;
}

TEST(SelectionProperty, MatchesBruteForce)
{
    std::mt19937_64 rng(1000);
    for (int trial = 0; trial < 1000; ++trial)
    {
        const auto rows = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        const auto cols = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        const auto g = random_grid(rng, rows, cols);
        const auto m = matrix_from(g);
        const auto a = select_providers(m);
        for (std::size_t r = 0; r < rows; ++r)
        {
            ASSERT_EQ(a[r], oracle_argmax(g, r, m.columns())) << "trial " << trial << " row " << r;
        }
    }
}

TEST(SelectionProperty, DominatedCandidateChangesNothing)
{
    std::mt19937_64 rng(2000);
    for (int trial = 0; trial < 500; ++trial)
    {
        const auto rows = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
        const auto cols = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
        auto g = random_grid(rng, rows, cols);
        const auto before = matrix_from(g);
        const auto a = select_providers(before);
        // New column with a strictly lower score than each row's winner.
        for (std::size_t r = 0; r < rows; ++r)
        {
            const double top = *g[r][a[r]];
            g[r].push_back(top > 0 ? std::optional<double>(top / 2) : std::nullopt);
        }
        const auto after = matrix_from(g);
        EXPECT_EQ(select_providers(after), a);
    }
}

TEST(SelectionProperty, ColumnPermutationOnlyRelabels)
{
    std::mt19937_64 rng(3000);
    for (int trial = 0; trial < 500; ++trial)
    {
        const auto rows = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        const auto cols = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
        const auto g = random_grid(rng, rows, cols);
        std::vector<NodeId> ids;
        for (std::uint32_t c = 0; c < cols; ++c)
        {
            ids.push_back(node(c + 1));
        }
        std::vector<std::size_t> perm(cols);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Grid pg(rows, std::vector<std::optional<double>>(cols));
        std::vector<NodeId> pids(cols);
        for (std::size_t c = 0; c < cols; ++c)
        {
            pids[c] = ids[perm[c]];
            for (std::size_t r = 0; r < rows; ++r)
            {
                pg[r][c] = g[r][perm[c]];
            }
        }
        const auto m1 = matrix_from(g, ids);
        const auto m2 = matrix_from(pg, pids);
        const auto a1 = select_providers(m1);
        const auto a2 = select_providers(m2);
        for (std::size_t r = 0; r < rows; ++r)
        {
            EXPECT_EQ(m1.columns()[a1[r]], m2.columns()[a2[r]]);
        }
    }
}

// ---- building from replies ----------------------------------------------

ServiceAdvertisement ad(std::uint32_t n, std::uint32_t s, std::uint32_t type, QosVector q, double at = 0.0)
{
    return {node(n), sid(s), stype(type), q, at};
}

QosVector q(double rt, double fr, double en, double rel)
{
    return {rt, fr, en, rel, std::uint32_t{1}, std::nullopt};
}

TEST(BuildMatrix, NoRepliesIsAllAbsent)
{
    const std::vector<ServiceType> types{stype(1), stype(2)};
    const auto plan = make_plan(types);
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(plan, {}, HammersteinModel::static_default(4), inputs);
    EXPECT_EQ(m.row_count(), 2u);
    EXPECT_EQ(m.column_count(), 0u);
    EXPECT_THROW(select_providers(m), NoProviderError);
}

TEST(BuildMatrix, EmptyRequestRejected)
{
    const auto inputs = core_inputs();
    EXPECT_THROW(build_trust_matrix({}, {}, HammersteinModel::static_default(4), inputs), std::invalid_argument);
}

TEST(BuildMatrix, OneReplyPerService)
{
    const std::vector<ServiceType> types{stype(1), stype(2)};
    const auto plan = make_plan(types);
    const std::vector<ServiceAdvertisement> replies{ad(5, 1, 1, q(0.1, 0, 1, 1)), ad(7, 2, 2, q(0.2, 0, 1, 1))};
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(plan, replies, HammersteinModel::static_default(4), inputs);
    ASSERT_EQ(m.columns(), (std::vector<NodeId>{node(5), node(7)}));
    EXPECT_TRUE(m.at(0, 0).has_value());
    EXPECT_FALSE(m.at(0, 1).has_value());
    EXPECT_FALSE(m.at(1, 0).has_value());
    EXPECT_TRUE(m.at(1, 1).has_value());
    // A lone candidate is degenerate in every metric and gets full trust.
    EXPECT_EQ(m.at(0, 0)->trust, 100.0);
}

TEST(BuildMatrix, AbsentPatternFollowsReplies)
{
    // Offers laid out like the worked example: S1 on N1,N2,N4,N5; S2 on N1,N3,N4;
    // S3 on N1 only; S4 on N2,N3.
    const std::vector<std::vector<int>> offers{{1, 2, 4, 5}, {1, 3, 4}, {1}, {2, 3}};
    std::vector<ServiceAdvertisement> replies;
    std::uint32_t s = 0;
    for (std::uint32_t t = 0; t < offers.size(); ++t)
    {
        for (int n : offers[t])
        {
            replies.push_back(ad(n, s++, t + 1, q(0.1 * n, 0.01 * t, 0.2 * n, 0.9)));
        }
    }
    const std::vector<ServiceType> types{stype(1), stype(2), stype(3), stype(4)};
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(make_plan(types), replies, HammersteinModel::static_default(4), inputs);
    ASSERT_EQ(m.column_count(), 5u);
    for (std::size_t r = 0; r < 4; ++r)
    {
        for (std::size_t c = 0; c < 5; ++c)
        {
            const bool offered = std::find(offers[r].begin(), offers[r].end(), int(c + 1)) != offers[r].end();
            EXPECT_EQ(m.at(r, c).has_value(), offered) << r << "," << c;
        }
    }
}

TEST(BuildMatrix, DuplicateReplyKeepsLatest)
{
    const std::vector<ServiceType> types{stype(1)};
    const std::vector<ServiceAdvertisement> replies{ad(3, 9, 1, q(0.1, 0, 1, 1), 1.0),
                                                    ad(4, 8, 1, q(0.2, 0, 1, 1), 1.0),
                                                    ad(3, 9, 1, q(0.3, 0, 1, 1), 2.0)};
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(make_plan(types), replies, HammersteinModel::static_default(4), inputs);
    EXPECT_EQ(m.at(0, 0)->received_at, 2.0);
    // The stale fast reply is gone, so node 4 now has the better response time.
    EXPECT_LT(m.at(0, 0)->trust, m.at(0, 1)->trust);
}

TEST(BuildMatrix, BestInstancePerNode)
{
    const std::vector<ServiceType> types{stype(1)};
    const std::vector<ServiceAdvertisement> replies{ad(3, 1, 1, q(0.3, 0, 1, 1)), ad(3, 2, 1, q(0.1, 0, 1, 1))};
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(make_plan(types), replies, HammersteinModel::static_default(4), inputs);
    EXPECT_EQ(m.at(0, 0)->service, sid(2));
}

TEST(BuildMatrix, ChoosesHighestTrustFromQos)
{
    const std::vector<ServiceType> types{stype(1)};
    const std::vector<ServiceAdvertisement> replies{ad(1, 1, 1, q(0.3, 0.1, 0.1, 0.2)),
                                                    ad(2, 2, 1, q(0.1, 0.0, 0.5, 0.9)),
                                                    ad(3, 3, 1, q(0.2, 0.05, 0.3, 0.5))};
    const auto inputs = core_inputs();
    const auto m = build_trust_matrix(make_plan(types), replies, HammersteinModel::static_default(4), inputs);
    EXPECT_EQ(m.at(0, 1)->trust, 100.0);
    EXPECT_EQ(m.at(0, 0)->trust, 0.0);
    EXPECT_EQ(m.columns()[select_providers(m)[0]], node(2));
}

// ---- baseline ------------------------------------------------------------

TEST(Baseline, FirstArrivalWins)
{
    const std::vector<ServiceType> types{stype(1)};
    auto a = ad(1, 1, 1, q(0.1, 0, 1, 1), 1.0);
    a.qos.hop_count = 3;
    auto b = ad(2, 2, 1, q(0.1, 0, 1, 1), 1.2);
    b.qos.hop_count = 1;
    const std::vector<ServiceAdvertisement> replies{b, a};
    const auto path = baseline_compose(make_plan(types), replies);
    EXPECT_EQ(path[0].node, node(1));
}

TEST(Baseline, SingleReplyAndTieBreaks)
{
    const std::vector<ServiceType> types{stype(1)};
    const std::vector<ServiceAdvertisement> one{ad(6, 1, 1, q(0.1, 0, 1, 1), 0.4)};
    EXPECT_EQ(baseline_compose(make_plan(types), one)[0].node, node(6));

    auto a = ad(5, 1, 1, q(0.1, 0, 1, 1), 1.0);
    a.qos.hop_count = 2;
    auto b = ad(7, 2, 1, q(0.1, 0, 1, 1), 1.0);
    b.qos.hop_count = 1;
    auto c = ad(4, 3, 1, q(0.1, 0, 1, 1), 1.0);
    c.qos.hop_count = 2;
    const std::vector<ServiceAdvertisement> tied{a, b, c};
    EXPECT_EQ(baseline_compose(make_plan(types), tied)[0].node, node(7));
    const std::vector<ServiceAdvertisement> tied_hops{a, c};
    EXPECT_EQ(baseline_compose(make_plan(types), tied_hops)[0].node, node(4));
}

TEST(Baseline, NoProvider)
{
    const std::vector<ServiceType> types{stype(1), stype(2)};
    const std::vector<ServiceAdvertisement> replies{ad(1, 1, 1, q(0.1, 0, 1, 1))};
    EXPECT_THROW(baseline_compose(make_plan(types), replies), NoProviderError);
}

TEST(Baseline, DivergesFromTrustSelection)
{
    // Nearest provider answers first with trust 58; a farther one scores 84.
    TrustMatrix m({stype(1)}, {node(1), node(2)});
    m.set(0, 0, {58, sid(1), 0.1});
    m.set(0, 1, {84, sid(2), 0.3});
    EXPECT_EQ(m.columns()[select_providers(m)[0]], node(2));
    auto near = ad(1, 1, 1, q(0.1, 0, 1, 1), 0.1);
    auto far = ad(2, 2, 1, q(0.1, 0, 1, 1), 0.3);
    const std::vector<ServiceType> types{stype(1)};
    const std::vector<ServiceAdvertisement> replies{far, near};
    EXPECT_EQ(baseline_compose(make_plan(types), replies)[0].node, node(1));
}

} // namespace
