#include "posverify/protocol.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "posverify/random.hpp"
#include "posverify/theta_oracle.hpp"

namespace posverify {

AccusationMatrix::AccusationMatrix(std::vector<NodeId> ids)
    : ids_(std::move(ids)), accuses_(Grid::Constant(static_cast<Eigen::Index>(ids_.size()),
                                                    static_cast<Eigen::Index>(ids_.size()), false))
{
}

AccusationMatrix::AccusationMatrix(std::vector<NodeId> ids, Grid accuses)
    : ids_(std::move(ids)), accuses_(std::move(accuses))
{
    const auto n = static_cast<Eigen::Index>(ids_.size());
    if (accuses_.rows() != n || accuses_.cols() != n) {
        throw std::invalid_argument("AccusationMatrix: grid shape does not match id count");
    }
    if (std::unordered_set<NodeId>(ids_.begin(), ids_.end()).size() != ids_.size()) {
        throw std::invalid_argument("AccusationMatrix: duplicate ids");
    }
}

Eigen::Index AccusationMatrix::index_of(NodeId id) const
{
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) {
        throw std::out_of_range("AccusationMatrix: unknown id " + std::to_string(id));
    }
    return static_cast<Eigen::Index>(it - ids_.begin());
}

AccusationMatrix accuse_approve(std::span<const Node> nodes, const SignalParamsd& params, std::uint64_t seed)
{
    if (nodes.size() < 2) {
        throw std::invalid_argument("accuse_approve: need at least two nodes");
    }
    std::vector<NodeId> ids;
    ids.reserve(nodes.size());
    for (const auto& node : nodes) {
        ids.push_back(node.id);
    }
    AccusationMatrix matrix(std::move(ids));
    const auto n = static_cast<Eigen::Index>(nodes.size());

    for (Eigen::Index j = 0; j < n; ++j) {
        const Node& receiver = nodes[static_cast<std::size_t>(j)];
        if (receiver.kind == NodeKind::Malicious) {
            for (Eigen::Index i = 0; i < n; ++i) {
                matrix.set(j, i, i != j && nodes[static_cast<std::size_t>(i)].kind == NodeKind::Genuine);
            }
            continue;
        }
        Rng rng = make_rng(seed, StreamTag::Channel, static_cast<std::uint64_t>(j));
        std::normal_distribution<double> standard_normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i == j) {
                continue;
            }
            const Node& sender = nodes[static_cast<std::size_t>(i)];
            const double true_distance = (receiver.true_position - sender.true_position).norm();
            const double claimed_distance = (receiver.true_position - sender.claimed_position).norm();
            if (!(true_distance > 0.0) || !(claimed_distance > 0.0)) {
                throw std::domain_error("accuse_approve: coincident positions between nodes " +
                                        std::to_string(receiver.id) + " and " + std::to_string(sender.id));
            }
            const double noise = params.noise_sigma * standard_normal(rng);
            const double received = noisy_received_power(params, true_distance, noise);
            matrix.set(j, i, link_verdict(params, claimed_distance, received) == Verdict::Accuse);
        }
    }
    return matrix;
}

Eigen::VectorXi count_approvals(const AccusationMatrix& matrix, const ActiveMask& active)
{
    if (active.size() != matrix.size()) {
        throw std::invalid_argument("count_approvals: mask size does not match matrix");
    }
    const Eigen::RowVectorXi rows = active.cast<int>().matrix().transpose();
    const Eigen::MatrixXi approves = (!matrix.grid()).cast<int>().matrix();
    Eigen::VectorXi counts = (rows * approves).transpose();
    return active.select(counts.array(), 0).matrix();
}

std::map<NodeId, int> count_approvals(const AccusationMatrix& matrix, const std::set<NodeId>& active)
{
    ActiveMask mask = ActiveMask::Constant(matrix.size(), false);
    for (const NodeId id : active) {
        mask(matrix.index_of(id)) = true;
    }
    const Eigen::VectorXi counts = count_approvals(matrix, mask);
    std::map<NodeId, int> out;
    for (const NodeId id : active) {
        out[id] = counts(matrix.index_of(id));
    }
    return out;
}

namespace {

void run_fixpoint(const AccusationMatrix& matrix, ActiveMask& active, double theta, int step,
                  std::vector<FilterRound>& rounds)
{
    for (;;) {
        FilterRound round;
        round.step = step;
        round.active_count = static_cast<int>(active.count());
        round.theta = theta;
        round.threshold = threshold(round.active_count, theta);

        const Eigen::VectorXi approvals = count_approvals(matrix, active);
        std::vector<Eigen::Index> newly_filtered;
        for (Eigen::Index i = 0; i < matrix.size(); ++i) {
            if (active(i) && approvals(i) < round.threshold) {
                newly_filtered.push_back(i);
                round.removed.push_back(matrix.ids()[static_cast<std::size_t>(i)]);
                round.removed_approvals.push_back(approvals(i));
            }
        }
        for (const Eigen::Index i : newly_filtered) {
            active(i) = false;
        }
        rounds.push_back(std::move(round));
        if (newly_filtered.empty()) {
            return;
        }
    }
}

FilterResult finish(const AccusationMatrix& matrix, const ActiveMask& active, std::vector<FilterRound> rounds)
{
    FilterResult result;
    result.rounds = std::move(rounds);
    for (Eigen::Index i = 0; i < matrix.size(); ++i) {
        (active(i) ? result.final_genuine_set : result.final_filtered_set)
            .push_back(matrix.ids()[static_cast<std::size_t>(i)]);
    }
    std::sort(result.final_genuine_set.begin(), result.final_genuine_set.end());
    std::sort(result.final_filtered_set.begin(), result.final_filtered_set.end());
    return result;
}

} // namespace

FilterResult filter_fixpoint(const AccusationMatrix& matrix, double theta)
{
    const double thetas[] = {theta};
    return scheduled_filter(matrix, thetas);
}

FilterResult scheduled_filter(const AccusationMatrix& matrix, std::span<const double> thetas)
{
    ActiveMask active = ActiveMask::Constant(matrix.size(), true);
    std::vector<FilterRound> rounds;
    int step = 0;
    for (const double theta : thetas) {
        run_fixpoint(matrix, active, theta, step++, rounds);
    }
    return finish(matrix, active, std::move(rounds));
}

std::vector<double> quantile_schedule(const ThetaTable& table)
{
    std::vector<double> thetas;
    thetas.reserve(11);
    thetas.push_back(0.0);
    for (int d = 1; d <= 9; ++d) {
        thetas.push_back(table.quantile(d));
    }
    thetas.push_back(static_cast<double>(table.theta_star));
    return thetas;
}

FilterResult quantile_filter(const AccusationMatrix& matrix, const ThetaTable& table)
{
    return scheduled_filter(matrix, quantile_schedule(table));
}

} // namespace posverify
