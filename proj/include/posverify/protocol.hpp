#pragma once

// Two-phase verification: every node accuses or approves every other node's
// claimed position (AccuseApprove), then all nodes run the same iterative
// filtering fixpoint over the broadcast accusation matrix.

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "posverify/geometry.hpp"
#include "posverify/rss_channel.hpp"

namespace posverify {

struct ThetaTable;

using NodeId = std::int64_t;

enum class NodeKind { Genuine, Malicious };

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::Genuine;
    Point2d true_position = Point2d::Zero();
    Point2d claimed_position = Point2d::Zero();
};

using ActiveMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Square verdict grid; entry (j, i) is true when node j accuses node i.
/// Rows and columns are indexed by position in ids().
class AccusationMatrix {
public:
    using Grid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

    AccusationMatrix() = default;
    explicit AccusationMatrix(std::vector<NodeId> ids);
    AccusationMatrix(std::vector<NodeId> ids, Grid accuses);

    Eigen::Index size() const { return accuses_.rows(); }
    const std::vector<NodeId>& ids() const { return ids_; }
    const Grid& grid() const { return accuses_; }

    Eigen::Index index_of(NodeId id) const;

    bool accuses(Eigen::Index accuser, Eigen::Index accused) const { return accuses_(accuser, accused); }
    void set(Eigen::Index accuser, Eigen::Index accused, bool accuse) { accuses_(accuser, accused) = accuse; }

    friend bool operator==(const AccusationMatrix& a, const AccusationMatrix& b)
    {
        return a.ids_ == b.ids_ && a.accuses_.rows() == b.accuses_.rows() &&
               a.accuses_.cols() == b.accuses_.cols() && (a.accuses_ == b.accuses_).all();
    }

private:
    std::vector<NodeId> ids_;
    Grid accuses_;
};

/// One pass of the filtering loop.
struct FilterRound {
    int step = 0;          // schedule step; always 0 for the plain fixpoint
    int active_count = 0;  // k at the start of the pass
    double theta = 0.0;
    double threshold = 0.0;
    std::vector<NodeId> removed;
    std::vector<int> removed_approvals; // aligned with removed

    friend bool operator==(const FilterRound&, const FilterRound&) = default;
};

struct FilterResult {
    std::vector<FilterRound> rounds;
    std::vector<NodeId> final_genuine_set;  // G, ascending
    std::vector<NodeId> final_filtered_set; // F, ascending

    friend bool operator==(const FilterResult&, const FilterResult&) = default;
};

/// Builds the verdict matrix. Genuine receivers test every link against one
/// noise draw; malicious rows accuse exactly the genuine nodes.
AccusationMatrix accuse_approve(std::span<const Node> nodes, const SignalParamsd& params, std::uint64_t seed);

/// Approvals received by each active node from active rows, self included.
std::map<NodeId, int> count_approvals(const AccusationMatrix& matrix, const std::set<NodeId>& active);

/// Mask-based variant of count_approvals, indexed like the matrix.
Eigen::VectorXi count_approvals(const AccusationMatrix& matrix, const ActiveMask& active);

/// Removes, simultaneously, every active node with fewer approvals than
/// threshold(k, theta), recounts among survivors and repeats until a pass
/// removes nobody.
FilterResult filter_fixpoint(const AccusationMatrix& matrix, double theta);

/// The eleven theta values used by quantile_filter: 0, the nine deciles, theta*.
std::vector<double> quantile_schedule(const ThetaTable& table);

/// Runs filter_fixpoint once per schedule entry, each on the previous step's
/// survivors.
FilterResult quantile_filter(const AccusationMatrix& matrix, const ThetaTable& table);

/// Same as quantile_filter with an explicit schedule.
FilterResult scheduled_filter(const AccusationMatrix& matrix, std::span<const double> thetas);

} // namespace posverify
