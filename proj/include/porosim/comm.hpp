#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace porosim {

class CommAborted : public std::runtime_error {
 public:
  explicit CommAborted(const std::string& why)
      : std::runtime_error("worker communication aborted: " + why) {}
};

// In-process message transport between workers. Channels are ordered and
// reliable: messages with the same (from, to, tag) are delivered FIFO.
class MsgHub {
 public:
  explicit MsgHub(int n_ranks) : n_ranks_(n_ranks) {}

  int size() const { return n_ranks_; }

  void send(int from, int to, int tag, std::vector<double> data);
  std::vector<double> recv(int from, int to, int tag);  // blocks

  // Wakes every blocked receiver with CommAborted; used when a worker dies.
  void abort(const std::string& why);

 private:
  using Key = std::tuple<int, int, int>;
  int n_ranks_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<Key, std::deque<std::vector<double>>> box_;
  bool aborted_ = false;
  std::string abort_reason_;
};

enum class ReduceOp { Sum, Max, Min, LogicalAnd, LogicalOr };

// Per-worker communication handle. Collectives operate over an explicit,
// ascending-sorted group of ranks that must include rank(); every member
// must call with identical arguments. Reductions are combined in ascending
// rank order at the group root, so results are identical on every member
// and bit-reproducible across runs.
class Comm {
 public:
  Comm(MsgHub& hub, int rank) : hub_(&hub), rank_(rank) {}

  int rank() const { return rank_; }
  int worldSize() const { return hub_->size(); }

  void send(int to, int tag, std::vector<double> v) {
    hub_->send(rank_, to, tag, std::move(v));
  }
  std::vector<double> recv(int from, int tag) {
    return hub_->recv(from, rank_, tag);
  }

  std::vector<double> allreduce(const std::vector<int>& group,
                                std::vector<double> v, ReduceOp op, int tag);
  double allreduceScalar(const std::vector<int>& group, double v, ReduceOp op,
                         int tag);
  bool allreduceAnd(const std::vector<int>& group, bool v, int tag);

  // Returns one vector per group member, in group order.
  std::vector<std::vector<double>> allgather(const std::vector<int>& group,
                                             const std::vector<double>& v,
                                             int tag);
  void barrier(const std::vector<int>& group, int tag);

  static std::vector<int> worldGroup(int n);

 private:
  MsgHub* hub_;
  int rank_;
};

// Message tag ranges, one block per subsystem so channels never collide.
namespace tags {
inline constexpr int ghost_exchange = 100;
inline constexpr int reduction = 200;
inline constexpr int gather = 300;
inline constexpr int linear_solver = 400;
inline constexpr int coupling = 500;
inline constexpr int output = 600;
}  // namespace tags

}  // namespace porosim
