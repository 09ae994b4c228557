#include "porosim/comm.hpp"

#include <algorithm>
#include <numeric>

namespace porosim {

void MsgHub::send(int from, int to, int tag, std::vector<double> data) {
  {
    std::lock_guard<std::mutex> lk(mu_);
    if (aborted_) throw CommAborted(abort_reason_);
    box_[{from, to, tag}].push_back(std::move(data));
  }
  cv_.notify_all();
}

std::vector<double> MsgHub::recv(int from, int to, int tag) {
  std::unique_lock<std::mutex> lk(mu_);
  const Key key{from, to, tag};
  cv_.wait(lk, [&] {
    if (aborted_) return true;
    auto it = box_.find(key);
    return it != box_.end() && !it->second.empty();
  });
  if (aborted_) throw CommAborted(abort_reason_);
  auto& q = box_[key];
  std::vector<double> v = std::move(q.front());
  q.pop_front();
  return v;
}

void MsgHub::abort(const std::string& why) {
  {
    std::lock_guard<std::mutex> lk(mu_);
    if (!aborted_) {
      aborted_ = true;
      abort_reason_ = why;
    }
  }
  cv_.notify_all();
}

namespace {

void combine(std::vector<double>& acc, const std::vector<double>& v,
             ReduceOp op) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    switch (op) {
      case ReduceOp::Sum: acc[i] += v[i]; break;
      case ReduceOp::Max: acc[i] = std::max(acc[i], v[i]); break;
      case ReduceOp::Min: acc[i] = std::min(acc[i], v[i]); break;
      case ReduceOp::LogicalAnd:
        acc[i] = (acc[i] != 0.0 && v[i] != 0.0) ? 1.0 : 0.0;
        break;
      case ReduceOp::LogicalOr:
        acc[i] = (acc[i] != 0.0 || v[i] != 0.0) ? 1.0 : 0.0;
        break;
    }
  }
}

}  // namespace

std::vector<double> Comm::allreduce(const std::vector<int>& group,
                                    std::vector<double> v, ReduceOp op,
                                    int tag) {
  if (group.size() <= 1) return v;
  const int root = group.front();
  if (rank_ == root) {
    for (std::size_t i = 1; i < group.size(); ++i)
      combine(v, recv(group[i], tag), op);
    for (std::size_t i = 1; i < group.size(); ++i) send(group[i], tag, v);
    return v;
  }
  send(root, tag, std::move(v));
  return recv(root, tag);
}

double Comm::allreduceScalar(const std::vector<int>& group, double v,
                             ReduceOp op, int tag) {
  return allreduce(group, {v}, op, tag)[0];
}

bool Comm::allreduceAnd(const std::vector<int>& group, bool v, int tag) {
  return allreduceScalar(group, v ? 1.0 : 0.0, ReduceOp::LogicalAnd, tag) != 0.0;
}

std::vector<std::vector<double>> Comm::allgather(const std::vector<int>& group,
                                                 const std::vector<double>& v,
                                                 int tag) {
  std::vector<std::vector<double>> out(group.size());
  if (group.size() == 1) {
    out[0] = v;
    return out;
  }
  const int root = group.front();
  if (rank_ == root) {
    out[0] = v;
    for (std::size_t i = 1; i < group.size(); ++i) out[i] = recv(group[i], tag);
    // broadcast flattened with per-member lengths
    std::vector<double> flat;
    flat.push_back(static_cast<double>(group.size()));
    for (const auto& m : out) flat.push_back(static_cast<double>(m.size()));
    for (const auto& m : out) flat.insert(flat.end(), m.begin(), m.end());
    for (std::size_t i = 1; i < group.size(); ++i) send(group[i], tag, flat);
    return out;
  }
  send(root, tag, v);
  const std::vector<double> flat = recv(root, tag);
  std::size_t pos = 1;
  std::vector<std::size_t> lens(group.size());
  for (std::size_t i = 0; i < group.size(); ++i)
    lens[i] = static_cast<std::size_t>(flat[pos++]);
  for (std::size_t i = 0; i < group.size(); ++i) {
    out[i].assign(flat.begin() + pos, flat.begin() + pos + lens[i]);
    pos += lens[i];
  }
  return out;
}

void Comm::barrier(const std::vector<int>& group, int tag) {
  allreduceScalar(group, 0.0, ReduceOp::Sum, tag);
}

std::vector<int> Comm::worldGroup(int n) {
  std::vector<int> g(n);
  std::iota(g.begin(), g.end(), 0);
  return g;
}

}  // namespace porosim
