#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmdp/model.hpp"
#include "rmdp/rng.hpp"
#include "rmdp/semantics.hpp"

namespace rmdp::learn {

/// Q-table key: (vertex, quantized exit-value vector, action). The vector is
/// stored as integer multiples of the quantization resolution; flat and
/// 1-exit learners use an empty vector.
struct QKey {
  int comp = -1;
  int vid = -1;
  std::vector<std::int64_t> v;
  int action = sem::kNoOpAction;
  bool operator==(const QKey&) const = default;
};

struct QKeyHash {
  std::size_t operator()(const QKey& k) const {
    std::size_t h = std::hash<std::uint64_t>{}(
        (std::uint64_t(std::uint32_t(k.comp)) << 40) ^ (std::uint64_t(std::uint32_t(k.vid)) << 8) ^
        std::uint32_t(k.action + 1));
    for (std::int64_t x : k.v) h = h * 1099511628211ull + std::hash<std::int64_t>{}(std::uint64_t(x));
    return h;
  }
};

struct QTable {
  std::unordered_map<QKey, double, QKeyHash> entries;
  std::unordered_map<QKey, long, QKeyHash> visits;
  double initial_value = 0.0;
  double resolution = 0.001;

  double get(const QKey& k) const {
    auto it = entries.find(k);
    return it == entries.end() ? initial_value : it->second;
  }
};

/// Rounds to the nearest multiple of `resolution`, half away from zero.
std::vector<std::int64_t> quantize(const std::vector<double>& v, double resolution);
std::vector<double> dequantize(const std::vector<std::int64_t>& v, double resolution);

struct Hyperparameters {
  double alpha = 0.1;
  double alpha_power = 0.0;  // 0: constant alpha; else alpha_t = 1/visits^power
  double eps_initial = 0.1;
  double eps_final = 0.1;
  long eps_decay_steps = 0;  // 0: constant epsilon
  double quant = 0.001;
  int step_cap = 1000;
  long total_steps = 100000;
  double lambda = 1.0;  // box-wise discount, 1-exit learner only
  double q_init = 0.0;
  std::uint64_t seed = 0;
  int start_comp = 0;
  int start_entry = -1;  // -1: first entry of start_comp
  long eval_every = 0;  // 0: total_steps / 200
  int eval_episodes = 100;
  bool include_truncated_eval = false;
};

struct LearningCurve {
  std::vector<std::pair<long, double>> points;  // (training step, mean greedy return)
};

struct TrainResult {
  QTable q;
  LearningCurve curve;
  long truncated_episodes = 0;
};

/// Tabular Recursive Q-learning (multi-exit, exit-value abstraction).
TrainResult rql_train(const Rmdp& m, const Hyperparameters& h);
/// The 1-exit specialization with optional box-wise discount lambda.
TrainResult rql1_train(const Rmdp& m, const Hyperparameters& h);
/// Flat Q-learning baseline: stack events treated as ordinary transitions.
TrainResult flat_q_train(const Rmdp& m, const Hyperparameters& h);

enum class Algo { Rql, Rql1, FlatQ };
TrainResult train(const Rmdp& m, const Hyperparameters& h, Algo algo);

/// Greedy policy with live exit-value tracking; ties and unseen keys fall
/// back to the smallest legal action id.
class GreedyPolicy {
 public:
  GreedyPolicy(const Rmdp& m, const QTable& q, Algo algo);

  /// Runs one greedy episode from (start_comp, start_entry).
  sem::Trajectory episode(int start_comp, int start_entry, Rng& rng, int step_cap) const;
  /// Mean return over n episodes; truncated episodes are skipped unless
  /// include_truncated.
  double evaluate(int start_comp, int start_entry, Rng& rng, int step_cap, int episodes,
                  bool include_truncated) const;
  /// Greedy action at a vertex under a given (unquantized) exit-value vector.
  int action_at(int comp, int vid, const std::vector<double>& v) const;
  /// The normalized exit-value vector Algorithm 1 computes when entering
  /// `box` of `comp` under the current vector v.
  std::vector<double> exit_values(int comp, int box, const std::vector<double>& v) const;

 private:
  const Rmdp& m_;
  const QTable& q_;
  Algo algo_;
};

}  // namespace rmdp::learn
