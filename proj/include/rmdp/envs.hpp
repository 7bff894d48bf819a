#pragma once

#include <set>
#include <string>
#include <vector>

#include "rmdp/learn.hpp"
#include "rmdp/model.hpp"
#include "rmdp/transforms.hpp"

namespace rmdp::envs {

struct EnvSpec {
  std::string name;
  Rmdp model;
  int start_comp = 0;
  int start_entry = 0;  // node id
  learn::Hyperparameters hyper;
  std::string notes;
};

/// The cloud-computing model: three components T (task), S (server), H
/// (interrupt handler), seven boxes b1..b7.
Rmdp cloud_rmdp();
EnvSpec cloud_spec();

/// Two alternating cave-level grids; 'T' trap, 'E' climbing gear, 'I' the
/// fall-in cell. Rows are strings of {., T, E, I} of equal width.
struct SpelunkLayout {
  std::vector<std::string> type1;
  std::vector<std::string> type2;
};
SpelunkLayout default_spelunk_layout();

/// Layout file format: the type-1 rows, a blank line, then the type-2 rows.
/// Lines starting with '#' are comments.
SpelunkLayout parse_spelunk_layout(const std::string& text);

Rmdp spelunking_rmdp(double trap_p, double ascend_p, const SpelunkLayout& layout);
EnvSpec spelunking_spec();

/// 3x3 gridworld composed with the even-palindrome monitor PDA.
struct PalindromeParts {
  Rmdp grid;
  transforms::Pda pda;
  transforms::ProductRewards rewards;
  double corruption = 0.01;
  std::set<int> success;
};
PalindromeParts palindrome_parts();
Rmdp palindrome_env();
EnvSpec palindrome_spec();

}  // namespace rmdp::envs
