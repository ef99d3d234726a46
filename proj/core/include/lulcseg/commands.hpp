#pragma once

#include <iosfwd>

#include "lulcseg/config.hpp"

namespace lulcseg {

// Command bodies behind the CLI. Each takes the fully resolved RunConfig,
// writes line-oriented UTF-8 to `out`, and returns a process exit code
// (0 on success). Failures surface as exceptions; the CLI maps them to
// exit codes 2 (config), 3 (data/format) and 4 (numerical).

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_infer(const RunConfig& cfg, std::ostream& out);
int cmd_count(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);

// One ablation benchmark run, exposed so tests can reproduce table rows.
struct AblationRow {
  std::string label;
  bool cross_attention, efficient_sa, mmam;
  SplitRatio split;
  std::uint64_t seed;
  double miou, oa, f1;
};
std::vector<AblationRow> run_ablation(const RunConfig& cfg);

}  // namespace lulcseg
