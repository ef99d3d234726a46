// lulcseg: batch driver for the dual-branch spectral/SAR segmentation model.
//
// Subcommands: synth, train, eval, infer, count, gradcheck, ablate.
// Exit codes: 0 success, 2 config error, 3 data/format error, 4 numerical
// failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lulcseg/commands.hpp"

namespace {

struct CliArgs {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  bool has_seed = false;
  std::uint64_t seed = 0;
  std::string out_dir, manifest, eval_manifest, checkpoint, patch, output, preset;
};

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("-c,--config", args.config_file, "Config file (key = value lines)");
  cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set train.lr0=0.001")
      ->take_all();
  cmd->add_option("--seed", args.seed, "Master seed")->each([&args](const std::string&) {
    args.has_seed = true;
  });
  cmd->add_option("-o,--out-dir", args.out_dir, "Output directory");
}

lulcseg::RunConfig resolve(const CliArgs& args) {
  lulcseg::RunConfig cfg;
  if (!args.preset.empty()) lulcseg::apply_override(cfg, "net.preset", args.preset);
  if (!args.config_file.empty()) lulcseg::apply_config_file(cfg, args.config_file);
  for (const std::string& kv : args.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw lulcseg::ConfigError("--set expects key=value, got '" + kv + "'");
    lulcseg::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.has_seed) cfg.seed = args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.manifest.empty()) cfg.manifest = args.manifest;
  if (!args.eval_manifest.empty()) cfg.eval_manifest = args.eval_manifest;
  if (!args.checkpoint.empty()) cfg.checkpoint = args.checkpoint;
  if (!args.patch.empty()) cfg.patch_path = args.patch;
  if (!args.output.empty()) cfg.output_path = args.output;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-branch multispectral/SAR land-cover segmentation"};
  app.require_subcommand(1);

  CliArgs args;

  std::string n_patches, patch_size;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic bimodal dataset");
  add_common(synth, args);
  synth->add_option("--n-patches", n_patches, "Number of patches (data.n_patches)");
  synth->add_option("--patch-size", patch_size, "Patch extent in pixels (data.patch_size)");

  CLI::App* train = app.add_subcommand("train", "Train on a dataset manifest");
  add_common(train, args);
  train->add_option("-d,--dataset", args.manifest, "Dataset manifest path");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(eval, args);
  eval->add_option("-d,--dataset", args.manifest, "Dataset manifest path");
  eval->add_option("--eval-dataset", args.eval_manifest, "Separate evaluation manifest");
  eval->add_option("-k,--checkpoint", args.checkpoint, "Checkpoint path");
  eval->add_option("--report", args.output, "Also write the metrics report to this file");

  CLI::App* infer = app.add_subcommand("infer", "Predict labels for one patch");
  add_common(infer, args);
  infer->add_option("-k,--checkpoint", args.checkpoint, "Checkpoint path");
  infer->add_option("-p,--patch", args.patch, "Input DWPX patch");
  infer->add_option("--out", args.output, "Output label-map path");

  CLI::App* count = app.add_subcommand("count", "Report parameter and FLOP counts");
  add_common(count, args);
  count->add_option("--preset", args.preset, "Net preset: desk or full");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  add_common(gradcheck, args);

  CLI::App* ablate = app.add_subcommand("ablate", "Run the desk-scale ablation table");
  add_common(ablate, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (!n_patches.empty()) args.overrides.push_back("data.n_patches=" + n_patches);
    if (!patch_size.empty()) args.overrides.push_back("data.patch_size=" + patch_size);
    lulcseg::RunConfig cfg = resolve(args);
    if (synth->parsed()) return lulcseg::cmd_synth(cfg, std::cout);
    if (train->parsed()) return lulcseg::cmd_train(cfg, std::cout);
    if (eval->parsed()) return lulcseg::cmd_eval(cfg, std::cout);
    if (infer->parsed()) return lulcseg::cmd_infer(cfg, std::cout);
    if (count->parsed()) return lulcseg::cmd_count(cfg, std::cout);
    if (gradcheck->parsed()) return lulcseg::cmd_gradcheck(cfg, std::cout);
    if (ablate->parsed()) return lulcseg::cmd_ablate(cfg, std::cout);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const lulcseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lulcseg::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lulcseg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const lulcseg::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
