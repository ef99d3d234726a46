#include "lulcseg/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "lulcseg/checkpoint.hpp"
#include "lulcseg/gradcheck.hpp"
#include "lulcseg/patch_io.hpp"
#include "lulcseg/rng.hpp"
#include "lulcseg/trainer.hpp"

namespace lulcseg {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v, const char* fmt = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void ensure_out_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
}

// Deterministic per-candidate scene seed stream.
std::uint64_t scene_seed(std::uint64_t master, i64 index) {
  return SplitMix64(master).fork(static_cast<std::uint64_t>(index)).next_u64();
}

// Generates patches until `count` of them have a usable SAR composite;
// candidates whose window holds no observation are discarded.
std::vector<PatchSample> synth_dataset(const RunConfig& cfg, std::uint64_t master_seed,
                                       i64 count, i64 size, i64* discarded_out = nullptr) {
  ClassPalette palette = ClassPalette::make(master_seed, cfg.n_classes);
  SceneConfig scfg;
  scfg.size = size;
  scfg.n_classes = cfg.n_classes;
  scfg.min_observations = cfg.min_observations;
  scfg.max_observations = cfg.max_observations;
  scfg.label_grid = cfg.label_grid;

  std::vector<PatchSample> out;
  i64 discarded = 0;
  for (i64 candidate = 0; static_cast<i64>(out.size()) < count; ++candidate) {
    if (candidate > count * 1000 + 1000)
      throw DataError("SAR window discards nearly every candidate patch; widen "
                      "data.window_days or raise data.min_observations");
    Scene scene = generate_scene(scene_seed(master_seed, candidate), scfg, palette);
    std::optional<Tensor> composite = composite_sar(scene.series, cfg.window_days);
    if (!composite) {
      ++discarded;
      continue;
    }
    PatchSample sample;
    sample.spectral = scene.spectral;
    sample.sar = *composite;
    sample.labels = scene.labels;
    sample.patch_id = scene.patch_id;
    out.push_back(std::move(sample));
  }
  if (discarded_out) *discarded_out = discarded;
  return out;
}

void write_metrics_report(std::ostream& os, const MetricsSummary& m, i64 params, i64 flops,
                          double fps) {
  os << "miou=" << format_double(m.miou) << "\n";
  os << "oa=" << format_double(m.oa) << "\n";
  os << "f1=" << format_double(m.f1) << "\n";
  for (size_t c = 0; c < m.iou.size(); ++c)
    os << "iou_c" << c << "=" << format_double(m.iou[c]) << "\n";
  os << "params=" << params << "\n";
  os << "flops=" << flops << "\n";
  os << "fps=" << format_double(fps, "%.2f") << "\n";
}

Network build_network(const RunConfig& cfg, i64 patch_size, std::uint64_t seed) {
  cfg.net.validate(patch_size, patch_size);
  return Network(cfg.net, DType::f32, seed);
}

}  // namespace

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  ensure_out_dir(cfg);
  i64 discarded = 0;
  std::vector<PatchSample> patches =
      synth_dataset(cfg, cfg.seed, cfg.n_patches, cfg.patch_size, &discarded);

  std::vector<std::string> names;
  for (size_t i = 0; i < patches.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "patch_%05zu.dwpx", i);
    write_patch(patches[i], (fs::path(cfg.out_dir) / name).string());
    names.push_back(name);
  }
  std::string manifest = (fs::path(cfg.out_dir) / "manifest.txt").string();
  write_manifest(names, manifest);
  out << "wrote " << names.size() << " patches (" << discarded
      << " candidates discarded for empty SAR windows)\n";
  out << "manifest=" << manifest << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.manifest.empty()) throw ConfigError("train: data.manifest is required");
  ensure_out_dir(cfg);
  std::vector<PatchSample> data = load_dataset(cfg.manifest);
  i64 s = data[0].spectral.dim(1);

  Network net = build_network(cfg, s, cfg.seed);

  std::string log_path = (fs::path(cfg.out_dir) / "loss_log.txt").string();
  std::string final_path = (fs::path(cfg.out_dir) / "checkpoint.ssfw").string();

  TrainResult result = run_training(net, data, cfg, [&](i64 epoch) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_epoch%03" PRId64 ".ssfw", epoch + 1);
    save_checkpoint((fs::path(cfg.out_dir) / name).string(), net.params());
  });
  save_checkpoint(final_path, net.params());

  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot open loss log for writing: " + log_path);
  for (const StepRecord& r : result.log) {
    char line[128];
    std::snprintf(line, sizeof(line), "%" PRId64 " %.17g %.17g\n", r.step, r.lr, r.loss);
    log << line;
  }
  log.close();

  out << "trained " << result.log.size() << " steps on " << data.size() << " patches\n";
  out << "final_loss=" << format_double(result.final_loss) << "\n";
  out << "checkpoint=" << final_path << "\n";
  out << "loss_log=" << log_path << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.checkpoint.empty()) throw ConfigError("eval: a checkpoint path is required");
  std::string manifest = cfg.eval_manifest.empty() ? cfg.manifest : cfg.eval_manifest;
  if (manifest.empty()) throw ConfigError("eval: data.manifest is required");
  std::vector<PatchSample> data = load_dataset(manifest);
  i64 s = data[0].spectral.dim(1);

  Network net = build_network(cfg, s, cfg.seed);
  load_checkpoint(cfg.checkpoint, net.params());

  EvalResult result = evaluate_model(net, data);
  CostReport costs = net.count_costs(s, s);
  write_metrics_report(out, result.metrics, costs.total_params, costs.total_flops, result.fps);

  if (!cfg.output_path.empty()) {
    std::ofstream f(cfg.output_path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + cfg.output_path);
    write_metrics_report(f, result.metrics, costs.total_params, costs.total_flops, result.fps);
  }
  return 0;
}

int cmd_infer(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  if (cfg.checkpoint.empty()) throw ConfigError("infer: a checkpoint path is required");
  if (cfg.patch_path.empty()) throw ConfigError("infer: a patch path is required");
  if (cfg.output_path.empty()) throw ConfigError("infer: an output path is required");
  PatchSample sample = read_patch(cfg.patch_path);
  if (!sample.spectral.defined() || !sample.sar.defined())
    throw DataError("infer: patch file carries no imagery");
  i64 s = sample.spectral.dim(1);

  Network net = build_network(cfg, s, cfg.seed);
  load_checkpoint(cfg.checkpoint, net.params());

  Labels predicted = infer_labels(net, sample);
  write_label_map(predicted, sample.patch_id, cfg.output_path);
  out << "prediction=" << cfg.output_path << "\n";
  return 0;
}

int cmd_count(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  Network net = build_network(cfg, cfg.patch_size, cfg.seed);
  CostReport report = net.count_costs(cfg.patch_size, cfg.patch_size);
  i64 param_check = net.params().total_params();

  out << "# counting convention: 1 multiply-accumulate = 2 FLOPs; bias adds included;\n";
  out << "# norms, activations, softmax and upsampling excluded; attention includes\n";
  out << "# the QK and AV contractions. Input " << cfg.patch_size << "x" << cfg.patch_size
      << ", " << cfg.net.in_spectral << "+" << cfg.net.in_sar << " bands.\n";
  out << "params=" << report.total_params << "\n";
  out << "flops=" << report.total_flops << "\n";
  for (const CostReport::Item& item : report.items) {
    out << "params." << item.component << "=" << item.params << "\n";
    out << "flops." << item.component << "=" << item.flops << "\n";
  }
  if (param_check != report.total_params)
    throw NumericError("component parameter counts do not sum to the registry total");
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  std::vector<GradCheckResult> results = run_op_gradient_suite(cfg.seed + 1);
  results.push_back(run_network_gradient_check(cfg.seed + 1));
  bool all_pass = true;
  for (const GradCheckResult& r : results) {
    out << "gradcheck " << r.name << ": " << (r.pass ? "PASS" : "FAIL")
        << " max_rel_err=" << format_double(r.max_rel_err, "%.3e") << " coords="
        << r.coords_checked << "\n";
    all_pass = all_pass && r.pass;
  }
  out << (all_pass ? "gradcheck: all passed\n" : "gradcheck: FAILURES\n");
  if (!all_pass) throw NumericError("gradient check failed");
  return 0;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg) {
  cfg.validate();
  // Fixed benchmark: one candidate stream from the master seed; the first
  // `ablate_patches` valid scenes train, the next `ablate_eval_patches`
  // evaluate. Both splits share the class palette.
  std::vector<PatchSample> all = synth_dataset(
      cfg, cfg.seed, cfg.ablate_patches + cfg.ablate_eval_patches, cfg.ablate_patch_size);
  std::vector<PatchSample> train_set(all.begin(),
                                     all.begin() + static_cast<std::ptrdiff_t>(cfg.ablate_patches));
  std::vector<PatchSample> eval_set(all.begin() + static_cast<std::ptrdiff_t>(cfg.ablate_patches),
                                    all.end());

  struct Combo {
    const char* label;
    bool ca, effsa, mmam;
  };
  const Combo combos[] = {
      {"none", false, false, false}, {"ca", true, false, false},
      {"effsa", false, true, false}, {"mmam", false, false, true},
      {"effsa+mmam", false, true, true}, {"ca+mmam", true, false, true},
      {"ca+effsa", true, true, false}, {"full", true, true, true},
  };
  const SplitRatio ratios[] = {{1, 4}, {1, 2}, {3, 4}};

  std::vector<AblationRow> rows;
  auto run_one = [&](const std::string& label, bool ca, bool effsa, bool mmam, SplitRatio split,
                     std::uint64_t run_seed) {
    RunConfig rc = cfg;
    rc.net.cross_attention = ca;
    rc.net.efficient_sa = effsa;
    rc.net.mmam = mmam;
    rc.net.split = split;
    rc.epochs = cfg.ablate_epochs;
    rc.seed = run_seed;
    rc.net.validate(cfg.ablate_patch_size, cfg.ablate_patch_size);
    Network net(rc.net, DType::f32, run_seed);
    run_training(net, train_set, rc);
    EvalResult ev = evaluate_model(net, eval_set);
    rows.push_back({label, ca, effsa, mmam, split, run_seed, ev.metrics.miou, ev.metrics.oa,
                    ev.metrics.f1});
  };

  for (const Combo& combo : combos)
    for (int s = 0; s < cfg.ablate_seeds; ++s)
      run_one(combo.label, combo.ca, combo.effsa, combo.mmam, cfg.net.split,
              cfg.seed + static_cast<std::uint64_t>(s));
  for (const SplitRatio& ratio : ratios) {
    std::string label = "split " + std::to_string(ratio.num) + "/" + std::to_string(ratio.den);
    for (int s = 0; s < cfg.ablate_seeds; ++s)
      run_one(label, true, true, true, ratio, cfg.seed + static_cast<std::uint64_t>(s));
  }
  return rows;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  ensure_out_dir(cfg);
  std::vector<AblationRow> rows = run_ablation(cfg);

  std::string table_path = (fs::path(cfg.out_dir) / "ablation.txt").string();
  std::ofstream table(table_path, std::ios::binary | std::ios::trunc);
  if (!table) throw DataError("cannot open ablation table for writing: " + table_path);

  auto emit = [&](const std::string& line) {
    out << line << "\n";
    table << line << "\n";
  };

  emit("# desk-scale ablation: " + std::to_string(cfg.ablate_patches) + " train patches, " +
       std::to_string(cfg.ablate_eval_patches) + " eval patches, " +
       std::to_string(cfg.ablate_epochs) + " epochs, " + std::to_string(cfg.ablate_seeds) +
       " seeds");
  std::string last_label;
  double miou_sum = 0, oa_sum = 0, f1_sum = 0;
  int group = 0;
  auto flush_mean = [&]() {
    if (group == 0) return;
    emit("mean label=\"" + last_label + "\" miou=" + format_double(miou_sum / group) +
         " oa=" + format_double(oa_sum / group) + " f1=" + format_double(f1_sum / group));
    miou_sum = oa_sum = f1_sum = 0;
    group = 0;
  };
  for (const AblationRow& r : rows) {
    if (r.label != last_label) {
      flush_mean();
      last_label = r.label;
    }
    emit("run label=\"" + r.label + "\" ca=" + (r.cross_attention ? "1" : "0") +
         " effsa=" + (r.efficient_sa ? "1" : "0") + " mmam=" + (r.mmam ? "1" : "0") +
         " split=" + std::to_string(r.split.num) + "/" + std::to_string(r.split.den) +
         " seed=" + std::to_string(r.seed) + " miou=" + format_double(r.miou) +
         " oa=" + format_double(r.oa) + " f1=" + format_double(r.f1));
    miou_sum += r.miou;
    oa_sum += r.oa;
    f1_sum += r.f1;
    group++;
  }
  flush_mean();
  out << "table=" << table_path << "\n";
  return 0;
}

}  // namespace lulcseg
