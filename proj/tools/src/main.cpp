#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "config_file.hpp"
#include "lumisplat/checkpoint.hpp"
#include "lumisplat/dataset.hpp"
#include "lumisplat/errors.hpp"
#include "lumisplat/metrics.hpp"
#include "lumisplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace lumisplat;

namespace {

std::pair<int, int> parse_size(const std::string& size) {
  const size_t x = size.find('x');
  if (x == std::string::npos)
    throw DataError("--size expects WxH, got '" + size + "'");
  try {
    const int w = std::stoi(size.substr(0, x));
    const int h = std::stoi(size.substr(x + 1));
    if (w < 1 || h < 1) throw std::invalid_argument(size);
    return {w, h};
  } catch (const std::exception&) {
    throw DataError("--size expects WxH, got '" + size + "'");
  }
}

int run_synth(const std::string& preset, int views, int test_views, const std::string& size,
              std::uint64_t seed, const std::string& out) {
  DatasetSpec spec;
  spec.preset = preset;
  spec.train_views = views;
  spec.test_views = test_views;
  std::tie(spec.width, spec.height) = parse_size(size);
  spec.seed = seed;
  synth_dataset(spec, out);
  std::cout << "wrote " << views << " training and " << test_views << " test views to " << out
            << "\n";
  return 0;
}

int run_train(const std::string& data, const std::string& config, const std::string& out,
              const std::string& mode, const std::string& resume, std::int64_t iterations) {
  TrainConfig cfg;
  if (!config.empty()) cfg = load_train_config(config);
  if (iterations > 0) cfg.iterations = iterations;
  cfg = make_ablation_config(cfg, mode);

  Trainer trainer(load_views(data, "train"), cfg);
  if (resume.empty())
    trainer.init();
  else
    trainer.resume_from(resume);

  const fs::path final_path = trainer.run(out);
  std::cout << "final checkpoint: " << final_path.string() << "\n";
  return 0;
}

int run_render(const std::string& ckpt, const std::string& cameras, const std::string& out,
               bool pfm) {
  TrainerState state;
  load_checkpoint(ckpt, state);
  const auto cams = load_cameras(cameras);

  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) throw DataError("cannot create output directory " + out);
  for (const auto& [name, camera] : cams) {
    const Image img = render_novel_view(state.model, camera);
    write_png(fs::path(out) / (name + ".png"), img);
    if (pfm) write_pfm(fs::path(out) / (name + ".pfm"), img);
  }
  std::cout << "rendered " << cams.size() << " views to " << out << "\n";
  return 0;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& out) {
  const auto scores = evaluate_image_dirs(pred, gt);
  write_metrics_csv(out, scores);
  std::printf("mean PSNR %.3f dB over %zu views -> %s\n", mean_psnr(scores), scores.size(),
              out.c_str());
  return 0;
}

int run_ablate(const std::string& data, const std::string& config, const std::string& out,
               std::string runs_dir, std::int64_t iterations) {
  TrainConfig base;
  if (!config.empty()) base = load_train_config(config);
  if (iterations > 0) base.iterations = iterations;

  const auto train_views = load_views(data, "train");
  const auto test_views = load_views(data, "test");
  if (runs_dir.empty())
    runs_dir = (fs::path(out).parent_path() / "ablation_runs").string();

  std::ofstream csv(out);
  if (!csv) throw DataError("cannot write " + out);
  csv << "config,psnr,ssim\n";
  char buf[128];
  for (const std::string label : {"global_only", "bias_only", "global_plus_bias", "full"}) {
    Trainer trainer(train_views, make_ablation_config(base, label));
    trainer.init();
    trainer.run(fs::path(runs_dir) / label);

    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const ViewRecord& v : test_views) {
      const Image img = render_novel_view(trainer.state().model, v.camera);
      psnr_sum += psnr(img, v.image);
      ssim_sum += ssim_metric(img, v.image);
    }
    const double n = static_cast<double>(test_views.size());
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", label.c_str(), psnr_sum / n,
                  ssim_sum / n);
    csv << buf;
    std::printf("%-18s PSNR %.3f dB\n", label.c_str(), psnr_sum / n);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-splat radiance fields from badly exposed multi-view captures"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
  std::string preset = "varying", size = "64x64", out_dir;
  int views = 16, test_views = 4;
  std::uint64_t seed = 7;
  synth->add_option("--preset", preset, "lowlight|overexposure|varying|identity");
  synth->add_option("--views", views, "training view count");
  synth->add_option("--test-views", test_views, "held-out normal-light view count");
  synth->add_option("--size", size, "image size as WxH");
  synth->add_option("--seed", seed, "scene + degradation seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Optimize a scene on a dataset");
  std::string data_dir, config_file, train_out, mode = "full", resume;
  std::int64_t iterations = 0;
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--config", config_file, "key=value config file");
  train->add_option("--out", train_out, "run directory for logs and checkpoints")->required();
  train->add_option("--mode", mode, "baseline|global_only|bias_only|global_plus_bias|full");
  train->add_option("--resume", resume, "checkpoint to resume from");
  train->add_option("--iterations", iterations, "override the iteration count");

  auto* render = app.add_subcommand("render", "Render novel views from a checkpoint");
  std::string ckpt, cameras, render_out;
  bool pfm = false;
  render->add_option("--ckpt", ckpt, "checkpoint file")->required();
  render->add_option("--cameras", cameras, "transforms JSON with target cameras")->required();
  render->add_option("--out", render_out, "output directory")->required();
  render->add_flag("--pfm", pfm, "also write float PFM images");

  auto* eval = app.add_subcommand("eval", "Score rendered views against ground truth");
  std::string pred_dir, gt_dir, eval_out;
  eval->add_option("--pred", pred_dir, "directory of rendered PNGs")->required();
  eval->add_option("--gt", gt_dir, "directory of reference PNGs")->required();
  eval->add_option("--out", eval_out, "metrics CSV path")->required();

  auto* ablate = app.add_subcommand("ablate", "Train the four module configurations");
  std::string ablate_data, ablate_config, ablate_out, runs_dir;
  std::int64_t ablate_iters = 0;
  ablate->add_option("--data", ablate_data, "dataset directory")->required();
  ablate->add_option("--config", ablate_config, "key=value config file");
  ablate->add_option("--out", ablate_out, "comparison CSV path")->required();
  ablate->add_option("--runs", runs_dir, "directory for the per-config runs");
  ablate->add_option("--iterations", ablate_iters, "override the iteration count");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return run_synth(preset, views, test_views, size, seed, out_dir);
    if (train->parsed())
      return run_train(data_dir, config_file, train_out, mode, resume, iterations);
    if (render->parsed()) return run_render(ckpt, cameras, render_out, pfm);
    if (eval->parsed()) return run_eval(pred_dir, gt_dir, eval_out);
    if (ablate->parsed())
      return run_ablate(ablate_data, ablate_config, ablate_out, runs_dir, ablate_iters);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
