// drdoc: retrieval-augmented question answering over caption documents.
//
//   drdoc caption --manifest M --cache DIR --config CFG [--fps 0.5]
//   drdoc run     --item FILE --config CFG [--trace OUT]
//   drdoc eval    --dataset D --config CFG --report OUT [--concurrency 4] [--trace-dir DIR]
//   drdoc replay  --trace T

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "drdoc/harness.hpp"

namespace fs = std::filesystem;
using drdoc::Backends;
using nlohmann::json;

namespace {

std::string parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << content;
}

int run_caption(const std::string& manifest, const std::string& cache_dir,
                const std::string& config_path, double fps_flag) {
  drdoc::HarnessConfig config = drdoc::load_config(config_path);
  const double fps = fps_flag > 0.0 ? fps_flag : config.run.fps;
  Backends backends =
      drdoc::make_backend_factory(config.backend, parent_dir(config_path))();

  auto statuses = drdoc::precaption(manifest, *backends.captioner, fps, cache_dir);
  int failures = 0;
  int calls = 0;
  for (const auto& status : statuses) {
    calls += status.new_calls;
    if (status.error.empty()) {
      std::cout << status.video_id << ": " << status.cached_frames << "/"
                << status.target_frames << " frames cached (" << status.new_calls
                << " new)\n";
    } else {
      ++failures;
      std::cout << status.video_id << ": " << status.cached_frames << "/"
                << status.target_frames << " frames cached, stopped: " << status.error << "\n";
    }
  }
  std::cout << statuses.size() << " videos, " << calls << " captioner calls, " << failures
            << " failed\n";
  return failures == 0 ? 0 : 1;
}

int run_single(const std::string& item_path, const std::string& config_path,
               const std::string& trace_path) {
  auto items = drdoc::load_dataset(item_path);
  if (items.empty()) throw std::invalid_argument("item file is empty: " + item_path);
  const drdoc::QAItem& item = items.front();

  drdoc::HarnessConfig config = drdoc::load_config(config_path);
  config.run.option_count = static_cast<int>(item.options.size());
  Backends backends =
      drdoc::make_backend_factory(config.backend, parent_dir(config_path))();
  if (item.frame_range) {
    backends.captioner =
        drdoc::make_offset_captioner(backends.captioner, item.frame_range->first - 1);
  }

  drdoc::VideoDocument doc = drdoc::load_item_document(item, parent_dir(item_path));
  drdoc::RunOutcome outcome =
      drdoc::run(doc, item.question, item.options, config.run, backends);

  if (!trace_path.empty()) write_file(trace_path, drdoc::trace_to_string(outcome.trace));

  std::cout << "status: " << outcome.status << "\n";
  if (outcome.answer) {
    std::cout << "answer: " << outcome.answer->letter
              << " (confidence " << outcome.answer->confidence << ")\n"
              << "because: " << outcome.answer->explanation << "\n";
    if (item.gold_letter) {
      std::cout << "gold:   " << *item.gold_letter
                << (outcome.answer->letter == *item.gold_letter ? " (correct)" : " (wrong)")
                << "\n";
    }
  } else {
    std::cout << "error: " << outcome.trace["error"]["message"].get<std::string>() << "\n";
  }
  return outcome.status == "error" ? 1 : 0;
}

int run_eval(const std::string& dataset_path, const std::string& config_path,
             const std::string& report_path, int concurrency, std::string trace_dir) {
  drdoc::HarnessConfig config = drdoc::load_config(config_path);
  auto items = drdoc::load_dataset(dataset_path);
  auto factory = drdoc::make_backend_factory(config.backend, parent_dir(config_path));

  drdoc::EvalOptions options;
  options.concurrency = concurrency;
  options.dataset_dir = parent_dir(dataset_path);
  if (trace_dir.empty()) trace_dir = (fs::path(parent_dir(report_path)) / "traces").string();
  options.trace_dir = trace_dir;

  drdoc::EvalReport report = drdoc::evaluate(items, config.run, factory, options);
  write_file(report_path, report.to_json().dump(2) + "\n");
  std::cout << report.to_table();
  std::cout << "report: " << report_path << "\ntraces: " << trace_dir << "\n";
  return 0;  // wrong answers are results, not failures
}

int run_replay(const std::string& trace_path) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) throw std::invalid_argument("trace file not found: " + trace_path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json trace = json::parse(buffer.str());

  auto mismatches = drdoc::replay_trace(trace);
  std::cout << "status: " << trace.value("status", "?") << ", "
            << trace.value("steps", json::array()).size() << " steps\n";
  if (mismatches.empty()) {
    std::cout << "replay clean: every recorded completion still parses to the recorded value\n";
    return 0;
  }
  for (const auto& mismatch : mismatches) std::cout << "mismatch: " << mismatch << "\n";
  std::cout << mismatches.size() << " mismatches\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-augmented question answering over caption documents"};
  app.require_subcommand(1);

  std::string manifest, cache_dir, config_path, item_path, trace_path, dataset_path, report_path,
      trace_dir;
  double fps = 0.0;
  int concurrency = 4;

  CLI::App* caption = app.add_subcommand("caption", "fill per-video caption caches");
  caption->add_option("--manifest", manifest, "video manifest (JSON Lines)")->required();
  caption->add_option("--cache", cache_dir, "cache directory")->required();
  caption->add_option("--config", config_path, "config file")->required();
  caption->add_option("--fps", fps, "sampling rate (default: config fps)");

  CLI::App* single = app.add_subcommand("run", "answer a single item");
  single->add_option("--item", item_path, "item file (JSON Lines, first item used)")->required();
  single->add_option("--config", config_path, "config file")->required();
  single->add_option("--trace", trace_path, "write the run trace here");

  CLI::App* eval = app.add_subcommand("eval", "run a dataset and report accuracy");
  eval->add_option("--dataset", dataset_path, "dataset file (JSON Lines)")->required();
  eval->add_option("--config", config_path, "config file")->required();
  eval->add_option("--report", report_path, "write the JSON report here")->required();
  eval->add_option("--concurrency", concurrency, "parallel item runs")->default_val(4);
  eval->add_option("--trace-dir", trace_dir, "per-item trace directory (default: traces/ beside the report)");

  CLI::App* replay = app.add_subcommand("replay", "re-parse a recorded trace");
  replay->add_option("--trace", trace_path, "trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (caption->parsed()) return run_caption(manifest, cache_dir, config_path, fps);
    if (single->parsed()) return run_single(item_path, config_path, trace_path);
    if (eval->parsed())
      return run_eval(dataset_path, config_path, report_path, concurrency, trace_dir);
    if (replay->parsed()) return run_replay(trace_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
