// SPDX-License-Identifier: Apache-2.0
//
// wsa: command-line front end.
//
// Exit codes: 0 success, 1 a check did not pass (gradcheck) or an unexpected
// failure, 2 bad arguments, 3 I/O, 4 shape/config mismatch, 5 non-finite
// values. Results go to stdout, diagnostics to stderr.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wsa/analysis/analysis.hpp"
#include "wsa/analysis/csv.hpp"
#include "wsa/attention/flops.hpp"
#include "wsa/core/error.hpp"
#include "wsa/dsp/wav.hpp"
#include "wsa/losses/train.hpp"
#include "wsa/metrics/metrics.hpp"
#include "wsa/model/checkpoint.hpp"
#include "wsa/model/config.hpp"
#include "wsa/model/model.hpp"

namespace fs = std::filesystem;
using namespace wsa;

namespace {

// Bad flag combinations discovered after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p) || fs::is_directory(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void require_even(std::optional<std::size_t> w) {
  if (w && *w % 2 != 0) throw ConfigError("window must be even, got " + std::to_string(*w));
}

void print_flops(const attention::FlopsReport& full, const attention::FlopsReport& r) {
  std::printf("mode %s\nseq %llu\nfull_scores %llu\nscores %llu\nreduction %s\n",
              attention::to_string(r.mode).c_str(), static_cast<unsigned long long>(r.seq),
              static_cast<unsigned long long>(full.score_count), static_cast<unsigned long long>(r.score_count),
              analysis::format_number(r.reduction_vs_full).c_str());
}

// Applies --window/--sinks to a loaded checkpoint. A full model is converted;
// a WSA model must already carry the requested geometry.
model::SepModel with_attention(model::SepModel m, std::optional<std::size_t> window, std::size_t sinks) {
  if (!window) return m;
  const attention::WsaConfig cfg{*window, sinks};
  if (m.config.attention_mode == model::AttentionKind::full) return model::convert_to_wsa(m, cfg);
  if (m.config.wsa.window != cfg.window || m.config.wsa.sinks != cfg.sinks) {
    throw ConfigError("checkpoint already uses WSA with window " + std::to_string(m.config.wsa.window) +
                      " and " + std::to_string(m.config.wsa.sinks) + " sinks");
  }
  return m;
}

std::vector<std::pair<std::string, analysis::EvalPair>> load_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("eval directory not found: " + dir.string());
  const std::string suffix = ".mix.wav";
  std::vector<std::pair<std::string, analysis::EvalPair>> pairs;
  std::vector<fs::path> mixes;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() && name.ends_with(suffix)) mixes.push_back(e.path());
  }
  std::sort(mixes.begin(), mixes.end());
  for (const auto& mix : mixes) {
    const std::string name = mix.filename().string();
    const std::string stem = name.substr(0, name.size() - suffix.size());
    const fs::path target = dir / (stem + ".target.wav");
    if (!fs::is_regular_file(target)) {
      std::cerr << "skipping " << name << ": no " << target.filename().string() << '\n';
      continue;
    }
    pairs.push_back({stem, {dsp::read_wav(mix), dsp::read_wav(target)}});
  }
  if (pairs.empty()) throw UsageError("no <name>.mix.wav / <name>.target.wav pairs in " + dir.string());
  return pairs;
}

void emit(const analysis::CsvTable& table, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << analysis::to_string(table);
  } else {
    analysis::write_csv(table, out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Band-split separation with windowed sink attention"};
  app.require_subcommand(1);

  // config
  std::string preset = "toy";
  auto* config_cmd = app.add_subcommand("config", "Print a model-config JSON preset");
  config_cmd->add_option("--preset", preset, "toy | reference | demo")->check(CLI::IsMember({"toy", "reference", "demo"}));

  // init
  std::string init_config, init_out;
  std::uint64_t init_seed = 0;
  std::size_t init_train_steps = 0;
  double init_lr = 1e-3;
  auto* init_cmd = app.add_subcommand("init", "Write a randomly initialized (optionally pretrained) checkpoint");
  init_cmd->add_option("--config", init_config, "model-config JSON (default: toy preset)");
  init_cmd->add_option("--seed", init_seed);
  init_cmd->add_option("--train-steps", init_train_steps, "recon-only Adam steps on synthetic mixtures");
  init_cmd->add_option("--lr", init_lr);
  init_cmd->add_option("--out", init_out)->required();

  // separate
  std::string sep_input, sep_weights, sep_out;
  std::optional<std::size_t> sep_window;
  std::size_t sep_sinks = 0;
  auto* sep_cmd = app.add_subcommand("separate", "Separate a mixture WAV");
  sep_cmd->add_option("--input", sep_input)->required();
  sep_cmd->add_option("--weights", sep_weights)->required();
  sep_cmd->add_option("--out", sep_out)->required();
  sep_cmd->add_option("--window", sep_window, "WSA window (even); converts a full checkpoint");
  sep_cmd->add_option("--sinks", sep_sinks);

  // sweep
  std::string sweep_weights, sweep_dir, sweep_out;
  std::vector<std::size_t> sweep_windows{200, 100, 50, 20, 10};
  auto* sweep_cmd = app.add_subcommand("sweep", "Zero-shot window sweep over an eval directory");
  sweep_cmd->add_option("--weights", sweep_weights)->required();
  sweep_cmd->add_option("--eval-dir", sweep_dir)->required();
  sweep_cmd->add_option("--windows", sweep_windows)->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "CSV path (default: stdout)");

  // analyze
  std::string an_weights, an_input, an_out;
  std::size_t an_crop = 30;
  std::vector<std::size_t> an_windows{2, 6, 10, 20, 50};
  auto* an_cmd = app.add_subcommand("analyze", "Dump attention maps, diagonal crops and locality");
  an_cmd->add_option("--weights", an_weights)->required();
  an_cmd->add_option("--input", an_input)->required();
  an_cmd->add_option("--out-dir", an_out)->required();
  an_cmd->add_option("--crop", an_crop);
  an_cmd->add_option("--windows", an_windows)->delimiter(',');

  // flops
  std::uint64_t fl_seq = 801;
  std::size_t fl_window = 10, fl_sinks = 8;
  auto* fl_cmd = app.add_subcommand("flops", "Attention score counts under the cost model");
  fl_cmd->add_option("--seq", fl_seq);
  fl_cmd->add_option("--window", fl_window);
  fl_cmd->add_option("--sinks", fl_sinks);

  // gradcheck
  losses::GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the training loss gradient");
  gc_cmd->add_option("--seed", gc.seed);
  gc_cmd->add_flag("--f64", gc.f64, "double precision (tolerance 1e-4 instead of 1e-2)");
  gc_cmd->add_option("--samples", gc.samples);
  gc_cmd->add_option("--eps", gc.eps, "finite-difference step (0: precision default)");

  // distill-demo
  losses::DistillDemoConfig dd;
  std::string dd_out;
  auto* dd_cmd = app.add_subcommand("distill-demo", "Distill a WSA student from a full-attention teacher");
  dd_cmd->add_option("--steps", dd.steps);
  dd_cmd->add_option("--pretrain-steps", dd.pretrain_steps);
  dd_cmd->add_option("--seed", dd.seed);
  dd_cmd->add_option("--lr", dd.lr);
  dd_cmd->add_option("--out", dd_out, "loss-history CSV (default: stdout)");

  // synth
  std::string sy_dir;
  std::size_t sy_count = 4, sy_channels = 1;
  double sy_seconds = 1.0, sy_rate = 16000.0;
  std::uint64_t sy_seed = 0;
  auto* sy_cmd = app.add_subcommand("synth", "Write synthetic <name>.mix.wav / <name>.target.wav pairs");
  sy_cmd->add_option("--out-dir", sy_dir)->required();
  sy_cmd->add_option("--count", sy_count);
  sy_cmd->add_option("--seconds", sy_seconds);
  sy_cmd->add_option("--rate", sy_rate);
  sy_cmd->add_option("--channels", sy_channels);
  sy_cmd->add_option("--seed", sy_seed);

  // eval
  std::string ev_est, ev_ref, ev_out;
  auto* ev_cmd = app.add_subcommand("eval", "SDR, cSDR, fullness and bleedless of an estimate");
  ev_cmd->add_option("--estimate", ev_est)->required();
  ev_cmd->add_option("--reference", ev_ref)->required();
  ev_cmd->add_option("--out", ev_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*config_cmd) {
      const auto cfg = preset == "reference"  ? model::reference_model_config()
                       : preset == "demo" ? losses::distill_demo_config()
                                          : model::toy_model_config();
      std::cout << model::to_json(cfg) << '\n';
    } else if (*init_cmd) {
      if (!init_config.empty()) require_file(init_config, "model config");
      const auto cfg = init_config.empty() ? model::toy_model_config() : model::load_model_config(init_config);
      auto m = model::init_toy_model(cfg, init_seed);
      if (init_train_steps > 0) {
        const model::SepModel frozen = m;
        losses::DistillConfig dc;
        dc.steps = init_train_steps;
        dc.lr = init_lr;
        dc.seed = init_seed;
        dc.weights = {0.0, 0.0};
        const auto hist = losses::distill_loop(frozen, m, dc);
        std::cerr << "recon " << hist.front().recon << " -> " << hist.back().recon << '\n';
      }
      model::save_checkpoint(m, init_out);
    } else if (*sep_cmd) {
      require_even(sep_window);
      require_file(sep_input, "input");
      require_file(sep_weights, "checkpoint");
      const auto mix = dsp::read_wav(sep_input);
      const auto m = with_attention(model::load_checkpoint(sep_weights), sep_window, sep_sinks);
      const auto result = model::separate(m, mix);
      dsp::write_wav(sep_out, result.audio);
      const std::uint64_t frames = m.config.stft.frames(mix.length());
      const auto mode = m.config.attention_mode == model::AttentionKind::wsa ? attention::AttentionMode::wsa
                                                                             : attention::AttentionMode::full;
      print_flops(attention::attention_flops(frames, attention::AttentionMode::full),
                  attention::attention_flops(frames, mode, m.config.wsa));
    } else if (*sweep_cmd) {
      for (std::size_t w : sweep_windows) require_even(w);
      require_file(sweep_weights, "checkpoint");
      const auto named = load_pairs(sweep_dir);
      const auto m = model::load_checkpoint(sweep_weights);
      std::vector<analysis::EvalPair> pairs;
      for (const auto& [name, p] : named) pairs.push_back(p);
      emit(analysis::sweep_table(analysis::zero_shot_sweep(m, pairs, sweep_windows)), sweep_out);
    } else if (*an_cmd) {
      require_file(an_input, "input");
      require_file(an_weights, "checkpoint");
      const auto audio = dsp::read_wav(an_input);
      const auto m = model::load_checkpoint(an_weights);
      const auto records = analysis::capture_attention(m, audio);
      fs::create_directories(an_out);
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string stem = "site" + std::to_string(i) + "_" + model::to_string(r.axis);
        analysis::write_csv(analysis::map_table(r.map), fs::path(an_out) / (stem + ".csv"));
        if (r.seq_len >= an_crop) {
          analysis::write_csv(analysis::map_table(analysis::diagonal_crop(r.map, an_crop)),
                              fs::path(an_out) / (stem + "_crop.csv"));
        } else {
          std::cerr << stem << ": " << r.seq_len << " tokens, no " << an_crop << " x " << an_crop << " crop\n";
        }
      }
      const auto table = analysis::locality_table(analysis::locality_stats(records, an_windows));
      analysis::write_csv(table, fs::path(an_out) / "locality.csv");
      std::cout << analysis::to_string(table);
    } else if (*fl_cmd) {
      const attention::WsaConfig cfg{fl_window, fl_sinks};
      const auto full = attention::attention_flops(fl_seq, attention::AttentionMode::full, cfg);
      const auto wsa = attention::attention_flops(fl_seq, attention::AttentionMode::wsa, cfg);
      std::printf("full %llu\nwsa %llu\nreduction %s\n", static_cast<unsigned long long>(full.score_count),
                  static_cast<unsigned long long>(wsa.score_count),
                  analysis::format_number(wsa.reduction_vs_full).c_str());
    } else if (*gc_cmd) {
      const double tol = gc.f64 ? 1e-4 : 1e-2;
      const auto rep = losses::gradcheck_toy(gc);
      const bool pass = rep.max_rel_error <= tol;
      std::printf("max_rel_error %s\nchecked %zu\nskipped %zu\nworst %s\n%s (tolerance %s)\n",
                  analysis::format_number(rep.max_rel_error).c_str(), rep.checked, rep.skipped, rep.worst.c_str(),
                  pass ? "PASS" : "FAIL", analysis::format_number(tol).c_str());
      return pass ? 0 : 1;
    } else if (*dd_cmd) {
      const auto res = losses::distill_demo(dd);
      emit(analysis::loss_history_table(res.history), dd_out);
      const bool to_stdout = dd_out.empty() || dd_out == "-";
      (to_stdout ? std::cerr : std::cout) << "ratio " << analysis::format_number(res.ratio) << '\n';
    } else if (*sy_cmd) {
      if (sy_seconds <= 0 || sy_count == 0) throw UsageError("--seconds and --count must be positive");
      fs::create_directories(sy_dir);
      const auto length = static_cast<std::size_t>(sy_seconds * sy_rate);
      for (std::size_t i = 0; i < sy_count; ++i) {
        const auto mx = losses::synth_mixture(sy_rate, length, sy_seed + i, sy_channels);
        char stem[32];
        std::snprintf(stem, sizeof stem, "pair%03zu", i);
        dsp::write_wav(fs::path(sy_dir) / (std::string(stem) + ".mix.wav"), mx.mix);
        dsp::write_wav(fs::path(sy_dir) / (std::string(stem) + ".target.wav"), mx.target);
      }
    } else if (*ev_cmd) {
      require_file(ev_est, "estimate");
      require_file(ev_ref, "reference");
      const auto rep = metrics::evaluate(dsp::read_wav(ev_est), dsp::read_wav(ev_ref));
      emit(analysis::metric_table(
               {{"sdr", rep.sdr}, {"csdr", rep.csdr}, {"fullness", rep.fullness}, {"bleedless", rep.bleedless}}),
           ev_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 4;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 5;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
