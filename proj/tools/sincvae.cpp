#include "sincvae/commands.hpp"
#include "sincvae/error.hpp"
#include "sincvae/run_config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

using namespace sincvae;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInternal = 1;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 10;
    case ErrorCode::kShapeMismatch: return 11;
    case ErrorCode::kNonFinite: return 12;
    case ErrorCode::kIo: return 13;
    case ErrorCode::kFormat: return 14;
    case ErrorCode::kEdfTruncated: return 15;
    case ErrorCode::kEdfHeaderMismatch: return 16;
    case ErrorCode::kEdfUnsupported: return 17;
    case ErrorCode::kConfig: return 18;
    case ErrorCode::kState: return 19;
  }
  return kExitInternal;
}

std::string exit_code_help() {
  std::string s = "Exit codes:\n  0 success\n  1 internal error\n  2 usage error\n";
  for (ErrorCode c : {ErrorCode::kInvalidArgument, ErrorCode::kShapeMismatch, ErrorCode::kNonFinite, ErrorCode::kIo,
                      ErrorCode::kFormat, ErrorCode::kEdfTruncated, ErrorCode::kEdfHeaderMismatch,
                      ErrorCode::kEdfUnsupported, ErrorCode::kConfig, ErrorCode::kState}) {
    s += "  " + std::to_string(exit_code(c)) + " " + error_code_name(c) + "\n";
  }
  s += "Errors print one line to stderr: error code=<name> exit=<n> message=\"...\"\n";
  return s;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  return s;
}

int report(const std::string& name, int code, const std::string& message) {
  std::cerr << "error code=" << name << " exit=" << code << " message=\"" << one_line(message) << "\"\n";
  return code;
}

std::string key_help() {
  std::string s = "Config keys (key = value; defaults in brackets):\n";
  for (const auto& k : RunConfig::keys()) s += "  " + k.name + " [" + k.default_value + "]  " + k.help + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SincVAE: sinc-filterbank variational autoencoder for EEG anomaly detection"};
  app.footer(exit_code_help());
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  std::string out_dir;
  std::string edf_path;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--set", overrides, "override, key=value (repeatable)");
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->footer(key_help());
  };
  CLI::App* preprocess = app.add_subcommand("preprocess", "segment, filter and normalize Bonn or EDF data");
  CLI::App* train = app.add_subcommand("train", "train a model on normal windows");
  CLI::App* score = app.add_subcommand("score", "per-window reconstruction MSE");
  CLI::App* eval = app.add_subcommand("eval", "threshold detection metrics and phase rates");
  CLI::App* select = app.add_subcommand("select", "grid search with statistical model selection");
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic EEG dataset with bursts");
  CLI::App* edf_info = app.add_subcommand("edf-info", "print an EDF header");
  for (CLI::App* sub : {preprocess, train, score, eval, select, synth}) common(sub);
  edf_info->add_option("path", edf_path, "EDF file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", kExitUsage, e.what());
  }

  try {
    if (edf_info->parsed()) {
      cmd_edf_info(edf_path, std::cout);
      return 0;
    }
    RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) config.apply(o);
    if (seed >= 0) config.set("seed", std::to_string(seed));
    if (!out_dir.empty()) config.set("out", out_dir);

    if (preprocess->parsed()) cmd_preprocess(config);
    if (train->parsed()) cmd_train(config);
    if (score->parsed()) cmd_score(config);
    if (eval->parsed()) cmd_eval(config, std::cout);
    if (select->parsed()) cmd_select(config, std::cout);
    if (synth->parsed()) cmd_synth(config);
    return 0;
  } catch (const Error& e) {
    return report(error_code_name(e.code()), exit_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return report("internal", kExitInternal, e.what());
  }
}
