#pragma once

#include "sincvae/run_config.hpp"

#include <filesystem>
#include <iosfwd>

namespace sincvae {

// Each command writes its resolved config to <out>/<command>.conf and its
// artifacts under <out>. Failures surface as sincvae::Error.

// bonn: train.svws (normal), test.svws (held-out normal + seizure).
// edf: train.svws, test.svws (held-out normal minutes + ictal windows) and
// tracks.svws (every window of the annotated seizure tracks).
// Both also write normalization.json.
void cmd_preprocess(const RunConfig& config);
// model.svae, history.csv, train.json
void cmd_train(const RunConfig& config);
// scores.csv for the test windows; val_scores.csv when training data is present.
void cmd_score(const RunConfig& config);
// report.json, confusion.txt; phases.json, phases.csv and trace_<track>.csv
// when annotations are configured.
void cmd_eval(const RunConfig& config, std::ostream& console);
// results.csv, selection.json, pvalues.csv, chosen.conf
void cmd_select(const RunConfig& config, std::ostream& console);
// train.svws, test.svws, tracks.svws, annotations.csv, and <track>.edf files
void cmd_synth(const RunConfig& config);
void cmd_edf_info(const std::filesystem::path& path, std::ostream& out);

}  // namespace sincvae
