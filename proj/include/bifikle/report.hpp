#pragma once

#include <filesystem>

#include "bifikle/driver.hpp"

namespace bifikle {

// Plot-ready data files for a campaign directory: error_vs_stage.csv,
// cv_heatmap.csv, uq_bands.csv, correlation.csv. When the directory is a
// replicates root (policy subdirectories), also cross-policy
// test_histogram.csv and per-policy aggregates. Corrupt stages are skipped
// and flagged on stderr.
void write_report(const std::filesystem::path& campaign_dir,
                  const std::filesystem::path& out_dir);

}  // namespace bifikle
