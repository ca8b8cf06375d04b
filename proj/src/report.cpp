#include "bifikle/report.hpp"

#include <cstdio>
#include <sstream>

#include "bifikle/common.hpp"
#include "bifikle/surrogate.hpp"

namespace bifikle {

namespace {

std::filesystem::path stage_dir(const std::filesystem::path& root, int stage) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "stage_%04d", stage);
  return root / buf;
}

int count_stages(const std::filesystem::path& root) {
  int n = 0;
  while (std::filesystem::exists(stage_dir(root, n) / "complete.marker")) ++n;
  return n;
}

void report_single_campaign(const std::filesystem::path& dir,
                            const std::filesystem::path& out_dir) {
  AlHistory history = load_campaign(dir);
  std::filesystem::create_directories(out_dir);
  const int n_stages = count_stages(dir);

  // error_vs_stage.csv straight from the stage metrics.
  {
    std::ostringstream os;
    os << "stage,n_hf,mu_eps,mean_cv,max_cv\n";
    for (const auto& rec : history.stages)
      os << rec.stage << ',' << rec.n_hf << ',' << format_double(rec.mu_eps) << ','
         << format_double(rec.mean_cv) << ',' << format_double(rec.max_cv) << "\n";
    write_text_file(out_dir / "error_vs_stage.csv", os.str());
  }

  // cv_heatmap.csv: rows are data points, columns acquisition stages; the
  // raw textual error cells are copied so entries stay bit-exact.
  {
    const int n_points = history.n_hf();
    std::vector<std::vector<std::string>> cells(
        static_cast<std::size_t>(n_points), std::vector<std::string>(static_cast<std::size_t>(n_stages), "nan"));
    for (int s = 0; s < n_stages; ++s) {
      auto path = stage_dir(dir, s) / "cv_errors.csv";
      try {
        std::istringstream in(read_text_file(path));
        std::string line;
        int header_seen = 0;
        int err_col = -1;
        while (std::getline(in, line)) {
          if (line.empty() || line[0] == '#') continue;
          auto cols = split_csv_line(line);
          if (!header_seen) {
            header_seen = 1;
            for (std::size_t c = 0; c < cols.size(); ++c)
              if (cols[c] == "error") err_col = static_cast<int>(c);
            continue;
          }
          int idx = static_cast<int>(parse_double(cols[0], "cv sample index"));
          if (idx >= 0 && idx < n_points && err_col >= 0)
            cells[static_cast<std::size_t>(idx)][static_cast<std::size_t>(s)] =
                cols[static_cast<std::size_t>(err_col)];
        }
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: skipping corrupt stage %d: %s\n", s, e.what());
      }
    }
    std::ostringstream os;
    os << "point";
    for (int s = 0; s < n_stages; ++s) os << ",stage" << s;
    os << "\n";
    for (int i = 0; i < n_points; ++i) {
      os << i;
      for (int s = 0; s < n_stages; ++s) os << ',' << cells[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
      os << "\n";
    }
    write_text_file(out_dir / "cv_heatmap.csv", os.str());
  }

  // uq_bands.csv: bifidelity surrogate and the LF-only comparison component
  // built from the same (augmented) LF data.
  {
    const auto& surr = history.surrogates[0];
    auto [bf_mean, bf_std] = propagate_uq(surr, history.config.uq_samples,
                                          history.config.uq_seed);
    KlePceComponent lf_only =
        build_component(history.lf_snaps[0], history.bounds, history.config.build);
    auto [lf_mean, lf_std] = propagate_uq(lf_only, history.config.uq_samples,
                                          history.config.uq_seed);
    std::ostringstream os;
    os << "point,bf_mean,bf_lo,bf_hi,bf_std,lfkle_mean,lfkle_lo,lfkle_hi,lfkle_std\n";
    for (int j = 0; j < surr.grid->points(); ++j) {
      os << j << ',' << format_double(bf_mean.values(j)) << ','
         << format_double(bf_mean.values(j) - bf_std.values(j)) << ','
         << format_double(bf_mean.values(j) + bf_std.values(j)) << ','
         << format_double(bf_std.values(j)) << ',' << format_double(lf_mean.values(j)) << ','
         << format_double(lf_mean.values(j) - lf_std.values(j)) << ','
         << format_double(lf_mean.values(j) + lf_std.values(j)) << ','
         << format_double(lf_std.values(j)) << "\n";
    }
    write_text_file(out_dir / "uq_bands.csv", os.str());
  }

  // correlation.csv between paired LF and HF training snapshots.
  if (history.n_hf() >= 3) {
    Field corr = correlation_field(history.lf_paired[0], history.hf_snaps[0]);
    std::ostringstream os;
    os << "point,pearson_r,missing\n";
    for (int j = 0; j < corr.grid->points(); ++j) {
      bool missing = std::isnan(corr.values(j));
      os << j << ',' << format_double(corr.values(j)) << ',' << (missing ? 1 : 0) << "\n";
    }
    write_text_file(out_dir / "correlation.csv", os.str());
  }
}

void report_replicates_root(const std::filesystem::path& dir,
                            const std::filesystem::path& out_dir) {
  std::vector<std::string> policies;
  for (const char* p : {"ei_max", "random", "ei_min"})
    if (std::filesystem::exists(dir / p / "rep_0" / "config.txt")) policies.push_back(p);
  if (policies.empty()) throw DataError("no campaigns found under " + dir.string());

  std::filesystem::create_directories(out_dir);

  // Cross-policy histograms per replicate pair (first two policies).
  if (policies.size() >= 2) {
    std::ostringstream os;
    os << "policy,replicate,error\n";
    for (int r = 0;; ++r) {
      auto dir_a = dir / policies[0] / ("rep_" + std::to_string(r));
      auto dir_b = dir / policies[1] / ("rep_" + std::to_string(r));
      if (!std::filesystem::exists(dir_a / "config.txt") ||
          !std::filesystem::exists(dir_b / "config.txt"))
        break;
      try {
        AlHistory a = load_campaign(dir_a);
        AlHistory b = load_campaign(dir_b);
        CrossPolicyTable table = cross_policy_test(a, b);
        for (double e : table.errors_a_on_b)
          os << policies[0] << ',' << r << ',' << format_double(e) << "\n";
        for (double e : table.errors_b_on_a)
          os << policies[1] << ',' << r << ',' << format_double(e) << "\n";
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: cross test skipped for replicate %d: %s\n", r, e.what());
      }
    }
    write_text_file(out_dir / "test_histogram.csv", os.str());
  }

  // Per-policy per-replicate reports land in subdirectories.
  for (const auto& p : policies) {
    for (int r = 0;; ++r) {
      auto camp = dir / p / ("rep_" + std::to_string(r));
      if (!std::filesystem::exists(camp / "config.txt")) break;
      try {
        report_single_campaign(camp, out_dir / p / ("rep_" + std::to_string(r)));
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: report skipped for %s: %s\n", camp.string().c_str(),
                     e.what());
      }
    }
  }
}

}  // namespace

void write_report(const std::filesystem::path& campaign_dir,
                  const std::filesystem::path& out_dir) {
  if (std::filesystem::exists(campaign_dir / "config.txt")) {
    report_single_campaign(campaign_dir, out_dir);
  } else {
    report_replicates_root(campaign_dir, out_dir);
  }
}

}  // namespace bifikle
