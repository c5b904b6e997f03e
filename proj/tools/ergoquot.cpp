// Command-line front end for the ergodic-quotient pipeline.
//
// Subcommands mirror the pipeline stages: `run` executes everything,
// `average`/`distances`/`embed`/`cluster` recompute a single stage in an
// existing archive, `export` writes labeled point clouds as delimited text,
// and `verify` checks an archive's internal consistency.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure,
// 4 archive corruption.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ergq/archive.hpp"
#include "ergq/config.hpp"
#include "ergq/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitArchive = 4;

struct StageCli {
  std::string config_path;
  std::string archive_path;
  bool drop_unconverged = false;
};

ergq::Archive open_for_stage(const StageCli& cli, const ergq::RunConfig& cfg) {
  if (!ergq::Archive::exists(cli.archive_path))
    return ergq::Archive::create(cli.archive_path, cfg.normalized());
  ergq::Archive archive = ergq::Archive::open(cli.archive_path);
  if (archive.config() != cfg.normalized())
    throw ergq::ConfigError("archive at '" + cli.archive_path +
                            "' was produced by a different configuration");
  return archive;
}

bool parse_slice(const std::string& text, ergq::ExportSpec& spec) {
  // axis:lo:hi
  const auto p1 = text.find(':');
  const auto p2 = text.find(':', p1 + 1);
  if (p1 == std::string::npos || p2 == std::string::npos) return false;
  try {
    spec.slice_axis = std::stoi(text.substr(0, p1));
    spec.slice_lo = std::stod(text.substr(p1 + 1, p2 - p1 - 1));
    spec.slice_hi = std::stod(text.substr(p2 + 1));
  } catch (const std::exception&) {
    return false;
  }
  spec.sliced = true;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergodic-quotient coherent-structure pipeline"};
  app.require_subcommand(1);

  StageCli cli;
  std::string stage_name;
  for (const char* name : {"run", "average", "distances", "embed", "cluster"}) {
    auto* sub = app.add_subcommand(
        name, name == std::string("run") ? "run the full pipeline (resumes from completed stages)"
                                         : std::string("recompute the ") + name + " stage");
    sub->add_option("--config", cli.config_path, "run configuration (JSON)")->required();
    sub->add_option("--archive", cli.archive_path, "archive directory")->required();
    if (name == std::string("run") || name == std::string("distances"))
      sub->add_flag("--drop-unconverged", cli.drop_unconverged,
                    "exclude unconverged trajectories from the distance matrix onward");
    sub->callback([&stage_name, name] { stage_name = name; });
  }

  ergq::ExportSpec export_spec;
  std::string export_what = "labels";
  std::size_t export_coord = 0;
  std::string export_slice;
  std::string export_out;
  std::string export_archive;
  auto* sub_export = app.add_subcommand("export", "write a delimited-text point cloud");
  sub_export->add_option("--archive", export_archive, "archive directory")->required();
  sub_export->add_option("--what", export_what, "labels | coord")
      ->check(CLI::IsMember({"labels", "coord"}));
  sub_export->add_option("--coord", export_coord, "diffusion coordinate index (with --what coord)");
  sub_export->add_option("--slice", export_slice, "axis:lo:hi window on initial conditions");
  sub_export->add_option("--out", export_out, "output file (default: stdout)");
  sub_export->callback([&stage_name] { stage_name = "export"; });

  std::string verify_archive_path;
  auto* sub_verify = app.add_subcommand("verify", "check archive consistency");
  sub_verify->add_option("--archive", verify_archive_path, "archive directory")->required();
  sub_verify->callback([&stage_name] { stage_name = "verify"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  try {
    if (stage_name == "export") {
      export_spec.what = export_what == "coord" ? ergq::ExportSpec::What::Coord
                                                : ergq::ExportSpec::What::Labels;
      export_spec.coord = export_coord;
      if (!export_slice.empty() && !parse_slice(export_slice, export_spec))
        throw ergq::ConfigError("export: --slice expects axis:lo:hi");
      ergq::Archive archive = ergq::Archive::open(export_archive);
      if (export_out.empty()) {
        ergq::export_pointcloud(archive, export_spec, std::cout);
      } else {
        std::ofstream out(export_out, std::ios::trunc);
        if (!out) throw ergq::StageError("export: cannot write '" + export_out + "'");
        ergq::export_pointcloud(archive, export_spec, out);
      }
      return kExitOk;
    }

    if (stage_name == "verify") {
      const auto report = ergq::verify_archive(verify_archive_path);
      if (report.ok()) {
        std::cout << "archive ok\n";
        return kExitOk;
      }
      for (const auto& issue : report.issues) std::cerr << "verify: " << issue << '\n';
      return kExitArchive;
    }

    const ergq::RunConfig cfg = ergq::RunConfig::parse_file(cli.config_path);
    if (stage_name == "run") {
      ergq::PipelineOptions opt;
      opt.drop_unconverged = cli.drop_unconverged;
      ergq::run_pipeline(cfg, cli.archive_path, opt);
      return kExitOk;
    }

    ergq::Archive archive = open_for_stage(cli, cfg);
    // recomputing a stage leaves everything downstream stale
    bool after = false;
    for (const auto& s : ergq::pipeline_stages()) {
      if (s == stage_name) after = true;
      if (after) ergq::invalidate_stage(archive, s);
    }
    if (stage_name == "average") {
      if (!archive.has_array("ics")) ergq::stage_sample(cfg, archive);
      ergq::stage_average(cfg, archive);
    } else if (stage_name == "distances") {
      ergq::stage_distances(cfg, archive, cli.drop_unconverged);
    } else if (stage_name == "embed") {
      ergq::stage_embed(cfg, archive);
    } else if (stage_name == "cluster") {
      ergq::stage_cluster(cfg, archive);
    }
    return kExitOk;
  } catch (const ergq::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const ergq::ArchiveError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitArchive;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitStage;
  }
}
