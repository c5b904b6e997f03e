#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ergq/archive.hpp"
#include "ergq/config.hpp"
#include "ergq/diffmap.hpp"
#include "ergq/kmeans.hpp"
#include "ergq/metric.hpp"
#include "ergq/parallel.hpp"
#include "ergq/sampling.hpp"

namespace ergq {

struct PipelineOptions {
  bool drop_unconverged = false;
};

// Stage outputs. A stage is complete when all of its arrays exist; deleting
// any of them marks the stage (and everything downstream) for recomputation.
inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> order{"sample", "average", "distances", "embed",
                                              "cluster"};
  return order;
}

inline std::vector<std::string> stage_arrays(const std::string& stage) {
  if (stage == "sample") return {"ics"};
  if (stage == "average")
    return {"averages", "avg/stop_time", "avg/final_adiff", "avg/converged", "avg/failed",
            "avg/n_steps"};
  if (stage == "distances") return {"distances", "sample_ids"};
  if (stage == "embed") return {"diff/eigvals", "diff/coords"};
  if (stage == "cluster") return {"labels", "cluster/centroids"};
  throw std::invalid_argument("unknown stage '" + stage + "'");
}

inline bool stage_complete(const Archive& archive, const std::string& stage) {
  for (const auto& name : stage_arrays(stage))
    if (!archive.has_array(name)) return false;
  if (stage == "average") return archive.has_lattice();
  return true;
}

inline void invalidate_stage(Archive& archive, const std::string& stage) {
  for (const auto& name : stage_arrays(stage)) archive.remove_array(name);
}

// ---------------------------------------------------------------------------

inline void stage_sample(const RunConfig& cfg, Archive& archive) {
  const auto states = sample_initial_conditions(cfg.ic, cfg.system.dim);
  const std::size_t n = states.size() / static_cast<std::size_t>(cfg.system.dim);
  archive.write_array("ics", "f64", {n, static_cast<std::size_t>(cfg.system.dim)}, states);
}

inline void stage_average(const RunConfig& cfg, Archive& archive) {
  if (!archive.has_array("ics")) throw StageError("average: archive has no initial conditions");
  const auto d = static_cast<std::size_t>(cfg.system.dim);
  const auto ics = archive.read_array("ics");
  const std::size_t n = ics.size() / d;
  if (n == 0) throw StageError("average: empty initial-condition set");

  const ObservableBasis basis = cfg.make_basis();
  const std::size_t L = basis.lattice.size();

  std::vector<double> averages(n * L * 2);
  std::vector<double> stop_time(n), final_adiff(n), converged(n), failed(n), n_steps(n);

  parallel_for(n, [&](std::size_t i) {
    std::span<const double> x0(ics.data() + i * d, d);
    QuotientSample s = run_until_converged(cfg.system, x0, basis, cfg.avg);
    for (std::size_t j = 0; j < L; ++j) {
      averages[(i * L + j) * 2] = s.averages[j].real();
      averages[(i * L + j) * 2 + 1] = s.averages[j].imag();
    }
    stop_time[i] = s.stop_time;
    final_adiff[i] = s.final_adiff;
    converged[i] = s.converged ? 1.0 : 0.0;
    failed[i] = s.failed ? 1.0 : 0.0;
    n_steps[i] = static_cast<double>(s.n_steps);
  });

  archive.set_lattice(basis.lattice);
  nlohmann::json meta;
  meta["lattice_hash"] = hex64(basis.lattice.hash());
  meta["omega"] = cfg.avg.omega;
  archive.write_array("averages", "c128", {n, L}, averages, meta);
  archive.write_array("avg/stop_time", "f64", {n}, stop_time);
  archive.write_array("avg/final_adiff", "f64", {n}, final_adiff);
  archive.write_array("avg/converged", "f64", {n}, converged);
  archive.write_array("avg/failed", "f64", {n}, failed);
  archive.write_array("avg/n_steps", "f64", {n}, n_steps);
}

inline void stage_distances(const RunConfig& cfg, Archive& archive, bool drop_unconverged) {
  for (const auto& need : {"averages", "avg/converged", "avg/failed"})
    if (!archive.has_array(need)) throw StageError("distances: archive has no averages");

  const WaveLattice lattice = archive.lattice();
  const std::size_t L = lattice.size();
  const auto raw = archive.read_array("averages");
  const auto conv = archive.read_array("avg/converged");
  const auto fail = archive.read_array("avg/failed");
  const std::size_t n = conv.size();

  std::vector<QuotientSample> included;
  std::vector<std::size_t> ids;
  std::vector<double> id_out;
  for (std::size_t i = 0; i < n; ++i) {
    if (fail[i] != 0.0) continue;  // singular trajectories carry no valid averages
    if (drop_unconverged && conv[i] == 0.0) continue;
    QuotientSample s;
    s.omega = cfg.avg.omega;
    s.converged = conv[i] != 0.0;
    s.averages.resize(L);
    for (std::size_t j = 0; j < L; ++j)
      s.averages[j] = complex{raw[(i * L + j) * 2], raw[(i * L + j) * 2 + 1]};
    included.push_back(std::move(s));
    ids.push_back(i);
    id_out.push_back(static_cast<double>(i));
  }
  if (included.empty())
    throw StageError("distances: no usable samples (all failed or dropped)");

  const auto params = SobolevParams::make(lattice, cfg.metric_s);
  DistanceMatrix dm = pairwise_matrix(included, params);
  dm.sample_ids = ids;

  nlohmann::json meta;
  meta["s"] = cfg.metric_s;
  meta["omega"] = cfg.avg.omega;
  meta["lattice_hash"] = hex64(lattice.hash());
  archive.write_array("distances", "f64", {dm.n, dm.n}, dm.d, meta);
  archive.write_array("sample_ids", "f64", {dm.n}, id_out);
  archive.set_scalar("distances/drop_unconverged", drop_unconverged ? 1.0 : 0.0);
}

inline void stage_embed(const RunConfig& cfg, Archive& archive) {
  for (const auto& need : {"distances", "sample_ids"})
    if (!archive.has_array(need)) throw StageError("embed: archive has no distance matrix");

  DistanceMatrix dm;
  dm.d = archive.read_array("distances");
  const auto ids = archive.read_array("sample_ids");
  dm.n = ids.size();
  if (dm.d.size() != dm.n * dm.n) throw StageError("embed: distance matrix shape mismatch");
  dm.sample_ids.assign(ids.begin(), ids.end());

  const std::size_t m = std::min(cfg.diff_m, dm.n);
  std::vector<double> eigvals, coords;
  double h = cfg.diff_h;
  std::size_t n_min = cfg.diff_n_min;
  if (dm.n == 1) {
    // a single sample embeds trivially
    eigvals = {1.0};
    coords = {1.0};
    if (h <= 0.0) h = 1.0;
  } else {
    n_min = std::min<std::size_t>(n_min, dm.n - 1);
    DiffusionEmbedding emb = embed(dm, n_min, m, cfg.diff_h);
    eigvals = emb.eigvals;
    coords = emb.coords;
    h = emb.h;
  }
  archive.write_array("diff/eigvals", "f64", {m}, eigvals);
  archive.write_array("diff/coords", "f64", {dm.n, m}, coords);
  archive.set_scalar("diff/h", h);
  archive.set_scalar("diff/n_min", static_cast<double>(n_min));
}

inline void stage_cluster(const RunConfig& cfg, Archive& archive) {
  if (cfg.cluster_k == 0) throw StageError("cluster: cluster.k is not set");
  for (const auto& need : {"diff/coords", "diff/eigvals"})
    if (!archive.has_array(need)) throw StageError("cluster: archive has no embedding");

  const auto shape = archive.array_shape("diff/coords");
  const std::size_t n = shape[0], m = shape[1];
  const auto coords = archive.read_array("diff/coords");

  // clustering consumes the eigenvalue-scaled coordinates past the trivial one
  std::size_t first_col = 1, ncols = std::min(cfg.cluster_dims, m > 1 ? m - 1 : 0);
  if (ncols == 0) {
    first_col = 0;
    ncols = 1;
  }
  std::vector<double> pts(n * ncols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ncols; ++c) pts[i * ncols + c] = coords[i * m + first_col + c];

  ClusterResult r = kmeans(pts, n, ncols, cfg.cluster_k, cfg.cluster_seed,
                           cfg.cluster_restarts);

  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<double>(r.labels[i]);
  archive.write_array("labels", "f64", {n}, labels);
  archive.write_array("cluster/centroids", "f64", {r.k, ncols}, r.centroids);
  archive.set_scalar("cluster/inertia", r.inertia);
  archive.set_scalar("cluster/k", static_cast<double>(r.k));
  archive.set_scalar("cluster/seed", static_cast<double>(r.seed));
  archive.set_scalar("cluster/iterations", static_cast<double>(r.iterations));
  archive.set_scalar("cluster/dims", static_cast<double>(ncols));
}

/// Runs sample -> average -> distances -> embed -> cluster, persisting after
/// each stage. Stages whose outputs already exist are skipped, so a run
/// resumes from the first missing artifact; rerunning a stage invalidates
/// everything downstream. The archive must have been produced by the same
/// configuration.
inline Archive run_pipeline(const RunConfig& cfg, const std::filesystem::path& dir,
                            const PipelineOptions& opt = {}) {
  Archive archive = Archive::exists(dir) ? Archive::open(dir) : Archive::create(dir, cfg.normalized());
  if (archive.config() != cfg.normalized())
    throw ConfigError("archive at '" + dir.string() +
                      "' was produced by a different configuration; use a fresh directory");

  // the drop flag is part of the distances stage identity
  const double want_drop = opt.drop_unconverged ? 1.0 : 0.0;
  if (stage_complete(archive, "distances") &&
      (!archive.has_scalar("distances/drop_unconverged") ||
       archive.scalar("distances/drop_unconverged") != want_drop)) {
    invalidate_stage(archive, "distances");
    invalidate_stage(archive, "embed");
    invalidate_stage(archive, "cluster");
  }

  bool dirty = false;
  for (const auto& stage : pipeline_stages()) {
    if (stage == "cluster" && cfg.cluster_k == 0) continue;
    if (!dirty && stage_complete(archive, stage)) continue;
    if (!dirty) {
      // first stage to recompute: everything after it is stale
      bool after = false;
      for (const auto& s : pipeline_stages()) {
        if (s == stage) after = true;
        if (after) invalidate_stage(archive, s);
      }
      dirty = true;
    }
    if (stage == "sample")
      stage_sample(cfg, archive);
    else if (stage == "average")
      stage_average(cfg, archive);
    else if (stage == "distances")
      stage_distances(cfg, archive, opt.drop_unconverged);
    else if (stage == "embed")
      stage_embed(cfg, archive);
    else if (stage == "cluster")
      stage_cluster(cfg, archive);
  }
  return archive;
}

// ---------------------------------------------------------------------------

struct ExportSpec {
  enum class What { Labels, Coord };
  What what = What::Labels;
  std::size_t coord = 0;
  bool sliced = false;
  int slice_axis = 0;
  double slice_lo = 0.0;
  double slice_hi = 0.0;
};

/// Writes one delimited-text row per sample in the labeled/embedded set:
/// sample id, initial-condition components, converged flag, cluster label
/// (when present), and the requested diffusion coordinate (when requested).
/// Values are printed with 17 significant digits so they round-trip to the
/// stored doubles.
inline void export_pointcloud(const Archive& archive, const ExportSpec& spec,
                              std::ostream& out) {
  if (!archive.has_array("ics")) throw ArchiveError("export: archive has no initial conditions");
  const auto ic_shape = archive.array_shape("ics");
  const std::size_t dim = ic_shape[1];
  const auto ics = archive.read_array("ics");

  std::vector<std::size_t> ids;
  if (archive.has_array("sample_ids")) {
    const auto raw = archive.read_array("sample_ids");
    ids.assign(raw.begin(), raw.end());
  } else {
    ids.resize(ic_shape[0]);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }

  std::vector<double> converged;
  if (archive.has_array("avg/converged")) converged = archive.read_array("avg/converged");

  std::vector<double> labels;
  if (archive.has_array("labels")) labels = archive.read_array("labels");
  if (spec.what == ExportSpec::What::Labels && labels.empty())
    throw ArchiveError("export: no cluster labels in the archive");

  std::vector<double> coords;
  std::size_t m = 0;
  if (spec.what == ExportSpec::What::Coord) {
    if (!archive.has_array("diff/coords"))
      throw ArchiveError("export: no diffusion coordinates in the archive");
    const auto shape = archive.array_shape("diff/coords");
    m = shape[1];
    if (spec.coord >= m)
      throw ArchiveError("export: coordinate index " + std::to_string(spec.coord) +
                         " out of range (m = " + std::to_string(m) + ")");
    coords = archive.read_array("diff/coords");
  }
  if (spec.sliced && (spec.slice_axis < 0 || spec.slice_axis >= static_cast<int>(dim)))
    throw ArchiveError("export: slice axis out of range");

  out << "id";
  for (std::size_t d = 0; d < dim; ++d) out << ",x" << d;
  out << ",converged";
  if (!labels.empty()) out << ",label";
  if (spec.what == ExportSpec::What::Coord) out << ",coord" << spec.coord;
  out << '\n';

  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };

  for (std::size_t row = 0; row < ids.size(); ++row) {
    const std::size_t i = ids[row];
    if (spec.sliced) {
      const double v = ics[i * dim + static_cast<std::size_t>(spec.slice_axis)];
      if (v < spec.slice_lo || v > spec.slice_hi) continue;
    }
    out << i;
    for (std::size_t d = 0; d < dim; ++d) {
      out << ',';
      emit(ics[i * dim + d]);
    }
    out << ',' << (converged.empty() || converged[i] != 0.0 ? 1 : 0);
    if (!labels.empty()) out << ',' << static_cast<long>(labels[row]);
    if (spec.what == ExportSpec::What::Coord) {
      out << ',';
      emit(coords[row * m + spec.coord]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

struct VerifyReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

/// Recomputes manifest fingerprints and structural invariants of an archive.
inline VerifyReport verify_archive(const std::filesystem::path& dir) {
  VerifyReport report;
  auto complain = [&](const std::string& what) { report.issues.push_back(what); };

  Archive archive;
  try {
    archive = Archive::open(dir);
  } catch (const std::exception& err) {
    complain(err.what());
    return report;
  }

  // declared byte lengths
  for (const auto& [name, meta] : archive.manifest().at("arrays").items()) {
    const auto path = dir / meta.at("file").get<std::string>();
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
      complain("array '" + name + "': file missing");
      continue;
    }
    if (size != meta.at("bytes").get<std::uintmax_t>())
      complain("array '" + name + "': byte length " + std::to_string(size) +
               " does not match manifest (" + std::to_string(meta.at("bytes").get<std::size_t>()) +
               ")");
  }
  if (!report.ok()) return report;

  // lattice fingerprint, and its echo on the averages array
  if (archive.has_lattice()) {
    try {
      const auto lat = archive.lattice();
      if (archive.has_array("averages")) {
        const auto meta = archive.array_meta("averages");
        if (meta.value("lattice_hash", "") != hex64(lat.hash()))
          complain("array 'averages': lattice fingerprint does not match the manifest lattice");
        const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2 || shape[1] != lat.size())
          complain("array 'averages': shape does not match the lattice size");
      }
    } catch (const std::exception& err) {
      complain(err.what());
    }
  }

  // distance matrix invariants
  if (archive.has_array("distances")) {
    const auto shape = archive.array_shape("distances");
    const auto d = archive.read_array("distances");
    if (shape.size() != 2 || shape[0] != shape[1]) {
      complain("array 'distances': not square");
    } else {
      const std::size_t n = shape[0];
      bool sym = true, diag = true, finite = true;
      for (std::size_t i = 0; i < n && (sym || diag || finite); ++i) {
        if (d[i * n + i] != 0.0) diag = false;
        for (std::size_t j = 0; j < n; ++j) {
          if (d[i * n + j] != d[j * n + i]) sym = false;
          if (!std::isfinite(d[i * n + j])) finite = false;
        }
      }
      if (!sym) complain("array 'distances': symmetry violation");
      if (!diag) complain("array 'distances': nonzero diagonal");
      if (!finite) complain("array 'distances': non-finite entries");

      // transition matrix built from these distances must be row-stochastic
      if (archive.has_scalar("diff/h") && n >= 2) {
        DistanceMatrix dm;
        dm.n = n;
        dm.d = d;
        dm.sample_ids.resize(n);
        const auto kernel = build_kernel(dm, archive.scalar("diff/h"));
        const auto ahat = density_normalize(kernel, n);
        const auto st = symmetrize_transition(ahat, n);
        for (std::size_t i = 0; i < n; ++i) {
          double row = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            row += st.s_hat[i * n + j] * std::sqrt(st.row_sums[j] / st.row_sums[i]);
          if (std::abs(row - 1.0) > 1e-12) {
            complain("transition matrix: row " + std::to_string(i) + " sums to " +
                     std::to_string(row));
            break;
          }
        }
      }
    }
  }

  if (archive.has_array("diff/eigvals")) {
    const auto ev = archive.read_array("diff/eigvals");
    if (ev.empty() || std::abs(ev[0] - 1.0) > 1e-8)
      complain("array 'diff/eigvals': leading eigenvalue is not 1");
    for (double v : ev)
      if (std::abs(v) > 1.0 + 1e-8) {
        complain("array 'diff/eigvals': eigenvalue outside the unit interval");
        break;
      }
    if (archive.has_array("diff/coords")) {
      const auto shape = archive.array_shape("diff/coords");
      const auto coords = archive.read_array("diff/coords");
      if (shape.size() != 2 || shape[1] != ev.size()) {
        complain("array 'diff/coords': shape does not match eigvals");
      } else {
        for (std::size_t i = 0; i < shape[0]; ++i)
          if (std::abs(coords[i * shape[1]] - ev[0]) > 1e-8) {
            complain("array 'diff/coords': trivial coordinate is not constant");
            break;
          }
      }
    }
  }

  if (archive.has_array("labels") && archive.has_scalar("cluster/k")) {
    const auto labels = archive.read_array("labels");
    const double k = archive.scalar("cluster/k");
    for (double l : labels)
      if (l < 0.0 || l >= k || l != std::floor(l)) {
        complain("array 'labels': label outside [0, k)");
        break;
      }
  }

  return report;
}

}  // namespace ergq
