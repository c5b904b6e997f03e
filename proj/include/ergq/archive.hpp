#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergq/common.hpp"
#include "ergq/observables.hpp"

namespace ergq {

/// On-disk run archive: one directory holding a JSON manifest plus raw
/// little-endian IEEE-754 double arrays (row-major; complex values stored
/// as interleaved re/im pairs). Everything is inspectable from any language
/// without a container library.
///
/// manifest.json records the format version, the normalized configuration,
/// the wave lattice (order listed explicitly, with a fingerprint), array
/// shapes, and named scalars.
class Archive {
 public:
  static constexpr int format_version = 1;

  static Archive create(const std::filesystem::path& dir, const nlohmann::json& config) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ArchiveError("archive: cannot create directory '" + dir.string() + "'");
    Archive a;
    a.dir_ = dir;
    a.manifest_["format"] = "ergoquot-archive";
    a.manifest_["version"] = format_version;
    a.manifest_["created"] = timestamp();
    a.manifest_["config"] = config;
    a.manifest_["arrays"] = nlohmann::json::object();
    a.manifest_["scalars"] = nlohmann::json::object();
    a.save();
    return a;
  }

  static Archive open(const std::filesystem::path& dir) {
    Archive a;
    a.dir_ = dir;
    const auto path = dir / "manifest.json";
    std::ifstream in(path);
    if (!in) throw ArchiveError("archive: cannot open '" + path.string() + "'");
    try {
      in >> a.manifest_;
    } catch (const nlohmann::json::exception& err) {
      throw ArchiveError("archive: manifest is not valid JSON: " + std::string(err.what()));
    }
    if (a.manifest_.value("format", "") != "ergoquot-archive")
      throw ArchiveError("archive: '" + dir.string() + "' is not an archive directory");
    if (a.manifest_.value("version", 0) != format_version)
      throw ArchiveError("archive: unsupported format version");
    return a;
  }

  static bool exists(const std::filesystem::path& dir) {
    return std::filesystem::exists(dir / "manifest.json");
  }

  const std::filesystem::path& dir() const { return dir_; }
  const nlohmann::json& manifest() const { return manifest_; }

  nlohmann::json config() const { return manifest_.value("config", nlohmann::json()); }

  // ---- arrays ----

  bool has_array(const std::string& name) const {
    return manifest_.at("arrays").contains(name);
  }

  /// kind: "f64" (shape counts doubles) or "c128" (shape counts complex
  /// values, stored as interleaved re/im doubles).
  void write_array(const std::string& name, const std::string& kind,
                   const std::vector<std::size_t>& shape, std::span<const double> data,
                   const nlohmann::json& extra_meta = {}) {
    if (kind != "f64" && kind != "c128") throw ArchiveError("archive: unknown array kind");
    std::size_t count = 1;
    for (std::size_t s : shape) count *= s;
    if (kind == "c128") count *= 2;
    if (count != data.size())
      throw ArchiveError("archive: data length does not match shape for '" + name + "'");

    const std::string file = file_name(name);
    const auto path = dir_ / file;
    const auto tmp = dir_ / (file + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ArchiveError("archive: cannot write '" + tmp.string() + "'");
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
      if (!out) throw ArchiveError("archive: short write on '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);

    nlohmann::json meta;
    meta["file"] = file;
    meta["kind"] = kind;
    meta["shape"] = shape;
    meta["bytes"] = data.size() * sizeof(double);
    if (!extra_meta.is_null())
      for (const auto& [key, value] : extra_meta.items()) meta[key] = value;
    manifest_["arrays"][name] = meta;
    save();
  }

  std::vector<std::size_t> array_shape(const std::string& name) const {
    return array_meta(name).at("shape").get<std::vector<std::size_t>>();
  }

  nlohmann::json array_meta(const std::string& name) const {
    if (!has_array(name)) throw ArchiveError("archive: missing array '" + name + "'");
    return manifest_.at("arrays").at(name);
  }

  /// Raw doubles exactly as stored (complex arrays come back interleaved).
  std::vector<double> read_array(const std::string& name) const {
    const auto meta = array_meta(name);
    const auto path = dir_ / meta.at("file").get<std::string>();
    const auto declared = meta.at("bytes").get<std::size_t>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("archive: cannot open '" + path.string() + "'");
    in.seekg(0, std::ios::end);
    const auto actual = static_cast<std::size_t>(in.tellg());
    if (actual != declared)
      throw ArchiveError("archive: array '" + name + "' is " + std::to_string(actual) +
                         " bytes, manifest declares " + std::to_string(declared));
    in.seekg(0);
    std::vector<double> data(declared / sizeof(double));
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(declared));
    if (!in) throw ArchiveError("archive: short read on '" + path.string() + "'");
    return data;
  }

  void remove_array(const std::string& name) {
    if (!has_array(name)) return;
    const auto meta = array_meta(name);
    std::error_code ec;
    std::filesystem::remove(dir_ / meta.at("file").get<std::string>(), ec);
    manifest_["arrays"].erase(name);
    save();
  }

  // ---- scalars ----

  bool has_scalar(const std::string& name) const {
    return manifest_.at("scalars").contains(name);
  }
  void set_scalar(const std::string& name, double value) {
    manifest_["scalars"][name] = value;
    save();
  }
  double scalar(const std::string& name) const {
    if (!has_scalar(name)) throw ArchiveError("archive: missing scalar '" + name + "'");
    return manifest_.at("scalars").at(name).get<double>();
  }
  void remove_scalar(const std::string& name) {
    manifest_["scalars"].erase(name);
    save();
  }

  // ---- lattice ----

  bool has_lattice() const { return manifest_.contains("lattice"); }

  void set_lattice(const WaveLattice& lat) {
    nlohmann::json j;
    j["dim"] = lat.dim;
    j["bounds"] = lat.bounds;
    j["half"] = lat.half;
    j["hash"] = hex64(lat.hash());
    nlohmann::json waves = nlohmann::json::array();
    for (std::size_t i = 0; i < lat.size(); ++i) {
      auto k = lat.wave(i);
      waves.push_back(std::vector<int>(k.begin(), k.end()));
    }
    j["waves"] = std::move(waves);
    manifest_["lattice"] = std::move(j);
    save();
  }

  WaveLattice lattice() const {
    if (!has_lattice()) throw ArchiveError("archive: no lattice recorded");
    const auto& j = manifest_.at("lattice");
    WaveLattice lat;
    lat.dim = j.at("dim").get<int>();
    lat.bounds = j.at("bounds").get<std::vector<int>>();
    lat.half = j.at("half").get<bool>();
    for (const auto& w : j.at("waves")) {
      auto k = w.get<std::vector<int>>();
      lat.waves.insert(lat.waves.end(), k.begin(), k.end());
    }
    if (hex64(lat.hash()) != j.at("hash").get<std::string>())
      throw ArchiveError("archive: lattice fingerprint mismatch");
    return lat;
  }

  void save() {
    manifest_["updated"] = timestamp();
    const auto tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw ArchiveError("archive: cannot write manifest");
      out << manifest_.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir_ / "manifest.json");
  }

  static std::string file_name(std::string name) {
    for (char& c : name)
      if (c == '/') c = '_';
    return name + ".f64";
  }

 private:
  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

}  // namespace ergq
