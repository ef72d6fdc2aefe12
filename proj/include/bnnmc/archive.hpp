#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bnnmc/errors.hpp"
#include "bnnmc/linalg.hpp"
#include "bnnmc/model.hpp"
#include "bnnmc/serde.hpp"

namespace bnnmc {

// On-disk posterior sample archive:
//   meta.json    model/prior/sampler/data configuration, D, S, format version
//   index.json   per-group name, shape, offset, length in the flat vector
//   samples.bin  S x D float64, little-endian, row-major, one row per sample
inline constexpr int kArchiveFormatVersion = 1;
inline constexpr const char* kArchiveCreator = "bnnmc 0.1.0";

struct GroupIndexEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool is_hyperparameter = false;
  std::string transform;  // "identity" | "log"
};

inline std::vector<GroupIndexEntry> group_index(const ParamStore& store) {
  std::vector<GroupIndexEntry> index;
  std::size_t off = 0;
  for (const ParamGroup& g : store.groups) {
    GroupIndexEntry e;
    e.name = g.name;
    e.shape = g.shape;
    e.offset = off;
    e.length = g.size();
    e.is_hyperparameter = g.is_hyperparameter;
    e.transform = g.transform == HyperTransform::Log ? "log" : "identity";
    index.push_back(std::move(e));
    off += g.size();
  }
  return index;
}

struct Archive {
  json meta;
  std::vector<GroupIndexEntry> index;
  Matrix samples;  // S x D
};

namespace detail {

inline void write_doubles_le(std::ofstream& out, std::span<const double> values) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    char raw[8];
    std::memcpy(raw, &bits, sizeof(raw));
    out.write(raw, sizeof(raw));
  }
}

inline void read_doubles_le(std::ifstream& in, std::span<double> values) {
  for (double& v : values) {
    char raw[8];
    in.read(raw, sizeof(raw));
    std::uint64_t bits;
    std::memcpy(&bits, raw, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(&v, &bits, sizeof(v));
  }
}

inline json index_to_json(std::span<const GroupIndexEntry> index) {
  json j = json::array();
  for (const GroupIndexEntry& e : index) {
    j.push_back({{"name", e.name},
                 {"shape", e.shape},
                 {"offset", e.offset},
                 {"length", e.length},
                 {"is_hyperparameter", e.is_hyperparameter},
                 {"transform", e.transform}});
  }
  return j;
}

inline std::vector<GroupIndexEntry> index_from_json(const json& j) {
  std::vector<GroupIndexEntry> index;
  for (const json& ej : j) {
    GroupIndexEntry e;
    e.name = ej.at("name").get<std::string>();
    e.shape = ej.at("shape").get<std::vector<std::size_t>>();
    e.offset = ej.at("offset").get<std::size_t>();
    e.length = ej.at("length").get<std::size_t>();
    e.is_hyperparameter = ej.value("is_hyperparameter", false);
    e.transform = ej.value("transform", "identity");
    index.push_back(std::move(e));
  }
  return index;
}

}  // namespace detail

inline void write_archive(const std::string& dir, const json& meta,
                          std::span<const GroupIndexEntry> index,
                          const Matrix& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create directory " + dir);

  {
    std::ofstream out(dir + "/meta.json");
    require(out.good(), ErrorCode::IoError, "cannot write " + dir + "/meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/index.json");
    require(out.good(), ErrorCode::IoError, "cannot write " + dir + "/index.json");
    out << detail::index_to_json(index).dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/samples.bin", std::ios::binary);
    require(out.good(), ErrorCode::IoError, "cannot write " + dir + "/samples.bin");
    detail::write_doubles_le(out, samples.data);
    require(out.good(), ErrorCode::IoError, "write failed for " + dir + "/samples.bin");
  }
}

inline Archive read_archive(const std::string& dir) {
  Archive a;
  {
    std::ifstream in(dir + "/meta.json");
    require(in.good(), ErrorCode::MissingFile, dir + "/meta.json");
    try {
      a.meta = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, dir + "/meta.json: " + e.what());
    }
  }
  const int version = a.meta.value("format_version", -1);
  require(version == kArchiveFormatVersion, ErrorCode::FormatMismatch,
          "archive format version " + std::to_string(version) + ", expected " +
              std::to_string(kArchiveFormatVersion));
  {
    std::ifstream in(dir + "/index.json");
    require(in.good(), ErrorCode::MissingFile, dir + "/index.json");
    try {
      a.index = detail::index_from_json(json::parse(in));
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError, dir + "/index.json: " + e.what());
    }
  }

  const std::size_t dim = a.meta.value("dim", std::size_t{0});
  const std::size_t n_samples = a.meta.value("n_samples", std::size_t{0});

  // The index offsets must partition [0, D).
  std::size_t expect = 0;
  for (const GroupIndexEntry& e : a.index) {
    require(e.offset == expect, ErrorCode::FormatMismatch,
            "group '" + e.name + "' offset " + std::to_string(e.offset) +
                " does not continue the partition at " + std::to_string(expect));
    expect += e.length;
  }
  require(expect == dim, ErrorCode::FormatMismatch,
          "index covers " + std::to_string(expect) + " of " + std::to_string(dim) +
              " dimensions");

  std::ifstream in(dir + "/samples.bin", std::ios::binary | std::ios::ate);
  require(in.good(), ErrorCode::MissingFile, dir + "/samples.bin");
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  require(bytes == n_samples * dim * sizeof(double), ErrorCode::FormatMismatch,
          "samples.bin holds " + std::to_string(bytes) + " bytes, expected " +
              std::to_string(n_samples * dim * sizeof(double)));
  in.seekg(0);
  a.samples = Matrix(n_samples, dim);
  detail::read_doubles_le(in, a.samples.data);
  require(in.good() || n_samples == 0, ErrorCode::IoError,
          "read failed for " + dir + "/samples.bin");
  return a;
}

}  // namespace bnnmc
