#pragma once

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "pgwm/nn/params.hpp"

namespace pgwm {

// Checkpoint directory layout:
//   <dir>/manifest.json  format version, mode tag, step, config hash, configs
//   <dir>/params.bin     named parameter tensors (float64), optional moments
constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_u32(std::ostream &os, uint32_t v) {
  os.write(reinterpret_cast<const char *>(&v), sizeof(v));
}
inline uint32_t read_u32(std::istream &is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char *>(&v), sizeof(v));
  return v;
}
inline void write_string(std::ostream &os, const std::string &s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::istream &is) {
  const uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}

template <class S>
void write_mat(std::ostream &os, const nn::Mat<S> &m) {
  write_u32(os, static_cast<uint32_t>(m.rows()));
  write_u32(os, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = static_cast<double>(m(r, c));
      os.write(reinterpret_cast<const char *>(&v), sizeof(v));
    }
}

template <class S>
nn::Mat<S> read_mat(std::istream &is) {
  const uint32_t rows = read_u32(is);
  const uint32_t cols = read_u32(is);
  nn::Mat<S> m(rows, cols);
  for (uint32_t r = 0; r < rows; ++r)
    for (uint32_t c = 0; c < cols; ++c) {
      double v = 0;
      is.read(reinterpret_cast<char *>(&v), sizeof(v));
      m(r, c) = static_cast<S>(v);
    }
  return m;
}

} // namespace detail

// Several stores per file, each under a section label ("student",
// "teacher", ...). Moments are stored when include_moments is set (resume).
template <class S>
void save_param_sections(const std::filesystem::path &file,
                         const std::vector<std::pair<std::string, const nn::ParamStore<S> *>> &sections,
                         bool include_moments = false) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + file.string());
  detail::write_u32(os, 0x50474D31); // "PGM1"
  detail::write_u32(os, include_moments ? 1 : 0);
  detail::write_u32(os, static_cast<uint32_t>(sections.size()));
  for (const auto &[label, store] : sections) {
    detail::write_string(os, label);
    detail::write_u32(os, static_cast<uint32_t>(store->size()));
    for (int i = 0; i < store->size(); ++i) {
      const auto &e = store->entry(i);
      detail::write_string(os, e.name);
      detail::write_mat<S>(os, e.value);
      if (include_moments) {
        const bool has = e.m.size() != 0;
        detail::write_u32(os, has ? 1 : 0);
        if (has) {
          detail::write_mat<S>(os, e.m);
          detail::write_mat<S>(os, e.v);
        }
      }
    }
  }
  if (!os) throw IoError("short write: " + file.string());
}

// Loads sections by label into existing stores (layout must match; a
// dimension mismatch is reported as MismatchError naming the parameter).
template <class S>
void load_param_sections(const std::filesystem::path &file,
                         const std::vector<std::pair<std::string, nn::ParamStore<S> *>> &sections) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + file.string());
  if (detail::read_u32(is) != 0x50474D31)
    throw FormatError("bad parameter file magic: " + file.string());
  const bool has_moments = detail::read_u32(is) != 0;
  const uint32_t n_sections = detail::read_u32(is);

  std::unordered_map<std::string, nn::ParamStore<S> *> wanted;
  for (const auto &[label, store] : sections) wanted[label] = store;
  size_t found = 0;

  for (uint32_t s = 0; s < n_sections; ++s) {
    const std::string label = detail::read_string(is);
    const uint32_t count = detail::read_u32(is);
    auto it = wanted.find(label);
    nn::ParamStore<S> *store = it == wanted.end() ? nullptr : it->second;
    if (store) {
      PGWM_CHECK(static_cast<int>(count) == store->size(), MismatchError,
                 "checkpoint section '" + label + "' has " + std::to_string(count) +
                     " tensors, model expects " + std::to_string(store->size()));
      ++found;
    }
    for (uint32_t i = 0; i < count; ++i) {
      const std::string name = detail::read_string(is);
      nn::Mat<S> value = detail::read_mat<S>(is);
      nn::Mat<S> m, v;
      if (has_moments) {
        const bool has = detail::read_u32(is) != 0;
        if (has) {
          m = detail::read_mat<S>(is);
          v = detail::read_mat<S>(is);
        }
      }
      if (!store) continue;
      const int idx = store->find(name);
      PGWM_CHECK(idx >= 0, MismatchError, "checkpoint tensor not in model: " + name);
      auto &e = store->entry(idx);
      PGWM_CHECK(e.value.rows() == value.rows() && e.value.cols() == value.cols(), MismatchError,
                 "checkpoint shape mismatch at " + name + ": file " +
                     std::to_string(value.rows()) + "x" + std::to_string(value.cols()) +
                     ", model " + std::to_string(e.value.rows()) + "x" +
                     std::to_string(e.value.cols()));
      e.value = std::move(value);
      e.m = std::move(m);
      e.v = std::move(v);
    }
    if (!is) throw FormatError("truncated parameter file: " + file.string());
  }
  PGWM_CHECK(found == wanted.size(), MismatchError,
             "parameter file " + file.string() + " is missing a requested section");
}

// Applies tensors from one section into a store by name, skipping file
// tensors the store does not have (e.g. a pose encoder not present in a
// fine-tuning model). Shape conflicts still raise MismatchError. Returns
// the number of tensors applied.
template <class S>
int load_params_by_name(const std::filesystem::path &file, const std::string &section,
                        nn::ParamStore<S> &store) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + file.string());
  if (detail::read_u32(is) != 0x50474D31)
    throw FormatError("bad parameter file magic: " + file.string());
  const bool has_moments = detail::read_u32(is) != 0;
  const uint32_t n_sections = detail::read_u32(is);

  int applied = 0;
  bool section_found = false;
  for (uint32_t s = 0; s < n_sections; ++s) {
    const std::string label = detail::read_string(is);
    const uint32_t count = detail::read_u32(is);
    const bool use = label == section;
    section_found = section_found || use;
    for (uint32_t i = 0; i < count; ++i) {
      const std::string name = detail::read_string(is);
      nn::Mat<S> value = detail::read_mat<S>(is);
      if (has_moments) {
        const bool has = detail::read_u32(is) != 0;
        if (has) {
          detail::read_mat<S>(is);
          detail::read_mat<S>(is);
        }
      }
      if (!use) continue;
      const int idx = store.find(name);
      if (idx < 0) continue;
      auto &e = store.entry(idx);
      PGWM_CHECK(e.value.rows() == value.rows() && e.value.cols() == value.cols(), MismatchError,
                 "checkpoint shape mismatch at " + name + ": file " +
                     std::to_string(value.rows()) + "x" + std::to_string(value.cols()) +
                     ", model " + std::to_string(e.value.rows()) + "x" +
                     std::to_string(e.value.cols()));
      e.value = std::move(value);
      ++applied;
    }
    if (!is) throw FormatError("truncated parameter file: " + file.string());
  }
  PGWM_CHECK(section_found, MismatchError,
             "parameter file " + file.string() + " has no section '" + section + "'");
  return applied;
}

} // namespace pgwm
