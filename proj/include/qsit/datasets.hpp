// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QSIT_DATASETS_HPP
#define QSIT_DATASETS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qsit/error.hpp"
#include "qsit/levels.hpp"
#include "qsit/random.hpp"

namespace qsit {

struct MosRecord {
  std::string image_id;
  double mos = 0.0;

  friend bool operator==(const MosRecord&, const MosRecord&) = default;
};

/// Population statistics (divisor n) of a MOS pool.
struct PoolStats {
  std::size_t size = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

inline PoolStats pool_stats(std::span<const MosRecord> records) {
  PoolStats st;
  st.size = records.size();
  if (records.empty()) return st;
  double sum = 0.0;
  for (const auto& r : records) sum += r.mos;
  st.mean = sum / static_cast<double>(records.size());
  double ss = 0.0;
  for (const auto& r : records) ss += (r.mos - st.mean) * (r.mos - st.mean);
  st.stddev = std::sqrt(ss / static_cast<double>(records.size()));
  return st;
}

struct IngestOptions {
  char delimiter = ',';
  bool strict = true;  // out-of-scale rows abort instead of being skipped
};

struct MosIngest {
  std::vector<MosRecord> records;
  PoolStats stats;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one delimited line. Fields wrapped in double quotes may contain the
// delimiter; "" inside quotes is a literal quote.
inline std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline MosIngest ingest_mos_impl(std::istream& in, const LevelScale* scale,
                                 const IngestOptions& opts) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> id_col, mos_col;
  std::size_t ncols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto header = detail::split_fields(line, opts.delimiter);
    ncols = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "image_id") id_col = i;
      if (header[i] == "mos") mos_col = i;
    }
    break;
  }
  if (ncols == 0) throw ParseError("MOS file is empty", 0);
  if (!id_col || !mos_col) {
    throw ParseError(std::string("MOS header is missing column '") +
                         (id_col ? "mos" : "image_id") + "'",
                     lineno);
  }

  MosIngest result;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_fields(line, opts.delimiter);
    const std::size_t need = std::max(*id_col, *mos_col) + 1;
    if (fields.size() < need) {
      throw ParseError("row " + std::to_string(lineno) + ": expected at least " +
                           std::to_string(need) + " columns, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    double mos = 0.0;
    try {
      std::size_t used = 0;
      mos = std::stod(fields[*mos_col], &used);
      if (used != fields[*mos_col].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError("row " + std::to_string(lineno) + ": mos '" + fields[*mos_col] +
                           "' is not a number",
                       lineno);
    }
    if (scale != nullptr && !scale->contains(mos)) {
      std::string msg = "row " + std::to_string(lineno) + ": mos " + fields[*mos_col] +
                        " outside scale [" + std::to_string(scale->min_score()) + ", " +
                        std::to_string(scale->max_score()) + "]";
      if (opts.strict) throw ParseError(msg, lineno);
      result.diagnostics.push_back(std::move(msg));
      continue;
    }
    result.records.push_back({fields[*id_col], mos});
  }
  result.stats = pool_stats(result.records);
  return result;
}

}  // namespace detail

/// Reads a delimited MOS table with an `image_id` and a `mos` column (extra
/// columns are ignored) and checks every MOS against the scale.
inline MosIngest ingest_mos(std::istream& in, const LevelScale& scale,
                            const IngestOptions& opts = {}) {
  return detail::ingest_mos_impl(in, &scale, opts);
}

// Same table format, no range check.
inline MosIngest read_mos_table(std::istream& in, const IngestOptions& opts = {}) {
  return detail::ingest_mos_impl(in, nullptr, opts);
}

inline void write_mos(std::ostream& out, std::span<const MosRecord> records, char delim = ',') {
  out << "image_id" << delim << "mos\n";
  char buf[32];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.mos);
    const bool quote = r.image_id.find(delim) != std::string::npos ||
                       r.image_id.find('"') != std::string::npos;
    if (quote) {
      out << '"';
      for (char c : r.image_id) out << (c == '"' ? "\"\"" : std::string(1, c));
      out << '"';
    } else {
      out << r.image_id;
    }
    out << delim << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Distribution-balancing subsampler

/// Selects `target_size` records so that the MOS histogram over `bins`
/// equal-width bins (spanning the observed MOS range) is as flat as possible.
///
/// Quotas are dealt one unit at a time, round-robin over the non-empty bins in
/// ascending MOS order, skipping bins that are exhausted; every bin therefore
/// receives ceil(target / bins_nonempty) or one fewer unless it runs out, and
/// the shortfall flows to the bins that still have records. Within a bin the
/// records are drawn uniformly without replacement. Output keeps input order.
inline std::vector<MosRecord> subsample_balanced(std::span<const MosRecord> records,
                                                 std::size_t target_size, int bins,
                                                 std::uint64_t seed) {
  if (bins < 2) throw ConfigError("bins must be at least 2, got " + std::to_string(bins));
  if (target_size > records.size()) {
    throw DataError("target size " + std::to_string(target_size) + " exceeds " +
                    std::to_string(records.size()) + " available records");
  }
  if (target_size == records.size()) return {records.begin(), records.end()};
  if (target_size == 0) return {};

  auto [lo_it, hi_it] = std::minmax_element(
      records.begin(), records.end(),
      [](const MosRecord& a, const MosRecord& b) { return a.mos < b.mos; });
  const double lo = lo_it->mos;
  const double hi = hi_it->mos;

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(bins));
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::size_t b = 0;
    if (hi > lo) {
      const double pos = (records[i].mos - lo) / (hi - lo) * bins;
      b = std::min(static_cast<std::size_t>(pos), static_cast<std::size_t>(bins - 1));
    }
    members[b].push_back(i);
  }

  std::vector<std::size_t> quota(members.size(), 0);
  std::size_t remaining = target_size;
  while (remaining > 0) {
    for (std::size_t b = 0; b < members.size() && remaining > 0; ++b) {
      if (quota[b] < members[b].size()) {
        ++quota[b];
        --remaining;
      }
    }
  }

  Rng rng(seed);
  std::vector<char> keep(records.size(), 0);
  for (std::size_t b = 0; b < members.size(); ++b) {
    auto& m = members[b];
    for (std::size_t k = 0; k < quota[b]; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(m.size() - k));
      std::swap(m[k], m[j]);
      keep[m[k]] = 1;
    }
  }
  std::vector<MosRecord> out;
  out.reserve(target_size);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keep[i]) out.push_back(records[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Instruction pairs

enum class PoolTag { kD1 = 0, kD2 = 1, kD3 = 2 };

inline constexpr std::array<PoolTag, 3> kPoolTags = {PoolTag::kD1, PoolTag::kD2, PoolTag::kD3};

inline std::string_view to_string(PoolTag t) {
  switch (t) {
    case PoolTag::kD1: return "D1";
    case PoolTag::kD2: return "D2";
    case PoolTag::kD3: return "D3";
  }
  return "?";
}

inline PoolTag parse_pool_tag(std::string_view s) {
  if (s == "D1" || s == "d1") return PoolTag::kD1;
  if (s == "D2" || s == "d2") return PoolTag::kD2;
  if (s == "D3" || s == "d3") return PoolTag::kD3;
  throw ConfigError("unknown pool tag '" + std::string(s) + "'");
}

inline constexpr std::string_view kScoringSystemPrefix = "Assume you are an image quality evaluator";
inline constexpr std::string_view kScoringQuestion = "<img> How would you rate the quality of the image.";

inline std::string scoring_answer(std::string_view label) {
  return "The quality of the image is " + std::string(label) + ".";
}

struct Turn {
  std::string from;
  std::string value;

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct InstructionPair {
  std::string id;
  std::string image_ref;
  std::optional<std::string> system;
  std::string question;
  std::string answer;
  std::vector<Turn> extra_turns;  // turns after the first exchange, kept verbatim
  PoolTag pool = PoolTag::kD1;

  friend bool operator==(const InstructionPair&, const InstructionPair&) = default;
};

inline std::vector<InstructionPair> emit_d1_pairs(std::span<const MosRecord> records,
                                                  const LevelScale& scale) {
  std::vector<InstructionPair> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const RatingLevel level = score_to_level(r.mos, scale);
    out.push_back(InstructionPair{r.image_id, r.image_id, std::string(kScoringSystemPrefix),
                                  std::string(kScoringQuestion),
                                  scoring_answer(level.label), {}, PoolTag::kD1});
  }
  return out;
}

/// Conversational record. With `inline_system` the system prefix is folded
/// into the first human turn (separated by a newline) for trainers without a
/// system field.
inline nlohmann::ordered_json to_json(const InstructionPair& p, bool inline_system = false) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  if (!p.image_ref.empty()) j["image"] = p.image_ref;
  std::string question = p.question;
  if (p.system) {
    if (inline_system) {
      question = *p.system + "\n" + question;
    } else {
      j["system"] = *p.system;
    }
  }
  auto conv = nlohmann::ordered_json::array();
  conv.push_back({{"from", "human"}, {"value", question}});
  conv.push_back({{"from", "gpt"}, {"value", p.answer}});
  for (const auto& t : p.extra_turns) conv.push_back({{"from", t.from}, {"value", t.value}});
  j["conversations"] = std::move(conv);
  return j;
}

inline void write_pairs(std::ostream& out, std::span<const InstructionPair> pairs,
                        bool inline_system = false) {
  for (const auto& p : pairs) out << to_json(p, inline_system).dump() << '\n';
}

inline InstructionPair parse_pair(const nlohmann::json& j, PoolTag tag) {
  if (!j.is_object()) throw DataError("record is not an object");
  InstructionPair p;
  p.pool = tag;
  auto id = j.find("id");
  if (id == j.end()) throw DataError("missing 'id'");
  p.id = id->is_string() ? id->get<std::string>() : id->dump();
  if (auto img = j.find("image"); img != j.end()) {
    if (!img->is_string()) throw DataError("'image' is not a string");
    p.image_ref = img->get<std::string>();
  }
  if (auto sys = j.find("system"); sys != j.end() && !sys->is_null()) {
    if (!sys->is_string()) throw DataError("'system' is not a string");
    p.system = sys->get<std::string>();
  }
  auto conv = j.find("conversations");
  if (conv == j.end() || !conv->is_array() || conv->size() < 2) {
    throw DataError("'conversations' must hold at least one human/gpt exchange");
  }
  std::vector<Turn> turns;
  for (const auto& t : *conv) {
    if (!t.is_object() || !t.contains("from") || !t.contains("value") ||
        !t["from"].is_string() || !t["value"].is_string()) {
      throw DataError("conversation turn needs string 'from' and 'value'");
    }
    turns.push_back({t["from"].get<std::string>(), t["value"].get<std::string>()});
  }
  if (turns[0].from != "human" || turns[1].from != "gpt") {
    throw DataError("conversation must open with a human turn followed by a gpt turn");
  }
  p.question = turns[0].value;
  p.answer = turns[1].value;
  p.extra_turns.assign(turns.begin() + 2, turns.end());
  if (tag == PoolTag::kD1 && !p.system) {
    const std::string inlined = std::string(kScoringSystemPrefix) + "\n";
    if (p.question.compare(0, inlined.size(), inlined) == 0) {
      p.system = std::string(kScoringSystemPrefix);
      p.question.erase(0, inlined.size());
    }
  }
  if (tag == PoolTag::kD1 && p.system != kScoringSystemPrefix) {
    throw DataError("D1 record '" + p.id + "' lacks the scoring system prefix");
  }
  return p;
}

struct PoolLoad {
  std::vector<InstructionPair> pairs;
  std::vector<std::size_t> source_lines;  // 1-based line of each pair
  std::vector<std::string> warnings;
};

inline PoolLoad load_pool(std::istream& in, PoolTag tag) {
  PoolLoad result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      result.pairs.push_back(parse_pair(nlohmann::json::parse(line), tag));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what(), lineno);
    } catch (const DataError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    result.source_lines.push_back(lineno);
  }
  if (result.pairs.empty()) {
    result.warnings.push_back(std::string("pool ") + std::string(to_string(tag)) + " is empty");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Mixture manifests

/// What the sampler needs from a pool: stable ids and their file positions.
struct Pool {
  PoolTag tag = PoolTag::kD1;
  std::string path;
  std::vector<std::string> ids;
  std::vector<std::size_t> source_lines;

  std::size_t size() const noexcept { return ids.size(); }

  static Pool from_load(PoolTag tag, const PoolLoad& load, std::string path = {}) {
    Pool p{tag, std::move(path), {}, load.source_lines};
    p.ids.reserve(load.pairs.size());
    for (const auto& pr : load.pairs) p.ids.push_back(pr.id);
    return p;
  }

  // Synthetic pool of `n` entries with ids "<tag>-<line>".
  static Pool synthetic(PoolTag tag, std::size_t n) {
    Pool p{tag, {}, {}, {}};
    p.ids.reserve(n);
    p.source_lines.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
      p.ids.push_back(std::string(to_string(tag)) + "-" + std::to_string(i));
      p.source_lines.push_back(i);
    }
    return p;
  }
};

using PoolCounts = std::array<std::size_t, 3>;  // indexed by PoolTag

struct ManifestEntry {
  PoolTag pool = PoolTag::kD1;
  std::size_t source_line = 0;
  std::string id;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::uint64_t seed = 0;
  PoolCounts counts{};
  std::array<bool, 3> with_replacement{};
  std::array<std::string, 3> sources;
  std::vector<ManifestEntry> entries;
};

inline std::size_t total(const PoolCounts& c) { return c[0] + c[1] + c[2]; }

/// Draws counts[k] entries from pool k and shuffles the union. Draws without
/// replacement unless a count exceeds its pool and `allow_replacement` is set,
/// in which case that pool is drawn with replacement.
inline Manifest sample_mixture(std::span<const Pool> pools, const PoolCounts& counts,
                               std::uint64_t seed, bool allow_replacement = false) {
  Manifest m;
  m.seed = seed;
  m.counts = counts;
  Rng rng(seed);
  struct Pick {
    std::uint32_t pool;
    std::uint32_t index;
  };
  std::vector<Pick> picks;
  picks.reserve(total(counts));
  std::array<const Pool*, 3> by_tag{};
  for (PoolTag tag : kPoolTags) {
    const auto k = static_cast<std::size_t>(tag);
    const std::size_t want = counts[k];
    if (want == 0) continue;
    const Pool* pool = nullptr;
    for (const auto& p : pools) {
      if (p.tag == tag) pool = &p;
    }
    if (pool == nullptr || pool->size() == 0) {
      throw DataError("pool " + std::string(to_string(tag)) + " requested " +
                      std::to_string(want) + " entries but is empty or not loaded");
    }
    by_tag[k] = pool;
    m.sources[k] = pool->path;
    const std::size_t n = pool->size();
    const auto pk = static_cast<std::uint32_t>(k);
    if (want <= n) {
      std::vector<std::uint32_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
      for (std::size_t i = 0; i < want; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
        picks.push_back({pk, idx[i]});
      }
    } else if (allow_replacement) {
      m.with_replacement[k] = true;
      for (std::size_t i = 0; i < want; ++i) {
        picks.push_back({pk, static_cast<std::uint32_t>(rng.below(n))});
      }
    } else {
      throw DataError("pool " + std::string(to_string(tag)) + " has " + std::to_string(n) +
                      " entries, " + std::to_string(want) +
                      " requested without replacement");
    }
  }
  rng.shuffle(std::span<Pick>(picks));
  m.entries.reserve(picks.size());
  for (const auto& p : picks) {
    const Pool& pool = *by_tag[p.pool];
    m.entries.push_back({kPoolTags[p.pool], pool.source_lines[p.index], pool.ids[p.index]});
  }
  return m;
}

inline nlohmann::ordered_json manifest_header(const Manifest& m) {
  nlohmann::ordered_json h;
  h["seed"] = m.seed;
  h["counts"] = {{"D1", m.counts[0]}, {"D2", m.counts[1]}, {"D3", m.counts[2]}};
  const double n = static_cast<double>(total(m.counts));
  nlohmann::ordered_json ratio = nlohmann::ordered_json::object();
  ratio["d1"] = n > 0 ? m.counts[0] / n : 0.0;
  ratio["d2"] = n > 0 ? m.counts[1] / n : 0.0;
  ratio["d3"] = n > 0 ? m.counts[2] / n : 0.0;
  h["ratio"] = std::move(ratio);
  h["with_replacement"] = {{"D1", m.with_replacement[0]},
                           {"D2", m.with_replacement[1]},
                           {"D3", m.with_replacement[2]}};
  h["sources"] = {{"D1", m.sources[0]}, {"D2", m.sources[1]}, {"D3", m.sources[2]}};
  return h;
}

namespace detail {

inline void append_json_string(std::string& out, std::string_view s) {
  const bool plain = std::all_of(s.begin(), s.end(), [](char c) {
    return c >= 0x20 && c != '"' && c != '\\' && static_cast<unsigned char>(c) < 0x80;
  });
  if (plain) {
    out += '"';
    out += s;
    out += '"';
  } else {
    out += nlohmann::json(std::string(s)).dump();
  }
}

}  // namespace detail

inline void write_manifest(std::ostream& out, const Manifest& m) {
  out << manifest_header(m).dump() << '\n';
  std::string buf;
  buf.reserve(1 << 20);
  for (const auto& e : m.entries) {
    buf += "{\"pool\":\"";
    buf += to_string(e.pool);
    buf += "\",\"source_line\":";
    buf += std::to_string(e.source_line);
    buf += ",\"id\":";
    detail::append_json_string(buf, e.id);
    buf += "}\n";
    if (buf.size() >= (1 << 20) - 256) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void write_manifest_file(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest '" + path + "'");
  write_manifest(out, m);
  if (!out) throw DataError("failed writing manifest '" + path + "'");
}

struct ManifestSummary {
  std::uint64_t seed = 0;
  PoolCounts counts{};
};

/// Reads the header and checks the line count against it without parsing
/// every entry. Blank lines count as (malformed) entries.
inline ManifestSummary read_manifest_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest '" + path + "' is empty");
  ManifestSummary s;
  try {
    auto h = nlohmann::json::parse(line);
    s.seed = h.at("seed").get<std::uint64_t>();
    const auto& c = h.at("counts");
    s.counts = {c.at("D1").get<std::size_t>(), c.at("D2").get<std::size_t>(),
                c.at("D3").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest '" + path + "' has a malformed header: " + e.what());
  }
  std::size_t lines = 0;
  std::vector<char> chunk(1 << 20);
  char prev = '\n';
  while (in.read(chunk.data(), static_cast<std::streamsize>(chunk.size())) || in.gcount() > 0) {
    const auto got = in.gcount();
    lines += static_cast<std::size_t>(std::count(chunk.data(), chunk.data() + got, '\n'));
    prev = chunk[static_cast<std::size_t>(got) - 1];
  }
  if (prev != '\n') ++lines;
  if (lines != total(s.counts)) {
    throw DataError("manifest '" + path + "' declares " + std::to_string(total(s.counts)) +
                    " entries but holds " + std::to_string(lines));
  }
  return s;
}

inline Manifest read_manifest(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("manifest is empty", 0);
  ++lineno;
  try {
    auto h = nlohmann::json::parse(line);
    m.seed = h.at("seed").get<std::uint64_t>();
    const auto& c = h.at("counts");
    m.counts = {c.at("D1").get<std::size_t>(), c.at("D2").get<std::size_t>(),
                c.at("D3").get<std::size_t>()};
    if (h.contains("with_replacement")) {
      const auto& w = h["with_replacement"];
      m.with_replacement = {w.value("D1", false), w.value("D2", false), w.value("D3", false)};
    }
    if (h.contains("sources")) {
      const auto& s = h["sources"];
      m.sources = {s.value("D1", std::string{}), s.value("D2", std::string{}),
                   s.value("D3", std::string{})};
    }
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto e = nlohmann::json::parse(line);
      m.entries.push_back({parse_pool_tag(e.at("pool").get<std::string>()),
                           e.at("source_line").get<std::size_t>(),
                           e.at("id").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what(), lineno);
  }
  return m;
}

}  // namespace qsit

#endif  // QSIT_DATASETS_HPP
