#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "vidcensor/errors.hpp"
#include "vidcensor/fsio.hpp"
#include "vidcensor/media_model.hpp"

namespace vidcensor {

// Dataset manifest: UTF-8 CSV with one of two headers,
//   id,label,image_emb,audio_emb   (EMB1 embedding files)
//   id,label,video,audio           (raw media pairs)
// Relative paths are resolved against the manifest's own directory.

struct ManifestRow {
  std::string id;
  Label label = Label::Appropriate;
  std::filesystem::path first;   // image embeddings or video
  std::filesystem::path second;  // audio embeddings or audio
};

struct DatasetManifest {
  bool embedding_based = true;
  std::vector<ManifestRow> rows;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline Label parse_label(std::string_view raw, const std::string& id) {
  std::string lower(raw);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "appropriate") return Label::Appropriate;
  if (lower == "inappropriate") return Label::Inappropriate;
  throw InputError("manifest entry '" + id + "': unknown label '" +
                   std::string(raw) + "'");
}

}  // namespace detail

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                              bytes.size());
  const std::filesystem::path base = path.parent_path();

  DatasetManifest manifest;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::string> problems;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_done = false;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos
                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto fields = detail::split_csv_line(line);
    if (!header_done) {
      if (fields.size() != 4) {
        throw InputError("manifest header must have 4 columns");
      }
      const std::string_view c2 = detail::trim(fields[2]);
      const std::string_view c3 = detail::trim(fields[3]);
      if (c2 == "image_emb" && c3 == "audio_emb") {
        manifest.embedding_based = true;
      } else if (c2 == "video" && c3 == "audio") {
        manifest.embedding_based = false;
      } else {
        throw InputError(
            "manifest header must be 'id,label,image_emb,audio_emb' or "
            "'id,label,video,audio'");
      }
      header_done = true;
      continue;
    }

    if (fields.size() != 4) {
      problems.push_back("line " + std::to_string(line_no) +
                         ": expected 4 fields");
      continue;
    }
    ManifestRow row;
    row.id = std::string(detail::trim(fields[0]));
    if (row.id.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty id");
      continue;
    }
    if (!seen_ids.insert(row.id).second) {
      problems.push_back("duplicate id '" + row.id + "'");
      continue;
    }
    try {
      row.label = detail::parse_label(detail::trim(fields[1]), row.id);
    } catch (const InputError& e) {
      problems.push_back(e.what());
      continue;
    }
    auto resolve = [&](std::string_view field) {
      std::filesystem::path p{std::string(detail::trim(field))};
      return p.is_absolute() ? p : base / p;
    };
    row.first = resolve(fields[2]);
    row.second = resolve(fields[3]);
    for (const auto& p : {row.first, row.second}) {
      if (!std::filesystem::exists(p)) {
        problems.push_back("entry '" + row.id + "': missing file " +
                           p.string());
      }
    }
    manifest.rows.push_back(std::move(row));
  }

  if (!header_done) throw InputError("manifest is empty");
  if (!problems.empty()) {
    std::string msg = "unreadable manifest entries:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw InputError(msg);
  }
  if (manifest.rows.empty()) throw InputError("manifest has no rows");
  return manifest;
}

}  // namespace vidcensor
