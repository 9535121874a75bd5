/*
 * Copyright 2026 The FAA Lab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "faa/errors.hpp"
#include "faa/json_config.hpp"
#include "faa/synthworld.hpp"

namespace faa {

namespace {

constexpr char kBlobMagic[4] = {'F', 'A', 'A', 'D'};
constexpr std::uint32_t kBlobVersion = 1;
constexpr int kManifestVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_rows(std::string& out, const Tensor& t) {
  for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("write failed for " + path.string());
}

struct VideoMeta {
  std::uint64_t video_id, identity_id;
  int group;
  std::size_t num_faces, num_voices;
};

}  // namespace

Json to_json(const WorldConfig& c) {
  return Json{{"num_identities", c.num_identities},
              {"identity_split", c.identity_split},
              {"latent_dim", c.latent_dim},
              {"face_dim", c.face_dim},
              {"voice_dim", c.voice_dim},
              {"videos_per_identity", c.videos_per_identity},
              {"faces_per_video", c.faces_per_video},
              {"voices_per_video", c.voices_per_video},
              {"noise_std", c.noise_std},
              {"cross_modal_strength", c.cross_modal_strength},
              {"group_offset", c.group_offset},
              {"seed", c.seed}};
}

WorldConfig world_config_from_json(const Json& j) {
  using namespace json_detail;
  const std::string w = "world";
  reject_unknown(j, w,
                 {"num_identities", "identity_split", "latent_dim", "face_dim", "voice_dim", "videos_per_identity",
                  "faces_per_video", "voices_per_video", "noise_std", "cross_modal_strength", "group_offset", "seed"});
  WorldConfig c;
  read(j, w, "num_identities", c.num_identities);
  read(j, w, "identity_split", c.identity_split);
  read(j, w, "latent_dim", c.latent_dim);
  read(j, w, "face_dim", c.face_dim);
  read(j, w, "voice_dim", c.voice_dim);
  read(j, w, "videos_per_identity", c.videos_per_identity);
  read(j, w, "faces_per_video", c.faces_per_video);
  read(j, w, "voices_per_video", c.voices_per_video);
  read(j, w, "noise_std", c.noise_std);
  read(j, w, "cross_modal_strength", c.cross_modal_strength);
  read(j, w, "group_offset", c.group_offset);
  read(j, w, "seed", c.seed);
  return c;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  dataset.validate();
  std::filesystem::create_directories(dir);
  Json manifest;
  manifest["format"] = "faa-dataset";
  manifest["version"] = kManifestVersion;
  manifest["config"] = to_json(dataset.config);
  for (Partition p : kAllPartitions) {
    const std::string name = partition_name(p);
    const auto& videos = dataset.partition(p);
    std::uint64_t count = 0;
    Json list = Json::array();
    for (const auto& v : videos) {
      list.push_back(Json{{"video_id", v.video_id},
                          {"identity_id", v.identity_id},
                          {"group", v.group},
                          {"num_faces", v.faces.rows()},
                          {"num_voices", v.voices.rows()}});
      count += v.faces.rows() + v.voices.rows();
    }
    std::string blob(kBlobMagic, 4);
    put_u32(blob, kBlobVersion);
    put_u64(blob, count);
    for (const auto& v : videos) {
      put_rows(blob, v.faces);
      put_rows(blob, v.voices);
    }
    write_file(dir / (name + ".bin"), blob);
    manifest["partitions"][name] = Json{{"blob", name + ".bin"}, {"videos", std::move(list)}};
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  if (manifest.value("format", std::string()) != "faa-dataset") throw FormatError("manifest.json: not a dataset manifest");
  if (manifest.value("version", -1) != kManifestVersion) throw FormatError("manifest.json: unsupported version");

  Dataset ds;
  ds.config = world_config_from_json(manifest.at("config"));
  ds.config.validate();
  const std::size_t fd = ds.config.face_dim, vd = ds.config.voice_dim;

  for (Partition p : kAllPartitions) {
    const std::string name = partition_name(p);
    if (!manifest["partitions"].contains(name)) throw CorruptionError("manifest.json: missing partition " + name);
    const Json& entry = manifest["partitions"][name];
    std::vector<VideoMeta> metas;
    std::uint64_t expected_vectors = 0;
    try {
      for (const Json& v : entry.at("videos")) {
        VideoMeta m{v.at("video_id").get<std::uint64_t>(), v.at("identity_id").get<std::uint64_t>(),
                    v.at("group").get<int>(), v.at("num_faces").get<std::size_t>(),
                    v.at("num_voices").get<std::size_t>()};
        if (m.num_faces == 0 || m.num_voices == 0) {
          throw CorruptionError("manifest.json: video " + std::to_string(m.video_id) + " has an empty modality");
        }
        expected_vectors += m.num_faces + m.num_voices;
        metas.push_back(m);
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorruptionError("manifest.json: malformed video list for " + name + ": " + e.what());
    }
    if (metas.empty()) throw ConfigError("partition " + name + " is empty");

    const std::string blob = read_file(dir / entry.at("blob").get<std::string>());
    if (blob.size() < 16) throw CorruptionError(name + ".bin: truncated header");
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    if (std::memcmp(bytes, kBlobMagic, 4) != 0) throw FormatError(name + ".bin: bad magic");
    if (get_u32(bytes + 4) != kBlobVersion) throw FormatError(name + ".bin: unsupported version");
    const std::uint64_t count = get_u64(bytes + 8);
    if (count != expected_vectors) {
      throw CorruptionError(name + ".bin holds " + std::to_string(count) + " vectors but the manifest references " +
                            std::to_string(expected_vectors));
    }
    std::size_t needed = 16;
    for (const auto& m : metas) needed += 4 * (m.num_faces * fd + m.num_voices * vd);
    if (blob.size() < needed) throw CorruptionError(name + ".bin: truncated payload");
    if (blob.size() > needed) throw CorruptionError(name + ".bin: trailing bytes after payload");

    std::size_t offset = 16;
    auto read_rows = [&](std::size_t rows, std::size_t cols) {
      std::vector<double> data(rows * cols);
      for (double& v : data) {
        v = static_cast<double>(std::bit_cast<float>(get_u32(bytes + offset)));
        offset += 4;
      }
      try {
        return Tensor({rows, cols}, std::move(data));
      } catch (const DegenerateInputError&) {
        throw CorruptionError(name + ".bin: non-finite feature value");
      }
    };
    for (const auto& m : metas) {
      VideoRecord rec;
      rec.video_id = m.video_id;
      rec.identity_id = m.identity_id;
      rec.group = m.group;
      rec.faces = read_rows(m.num_faces, fd);
      rec.voices = read_rows(m.num_voices, vd);
      ds.partition(p).push_back(std::move(rec));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace faa
