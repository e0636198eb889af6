#include "gnp/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gnp/error.hpp"

namespace gnp::harness {

namespace {

constexpr char kMagic[8] = {'G', 'N', 'P', 'C', 'K', 'P', 'T', '1'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return out;
  }
  return v;
}

void put_u64(std::string& out, std::uint64_t v) {
  v = to_little(v);
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  std::memcpy(&v, in.data() + pos, 8);
  return to_little(v);
}

}  // namespace

std::string encode_checkpoint(const ParamVector& params, const nlohmann::json& meta) {
  nlohmann::json header;
  header["format"] = "gnp-checkpoint";
  header["version"] = 1;
  header["count"] = params.size();
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment& s : params.layout().segments()) {
    segs.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset}});
  }
  header["segments"] = segs;
  header["meta"] = meta;
  const std::string text = header.dump();

  std::string out(kMagic, 8);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + 8 * params.size());
  for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw IoError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint ck;
  SegmentTable table;
  std::size_t count = 0;
  try {
    if (header.at("format") != "gnp-checkpoint" || header.at("version") != 1) {
      throw IoError("checkpoint: unsupported format");
    }
    for (const auto& s : header.at("segments")) {
      table.append(s.at("name").get<std::string>(), s.at("shape").get<Shape>());
      if (table.segments().back().offset != s.at("offset").get<std::size_t>()) {
        throw IoError("checkpoint: segment offsets are not contiguous");
      }
    }
    count = header.at("count").get<std::size_t>();
    if (header.contains("meta")) ck.meta = header.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("checkpoint: bad segment: ") + e.what());
  }
  if (count != table.total()) throw IoError("checkpoint: count does not match segments");
  const std::size_t data_pos = 16 + header_len;
  if (bytes.size() - data_pos != 8 * count) {
    throw IoError("checkpoint: expected " + std::to_string(8 * count) + " payload bytes, got " +
                  std::to_string(bytes.size() - data_pos));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<double>(get_u64(bytes, data_pos + 8 * i));
  }
  ck.params = ParamVector(std::move(table), std::move(values));
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params,
                     const nlohmann::json& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = encode_checkpoint(params, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace gnp::harness
