#include "biphoton/timetag_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "biphoton/error.hpp"

namespace biphoton::io {

namespace {

template <typename T>
void put_le(char* dst, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = static_cast<char>((value >> (8 * i)) & 0xff);
}

template <typename T>
T get_le(const char* src) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<unsigned char>(src[i])) << (8 * i);
  return value;
}

mc::Detector parse_detector(std::string_view field, std::size_t line) {
  if (field == "0" || field == "A") return mc::Detector::A;
  if (field == "1" || field == "B") return mc::Detector::B;
  throw Error("tag csv line " + std::to_string(line) + ": bad detector '" + std::string(field) + "'");
}

}  // namespace

TagFormat parse_tag_format(std::string_view name) {
  if (name == "bin") return TagFormat::binary;
  if (name == "csv") return TagFormat::csv;
  throw Error("unknown tag format '" + std::string(name) + "' (expected bin or csv)");
}

std::string_view tag_format_name(TagFormat format) { return format == TagFormat::binary ? "bin" : "csv"; }

void write_tags_binary(std::ostream& out, std::span<const mc::TimeTag> tags) {
  std::array<char, kTagHeaderSize> header{};
  std::copy(kTagMagic.begin(), kTagMagic.end(), header.begin());
  put_le<std::uint32_t>(header.data() + 8, kTagFormatVersion);
  put_le<std::uint32_t>(header.data() + 12, 0);
  out.write(header.data(), header.size());

  std::vector<char> buffer;
  constexpr std::size_t kBatch = 1 << 16;
  buffer.reserve(kBatch * kTagRecordSize);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].t < 0) throw Error("negative timestamp cannot be written");
    char record[kTagRecordSize];
    record[0] = static_cast<char>(tags[i].detector);
    put_le<std::uint64_t>(record + 1, static_cast<std::uint64_t>(tags[i].t));
    buffer.insert(buffer.end(), record, record + kTagRecordSize);
    if (buffer.size() >= kBatch * kTagRecordSize) {
      out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
      buffer.clear();
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw Error("failed to write tag stream");
}

std::vector<mc::TimeTag> read_tags_binary(std::istream& in) {
  std::array<char, kTagHeaderSize> header{};
  in.read(header.data(), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()) ||
      std::string_view(header.data(), kTagMagic.size()) != kTagMagic)
    throw Error("malformed tag file header");
  const auto version = get_le<std::uint32_t>(header.data() + 8);
  if (version != kTagFormatVersion) throw Error("unsupported tag file version " + std::to_string(version));

  std::vector<mc::TimeTag> tags;
  std::vector<char> buffer(kTagRecordSize * (1 << 16));
  std::size_t carry = 0;
  while (in) {
    in.read(buffer.data() + carry, static_cast<std::streamsize>(buffer.size() - carry));
    const std::size_t have = carry + static_cast<std::size_t>(in.gcount());
    const std::size_t whole = have / kTagRecordSize;
    for (std::size_t r = 0; r < whole; ++r) {
      const char* rec = buffer.data() + r * kTagRecordSize;
      const auto detector = static_cast<unsigned char>(rec[0]);
      if (detector > 1) throw Error("tag record with invalid detector id");
      const auto t = get_le<std::uint64_t>(rec + 1);
      tags.push_back({static_cast<mc::Detector>(detector), static_cast<std::int64_t>(t)});
    }
    carry = have - whole * kTagRecordSize;
    std::copy(buffer.begin() + static_cast<std::ptrdiff_t>(whole * kTagRecordSize),
              buffer.begin() + static_cast<std::ptrdiff_t>(have), buffer.begin());
  }
  if (carry != 0) throw Error("truncated tag record at end of file");
  return tags;
}

void write_tags_csv(std::ostream& out, std::span<const mc::TimeTag> tags) {
  out << "detector,t_ps\n";
  for (const auto& tag : tags) out << static_cast<int>(tag.detector) << ',' << tag.t << '\n';
  if (!out) throw Error("failed to write tag csv");
}

std::vector<mc::TimeTag> read_tags_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("detector,t_ps", 0) != 0) throw Error("malformed tag file header");
  std::vector<mc::TimeTag> tags;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error("tag csv line " + std::to_string(number) + ": expected two fields");
    const auto detector = parse_detector(std::string_view(line).substr(0, comma), number);
    std::int64_t t = 0;
    const char* first = line.data() + comma + 1;
    const char* last = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(first, last, t);
    if (ec != std::errc() || ptr != last || t < 0)
      throw Error("tag csv line " + std::to_string(number) + ": bad timestamp");
    tags.push_back({detector, t});
  }
  return tags;
}

void write_tag_file(const std::filesystem::path& path, std::span<const mc::TimeTag> tags, TagFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  if (format == TagFormat::binary)
    write_tags_binary(out, tags);
  else
    write_tags_csv(out, tags);
}

std::vector<mc::TimeTag> read_tag_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  char first = 0;
  in.get(first);
  if (!in) throw Error("malformed tag file header");
  in.unget();
  if (first == kTagMagic.front()) return read_tags_binary(in);
  return read_tags_csv(in);
}

}  // namespace biphoton::io
