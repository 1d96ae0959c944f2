#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "biphoton/montecarlo.hpp"

namespace biphoton::io {

// Binary tag file layout, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "BPHTAGS\0"
//   8       4     format version (u32, currently 1)
//   12      4     flags (u32, reserved, 0)
//   16      9·N   records: detector (u8, 0 = A, 1 = B), t_ps (u64)
//
// The CSV form has the header line "detector,t_ps" followed by one record
// per line with detector written as 0/1 (A/B are accepted on input).
// Coincidence delays derived from these files use Δt = t_B − t_A.

inline constexpr std::string_view kTagMagic{"BPHTAGS\0", 8};
inline constexpr std::uint32_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagHeaderSize = 16;
inline constexpr std::size_t kTagRecordSize = 9;

enum class TagFormat { binary, csv };

TagFormat parse_tag_format(std::string_view name);
std::string_view tag_format_name(TagFormat format);

void write_tags_binary(std::ostream& out, std::span<const mc::TimeTag> tags);
std::vector<mc::TimeTag> read_tags_binary(std::istream& in);

void write_tags_csv(std::ostream& out, std::span<const mc::TimeTag> tags);
std::vector<mc::TimeTag> read_tags_csv(std::istream& in);

void write_tag_file(const std::filesystem::path& path, std::span<const mc::TimeTag> tags, TagFormat format);

/// Reads either format, chosen by the leading bytes.
std::vector<mc::TimeTag> read_tag_file(const std::filesystem::path& path);

}  // namespace biphoton::io
