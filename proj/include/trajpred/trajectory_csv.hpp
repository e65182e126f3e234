#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trajpred/geometry.hpp"

namespace trajpred {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Reads the `track_id,t,x,y` format. Rows of one track must be contiguous
/// and time-sorted. Malformed rows raise ParseError naming the line.
std::vector<Track> read_tracks_csv(std::istream& in, const std::string& source_name = "<stream>");
std::vector<Track> read_tracks_csv(const std::filesystem::path& path);

void write_tracks_csv(std::ostream& out, std::span<const Track> tracks);
void write_tracks_csv(const std::filesystem::path& path, std::span<const Track> tracks);

}  // namespace trajpred
