#include "trajpred/trajectory_csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>

#include "trajpred/error.hpp"

namespace trajpred {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view field, const std::string& where) {
    field = trim(field);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        fail(ErrorCode::ParseError, where + ": not a number: '" + std::string(field) + "'");
    return value;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::vector<Track> read_tracks_csv(std::istream& in, const std::string& source_name) {
    std::vector<Track> tracks;
    std::set<std::string> finished;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view row = trim(line);
        if (row.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        if (!header_seen) {
            if (row != "track_id,t,x,y") fail(ErrorCode::ParseError, where + ": expected header 'track_id,t,x,y'");
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        for (std::size_t start = 0;;) {
            const std::size_t comma = row.find(',', start);
            fields.push_back(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 4) fail(ErrorCode::ParseError, where + ": expected 4 columns");
        const std::string id(trim(fields[0]));
        if (id.empty()) fail(ErrorCode::ParseError, where + ": empty track_id");
        const TrackPoint p{parse_number(fields[1], where), parse_number(fields[2], where),
                           parse_number(fields[3], where)};
        if (tracks.empty() || tracks.back().id != id) {
            if (!tracks.empty()) finished.insert(tracks.back().id);
            if (finished.count(id)) fail(ErrorCode::ParseError, where + ": rows of track '" + id + "' are not contiguous");
            tracks.push_back(Track{id, {}});
        } else if (!(p.t > tracks.back().samples.back().t)) {
            fail(ErrorCode::ParseError, where + ": timestamps of track '" + id + "' are not strictly increasing");
        }
        tracks.back().samples.push_back(p);
    }
    if (!header_seen) fail(ErrorCode::ParseError, source_name + ": missing header");
    return tracks;
}

std::vector<Track> read_tracks_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return read_tracks_csv(in, path.string());
}

void write_tracks_csv(std::ostream& out, std::span<const Track> tracks) {
    out << "track_id,t,x,y\n";
    for (const Track& track : tracks)
        for (const TrackPoint& p : track.samples)
            out << track.id << ',' << format_double(p.t) << ',' << format_double(p.x) << ',' << format_double(p.y)
                << '\n';
}

void write_tracks_csv(const std::filesystem::path& path, std::span<const Track> tracks) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    write_tracks_csv(out, tracks);
}

}  // namespace trajpred
