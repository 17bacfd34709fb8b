#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evsr/tensor.h"

namespace evsr {

struct Event {
    std::uint64_t t = 0;  // microseconds
    int x = 0;
    int y = 0;
    int p = 1;  // +1 or -1

    bool operator==(const Event&) const = default;
};

struct EventStream {
    std::vector<Event> events;  // non-decreasing t
    int width = 0;
    int height = 0;
    std::uint64_t t0 = 0;  // microseconds
    std::uint64_t t1 = 0;

    bool operator==(const EventStream&) const = default;
};

enum class EventFormat { csv, evbin, nmnist_bin };

// Raised for malformed records; `offset` is the byte position of the record.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};

// Raised for structurally valid files whose contents violate the stream model.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Geometry {
    int width = 0;
    int height = 0;
};

struct LoadOptions {
    // Overrides header geometry for csv/evbin; nmnist_bin is always 34x34.
    std::optional<Geometry> geometry;
    // Out-of-order timestamps up to this many microseconds are re-sorted; a
    // larger regression is a FormatError.
    std::uint64_t regression_tolerance_us = 1000;
};

inline constexpr int kNmnistSize = 34;

std::optional<EventFormat> format_from_extension(const std::filesystem::path& path);
std::string format_name(EventFormat f);
EventFormat parse_format(const std::string& name);

EventStream load_events(const std::filesystem::path& path, EventFormat format,
                        const LoadOptions& opts = {});
EventStream load_events(const std::filesystem::path& path, const LoadOptions& opts = {});
void save_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format);
void save_events(const EventStream& stream, const std::filesystem::path& path);

// In-memory decoders used by load_events; exposed for bytes that do not come from a file.
EventStream parse_csv(std::string_view text, const LoadOptions& opts = {});
EventStream parse_evbin(std::string_view bytes, const LoadOptions& opts = {});
EventStream parse_nmnist(std::string_view bytes, const LoadOptions& opts = {});
Event decode_atis_record(const unsigned char rec[5]);

// Throws FormatError when an event lies outside the geometry, has an invalid
// polarity or the stream is unsorted.
void validate(const EventStream& stream);

// Sets t0/t1 to the first/last event timestamps (0/0 for an empty stream).
void fit_time_span(EventStream& stream);

std::int64_t dt_to_us(double dt_ms);

// Number of dt-wide bins covering [t0, t1]; at least one.
int bins_for_span(const EventStream& stream, double dt_ms = 1.0);

struct VoxelGrid {
    SpikeTensor tensor;
    std::size_t dropped = 0;
};

// Event counts per [polarity channel, y, x, bin] with bins measured from `origin`
// (defaults to stream.t0). An event exactly at origin + T*dt lands in bin T-1;
// anything later, or earlier than origin, is dropped and counted.
VoxelGrid to_voxel_grid(const EventStream& stream, int T, double dt_ms = 1.0,
                        std::optional<std::uint64_t> origin = std::nullopt);

// round(v) events per voxel, stamped at the bin centre t0 + (tau + 0.5) * dt.
EventStream from_voxel_grid(const SpikeTensor& tensor, std::uint64_t t0);

// Merges every 2x2 block into one pixel; output is ceil(W/2) x ceil(H/2).
EventStream downsample_2x(const EventStream& stream);

std::pair<SpikeTensor, SpikeTensor> split_polarity(const SpikeTensor& tensor);
SpikeTensor merge_polarity(const SpikeTensor& pos, const SpikeTensor& neg);

struct MovingBarParams {
    int width = 32;
    int height = 32;
    double duration_ms = 64.0;
    double velocity_px_per_ms = 0.15;
    double events_per_edge_px = 8.0;
    int bar_width_px = 0;  // 0 picks max(2, width / 8)
    std::uint64_t seed = 0;
};

// A bright bar sweeping left to right: pixels emit Poisson(events_per_edge_px)
// ON events while the leading edge crosses them and OFF events while the
// trailing edge does, uniformly within the crossing interval.
EventStream synth_moving_bar(const MovingBarParams& params);

// n HR bar streams; sample i draws its own seed and a velocity within +-20% of
// the base velocity from the corpus seed.
std::vector<EventStream> synth_bar_corpus(int n, const MovingBarParams& base);

}  // namespace evsr
