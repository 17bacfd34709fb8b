#include "evsr/event_core.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace evsr {

namespace {

constexpr char kEvbinMagic[4] = {'E', 'V', 'S', '1'};
constexpr std::size_t kEvbinHeader = 4 + 2 + 2 + 8;
constexpr std::size_t kEvbinRecord = 13;
constexpr std::string_view kCsvHeader = "t_us,x,y,p";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t pos) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return static_cast<T>(v);
}

// Collects events in file order, tolerating small timestamp regressions, and
// finishes geometry/time span.
class StreamBuilder {
public:
    explicit StreamBuilder(const LoadOptions& opts) : opts_(opts) {}

    void add(const Event& e, std::size_t offset) {
        if (e.p != 1 && e.p != -1) throw ParseError("polarity must be 1 or -1", offset);
        if (e.x < 0 || e.y < 0) throw ParseError("negative coordinate", offset);
        if (!events_.empty() && e.t < max_t_) {
            if (max_t_ - e.t > opts_.regression_tolerance_us)
                throw FormatError("timestamp regression of " + std::to_string(max_t_ - e.t) +
                                  " us at byte offset " + std::to_string(offset));
            unsorted_ = true;
        }
        max_t_ = std::max(max_t_, e.t);
        max_x_ = std::max(max_x_, e.x);
        max_y_ = std::max(max_y_, e.y);
        events_.push_back(e);
    }

    EventStream finish(std::optional<Geometry> header_geometry) {
        EventStream s;
        if (unsorted_)
            std::stable_sort(events_.begin(), events_.end(),
                             [](const Event& a, const Event& b) { return a.t < b.t; });
        s.events = std::move(events_);
        std::optional<Geometry> g = opts_.geometry ? opts_.geometry : header_geometry;
        if (g) {
            s.width = g->width;
            s.height = g->height;
        } else if (!s.events.empty()) {
            s.width = max_x_ + 1;
            s.height = max_y_ + 1;
        }
        fit_time_span(s);
        validate(s);
        return s;
    }

private:
    const LoadOptions& opts_;
    std::vector<Event> events_;
    std::uint64_t max_t_ = 0;
    int max_x_ = 0;
    int max_y_ = 0;
    bool unsorted_ = false;
};

template <typename T>
T parse_field(std::string_view field, std::size_t offset, const char* name) {
    T v{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw ParseError(std::string("bad ") + name + " field '" + std::string(field) + "'", offset);
    return v;
}

}  // namespace

std::optional<EventFormat> format_from_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return EventFormat::csv;
    if (ext == ".evbin") return EventFormat::evbin;
    if (ext == ".bin") return EventFormat::nmnist_bin;
    return std::nullopt;
}

std::string format_name(EventFormat f) {
    switch (f) {
        case EventFormat::csv: return "csv";
        case EventFormat::evbin: return "evbin";
        case EventFormat::nmnist_bin: return "nmnist_bin";
    }
    return "?";
}

EventFormat parse_format(const std::string& name) {
    if (name == "csv") return EventFormat::csv;
    if (name == "evbin") return EventFormat::evbin;
    if (name == "nmnist_bin" || name == "nmnist") return EventFormat::nmnist_bin;
    throw std::invalid_argument("unknown event format '" + name + "'");
}

EventStream parse_csv(std::string_view text, const LoadOptions& opts) {
    StreamBuilder builder(opts);
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t offset = pos;
        pos = end + 1;
        if (first) {
            first = false;
            if (line == kCsvHeader) continue;
        }
        if (line.empty()) continue;

        std::string_view fields[4];
        std::size_t start = 0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t comma = line.find(',', start);
            if ((i < 3) == (comma == std::string_view::npos))
                throw ParseError("expected 4 comma-separated fields", offset);
            fields[i] = line.substr(start, i < 3 ? comma - start : std::string_view::npos);
            start = comma + 1;
        }
        Event e;
        e.t = parse_field<std::uint64_t>(fields[0], offset, "t_us");
        e.x = parse_field<int>(fields[1], offset, "x");
        e.y = parse_field<int>(fields[2], offset, "y");
        e.p = parse_field<int>(fields[3], offset, "p");
        builder.add(e, offset);
    }
    return builder.finish(std::nullopt);
}

EventStream parse_evbin(std::string_view bytes, const LoadOptions& opts) {
    if (bytes.size() < kEvbinHeader) throw ParseError("truncated evbin header", 0);
    if (!std::equal(kEvbinMagic, kEvbinMagic + 4, bytes.begin()))
        throw ParseError("bad evbin magic", 0);
    const Geometry g{get_le<std::uint16_t>(bytes, 4), get_le<std::uint16_t>(bytes, 6)};
    const auto count = get_le<std::uint64_t>(bytes, 8);
    const std::size_t body = bytes.size() - kEvbinHeader;
    if (body != count * kEvbinRecord) {
        const std::size_t complete = body / kEvbinRecord;
        throw ParseError("evbin declares " + std::to_string(count) + " events but holds " +
                             std::to_string(body) + " body bytes",
                         kEvbinHeader + std::min<std::size_t>(complete, count) * kEvbinRecord);
    }
    StreamBuilder builder(opts);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t off = kEvbinHeader + i * kEvbinRecord;
        Event e;
        e.t = get_le<std::uint64_t>(bytes, off);
        e.x = get_le<std::uint16_t>(bytes, off + 8);
        e.y = get_le<std::uint16_t>(bytes, off + 10);
        e.p = static_cast<std::int8_t>(bytes[off + 12]);
        builder.add(e, off);
    }
    return builder.finish(g);
}

Event decode_atis_record(const unsigned char rec[5]) {
    Event e;
    e.x = rec[0];
    e.y = rec[1];
    e.p = (rec[2] & 0x80) ? 1 : -1;
    e.t = (static_cast<std::uint64_t>(rec[2] & 0x7F) << 16) |
          (static_cast<std::uint64_t>(rec[3]) << 8) | rec[4];
    return e;
}

EventStream parse_nmnist(std::string_view bytes, const LoadOptions& opts) {
    if (bytes.size() % 5 != 0)
        throw ParseError("N-MNIST file length is not a multiple of 5", bytes.size() - bytes.size() % 5);
    LoadOptions fixed = opts;
    fixed.geometry = Geometry{kNmnistSize, kNmnistSize};
    StreamBuilder builder(fixed);
    for (std::size_t off = 0; off < bytes.size(); off += 5) {
        unsigned char rec[5];
        std::copy_n(bytes.data() + off, 5, reinterpret_cast<char*>(rec));
        builder.add(decode_atis_record(rec), off);
    }
    return builder.finish(std::nullopt);
}

EventStream load_events(const std::filesystem::path& path, EventFormat format,
                        const LoadOptions& opts) {
    const std::string bytes = read_file(path);
    switch (format) {
        case EventFormat::csv: return parse_csv(bytes, opts);
        case EventFormat::evbin: return parse_evbin(bytes, opts);
        case EventFormat::nmnist_bin: return parse_nmnist(bytes, opts);
    }
    throw std::invalid_argument("unknown format");
}

EventStream load_events(const std::filesystem::path& path, const LoadOptions& opts) {
    const auto f = format_from_extension(path);
    if (!f) throw std::invalid_argument("cannot infer event format from " + path.string());
    return load_events(path, *f, opts);
}

void save_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format) {
    validate(stream);
    std::string out;
    switch (format) {
        case EventFormat::csv: {
            std::ostringstream os;
            os << kCsvHeader << '\n';
            for (const auto& e : stream.events) os << e.t << ',' << e.x << ',' << e.y << ',' << e.p << '\n';
            out = os.str();
            break;
        }
        case EventFormat::evbin: {
            if (stream.width > 0xFFFF || stream.height > 0xFFFF)
                throw FormatError("geometry exceeds evbin u16 range");
            out.reserve(kEvbinHeader + stream.events.size() * kEvbinRecord);
            out.append(kEvbinMagic, 4);
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.width));
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.height));
            put_le<std::uint64_t>(out, stream.events.size());
            for (const auto& e : stream.events) {
                put_le<std::uint64_t>(out, e.t);
                put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.x));
                put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.y));
                out.push_back(static_cast<char>(static_cast<std::int8_t>(e.p)));
            }
            break;
        }
        case EventFormat::nmnist_bin:
            throw std::invalid_argument("writing nmnist_bin is not supported");
    }
    write_file(path, out);
}

void save_events(const EventStream& stream, const std::filesystem::path& path) {
    const auto f = format_from_extension(path);
    if (!f) throw std::invalid_argument("cannot infer event format from " + path.string());
    save_events(stream, path, *f);
}

void validate(const EventStream& s) {
    if (s.width < 0 || s.height < 0) throw FormatError("negative geometry");
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const Event& e = s.events[i];
        if (e.x < 0 || e.x >= s.width || e.y < 0 || e.y >= s.height)
            throw FormatError("event " + std::to_string(i) + " at (" + std::to_string(e.x) + "," +
                              std::to_string(e.y) + ") outside " + std::to_string(s.width) + "x" +
                              std::to_string(s.height));
        if (e.p != 1 && e.p != -1)
            throw FormatError("event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
        if (i > 0 && e.t < s.events[i - 1].t)
            throw FormatError("events not sorted at index " + std::to_string(i));
        if (e.t < s.t0 || e.t > s.t1)
            throw FormatError("event " + std::to_string(i) + " outside [t0, t1]");
    }
}

void fit_time_span(EventStream& s) {
    if (s.events.empty()) {
        s.t0 = s.t1 = 0;
        return;
    }
    s.t0 = s.events.front().t;
    s.t1 = s.events.back().t;
}

std::int64_t dt_to_us(double dt_ms) {
    const auto us = static_cast<std::int64_t>(std::llround(dt_ms * 1000.0));
    if (us <= 0) throw std::invalid_argument("bin width must be at least 1 us");
    return us;
}

int bins_for_span(const EventStream& s, double dt_ms) {
    const auto dt = static_cast<std::uint64_t>(dt_to_us(dt_ms));
    const std::uint64_t span = s.t1 - s.t0;
    return static_cast<int>(std::max<std::uint64_t>(1, (span + dt - 1) / dt));
}

VoxelGrid to_voxel_grid(const EventStream& s, int T, double dt_ms, std::optional<std::uint64_t> origin) {
    if (T < 1) throw std::invalid_argument("to_voxel_grid: T must be >= 1");
    if (!(dt_ms > 0)) throw std::invalid_argument("to_voxel_grid: dt must be positive");
    const auto dt = static_cast<std::uint64_t>(dt_to_us(dt_ms));
    const std::uint64_t t0 = origin.value_or(s.t0);
    const std::uint64_t window = dt * static_cast<std::uint64_t>(T);

    VoxelGrid out{SpikeTensor(2, s.height, s.width, T, dt_ms), 0};
    for (const auto& e : s.events) {
        if (e.t < t0 || e.t - t0 > window) {
            ++out.dropped;
            continue;
        }
        const auto bin = static_cast<int>(std::min<std::uint64_t>((e.t - t0) / dt, T - 1));
        out.tensor.data.at(e.p > 0 ? 0 : 1, e.y, e.x, bin) += 1.0;
    }
    return out;
}

EventStream from_voxel_grid(const SpikeTensor& tensor, std::uint64_t t0) {
    const Shape4& sh = tensor.shape();
    if (sh.c != 1 && sh.c != 2) throw ShapeError("from_voxel_grid expects 1 or 2 channels");
    const double dt_us = tensor.dt_ms * 1000.0;

    EventStream s;
    s.width = sh.w;
    s.height = sh.h;
    // Emit bin by bin so the output is already time-ordered.
    for (int tau = 0; tau < sh.t; ++tau) {
        const auto t = t0 + static_cast<std::uint64_t>(std::llround((tau + 0.5) * dt_us));
        for (int c = 0; c < sh.c; ++c)
            for (int y = 0; y < sh.h; ++y)
                for (int x = 0; x < sh.w; ++x) {
                    const double v = tensor.data.at(c, y, x, tau);
                    const auto n = v > 0 ? std::llround(v) : 0;
                    for (long long k = 0; k < n; ++k) s.events.push_back({t, x, y, c == 0 ? 1 : -1});
                }
    }
    s.t0 = t0;
    s.t1 = t0 + static_cast<std::uint64_t>(std::llround(sh.t * dt_us));
    return s;
}

EventStream downsample_2x(const EventStream& s) {
    EventStream out;
    out.width = (s.width + 1) / 2;
    out.height = (s.height + 1) / 2;
    out.t0 = s.t0;
    out.t1 = s.t1;
    out.events.reserve(s.events.size());
    for (const auto& e : s.events) out.events.push_back({e.t, e.x / 2, e.y / 2, e.p});
    return out;
}

std::pair<SpikeTensor, SpikeTensor> split_polarity(const SpikeTensor& tensor) {
    const Shape4& sh = tensor.shape();
    if (sh.c != 2) throw ShapeError("split_polarity expects 2 channels, got " + sh.str());
    SpikeTensor pos(1, sh.h, sh.w, sh.t, tensor.dt_ms);
    SpikeTensor neg(1, sh.h, sh.w, sh.t, tensor.dt_ms);
    std::ranges::copy(tensor.data.channel(0), pos.data.data().begin());
    std::ranges::copy(tensor.data.channel(1), neg.data.data().begin());
    return {std::move(pos), std::move(neg)};
}

SpikeTensor merge_polarity(const SpikeTensor& pos, const SpikeTensor& neg) {
    if (!(pos.shape() == neg.shape()) || pos.shape().c != 1)
        throw ShapeError("merge_polarity expects two equal 1-channel tensors, got " +
                         pos.shape().str() + " and " + neg.shape().str());
    const Shape4& sh = pos.shape();
    SpikeTensor out(2, sh.h, sh.w, sh.t, pos.dt_ms);
    std::ranges::copy(pos.data.data(), out.data.channel(0).begin());
    std::ranges::copy(neg.data.data(), out.data.channel(1).begin());
    return out;
}

EventStream synth_moving_bar(const MovingBarParams& prm) {
    if (prm.width <= 0 || prm.height <= 0 || prm.duration_ms <= 0 || prm.events_per_edge_px < 0 ||
        prm.velocity_px_per_ms < 0 || prm.bar_width_px < 0)
        throw std::invalid_argument("synth_moving_bar: parameters must be positive");

    EventStream s;
    s.width = prm.width;
    s.height = prm.height;
    s.t0 = 0;
    s.t1 = static_cast<std::uint64_t>(std::llround(prm.duration_ms * 1000.0));
    if (prm.velocity_px_per_ms == 0 || prm.events_per_edge_px == 0) return s;

    std::mt19937_64 rng(prm.seed);
    const int bar_w = prm.bar_width_px > 0 ? prm.bar_width_px : std::max(2, prm.width / 8);
    const int rows = std::max(1, prm.height / 2);
    const int y0 = std::uniform_int_distribution<int>(0, prm.height - rows)(rng);
    std::poisson_distribution<int> count(prm.events_per_edge_px);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double crossing_ms = 1.0 / prm.velocity_px_per_ms;

    // Edge at position e crosses column x during [(x + e) / v, (x + e + 1) / v).
    auto emit_edge = [&](int lag_px, int polarity) {
        for (int x = 0; x < prm.width; ++x) {
            const double start_ms = (x + lag_px) * crossing_ms;
            if (start_ms >= prm.duration_ms) break;
            for (int y = y0; y < y0 + rows; ++y) {
                const int n = count(rng);
                for (int k = 0; k < n; ++k) {
                    const double t_ms = start_ms + unit(rng) * crossing_ms;
                    if (t_ms >= prm.duration_ms) continue;
                    s.events.push_back({static_cast<std::uint64_t>(t_ms * 1000.0), x, y, polarity});
                }
            }
        }
    };
    emit_edge(0, 1);
    emit_edge(bar_w, -1);
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

std::vector<EventStream> synth_bar_corpus(int n, const MovingBarParams& base) {
    if (n < 1) throw std::invalid_argument("synth_bar_corpus: n must be >= 1");
    std::mt19937_64 rng(base.seed);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    std::vector<EventStream> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        MovingBarParams p = base;
        p.seed = rng();
        p.velocity_px_per_ms = base.velocity_px_per_ms * jitter(rng);
        out.push_back(synth_moving_bar(p));
    }
    return out;
}

}  // namespace evsr
