#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evsr/event_core.h"
#include "evsr/metrics.h"
#include "evsr/snn_model.h"
#include "evsr/training.h"

namespace evsr::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<int> parse_dims(const std::string& s, std::size_t n, const std::string& what) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        std::size_t used = 0;
        int x = 0;
        try {
            x = std::stoi(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size() || x <= 0) throw UsageError("bad " + what + " '" + s + "'");
        v.push_back(x);
    }
    if (v.size() != n) throw UsageError("bad " + what + " '" + s + "'");
    return v;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

EventFormat output_format(const fs::path& p, const std::string& flag) {
    if (!flag.empty()) return parse_format(flag);
    const auto f = format_from_extension(p);
    if (!f) throw UsageError("cannot infer the format of '" + p.string() + "'; pass --format");
    return *f;
}

// "name.ext" -> "name.lr.ext"; N-MNIST inputs become evbin because that format
// is fixed at 34x34.
fs::path lr_name(const fs::path& hr, const std::string& format_flag) {
    std::string ext = hr.extension().string();
    if (!format_flag.empty()) ext = parse_format(format_flag) == EventFormat::csv ? ".csv" : ".evbin";
    else if (format_from_extension(hr) == EventFormat::nmnist_bin) ext = ".evbin";
    return hr.stem().string() + ".lr" + ext;
}

struct PathPair {
    fs::path first;
    fs::path second;
};

// One "a,b" pair per line; blank lines and '#' comments are skipped and
// relative paths are resolved against the manifest's directory.
std::vector<PathPair> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read manifest " + path.string());
    std::vector<PathPair> out;
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    auto resolve = [&](const std::string& s) {
        const fs::path p(s);
        return p.is_absolute() ? p : path.parent_path() / p;
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        const std::string a = comma == std::string::npos ? "" : trim(line.substr(0, comma));
        const std::string b = comma == std::string::npos ? "" : trim(line.substr(comma + 1));
        if (a.empty() || b.empty() || b.find(',') != std::string::npos)
            throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected two comma-separated paths");
        out.push_back({resolve(a), resolve(b)});
    }
    if (out.empty()) throw UsageError("manifest " + path.string() + " lists no pairs");
    return out;
}

ExecMode default_mode(Variant v) { return v == Variant::dual_layer ? ExecMode::joint : ExecMode::dual_sequential; }

void check_mode(Variant v, ExecMode m) {
    if ((v == Variant::dual_layer) != (m == ExecMode::joint))
        throw UsageError("variant " + to_string(v) + " cannot run in mode " + to_string(m));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    int n = 10;
    std::string size = "32x32";
    double dur = 64.0;
    double velocity = MovingBarParams{}.velocity_px_per_ms;
    double events = MovingBarParams{}.events_per_edge_px;
    int bar_width = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "evbin";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    if (a.n < 1) throw UsageError("--n must be at least 1");
    if (a.dur <= 0) throw UsageError("--dur must be positive");
    if (a.velocity < 0 || a.events < 0 || a.bar_width < 0) throw UsageError("bar parameters must be non-negative");
    const auto wh = parse_dims(a.size, 2, "--size");
    const EventFormat fmt = parse_format(a.format);
    if (fmt == EventFormat::nmnist_bin) throw UsageError("synth writes csv or evbin");
    const std::string ext = fmt == EventFormat::csv ? ".csv" : ".evbin";

    const fs::path dir(a.out);
    fs::create_directories(dir);
    MovingBarParams base;
    base.width = wh[0];
    base.height = wh[1];
    base.duration_ms = a.dur;
    base.velocity_px_per_ms = a.velocity;
    base.events_per_edge_px = a.events;
    base.bar_width_px = a.bar_width;
    base.seed = a.seed;
    const auto corpus = synth_bar_corpus(a.n, base);

    std::ostringstream manifest;
    for (int i = 0; i < a.n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "bar_%04d", i);
        const fs::path hr = std::string(name) + ext;
        save_events(corpus[i], dir / hr, fmt);
        manifest << lr_name(hr, "").string() << ',' << hr.string() << '\n';
    }
    std::ofstream mf(dir / "manifest.txt", std::ios::binary);
    mf << manifest.str();
    if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
    out << "wrote " << a.n << " streams and " << (dir / "manifest.txt").string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct DownsampleArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string format;
};

int cmd_downsample(const DownsampleArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> files;
    for (const auto& in : a.inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const std::string name = e.path().filename().string();
                if (e.is_regular_file() && format_from_extension(e.path()) && name.find(".lr.") == std::string::npos)
                    found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            require_file(p, "input");
            files.push_back(p);
        }
    }
    if (!a.format.empty() && parse_format(a.format) == EventFormat::nmnist_bin)
        throw UsageError("downsample writes csv or evbin");
    if (!a.out.empty()) fs::create_directories(a.out);

    int failed = 0;
    for (const auto& f : files) {
        const fs::path target = (a.out.empty() ? f.parent_path() : fs::path(a.out)) / lr_name(f, a.format);
        try {
            const EventStream lr = downsample_2x(load_events(f));
            save_events(lr, target, output_format(target, a.format));
            out << f.string() << " -> " << target.string() << " (" << lr.width << "x" << lr.height << ", "
                << lr.events.size() << " events)\n";
        } catch (const std::exception& e) {
            ++failed;
            err << "error: " << f.string() << ": " << e.what() << '\n';
        }
    }
    out << "downsampled " << files.size() - failed << " of " << files.size() << " files\n";
    return failed ? kFailure : kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string manifest;
    std::string variant = "ultralight";
    std::string mode;
    int epochs = 30;
    int batch = 8;
    double lr = 0.1;
    std::uint64_t seed = 0;
    int T = 0;
    double dt = 1.0;
    int val_count = 0;
    int workers = 0;
    std::string checkpoint = "model.evsrw";
    std::string report;
};

// INI values fill only the options not given on the command line.
void apply_config(TrainArgs& a, const CLI::App& app) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(a.config, tree);
    } catch (const pt::ini_parser_error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    auto given = [&](const std::string& flag) { return app.get_option(flag)->count() > 0; };
    for (const auto& [section, body] : tree) {
        if (section != "train" && section != "model" && section != "data")
            throw UsageError("config: unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            const std::string v = node.get_value<std::string>();
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            auto set = [&](auto& field) {
                if (given(flag)) return;
                try {
                    field = node.get_value<std::decay_t<decltype(field)>>();
                } catch (const pt::ptree_bad_data&) {
                    throw UsageError("config: bad value for " + key + ": '" + v + "'");
                }
            };
            const std::string k = section + "." + key;
            if (k == "data.manifest") set(a.manifest);
            else if (k == "data.T") set(a.T);
            else if (k == "data.dt") set(a.dt);
            else if (k == "data.val_count") set(a.val_count);
            else if (k == "model.variant") set(a.variant);
            else if (k == "model.mode") set(a.mode);
            else if (k == "train.epochs") set(a.epochs);
            else if (k == "train.batch") set(a.batch);
            else if (k == "train.lr") set(a.lr);
            else if (k == "train.seed") set(a.seed);
            else if (k == "train.workers") set(a.workers);
            else if (k == "train.checkpoint") set(a.checkpoint);
            else if (k == "train.report") set(a.report);
            else throw UsageError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }
}

int cmd_train(TrainArgs a, const CLI::App& app, std::ostream& out) {
    if (!a.config.empty()) {
        require_file(a.config, "config");
        apply_config(a, app);
    }
    if (a.manifest.empty()) throw UsageError("train needs --manifest (or [data] manifest in the config)");
    if (a.epochs < 1 || a.batch < 1) throw UsageError("--epochs and --batch must be at least 1");
    if (!(a.lr > 0) || !(a.dt > 0) || a.T < 0 || a.val_count < 0 || a.workers < 0)
        throw UsageError("--lr and --dt must be positive; --T, --val-count and --workers non-negative");

    TrainConfig cfg;
    cfg.variant = parse_variant(a.variant);
    cfg.mode = a.mode.empty() ? default_mode(cfg.variant) : parse_mode(a.mode);
    check_mode(cfg.variant, cfg.mode);
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.seed = a.seed;
    cfg.T = a.T;
    cfg.dt_ms = a.dt;
    cfg.val_count = a.val_count;
    cfg.workers = a.workers;

    const auto pairs = read_manifest(a.manifest);
    for (const auto& p : pairs) {
        require_file(p.first, "LR stream");
        require_file(p.second, "HR stream");
    }
    const fs::path report = a.report.empty() ? fs::path(a.checkpoint).replace_extension(".csv") : fs::path(a.report);

    std::vector<StreamPair> data;
    for (const auto& p : pairs) data.push_back({load_events(p.first), load_events(p.second), p.second.stem().string()});

    out << "training " << to_string(cfg.variant) << " (" << to_string(cfg.mode) << ") on " << data.size()
        << " pairs\n";
    const TrainResult r = train(cfg, data, [&](const EpochRecord& e) {
        out << "epoch " << e.epoch << " train_loss=" << num(e.train_loss) << " w=" << num(e.w[0]) << ','
            << num(e.w[1]) << ',' << num(e.w[2]) << " val_rmse_st=" << num(e.val_rmse_st) << std::endl;
    });
    save_checkpoint(r.checkpoint, a.checkpoint);
    std::ofstream rep(report, std::ios::binary);
    rep << report_csv(r.epochs);
    if (!rep) throw std::runtime_error("cannot write " + report.string());

    out << "initial_val_rmse_st=" << num(r.initial_val_rmse_st) << '\n';
    for (std::size_t i = 0; i < r.val_names.size(); ++i)
        out << "val_rmse_st[" << r.val_names[i] << "]=" << num(r.final_val_rmse_per_pair[i]) << '\n';
    out << "final_val_rmse_st=" << num(r.epochs.back().val_rmse_st) << '\n';
    out << "checkpoint: " << a.checkpoint << "\nreport: " << report.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string input;
    std::string output;
    std::string variant;
    std::string mode;
    int T = 0;
    double dt = 1.0;
    std::string format;
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.input, "input");
    if (!(a.dt > 0) || a.T < 0) throw UsageError("--dt must be positive and --T non-negative");
    const EventFormat fmt = output_format(a.output, a.format);
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    if (!a.variant.empty() && parse_variant(a.variant) != ck.spec.variant)
        throw UsageError("checkpoint holds a " + to_string(ck.spec.variant) + " network, not " + a.variant);
    const ExecMode mode = a.mode.empty() ? default_mode(ck.spec.variant) : parse_mode(a.mode);
    check_mode(ck.spec.variant, mode);

    const EventStream lr = load_events(a.input);
    if (lr.events.empty()) err << "warning: " << a.input << " holds no events\n";
    const int T = a.T > 0 ? a.T : bins_for_span(lr, a.dt);
    const EventStream hr = infer_stream(ck.spec, ck.weights, lr, mode, T, a.dt);
    save_events(hr, a.output, fmt);
    out << "wrote " << hr.events.size() << " events (" << hr.width << "x" << hr.height << ", T=" << T << ") to "
        << a.output << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string manifest;
    std::string csv;
    int T = 0;
    double dt = 1.0;
    double block = 50.0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (!(a.dt > 0) || !(a.block > 0) || a.T < 0) throw UsageError("--dt and --block must be positive");
    std::vector<PathPair> pairs;
    if (!a.manifest.empty()) {
        if (!a.pred.empty() || !a.gt.empty()) throw UsageError("use either --manifest or --pred/--gt");
        pairs = read_manifest(a.manifest);
    } else {
        if (a.pred.empty() || a.gt.empty()) throw UsageError("eval needs --pred and --gt, or --manifest");
        pairs.push_back({a.pred, a.gt});
    }
    for (const auto& p : pairs) {
        require_file(p.first, "prediction");
        require_file(p.second, "ground truth");
    }

    std::vector<std::pair<EventStream, EventStream>> streams;
    for (const auto& p : pairs) {
        streams.emplace_back(load_events(p.first), load_events(p.second));
        const auto& [o, g] = streams.back();
        if (o.width != g.width || o.height != g.height)
            throw UsageError("geometry mismatch: " + p.first.string() + " is " + std::to_string(o.width) + "x" +
                             std::to_string(o.height) + ", " + p.second.string() + " is " +
                             std::to_string(g.width) + "x" + std::to_string(g.height));
    }
    std::vector<MetricsReport> reports;
    for (const auto& [o, g] : streams) {
        const int T = a.T > 0 ? a.T : bins_for_span(g, a.dt);
        reports.push_back(rmse_st(o, g, T, a.dt, a.block));
    }

    if (a.manifest.empty()) {
        out << to_key_value(reports[0]);
        return kOk;
    }
    std::ostringstream csv;
    csv << csv_header() << '\n';
    MetricsReport mean;
    mean.pa_percent = 0;
    mean.pa_vacuous = true;
    double n_p = 0;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        csv << to_csv_row(pairs[i].second.stem().string(), r) << '\n';
        mean.rmse_st += r.rmse_st;
        mean.mse_t_raw += r.mse_t_raw;
        mean.mse_s_raw += r.mse_s_raw;
        mean.mse_t_norm += r.mse_t_norm;
        mean.mse_s_norm += r.mse_s_norm;
        mean.pa_percent += r.pa_percent;
        mean.pa_vacuous = mean.pa_vacuous && r.pa_vacuous;
        mean.span_ms += r.span_ms;
        n_p += static_cast<double>(r.n_p);
    }
    const double k = static_cast<double>(reports.size());
    csv << "mean," << num(mean.rmse_st / k) << ',' << num(mean.mse_t_raw / k) << ',' << num(mean.mse_s_raw / k) << ','
        << num(mean.mse_t_norm / k) << ',' << num(mean.mse_s_norm / k) << ',' << num(mean.pa_percent / k) << ','
        << (mean.pa_vacuous ? 1 : 0) << ',' << num(n_p / k) << ',' << num(mean.span_ms / k) << '\n';
    if (a.csv.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(a.csv, std::ios::binary);
        f << csv.str();
        if (!f) throw std::runtime_error("cannot write " + a.csv);
        out << "wrote " << reports.size() << " rows to " << a.csv << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct RenderArgs {
    std::string input;
    std::string output;
    std::optional<double> from_ms;
    std::optional<double> to_ms;
    double every_ms = 0;
};

// White background; red falls off with the ON count, blue with the OFF count,
// both scaled by the largest per-pixel count in the window.
std::string render_ppm(const EventStream& s, std::uint64_t start, std::uint64_t end, bool include_end) {
    const std::size_t n = static_cast<std::size_t>(s.width) * s.height;
    std::vector<double> on(n, 0), off(n, 0);
    for (const auto& e : s.events) {
        if (e.t < start || e.t > end || (e.t == end && !include_end)) continue;
        (e.p > 0 ? on : off)[static_cast<std::size_t>(e.y) * s.width + e.x] += 1;
    }
    double peak = 0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, on[i], off[i]});
    std::string img = "P6\n" + std::to_string(s.width) + " " + std::to_string(s.height) + "\n255\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double a = peak > 0 ? on[i] / peak : 0, b = peak > 0 ? off[i] / peak : 0;
        img += static_cast<char>(std::lround(255 * (1 - b)));
        img += static_cast<char>(std::lround(255 * (1 - a) * (1 - b)));
        img += static_cast<char>(std::lround(255 * (1 - a)));
    }
    return img;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
    require_file(a.input, "input");
    if (a.every_ms < 0) throw UsageError("--every must be positive");
    if ((a.from_ms && *a.from_ms < 0) || (a.to_ms && *a.to_ms < 0)) throw UsageError("window bounds must be >= 0");
    const EventStream s = load_events(a.input);
    const std::uint64_t start = s.t0 + static_cast<std::uint64_t>(std::llround(a.from_ms.value_or(0) * 1000));
    const std::uint64_t end = a.to_ms ? s.t0 + static_cast<std::uint64_t>(std::llround(*a.to_ms * 1000)) : s.t1;
    // An explicit window is half-open; the default one covers the last event.
    const bool include_end = !a.to_ms;
    if (end < start || (end == start && !include_end)) throw UsageError("zero-length render window");

    auto write = [&](const fs::path& p, const std::string& img) {
        std::ofstream f(p, std::ios::binary);
        f << img;
        if (!f) throw std::runtime_error("cannot write " + p.string());
    };
    if (a.every_ms <= 0) {
        write(a.output, render_ppm(s, start, end, include_end));
        out << "wrote " << a.output << '\n';
        return kOk;
    }
    const std::uint64_t step = static_cast<std::uint64_t>(std::llround(a.every_ms * 1000));
    if (step == 0) throw UsageError("--every must be at least 1 us");
    const std::uint64_t frames = std::max<std::uint64_t>(1, (end - start + step - 1) / step);
    const fs::path base(a.output);
    for (std::uint64_t k = 0; k < frames; ++k) {
        const std::uint64_t f0 = start + k * step;
        const bool last = k + 1 == frames;
        const std::uint64_t f1 = last ? end : f0 + step;
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_%04llu", static_cast<unsigned long long>(k));
        const fs::path p = base.parent_path() / (base.stem().string() + suffix + ".ppm");
        write(p, render_ppm(s, f0, f1, last && include_end));
    }
    out << "wrote " << frames << " frames\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct InfoArgs {
    std::string variant;
    std::string checkpoint;
    std::string dims;
};

int cmd_info(const InfoArgs& a, std::ostream& out) {
    if (a.variant.empty() == a.checkpoint.empty()) throw UsageError("info needs exactly one of --variant, --checkpoint");
    std::optional<std::vector<int>> dims;
    if (!a.dims.empty()) dims = parse_dims(a.dims, 3, "--dims");
    NetworkSpec spec;
    if (!a.checkpoint.empty()) {
        require_file(a.checkpoint, "checkpoint");
        spec = load_checkpoint(a.checkpoint).spec;
    } else {
        spec = NetworkSpec::make(parse_variant(a.variant));
    }
    out << "variant: " << to_string(spec.variant) << '\n';
    out << "params: " << count_params(spec) << '\n';
    int h = dims ? (*dims)[0] : 0, w = dims ? (*dims)[1] : 0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& c = spec.layers[l];
        const auto& n = spec.neurons[l];
        out << "layer" << l << ": " << to_string(c.kind) << ' ' << c.in_channels << "->" << c.out_channels << ' '
            << c.kernel_h << 'x' << c.kernel_w << " stride " << c.stride << " padding " << c.padding;
        if (dims) {
            h = c.out_height(h);
            w = c.out_width(w);
            out << " output " << c.out_channels << 'x' << h << 'x' << w << 'x' << (*dims)[2];
        }
        out << '\n';
        out << "neuron" << l << ": v_th=" << n.v_th << " tau_s=" << n.tau_s << " tau_r=" << n.tau_r
            << " lambda=" << n.lambda << " tau_rho=" << n.tau_rho << " rho=" << n.rho << '\n';
    }
    if (dims) out << "flops: " << count_flops(spec, (*dims)[0], (*dims)[1], (*dims)[2]) << '\n';
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Event-stream super-resolution with spiking networks"};
    app.name("evsr");
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a moving-bar HR corpus and its manifest");
    s->add_option("--n", synth.n, "Number of streams")->capture_default_str();
    s->add_option("--size", synth.size, "Frame size WxH")->capture_default_str();
    s->add_option("--dur", synth.dur, "Duration in ms")->capture_default_str();
    s->add_option("--velocity", synth.velocity, "Bar speed in px/ms")->capture_default_str();
    s->add_option("--events-per-edge", synth.events, "Mean events per pixel per edge crossing")->capture_default_str();
    s->add_option("--bar-width", synth.bar_width, "Bar width in px (0: width/8)")->capture_default_str();
    s->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--format", synth.format, "csv or evbin")->capture_default_str();

    DownsampleArgs down;
    auto* d = app.add_subcommand("downsample", "Write a 2x2-merged LR twin (name.lr.ext) of each input");
    d->add_option("inputs", down.inputs, "Event files or directories")->required();
    d->add_option("--out", down.out, "Output directory (default: next to each input)");
    d->add_option("--format", down.format, "Output format: csv or evbin");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a network on an LR/HR manifest");
    t->add_option("--config", tr.config, "INI file with [train], [model] and [data] sections");
    t->add_option("--manifest", tr.manifest, "lr_path,hr_path per line");
    t->add_option("--variant", tr.variant, "dual_layer or ultralight")->capture_default_str();
    t->add_option("--mode", tr.mode, "joint, dual_sequential or dual_concurrent");
    t->add_option("--epochs", tr.epochs)->capture_default_str();
    t->add_option("--batch", tr.batch)->capture_default_str();
    t->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--seed", tr.seed)->capture_default_str();
    t->add_option("--T", tr.T, "Time bins (0: from each HR stream's span)")->capture_default_str();
    t->add_option("--dt", tr.dt, "Bin width in ms")->capture_default_str();
    t->add_option("--val-count", tr.val_count, "Trailing pairs held out (0: n/10)")->capture_default_str();
    t->add_option("--workers", tr.workers, "Per-sample threads (0: all cores)")->capture_default_str();
    t->add_option("--checkpoint", tr.checkpoint, "Checkpoint path")->capture_default_str();
    t->add_option("--report", tr.report, "Epoch CSV path (default: checkpoint with .csv)");

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "Super-resolve an LR stream with a trained checkpoint");
    i->add_option("--checkpoint", inf.checkpoint)->required();
    i->add_option("--input", inf.input)->required();
    i->add_option("--output", inf.output)->required();
    i->add_option("--variant", inf.variant, "Expected variant");
    i->add_option("--mode", inf.mode, "joint, dual_sequential or dual_concurrent");
    i->add_option("--T", inf.T, "Time bins (0: from the input span)")->capture_default_str();
    i->add_option("--dt", inf.dt, "Bin width in ms")->capture_default_str();
    i->add_option("--format", inf.format, "Output format: csv or evbin");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
    e->add_option("--pred", ev.pred);
    e->add_option("--gt", ev.gt);
    e->add_option("--manifest", ev.manifest, "pred_path,gt_path per line");
    e->add_option("--csv", ev.csv, "CSV output for --manifest (default: stdout)");
    e->add_option("--T", ev.T, "Time bins (0: from each ground-truth span)")->capture_default_str();
    e->add_option("--dt", ev.dt, "Bin width in ms")->capture_default_str();
    e->add_option("--block", ev.block, "Spatial block in ms")->capture_default_str();

    RenderArgs rn;
    auto* r = app.add_subcommand("render", "Accumulate events into PPM images");
    r->add_option("--input", rn.input)->required();
    r->add_option("--output", rn.output, "Image path; frames get a _NNNN suffix")->required();
    r->add_option("--from", rn.from_ms, "Window start in ms after the first event");
    r->add_option("--to", rn.to_ms, "Window end in ms after the first event");
    r->add_option("--every", rn.every_ms, "Frame length in ms");

    InfoArgs info;
    auto* n = app.add_subcommand("info", "Print parameter counts, layer shapes and FLOPs");
    n->add_option("--variant", info.variant, "dual_layer or ultralight");
    n->add_option("--checkpoint", info.checkpoint);
    n->add_option("--dims", info.dims, "Input HxWxT for shapes and FLOPs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (d->parsed()) return cmd_downsample(down, out, err);
        if (t->parsed()) return cmd_train(tr, *t, out);
        if (i->parsed()) return cmd_infer(inf, out, err);
        if (e->parsed()) return cmd_eval(ev, out);
        if (r->parsed()) return cmd_render(rn, out);
        if (n->parsed()) return cmd_info(info, out);
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const ShapeError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

}  // namespace evsr::cli
