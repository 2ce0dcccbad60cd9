#pragma once

// Command implementations behind the `reflect` executable. Each returns a
// process exit code and reports problems on `err`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflect/image_io.hpp"
#include "reflect/json_io.hpp"
#include "reflect/metrics.hpp"
#include "reflect/parallel.hpp"
#include "reflect/selection.hpp"
#include "reflect/solver.hpp"
#include "reflect/synth.hpp"

namespace reflect::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

/// Maps the library's exception types onto exit codes.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        err << "error: numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
}

inline void warn_decode(const DecodeInfo& info, const fs::path& path, std::ostream& err) {
    if (info.alpha_stripped) err << "warning: " << path.string() << ": alpha channel ignored\n";
}

/// How a mask is obtained for an image.
enum class MaskPolicy { strict, nearest, strict_required };

inline MaskPolicy parse_mask_policy(const std::string& s) {
    if (s == "strict") return MaskPolicy::strict;
    if (s == "nearest") return MaskPolicy::nearest;
    if (s == "strict-required") return MaskPolicy::strict_required;
    throw ParameterError("unknown mask policy '" + s + "' (expected strict, nearest or strict-required)");
}

inline SelectionMask resolve_mask(const std::optional<fs::path>& mask_path, MaskPolicy policy, const Shape& shape) {
    const MaskDims dims{shape.height, shape.width};
    if (!mask_path) {
        if (policy == MaskPolicy::strict_required) throw ParameterError("a mask is required (--mask-policy strict-required)");
        return default_mask(dims);
    }
    return load_mask(*mask_path, dims, policy == MaskPolicy::nearest ? ResizePolicy::nearest : ResizePolicy::strict);
}

/// Appends one JSON object per outer iteration, flushed as it is produced.
class TraceWriter {
public:
    explicit TraceWriter(const fs::path& path) : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot open trace file " + path.string());
    }

    void write(const IterationRecord& r) {
        out_ << record_to_json(r).dump() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

/// Restores an image and encodes the clamped result as PNG. Shared by the CLI
/// and the HTTP service so both emit identical bytes for identical inputs.
inline std::vector<std::uint8_t> restore_to_png(const ImageBuffer& y, const SelectionMask& phi,
                                                const SolverParams& params, const SolveOptions& options = {}) {
    return encode_png(suppress(y, phi, params, options).restored);
}

// ---------------------------------------------------------------------------

struct SuppressArgs {
    fs::path input;
    fs::path output;
    std::optional<fs::path> mask;
    std::string mask_policy = "strict";
    std::optional<fs::path> trace;
    SolverParams params;
    std::size_t threads = 0;
};

inline int cmd_suppress(const SuppressArgs& a, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        a.params.validate();
        const MaskPolicy policy = parse_mask_policy(a.mask_policy);
        DecodeInfo info;
        const ImageBuffer y = load_image(a.input, &info);
        warn_decode(info, a.input, err);
        const SelectionMask phi = resolve_mask(a.mask, policy, y.shape());

        std::optional<TraceWriter> trace;
        if (a.trace) trace.emplace(*a.trace);
        SolveOptions opts;
        opts.threads = resolve_threads(a.threads);
        if (trace) opts.on_iteration = [&](const IterationRecord& r, std::size_t) { trace->write(r); };

        write_file_bytes(a.output, restore_to_png(y, phi, a.params, opts));
        return static_cast<int>(kOk);
    });
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    fs::path restored;
    fs::path truth;
    double dynamic_range = 1.0;
};

inline MetricsReport evaluate_files(const fs::path& restored, const fs::path& truth, double dynamic_range) {
    const ImageBuffer est = load_image(restored);
    const ImageBuffer gt = load_image(truth);
    require_same_shape(gt.shape(), est.shape(), "evaluate");
    return evaluate(gt, est, dynamic_range);
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const MetricsReport m = evaluate_files(a.restored, a.truth, a.dynamic_range);
        out << metrics_to_json(m).dump(2) << '\n';
        return static_cast<int>(kOk);
    });
}

// ---------------------------------------------------------------------------

struct ManifestEntry {
    fs::path input;
    fs::path truth;
    std::optional<fs::path> mask;
};

/// CSV rows `input,truth[,mask]`; blank lines and lines starting with '#' are
/// skipped, relative paths resolve against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();
    auto resolve = [&](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        fs::path p(s);
        return p.is_absolute() ? p : base / p;
    };
    std::vector<ManifestEntry> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() < 2 || cols.size() > 3) {
            throw ParameterError(path.string() + ":" + std::to_string(lineno) + ": expected input,truth[,mask]");
        }
        ManifestEntry e{resolve(cols[0]), resolve(cols[1]), std::nullopt};
        if (cols.size() == 3 && cols[2].find_first_not_of(" \t\r") != std::string::npos) e.mask = resolve(cols[2]);
        rows.push_back(std::move(e));
    }
    if (rows.empty()) throw ParameterError("manifest " + path.string() + " lists no image pairs");
    return rows;
}

struct BatchArgs {
    fs::path manifest;
    fs::path report;
    SolverParams params;
    std::string mask_policy = "strict";
    /// Score the first column as-is instead of restoring it first.
    bool no_solve = false;
    std::optional<fs::path> output_dir;
    std::size_t threads = 0;
};

struct BatchRow {
    ManifestEntry entry;
    MetricsReport metrics;
};

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline int cmd_batch(const BatchArgs& a, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        a.params.validate();
        const MaskPolicy policy = parse_mask_policy(a.mask_policy);
        const auto entries = read_manifest(a.manifest);
        if (a.output_dir) fs::create_directories(*a.output_dir);

        std::vector<BatchRow> rows(entries.size());
        parallel_for(entries.size(), resolve_threads(a.threads), [&](std::size_t i) {
            const ManifestEntry& e = entries[i];
            const ImageBuffer input = load_image(e.input);
            const ImageBuffer truth = load_image(e.truth);
            require_same_shape(truth.shape(), input.shape(), ("batch row " + std::to_string(i + 1)).c_str());
            ImageBuffer estimate = input;
            if (!a.no_solve) {
                const SelectionMask phi = resolve_mask(e.mask, policy, input.shape());
                const auto png = restore_to_png(input, phi, a.params);
                if (a.output_dir) write_file_bytes(*a.output_dir / e.input.filename(), png);
                // Score what would be written to disk.
                estimate = decode_image(png);
            }
            rows[i] = BatchRow{e, evaluate(truth, estimate)};
        });

        std::ofstream out(a.report, std::ios::trunc);
        if (!out) throw IoError("cannot open report " + a.report.string());
        out << "input,truth,slmse,ssim,psnr\n";
        double s_l = 0.0, s_s = 0.0, s_p = 0.0;
        for (const auto& r : rows) {
            out << r.entry.input.string() << ',' << r.entry.truth.string() << ',' << format_number(r.metrics.slmse)
                << ',' << format_number(r.metrics.ssim) << ',' << format_number(r.metrics.psnr) << '\n';
            s_l += r.metrics.slmse;
            s_s += r.metrics.ssim;
            s_p += r.metrics.psnr;
        }
        const auto n = static_cast<double>(rows.size());
        out << "mean,," << format_number(s_l / n) << ',' << format_number(s_s / n) << ',' << format_number(s_p / n)
            << '\n';
        if (!out) throw IoError("write error on " + a.report.string());
        return static_cast<int>(kOk);
    });
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    SyntheticSceneParams scene;
    std::optional<fs::path> t_input;
    std::optional<fs::path> r_input;
    fs::path out_y;
    fs::path out_t;
    std::size_t height = 128;
    std::size_t width = 128;
    std::size_t channels = 3;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        a.scene.validate();
        if (a.channels != 1 && a.channels != 3) throw ParameterError("channels must be 1 or 3");
        ImageBuffer t = a.t_input ? load_image(*a.t_input)
                                  : make_piecewise_constant(Shape{a.height, a.width, a.channels}, a.scene.seed);
        ImageBuffer r = a.r_input ? load_image(*a.r_input) : make_blob_reflection(t.shape(), a.scene.seed);
        require_same_shape(t.shape(), r.shape(), "synth (T vs R)");
        const ImageBuffer y = compose_scene(t, r, a.scene);
        save_image(y, a.out_y);
        save_image(t, a.out_t);
        return static_cast<int>(kOk);
    });
}

} // namespace reflect::cli
