#pragma once

// Artifact serialization: field files, flow traces, JSON summaries.
//
//   - field file = one JSON header line {"N":..,"tau_im":..,"tau_re":..}
//     followed by N*N row-major float64 values; binary little-endian by
//     default, CSV when the path ends in .csv;
//   - every float in a summary is routed through %.12e before serialization,
//     so identical runs produce byte-identical JSON;
//   - all writes go through a temp file + rename: no partial artifacts.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "quillen/flow.hpp"
#include "quillen/torus.hpp"

namespace quillen::io {

inline double fixed12(double v)
{
    if (v == 0.0) return 0.0; // no negative zero in artifacts
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return std::strtod(buf, nullptr);
}

inline nlohmann::json snap_floats(nlohmann::json j)
{
    if (j.is_number_float()) return fixed12(j.get<double>());
    if (j.is_object() || j.is_array())
        for (auto& el : j) el = snap_floats(el);
    return j;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(text.data(), std::streamsize(text.size()));
        if (!f) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j)
{
    write_text_atomic(path, snap_floats(j).dump(2) + "\n");
}

// ------------------------------------------------------------- field files

inline bool field_is_csv(const std::filesystem::path& p) { return p.extension() == ".csv"; }

inline void write_field(const std::filesystem::path& path, const TorusShape& s, const Field& f)
{
    if (f.size() != s.size()) throw std::invalid_argument("write_field: size mismatch");
    // header line carries the exact tau, not the %.12e-snapped one
    nlohmann::json h{{"N", s.N}, {"tau_im", s.tau_im}, {"tau_re", s.tau_re}};
    std::string out = h.dump();
    out += '\n';
    if (field_is_csv(path)) {
        char buf[40];
        for (int iy = 0; iy < s.N; ++iy)
            for (int ix = 0; ix < s.N; ++ix) {
                std::snprintf(buf, sizeof buf, "%.17g", f[std::size_t(iy) * s.N + ix]);
                out += buf;
                out += (ix + 1 == s.N) ? '\n' : ',';
            }
    } else {
        static_assert(sizeof(double) == 8);
        std::string payload(f.size() * 8, '\0');
        std::memcpy(payload.data(), f.data(), payload.size());
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < payload.size(); i += 8)
                std::reverse(payload.begin() + std::ptrdiff_t(i),
                             payload.begin() + std::ptrdiff_t(i + 8));
        out += payload;
    }
    write_text_atomic(path, out);
}

inline std::pair<TorusShape, Field> read_field(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open field file " + path.string());
    std::string header;
    std::getline(in, header);
    nlohmann::json h = nlohmann::json::parse(header);
    TorusShape s{h.at("tau_re").get<double>(), h.at("tau_im").get<double>(), h.at("N").get<int>()};
    s.validate();
    Field f(s.size());
    if (field_is_csv(path)) {
        std::string line;
        for (int iy = 0; iy < s.N; ++iy) {
            if (!std::getline(in, line))
                throw std::invalid_argument("truncated CSV field " + path.string());
            const char* p = line.c_str();
            for (int ix = 0; ix < s.N; ++ix) {
                char* end = nullptr;
                f[std::size_t(iy) * s.N + ix] = std::strtod(p, &end);
                if (end == p) throw std::invalid_argument("bad CSV value in " + path.string());
                p = (*end == ',') ? end + 1 : end;
            }
        }
    } else {
        std::string payload(f.size() * 8, '\0');
        in.read(payload.data(), std::streamsize(payload.size()));
        if (std::size_t(in.gcount()) != payload.size())
            throw std::invalid_argument("truncated field payload " + path.string());
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < payload.size(); i += 8)
                std::reverse(payload.begin() + std::ptrdiff_t(i),
                             payload.begin() + std::ptrdiff_t(i + 8));
        std::memcpy(f.data(), payload.data(), payload.size());
    }
    return {s, f};
}

// --------------------------------------------------------------- flow trace

// columns: t, sup_s_dev, l2_s_dev_sq, area [, log_det], k_energy;
// k_energy is the K-energy change of the traversed segment, mu(t) - mu(0) =
// -cum_decay; log_det appears only at the checkpoint rows in `dets`
inline std::string flow_trace_csv(const std::vector<FlowRecord>& trace,
                                  const std::map<std::size_t, double>& dets = {})
{
    const bool with_det = !dets.empty();
    std::string out = "t,sup_s_dev,l2_s_dev_sq,area";
    if (with_det) out += ",log_det";
    out += ",k_energy\n";
    char buf[40];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.12e", v == 0.0 ? 0.0 : v);
        out += buf;
        out += sep;
    };
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const FlowRecord& r = trace[i];
        put(r.t, ',');
        put(r.sup_s_dev, ',');
        put(r.l2_s_dev_sq, ',');
        put(r.area, ',');
        if (with_det) {
            auto it = dets.find(i);
            if (it != dets.end())
                put(it->second, ',');
            else
                out += ',';
        }
        put(-r.cum_decay, '\n');
    }
    return out;
}

} // namespace quillen::io
