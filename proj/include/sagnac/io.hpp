// io.hpp -- result files: CSV tables, JSON summaries and the run manifest.
//
// CSV: comma separated, '.' decimal point, LF line endings, one header row
// with units in the column names. Numbers are written in the shortest form
// that reads back to the same double, so identical results give identical
// bytes.

#pragma once

#include "analysis.hpp"
#include "error.hpp"
#include "tomography.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

namespace sagnac {

inline constexpr const char* tool_version = "0.1.0";

using Json = nlohmann::ordered_json;

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

// JSON has no infinity; such values are written as the string "inf".
inline Json json_number(double v) {
    if (std::isfinite(v)) return v;
    return csv_number(v);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> row) {
        if (row.size() != header.size()) throw InvalidArgument("CSV row width does not match the header");
        rows.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += csv_number(r[i]);
            }
            out += '\n';
        }
        return out;
    }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_hex(const std::string& data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
        throw IoError("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestEntry {
    std::string file;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string scenario;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string version = tool_version;
    std::string started;
    std::string finished;
    std::vector<ManifestEntry> files;

    Json to_json() const {
        Json j;
        j["scenario"] = scenario;
        j["config"] = config_path;
        j["seed"] = seed;
        j["output_dir"] = output_dir;
        j["tool_version"] = version;
        j["started"] = started;
        j["finished"] = finished;
        j["files"] = Json::array();
        for (const auto& f : files) j["files"].push_back({{"file", f.file}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        return j;
    }
};

// Collects files written into one output directory and their checksums.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw IoError("cannot create output directory " + dir_.string());
    }

    const std::filesystem::path& path() const { return dir_; }
    const std::vector<ManifestEntry>& entries() const { return entries_; }

    void write(const std::string& name, const std::string& text) {
        write_text(dir_ / name, text);
        entries_.push_back({name, sha256_hex(text), text.size()});
    }

    void csv(const std::string& name, const CsvTable& t) { write(name, t.str()); }
    void json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

private:
    std::filesystem::path dir_;
    std::vector<ManifestEntry> entries_;
};

// ---------------------------------------------------------------------------
// JSON forms of the analysis results

inline Json to_json(const FringeFit& f) {
    return {{"visibility", f.visibility},   {"visibility_err", f.visibility_err},
            {"amplitude", f.amplitude},     {"amplitude_err", f.amplitude_err},
            {"phase_rad", f.phase},         {"phase_err_rad", f.phase_err},
            {"offset", f.offset},           {"offset_err", f.offset_err},
            {"period", f.period},           {"period_err", f.period_err},
            {"chi2", f.chi2}};
}

inline Json to_json(const ChshResult& r) {
    Json e = Json::array();
    for (const auto& c : r.e) e.push_back({{"E", c.value}, {"sigma", c.sigma}});
    return {{"correlations", e}, {"S", r.s}, {"sigma_S", r.sigma_s}, {"n_sigma", json_number(r.n_sigma)}};
}

// rho as 16 (re, im) pairs, row-major.
inline Json rho_json(const Matrix4& m) {
    Json a = Json::array();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a.push_back({m(i, j).real(), m(i, j).imag()});
    return a;
}

inline Json to_json(const TomographyResult& t) {
    return {{"rho", rho_json(t.rho.matrix())},
            {"fidelity", t.fidelity},
            {"log_likelihood", t.log_likelihood},
            {"iterations", t.iterations},
            {"converged", t.converged},
            {"linear_inversion", {{"rho", rho_json(t.linear_rho)},
                                  {"min_eigenvalue", t.linear_min_eigenvalue},
                                  {"fidelity", t.linear_fidelity}}}};
}

inline Json to_json(const CountsRecord& r) {
    return {{"singles", {r.singles[0], r.singles[1]}},
            {"coincidences", r.coincidences},
            {"gates_applied", r.gates_applied},
            {"gates_live", {r.gates_live[0], r.gates_live[1]}},
            {"duration_s", r.wall_duration_s}};
}

} // namespace sagnac
