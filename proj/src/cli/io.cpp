#include <cstdio>
#include <fstream>
#include <sstream>

#include "taap/cli.hpp"
#include "taap/errors.hpp"

namespace taap::cli {

std::string format_g(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << s;
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open '" + p.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

void write_csv(const std::filesystem::path& p, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows, int digits) {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    s += '\n';
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) s += ',';
            s += format_g(r[i], digits);
        }
        s += '\n';
    }
    write_text(p, s);
}

void write_profile_csv(const std::filesystem::path& p, const std::vector<potential::ProfilePoint>& prof) {
    std::string s = "phi_rad,V_J,rho_m,z_m\n";
    char buf[128];
    for (const auto& q : prof) {
        std::snprintf(buf, sizeof buf, "%.15e,%.15e,%.15e,%.15e\n", q.phi, q.V, q.rho, q.z);
        s += buf;
    }
    write_text(p, s);
}

void write_image(const std::filesystem::path& stem, const imaging::DensityImage& img) {
    auto csv = stem;
    csv += ".csv";
    auto meta = stem;
    meta += ".json";
    std::string s;
    const auto& g = img.grid;
    for (std::size_t r = 0; r < g.n_rows; ++r) {
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            if (c) s += ',';
            s += format_g(img.at(r, c), 9);
        }
        s += '\n';
    }
    write_text(csv, s);
    write_json(meta, imaging::image_metadata(g));
}

imaging::DensityImage read_image(const std::filesystem::path& stem) {
    auto csv = stem;
    csv += ".csv";
    auto meta = stem;
    meta += ".json";
    imaging::DensityImage img{imaging::grid_from_metadata(read_json(meta)), {}};
    std::ifstream in(csv);
    if (!in) throw ConfigError("cannot open '" + csv.string() + "'");
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) img.data.push_back(std::stod(cell));
    }
    if (img.data.size() != img.grid.size()) throw ConfigError("image CSV does not match its metadata");
    return img;
}

}  // namespace taap::cli
