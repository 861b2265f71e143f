#include "dynsc/trajectory_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dynsc/error.hpp"

namespace dynsc::integrate {

namespace {

constexpr const char* kLayout = "sample,record,component";
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "payload writer assumes a little-endian host");

}  // namespace

std::filesystem::path save_ensemble(const TrajectoryEnsemble& ens, const std::filesystem::path& header) {
    auto payload = header;
    payload.replace_extension(".bin");

    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["model"] = ens.model;
    j["dt"] = ens.dt;
    j["stride"] = ens.stride;
    j["n_records"] = ens.n_records();
    j["state_dim"] = ens.state_dim();
    j["n_samples"] = ens.n_samples();
    j["times"] = ens.times;
    auto& pts = j["param_points"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < ens.param_points.cols(); ++i) {
        std::vector<double> p(ens.param_points.col(i).data(), ens.param_points.col(i).data() + ens.param_points.rows());
        pts.push_back(p);
    }
    auto& fails = j["failures"] = nlohmann::json::array();
    for (const auto& f : ens.failures) fails.push_back({{"sample", f.sample}, {"step", f.step}, {"message", f.message}});
    j["layout"] = kLayout;
    j["dtype"] = "float64-le";
    j["payload"] = payload.filename().string();

    std::ofstream bin(payload, std::ios::binary | std::ios::trunc);
    if (!bin) throw Error("cannot open " + payload.string() + " for writing");
    for (const auto& s : ens.states) {
        // Eigen is column-major: each column is one record, components contiguous.
        bin.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(double)));
    }
    if (!bin) throw Error("failed writing " + payload.string());

    std::ofstream out(header, std::ios::trunc);
    if (!out) throw Error("cannot open " + header.string() + " for writing");
    out << j.dump(1) << '\n';
    if (!out) throw Error("failed writing " + header.string());
    return payload;
}

TrajectoryEnsemble load_ensemble(const std::filesystem::path& header) {
    std::ifstream in(header);
    if (!in) throw Error("cannot open ensemble header " + header.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed ensemble header " + header.string() + ": " + e.what());
    }
    if (j.value("layout", std::string()) != kLayout) throw Error(header.string() + ": unsupported payload layout");

    TrajectoryEnsemble ens;
    try {
        ens.model = j.at("model").get<std::string>();
        ens.dt = j.at("dt").get<double>();
        ens.stride = j.at("stride").get<std::size_t>();
        ens.times = j.at("times").get<std::vector<double>>();
        const auto n_samples = j.at("n_samples").get<std::size_t>();
        const auto n_records = j.at("n_records").get<std::size_t>();
        const auto state_dim = j.at("state_dim").get<std::size_t>();
        if (ens.times.size() != n_records) throw Error(header.string() + ": times do not match n_records");
        const auto pts = j.at("param_points").get<std::vector<std::vector<double>>>();
        if (pts.size() != n_samples) throw Error(header.string() + ": param_points do not match n_samples");
        const auto P = static_cast<Eigen::Index>(pts.empty() ? 0 : pts.front().size());
        ens.param_points.resize(P, static_cast<Eigen::Index>(n_samples));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (static_cast<Eigen::Index>(pts[i].size()) != P) throw Error(header.string() + ": ragged param_points");
            for (Eigen::Index p = 0; p < P; ++p) ens.param_points(p, static_cast<Eigen::Index>(i)) = pts[i][static_cast<std::size_t>(p)];
        }
        for (const auto& f : j.at("failures")) {
            ens.failures.push_back({f.at("sample").get<std::size_t>(), f.at("step").get<std::size_t>(),
                                    f.at("message").get<std::string>()});
        }

        const auto payload = header.parent_path() / j.at("payload").get<std::string>();
        std::ifstream bin(payload, std::ios::binary);
        if (!bin) throw Error("cannot open ensemble payload " + payload.string());
        const auto expected = n_samples * n_records * state_dim * sizeof(double);
        if (std::filesystem::file_size(payload) != expected) {
            throw Error(payload.string() + ": payload size does not match the header");
        }
        ens.states.assign(n_samples, Eigen::MatrixXd(static_cast<Eigen::Index>(state_dim), static_cast<Eigen::Index>(n_records)));
        for (auto& s : ens.states) {
            bin.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(double)));
        }
        if (!bin) throw Error("failed reading " + payload.string());
    } catch (const nlohmann::json::exception& e) {
        throw Error(header.string() + ": " + e.what());
    }
    return ens;
}

}  // namespace dynsc::integrate
