#include "gnnrob/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace gnnrob {

void save_checkpoint(const ModelParams& params, const std::string& path, std::uint64_t seed) {
    params.check_shapes();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    nlohmann::json shapes = nlohmann::json::array();
    for (std::size_t l = 0; l < params.layer_weights.size(); ++l) {
        const Matrix& w = params.layer_weights[l];
        shapes.push_back({w.rows, w.cols});
        out.write(reinterpret_cast<const char*>(w.data.data()),
                  static_cast<std::streamsize>(w.data.size() * 8));
        out.write(reinterpret_cast<const char*>(params.biases[l].data()),
                  static_cast<std::streamsize>(params.biases[l].size() * 8));
    }
    nlohmann::json manifest{{"kind", model_kind_name(params.kind)},
                            {"shapes", shapes},
                            {"aggregation", aggregation_name(params.aggregation)},
                            {"temperature", params.temperature},
                            {"propagation_steps", params.propagation_steps},
                            {"seed", seed}};
    std::ofstream js(path + ".json");
    js << manifest.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::string& path, std::uint64_t* seed_out) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("cannot open " + path + ".json");
    nlohmann::json manifest;
    js >> manifest;

    ModelParams params;
    params.kind = model_kind_from_name(manifest.at("kind").get<std::string>());
    params.aggregation = aggregation_from_name(manifest.at("aggregation").get<std::string>());
    params.temperature = manifest.at("temperature").get<double>();
    params.propagation_steps = manifest.at("propagation_steps").get<Index>();
    if (seed_out) *seed_out = manifest.at("seed").get<std::uint64_t>();

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    for (const auto& shape : manifest.at("shapes")) {
        const Index rows = shape.at(0).get<Index>(), cols = shape.at(1).get<Index>();
        Matrix w(rows, cols);
        std::vector<double> b(static_cast<std::size_t>(cols), 0.0);
        in.read(reinterpret_cast<char*>(w.data.data()),
                static_cast<std::streamsize>(w.data.size() * 8));
        in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * 8));
        if (!in) throw std::runtime_error(path + ": truncated checkpoint payload");
        params.layer_weights.push_back(std::move(w));
        params.biases.push_back(std::move(b));
    }
    params.check_shapes();
    return params;
}

}  // namespace gnnrob
