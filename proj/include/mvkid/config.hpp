#pragma once

#include "mvkid/baselines.hpp"
#include "mvkid/mvmc.hpp"
#include "mvkid/synthgen.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mvkid {

using nlohmann::json;

json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});

json to_json(const Normalizer& nz);
Normalizer normalizer_from_json(const json& j);

json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const json& j, GenConfig base = {});

json to_json(const BaselineHyper& h);
BaselineHyper baseline_hyper_from_json(const json& j, BaselineHyper base = {});

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Everything one CLI run needs. Sub-seeds derive from `seed` as
/// hash64(seed, component_name): "split", "model", "baselines", "experiment".
struct RunConfig {
    std::filesystem::path data;
    std::filesystem::path out_dir = "out";
    std::string run_name = "run";
    std::uint64_t seed = 1;
    double test_fraction = 0.2;
    double val_fraction = 0.2;
    GenConfig gen;
    ModelConfig model;
    BaselineHyper baselines;
    std::vector<std::size_t> class_counts{2, 5};
    std::vector<std::string> models{"deep-mvmc"};
    std::size_t bench_repetitions = 3;
    std::size_t patterns_top_n = 5;
    bool record_timing = false;

    std::uint64_t sub_seed(std::string_view component) const { return hash64(seed, component); }
    std::filesystem::path run_dir() const { return out_dir / run_name; }
    void validate() const;
};

/// Unknown keys are rejected so typos surface as config errors.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);
json to_json(const RunConfig& cfg);

} // namespace mvkid
