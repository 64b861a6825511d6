#pragma once

#include "mvkid/network.hpp"
#include "mvkid/optim.hpp"
#include "mvkid/preprocess.hpp"
#include "mvkid/session.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvkid {

struct ModelConfig {
    std::size_t hidden_size = 32;
    std::size_t classifier_hidden = 64;
    std::size_t n_classes = 2;
    std::array<bool, kNumViews> views{true, true, true};
    MaxLens max_len = kDefaultMaxLens;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    NadamHyper nadam;
    double clip_norm = 5.0; // <= 0 disables clipping
    bool use_bias = true;
    bool parallel = true;

    NetworkShape shape() const;
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Network plus everything needed to classify a raw session.
struct MvmcModel {
    ModelConfig config;
    Network net;
    Normalizer normalizer;
    std::vector<std::string> labels;
    std::map<std::string, std::string> metadata;

    static MvmcModel initialize(const ModelConfig& cfg, Normalizer nz, std::vector<std::string> labels);

    EncodedSession encode(const Session& s) const;
};

/// impute -> normalize -> per-view BiGRU -> concat -> tanh dense -> softmax.
Vector forward(const MvmcModel& model, const Session& s);

/// Argmax; ties go to the lowest class index.
std::size_t argmax_class(std::span<const double> probs);

std::string predict(const MvmcModel& model, const Session& s);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    MvmcModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0; // 0 when no epoch ran
};

class LabelMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Seeded mini-batch training with summed batch loss and clipped Nadam steps.
/// Returns the parameters from the epoch with the best validation accuracy
/// (earliest on ties). An empty `val` selects on training accuracy.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& cfg);

double accuracy(const MvmcModel& model, std::span<const EncodedSession> xs, std::span<const std::size_t> labels);

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { Io, Format, Version, Checksum };
    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "MVKD" | u32 version | u64 header length | JSON header | f64 tensors | CRC32, all little-endian.
std::string serialize_model(const MvmcModel& model);
MvmcModel deserialize_model(std::string_view bytes);

void save_model(const MvmcModel& model, const std::filesystem::path& path);
MvmcModel load_model(const std::filesystem::path& path);

} // namespace mvkid
