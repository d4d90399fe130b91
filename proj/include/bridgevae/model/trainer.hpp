#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "bridgevae/core/rmsprop.hpp"
#include "bridgevae/model/checkpoint.hpp"

namespace bvae::model {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    core::RmsPropConfig optimizer{};
    double kl_coefficient = kDefaultKlCoefficient;
    std::uint64_t seed = 0;
};

struct EpochLoss {
    std::size_t epoch = 0;  // 1-based
    double reconstruction = 0.0;
    double kl = 0.0;
    double total = 0.0;

    bool operator==(const EpochLoss&) const = default;
};

/// Non-finite loss; the message carries epoch and batch.
class TrainingError : public Error {
public:
    using Error::Error;
};

struct TrainResult {
    Vae<float> model;
    std::vector<EpochLoss> history;       // batch-mean losses per epoch
    std::vector<LossBreakdown> per_batch;  // every optimizer step in order
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch RMSProp training. Weights are drawn from Rng(seed); shuffling,
/// dropout masks and reparameterization noise come from a second stream
/// Rng(seed ^ kTrainStreamSalt). Single-threaded and bit-reproducible.
TrainResult train(const core::Tensor<float>& images, const ArchitectureProfile& profile,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

inline constexpr std::uint64_t kTrainStreamSalt = 0x9e3779b97f4a7c15ULL;

/// Checkpoint with training metadata (epochs, seed, coefficient, history).
Checkpoint checkpoint_from_training(TrainResult& result, const TrainConfig& config);

/// CSV: epoch,reconstruction_loss,kl_loss,total_loss
void write_loss_history_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

}  // namespace bvae::model
