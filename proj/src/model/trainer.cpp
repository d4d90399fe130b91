#include "bridgevae/model/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace bvae::model {

TrainResult train(const core::Tensor<float>& images, const ArchitectureProfile& profile,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    profile.validate();
    if (images.rank() != 4 || images.dim(1) != profile.height || images.dim(2) != profile.width ||
        images.dim(3) != 1) {
        throw ShapeError("training images " + core::shape_str(images.shape()) + " do not match profile " +
                         std::to_string(profile.height) + "x" + std::to_string(profile.width));
    }
    if (config.batch_size == 0) throw InvalidArgument("batch_size must be >= 1");

    TrainResult result{Vae<float>(profile), {}, {}};
    result.model.init(config.seed);
    core::RmsProp<float> optimizer(config.optimizer);
    Rng rng(config.seed ^ kTrainStreamSalt);

    const std::size_t n = images.dim(0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double rec_sum = 0.0, kl_sum = 0.0, total_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            const auto batch = core::gather_batch<float>(
                images, std::span<const std::size_t>(order.data() + start, end - start));
            Tensor<float> noise({end - start, profile.latent_dim});
            for (auto& v : noise.values()) v = static_cast<float>(rng.normal());

            const LossBreakdown loss =
                result.model.forward_backward(batch, noise, Mode::Train, rng, config.kl_coefficient);
            if (!std::isfinite(loss.total)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches + 1));
            }
            optimizer.step(result.model.params());
            result.per_batch.push_back(loss);
            rec_sum += loss.reconstruction;
            kl_sum += loss.kl;
            total_sum += loss.total;
            ++batches;
        }
        const double b = static_cast<double>(batches);
        EpochLoss row{epoch, rec_sum / b, kl_sum / b, total_sum / b};
        result.history.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return result;
}

Checkpoint checkpoint_from_training(TrainResult& result, const TrainConfig& config) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : result.history) {
        history.push_back({{"epoch", h.epoch},
                           {"reconstruction_loss", h.reconstruction},
                           {"kl_loss", h.kl},
                           {"total_loss", h.total}});
    }
    nlohmann::json meta{{"epochs", config.epochs},
                        {"batch_size", config.batch_size},
                        {"seed", config.seed},
                        {"kl_coefficient", config.kl_coefficient},
                        {"learning_rate", config.optimizer.learning_rate},
                        {"rho", config.optimizer.rho},
                        {"optimizer_epsilon", config.optimizer.epsilon},
                        {"loss_history", history}};
    return make_checkpoint(result.model, std::move(meta));
}

void write_loss_history_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "epoch,reconstruction_loss,kl_loss,total_loss\n";
    char line[160];
    for (const auto& h : history) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", h.epoch, h.reconstruction, h.kl, h.total);
        out << line;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace bvae::model
