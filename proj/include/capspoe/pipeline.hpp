#pragma once

#include <cstdint>
#include <string>

#include "capspoe/autoencoder.hpp"
#include "capspoe/config.hpp"
#include "capspoe/energy.hpp"
#include "capspoe/oracles.hpp"

namespace capspoe {

/// Loads the configured dataset as [S,H,W,C] images in [0,1], applying the
/// sample limit. MNIST-family files are IDX, cifar10 is the binary batch
/// format.
Tensor load_dataset(const RunConfig& cfg);

/// Autoencoder architecture for this run: fixed 9x9/128-channel banks with
/// image shape and channel count taken from the dataset.
AutoencoderConfig autoencoder_config_for(const RunConfig& cfg, const Tensor& dataset);

struct AutoencoderCheckpoint {
    AutoencoderParams params;
    AeOptimizerState opt;
    std::uint64_t seed = 0;
    std::size_t epochs_done = 0;
};

void save_autoencoder_checkpoint(const AutoencoderParams& p, const AeOptimizerState& opt,
                                 std::uint64_t seed, std::size_t epochs_done,
                                 const std::string& path);
AutoencoderCheckpoint load_autoencoder_checkpoint(const std::string& path);

struct EnergyCheckpoint {
    EnergyModel model;
    SgdMomentumState opt;
    std::uint64_t seed = 0;
    std::size_t epochs_done = 0;
    int routing_iterations = 3;
};

void save_energy_checkpoint(const EnergyModel& model, const SgdMomentumState& opt,
                            std::uint64_t seed, std::size_t epochs_done, int routing_iterations,
                            const std::string& path);
EnergyCheckpoint load_energy_checkpoint(const std::string& path);

/// Encodes every image through the frozen encoder and reshapes to capsules;
/// result is [S, I, 8].
Tensor encode_dataset(const AutoencoderParams& p, const Tensor& dataset, int threads);

// Subcommand bodies. They throw on failure; artifact paths live under
// cfg.out_dir. The returned strings are the emitted file paths.
std::string cmd_train_autoencoder(const RunConfig& cfg);
std::string cmd_train_capsules(const RunConfig& cfg);
std::string cmd_generate(const RunConfig& cfg);
std::string cmd_diagram(const RunConfig& cfg, std::size_t sample_index);

/// Runs the oracle suite and writes out_dir/verify_summary.json.
VerifyReport cmd_verify(std::uint64_t seed, const std::string& out_dir);

// Stream-id tags for deterministic sub-streams of the run seed.
inline constexpr std::uint64_t kStreamAeInit = 0xAE01;
inline constexpr std::uint64_t kStreamCapsInit = 0xCA01;
inline constexpr std::uint64_t kStreamGenerate = 0x6E01;

} // namespace capspoe
