#pragma once

#include <cstdint>
#include <string>

namespace capspoe {

/// Run configuration. On disk this is a sectioned key=value file parsed
/// strictly: unknown sections or keys and duplicate keys are errors, so a
/// config never silently drifts. Defaults reproduce the 28x28 MNIST shapes
/// (576 visible capsules of dim 8 mapped to 20 capsules of dim 16).
struct RunConfig {
    // [run]
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    int threads = 0;            // 0 = hardware concurrency
    std::string kernels = "auto"; // scalar|avx2|auto

    // [dataset]
    std::string dataset_name = "mnist"; // mnist|fashion-mnist|cifar10
    std::string dataset_path = "data";
    std::string dataset_file;           // optional explicit file name
    std::size_t dataset_limit = 0;      // 0 = all samples

    // [autoencoder]
    std::size_t ae_epochs = 3;
    std::size_t ae_batch = 64;
    double ae_learning_rate = 0.05;
    double ae_momentum = 0.9;
    double ae_decay = 0.999;
    double ae_l2 = 1e-4;
    double ae_dropout = 0.5;
    double ae_leaky_slope = 0.01;

    // [capsules]
    std::size_t caps_epochs = 3;
    std::size_t caps_batch = 64;
    double caps_learning_rate = 0.01;
    double caps_momentum = 0.9;
    double caps_decay = 0.999;
    double caps_l2 = 1e-4;
    std::size_t caps_count = 20;  // hidden capsules J
    std::size_t caps_dim = 16;    // hidden capsule dimension N
    int routing_iterations = 3;

    // [generate]
    std::size_t samples_per_capsule = 4;

    void validate() const;
    std::string to_text() const;

    static RunConfig parse_text(const std::string& text);
    static RunConfig load(const std::string& path);

    bool operator==(const RunConfig&) const = default;
};

} // namespace capspoe
