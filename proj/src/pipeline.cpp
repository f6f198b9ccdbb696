#include "capspoe/pipeline.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "capspoe/checkpoint.hpp"
#include "capspoe/data_io.hpp"
#include "capspoe/kernels.hpp"
#include "capspoe/parallel.hpp"

namespace capspoe {

namespace fs = std::filesystem;

namespace {

void apply_kernel_choice(const RunConfig& cfg) {
    if (cfg.kernels != "auto") kernels::set_backend_by_name(cfg.kernels.c_str());
}

std::string dataset_file_for(const RunConfig& cfg) {
    if (!cfg.dataset_file.empty()) return cfg.dataset_path + "/" + cfg.dataset_file;
    if (cfg.dataset_name == "cifar10") return cfg.dataset_path + "/data_batch_1.bin";
    return cfg.dataset_path + "/train-images-idx3-ubyte";
}

Tensor limit_samples(Tensor all, std::size_t limit) {
    if (limit == 0 || limit >= all.extent(0)) return all;
    std::vector<std::size_t> shape = all.shape();
    std::size_t per = all.size() / all.extent(0);
    shape[0] = limit;
    return Tensor(std::move(shape),
                  std::vector<double>(all.data(), all.data() + limit * per));
}

void warn_extra_sections(const std::map<std::string, Tensor>& sections,
                         const std::vector<std::string>& expected, const std::string& path) {
    for (const auto& [name, t] : sections) {
        (void)t;
        bool known = false;
        for (const auto& e : expected)
            if (e == name) known = true;
        if (!known)
            std::fprintf(stderr, "warning: %s: skipping unknown section '%s'\n", path.c_str(),
                         name.c_str());
    }
}

const Tensor& need_section(const std::map<std::string, Tensor>& sections, const std::string& name,
                           const std::string& path) {
    auto it = sections.find(name);
    if (it == sections.end()) throw IoError("checkpoint " + path + ": missing section " + name);
    return it->second;
}

Tensor hyper_tensor(const SgdMomentumState& s) {
    return Tensor({4}, std::vector<double>{s.learning_rate, s.momentum, s.decay, s.l2});
}

void restore_hyper(SgdMomentumState& s, const Tensor& t) {
    s.learning_rate = t[0];
    s.momentum = t[1];
    s.decay = t[2];
    s.l2 = t[3];
}

std::string metrics_path(const RunConfig& cfg, const char* stem) {
    return cfg.out_dir + "/" + stem + "_metrics.log";
}

} // namespace

Tensor load_dataset(const RunConfig& cfg) {
    std::string file = dataset_file_for(cfg);
    if (cfg.dataset_name == "cifar10") return limit_samples(load_cifar10(file), cfg.dataset_limit);
    Tensor raw = load_idx(file);
    if (raw.rank() != 3) throw DimensionError("dataset: expected a [N,H,W] image stack");
    Tensor shaped = raw.reshaped({raw.extent(0), raw.extent(1), raw.extent(2), 1});
    return limit_samples(std::move(shaped), cfg.dataset_limit);
}

AutoencoderConfig autoencoder_config_for(const RunConfig& cfg, const Tensor& dataset) {
    AutoencoderConfig ac;
    ac.image_h = dataset.extent(1);
    ac.image_w = dataset.extent(2);
    ac.in_channels = dataset.extent(3);
    ac.dropout_rate = cfg.ae_dropout;
    ac.leaky_slope = cfg.ae_leaky_slope;
    ac.validate();
    return ac;
}

void save_autoencoder_checkpoint(const AutoencoderParams& p, const AeOptimizerState& opt,
                                 std::uint64_t seed, std::size_t epochs_done,
                                 const std::string& path) {
    const AutoencoderConfig& c = p.cfg;
    std::map<std::string, Tensor> s;
    s.emplace("config", Tensor({9}, std::vector<double>{
                                        static_cast<double>(c.image_h),
                                        static_cast<double>(c.image_w),
                                        static_cast<double>(c.in_channels),
                                        static_cast<double>(c.kernel),
                                        static_cast<double>(c.channels),
                                        static_cast<double>(c.stride1),
                                        static_cast<double>(c.stride2),
                                        c.dropout_rate,
                                        c.leaky_slope,
                                    }));
    s.emplace("enc1", p.enc1);
    s.emplace("enc2", p.enc2);
    s.emplace("dec1", p.dec1);
    s.emplace("dec2", p.dec2);
    s.emplace("opt/velocity/enc1", opt.enc1.velocity);
    s.emplace("opt/velocity/enc2", opt.enc2.velocity);
    s.emplace("opt/velocity/dec1", opt.dec1.velocity);
    s.emplace("opt/velocity/dec2", opt.dec2.velocity);
    s.emplace("opt/hyper", hyper_tensor(opt.enc1));
    s.emplace("rng_state", Tensor({2}, std::vector<double>{std::bit_cast<double>(seed),
                                                           static_cast<double>(epochs_done)}));
    save_checkpoint(s, path);
}

AutoencoderCheckpoint load_autoencoder_checkpoint(const std::string& path) {
    auto s = load_checkpoint(path);
    static const std::vector<std::string> expected = {
        "config",           "enc1",
        "enc2",             "dec1",
        "dec2",             "opt/velocity/enc1",
        "opt/velocity/enc2", "opt/velocity/dec1",
        "opt/velocity/dec2", "opt/hyper",
        "rng_state"};
    warn_extra_sections(s, expected, path);

    const Tensor& c = need_section(s, "config", path);
    AutoencoderCheckpoint out;
    out.params.cfg.image_h = static_cast<std::size_t>(c[0]);
    out.params.cfg.image_w = static_cast<std::size_t>(c[1]);
    out.params.cfg.in_channels = static_cast<std::size_t>(c[2]);
    out.params.cfg.kernel = static_cast<std::size_t>(c[3]);
    out.params.cfg.channels = static_cast<std::size_t>(c[4]);
    out.params.cfg.stride1 = static_cast<std::size_t>(c[5]);
    out.params.cfg.stride2 = static_cast<std::size_t>(c[6]);
    out.params.cfg.dropout_rate = c[7];
    out.params.cfg.leaky_slope = c[8];
    out.params.cfg.validate();
    out.params.enc1 = need_section(s, "enc1", path);
    out.params.enc2 = need_section(s, "enc2", path);
    out.params.dec1 = need_section(s, "dec1", path);
    out.params.dec2 = need_section(s, "dec2", path);

    const Tensor& hyper = need_section(s, "opt/hyper", path);
    SgdHyper h{hyper[0], hyper[1], hyper[2], hyper[3]};
    out.opt = AeOptimizerState::fresh(out.params, h);
    out.opt.enc1.velocity = need_section(s, "opt/velocity/enc1", path);
    out.opt.enc2.velocity = need_section(s, "opt/velocity/enc2", path);
    out.opt.dec1.velocity = need_section(s, "opt/velocity/dec1", path);
    out.opt.dec2.velocity = need_section(s, "opt/velocity/dec2", path);
    for (SgdMomentumState* st : {&out.opt.enc1, &out.opt.enc2, &out.opt.dec1, &out.opt.dec2})
        restore_hyper(*st, hyper);

    const Tensor& rs = need_section(s, "rng_state", path);
    out.seed = std::bit_cast<std::uint64_t>(rs[0]);
    out.epochs_done = static_cast<std::size_t>(rs[1]);
    return out;
}

void save_energy_checkpoint(const EnergyModel& model, const SgdMomentumState& opt,
                            std::uint64_t seed, std::size_t epochs_done, int routing_iterations,
                            const std::string& path) {
    std::map<std::string, Tensor> s;
    s.emplace("layers", Tensor({4}, std::vector<double>{
                                        static_cast<double>(model.visible().count),
                                        static_cast<double>(model.visible().dim),
                                        static_cast<double>(model.hidden().count),
                                        static_cast<double>(model.hidden().dim)}));
    s.emplace("w", model.w.weights());
    s.emplace("opt/velocity/w", opt.velocity);
    s.emplace("opt/hyper", hyper_tensor(opt));
    s.emplace("routing_iterations",
              Tensor({1}, std::vector<double>{static_cast<double>(routing_iterations)}));
    s.emplace("rng_state", Tensor({2}, std::vector<double>{std::bit_cast<double>(seed),
                                                           static_cast<double>(epochs_done)}));
    save_checkpoint(s, path);
}

EnergyCheckpoint load_energy_checkpoint(const std::string& path) {
    auto s = load_checkpoint(path);
    static const std::vector<std::string> expected = {
        "layers", "w", "opt/velocity/w", "opt/hyper", "routing_iterations", "rng_state"};
    warn_extra_sections(s, expected, path);

    const Tensor& layers = need_section(s, "layers", path);
    CapsuleLayerSpec visible{static_cast<std::size_t>(layers[0]),
                             static_cast<std::size_t>(layers[1])};
    CapsuleLayerSpec hidden{static_cast<std::size_t>(layers[2]),
                            static_cast<std::size_t>(layers[3])};
    EnergyCheckpoint out{EnergyModel(visible, hidden), SgdMomentumState{}, 0, 0, 3};
    const Tensor& w = need_section(s, "w", path);
    if (!w.same_shape(out.model.w.weights()))
        throw DimensionError("checkpoint " + path + ": weight shape does not match layers");
    out.model.w.weights() = w;

    const Tensor& hyper = need_section(s, "opt/hyper", path);
    out.opt = SgdMomentumState(w, SgdHyper{hyper[0], hyper[1], hyper[2], hyper[3]});
    out.opt.velocity = need_section(s, "opt/velocity/w", path);
    restore_hyper(out.opt, hyper);

    out.routing_iterations =
        static_cast<int>(need_section(s, "routing_iterations", path)[0]);
    const Tensor& rs = need_section(s, "rng_state", path);
    out.seed = std::bit_cast<std::uint64_t>(rs[0]);
    out.epochs_done = static_cast<std::size_t>(rs[1]);
    return out;
}

Tensor encode_dataset(const AutoencoderParams& p, const Tensor& dataset, int threads) {
    const AutoencoderConfig& c = p.cfg;
    if (dataset.rank() != 4 || dataset.extent(1) != c.image_h || dataset.extent(2) != c.image_w ||
        dataset.extent(3) != c.in_channels)
        throw ShapeError("encode_dataset: dataset does not match the autoencoder checkpoint");
    std::size_t S = dataset.extent(0);
    std::size_t px = c.image_h * c.image_w * c.in_channels;
    std::size_t feat = c.feat_h() * c.feat_w() * c.channels;
    if (feat % 8 != 0) throw ShapeError("encoder output volume is not divisible by 8");
    Tensor out({S, feat / 8, 8});
    std::size_t nthreads = resolve_thread_count(threads);
    deterministic_rounds(
        S, nthreads,
        [&](std::size_t s, std::size_t) {
            Tensor image({c.image_h, c.image_w, c.in_channels},
                         std::vector<double>(dataset.data() + s * px,
                                             dataset.data() + (s + 1) * px));
            Tensor f = encode(p, image);
            std::copy(f.data(), f.data() + feat, out.data() + s * feat);
        },
        [](std::size_t, std::size_t) {});
    return out;
}

std::string cmd_train_autoencoder(const RunConfig& cfg) {
    apply_kernel_choice(cfg);
    fs::create_directories(cfg.out_dir);
    Tensor dataset = load_dataset(cfg);
    AutoencoderConfig ac = autoencoder_config_for(cfg, dataset);

    SeededRng init_rng(SeededRng::stream_seed(cfg.seed, kStreamAeInit));
    AutoencoderParams params = AutoencoderParams::gaussian_init(ac, init_rng);
    SgdHyper h{cfg.ae_learning_rate, cfg.ae_momentum, cfg.ae_decay, cfg.ae_l2};
    AeOptimizerState opt = AeOptimizerState::fresh(params, h);

    AeTrainOptions opts;
    opts.epochs = cfg.ae_epochs;
    opts.batch = cfg.ae_batch;
    opts.threads = cfg.threads;
    opts.seed = cfg.seed;

    std::ofstream log(metrics_path(cfg, "autoencoder"), std::ios::trunc);
    if (!log) throw IoError("cannot open metrics log in " + cfg.out_dir);
    train_autoencoder(params, dataset, opts, opt, &log);

    std::string ckpt = cfg.out_dir + "/autoencoder.cpoe";
    save_autoencoder_checkpoint(params, opt, cfg.seed, cfg.ae_epochs, ckpt);
    std::ofstream cfgout(cfg.out_dir + "/config_used.txt", std::ios::trunc);
    cfgout << cfg.to_text();
    return ckpt;
}

std::string cmd_train_capsules(const RunConfig& cfg) {
    apply_kernel_choice(cfg);
    fs::create_directories(cfg.out_dir);
    AutoencoderCheckpoint ae = load_autoencoder_checkpoint(cfg.out_dir + "/autoencoder.cpoe");
    Tensor dataset = load_dataset(cfg);
    Tensor encoded = encode_dataset(ae.params, dataset, cfg.threads);

    CapsuleLayerSpec visible{encoded.extent(1), encoded.extent(2)};
    CapsuleLayerSpec hidden{cfg.caps_count, cfg.caps_dim};
    SeededRng init_rng(SeededRng::stream_seed(cfg.seed, kStreamCapsInit));
    EnergyModel model = EnergyModel::gaussian_init(visible, hidden, init_rng, 0.1);
    SgdMomentumState opt(model.w.weights(),
                         SgdHyper{cfg.caps_learning_rate, cfg.caps_momentum, cfg.caps_decay,
                                  cfg.caps_l2});

    CapsuleTrainOptions opts;
    opts.epochs = cfg.caps_epochs;
    opts.batch = cfg.caps_batch;
    opts.routing_iterations = cfg.routing_iterations;
    opts.threads = cfg.threads;
    opts.seed = cfg.seed;

    std::ofstream log(metrics_path(cfg, "capsule"), std::ios::trunc);
    if (!log) throw IoError("cannot open metrics log in " + cfg.out_dir);
    train_capsule_layer(model, encoded, opts, opt, &log);

    std::string ckpt = cfg.out_dir + "/capsules.cpoe";
    save_energy_checkpoint(model, opt, cfg.seed, cfg.caps_epochs, cfg.routing_iterations, ckpt);
    return ckpt;
}

namespace {

void check_model_matches_encoder(const EnergyModel& model, const AutoencoderConfig& c) {
    std::size_t feat = c.feat_h() * c.feat_w() * c.channels;
    if (model.visible().flat() != feat)
        throw ShapeError("capsule checkpoint does not match the autoencoder feature volume");
}

} // namespace

std::string cmd_generate(const RunConfig& cfg) {
    apply_kernel_choice(cfg);
    fs::create_directories(cfg.out_dir);
    AutoencoderCheckpoint ae = load_autoencoder_checkpoint(cfg.out_dir + "/autoencoder.cpoe");
    EnergyCheckpoint ec = load_energy_checkpoint(cfg.out_dir + "/capsules.cpoe");
    check_model_matches_encoder(ec.model, ae.params.cfg);

    const AutoencoderConfig& c = ae.params.cfg;
    VisibleDecoder decoder = [&](const Tensor& probs) {
        CapsuleActivations caps(ec.model.visible(),
                                probs.reshaped({ec.model.visible().count,
                                               ec.model.visible().dim}));
        return decode(ae.params, uncapsulize(caps, c.feat_h(), c.feat_w(), c.channels));
    };

    std::size_t rows = cfg.samples_per_capsule;
    std::size_t cols = ec.model.hidden().count;
    std::vector<Tensor> images;
    images.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            SeededRng rng(SeededRng::stream_seed(cfg.seed, kStreamGenerate, r * cols + j));
            images.push_back(generate(ec.model, j, ec.routing_iterations, rng, decoder));
        }
    }
    std::string path =
        cfg.out_dir + (c.in_channels == 1 ? "/generated.pgm" : "/generated.ppm");
    emit_image_grid(images, rows, cols, path);
    return path;
}

std::string cmd_diagram(const RunConfig& cfg, std::size_t sample_index) {
    apply_kernel_choice(cfg);
    fs::create_directories(cfg.out_dir);
    AutoencoderCheckpoint ae = load_autoencoder_checkpoint(cfg.out_dir + "/autoencoder.cpoe");
    EnergyCheckpoint ec = load_energy_checkpoint(cfg.out_dir + "/capsules.cpoe");
    check_model_matches_encoder(ec.model, ae.params.cfg);
    Tensor dataset = load_dataset(cfg);
    if (sample_index >= dataset.extent(0))
        throw Error("diagram: sample index out of range (dataset has " +
                    std::to_string(dataset.extent(0)) + " samples)");

    const AutoencoderConfig& c = ae.params.cfg;
    std::size_t px = c.image_h * c.image_w * c.in_channels;
    Tensor image({c.image_h, c.image_w, c.in_channels},
                 std::vector<double>(dataset.data() + sample_index * px,
                                     dataset.data() + (sample_index + 1) * px));
    CapsuleActivations caps = capsulize(encode(ae.params, image), ec.model.visible().dim);
    if (caps.layer != ec.model.visible())
        throw ShapeError("diagram: encoded capsules do not match the capsule checkpoint");

    ForwardRouting routed = route_forward(ec.model.w, caps, ec.routing_iterations);
    std::vector<double> lower(caps.layer.count);
    std::vector<double> sq(caps.layer.dim);
    for (std::size_t i = 0; i < caps.layer.count; ++i) {
        squash(caps.capsule(i), caps.layer.dim, sq.data());
        double s2 = 0.0;
        for (double v : sq) s2 += v * v;
        lower[i] = std::sqrt(s2);
    }
    DiagramModel d = routing_diagram(routed.state, lower, routed.activations, 0.01);
    std::string path = cfg.out_dir + "/routing.svg";
    emit_routing_svg(d, path);
    return path;
}

VerifyReport cmd_verify(std::uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    VerifyReport rep = run_verify(seed);

    nlohmann::json j;
    j["seed"] = rep.seed;
    j["all_pass"] = rep.all_pass();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"name", c.name},
                               {"pass", c.pass},
                               {"worst", c.worst},
                               {"limit", c.limit},
                               {"detail", c.detail}});
    }
    std::ofstream out(out_dir + "/verify_summary.json", std::ios::trunc);
    if (!out) throw IoError("cannot write verify summary in " + out_dir);
    out << j.dump(2) << "\n";
    return rep;
}

} // namespace capspoe
