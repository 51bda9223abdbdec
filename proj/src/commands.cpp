#include "pyra/commands.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "pyra/metrics.hpp"
#include "pyra/parallel.hpp"

namespace pyra {

namespace {

namespace fs = std::filesystem;

fs::path prepare_out(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec && !fs::is_directory(out))
    throw DataError(cfg.out_dir + ": cannot create output directory");
  write_resolved_config(cfg, (out / "config.resolved.ini").string());
  return out;
}

Vol crop(const Vol& v, std::size_t ox, std::size_t oy, std::size_t oz,
         std::size_t w, std::size_t h, std::size_t d) {
  Vol out(w, h, d, v.C);
  for (std::size_t c = 0; c < v.C; ++c)
    for (std::size_t z = 0; z < d; ++z)
      for (std::size_t y = 0; y < h; ++y)
        std::memcpy(&out.at(0, y, z, c), &v.at(ox, oy + y, oz + z, c),
                    w * sizeof(double));
  return out;
}

bool same_architecture(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].index() != b.layers[i].index()) return false;
    if (const auto* pa = std::get_if<PyramidLayer>(&a.layers[i])) {
      const auto& pb = std::get<PyramidLayer>(b.layers[i]);
      if (pa->in_channels() != pb.in_channels() ||
          pa->out_channels() != pb.out_channels() ||
          pa->filter() != pb.filter())
        return false;
    } else {
      const auto& fa = std::get<FcLayer>(a.layers[i]);
      const auto& fb = std::get<FcLayer>(b.layers[i]);
      if (fa.in_units != fb.in_units || fa.out_units != fb.out_units ||
          fa.act != fb.act)
        return false;
    }
  }
  return true;
}

std::string layer_desc(const Layer& l) {
  if (const auto* p = std::get_if<PyramidLayer>(&l)) {
    return "pyramid " + std::to_string(p->in_channels()) + " -> " +
           std::to_string(p->out_channels()) + " (filter " +
           std::to_string(p->filter()) + "x" + std::to_string(p->filter()) +
           ")";
  }
  const auto& f = std::get<FcLayer>(l);
  return "fc " + std::to_string(f.in_units) + " -> " +
         std::to_string(f.out_units) +
         (f.act == Activation::Softmax ? " (softmax)" : " (tanh)");
}

struct ThreadGuard {
  int saved = thread_count();
  ~ThreadGuard() { set_threads(saved); }
};

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void run_preprocess(const RunConfig& cfg) {
  if (cfg.pre_inputs.empty())
    throw ConfigError("preprocess: [preprocess] inputs is empty");
  if (cfg.pre_output.empty())
    throw ConfigError("preprocess: [preprocess] output is empty");
  prepare_out(cfg);

  std::vector<Vol> raw;
  raw.reserve(cfg.pre_inputs.size());
  for (const auto& p : cfg.pre_inputs) raw.push_back(read_vol(p));
  auto mods = cfg.pre_modalities;
  if (mods.empty()) mods.assign(raw.size(), ModalityConfig{});

  const Vol assembled = assemble_channels(raw, mods);
  write_vol(cfg.pre_output, assembled);
  std::cout << "preprocess: wrote " << assembled.W << "x" << assembled.H << "x"
            << assembled.D << " volume with " << assembled.C
            << " channel(s) to " << cfg.pre_output << "\n";
}

void run_train(const RunConfig& cfg, const std::string& resume_path) {
  if (cfg.train_input.empty())
    throw ConfigError("train: [data] train_input is empty");
  if (cfg.train_labels.empty())
    throw ConfigError("train: [data] train_labels is empty");
  const fs::path out = prepare_out(cfg);

  Vol input = read_vol(cfg.train_input);
  LabelVolume labels = read_labels(cfg.train_labels);
  if (input.W != labels.W || input.H != labels.H || input.D != labels.D)
    throw DataError("train: input and label volumes have different dims");
  if (input.C != cfg.input_channels)
    throw ConfigError("train: config expects " +
                      std::to_string(cfg.input_channels) +
                      " input channel(s) but " + cfg.train_input + " has " +
                      std::to_string(input.C));
  if (labels.num_classes != cfg.classes)
    throw ConfigError("train: config expects " + std::to_string(cfg.classes) +
                      " classes but " + cfg.train_labels + " has " +
                      std::to_string(labels.num_classes));

  Network net =
      build_network(cfg.arch, cfg.input_channels, cfg.classes, cfg.filter);
  validate_network(net, cfg.input_channels);

  OptimizerState opt;
  std::uint64_t start_epoch = 0, seed = cfg.seed;
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    if (!same_architecture(ckpt.net, net))
      throw ConfigError("train: checkpoint " + resume_path +
                        " does not match the configured architecture");
    net = std::move(ckpt.net);
    opt = std::move(ckpt.opt);
    start_epoch = ckpt.epoch;
    seed = ckpt.seed;
  } else {
    init_uniform(net, seed);
    opt = make_optimizer_state(net);
  }

  TrainOptions topts;
  topts.schedule = cfg.schedule;
  topts.augment = cfg.augment;
  topts.seed = seed;
  topts.start_epoch = start_epoch;
  topts.checkpoint_every = cfg.checkpoint_every;
  topts.checkpoint_path = (out / "model.pnet").string();
  topts.log_path = (out / "loss.csv").string();

  std::vector<TrainExample> data;
  data.push_back({std::move(input), std::move(labels)});

  std::vector<TrainLogRow> log;
  train_loop(net, opt, data, topts, &log);

  const std::size_t total = cfg.schedule.total_epochs();
  if (log.empty()) {
    std::cout << "train: nothing to do, checkpoint already at epoch "
              << start_epoch << " of " << total << "\n";
    return;
  }
  std::cout << "train: ran epochs " << start_epoch << ".." << total
            << ", final loss " << std::setprecision(6) << log.back().loss
            << ", model written to " << topts.checkpoint_path << "\n";
}

void run_predict(const RunConfig& cfg) {
  if (cfg.predict_input.empty())
    throw ConfigError("predict: [predict] input is empty");
  if (cfg.predict_checkpoint.empty())
    throw ConfigError("predict: [predict] checkpoint is empty");
  const fs::path out = prepare_out(cfg);

  const Checkpoint ckpt = load_checkpoint(cfg.predict_checkpoint);
  const Vol input = read_vol(cfg.predict_input);
  const std::size_t need = layer_in_channels(ckpt.net.layers.front());
  if (input.C != need)
    throw DataError("predict: " + cfg.predict_input + " has " +
                    std::to_string(input.C) + " channel(s) but " +
                    cfg.predict_checkpoint + " expects " +
                    std::to_string(need));
  validate_network(ckpt.net, need);

  const std::size_t tw = std::min(cfg.tile_w, input.W);
  const std::size_t th = std::min(cfg.tile_h, input.H);
  const std::size_t td = std::min(cfg.tile_d, input.D);
  const auto oxs = tile_origins(input.W, tw, cfg.overlap);
  const auto oys = tile_origins(input.H, th, cfg.overlap);
  const auto ozs = tile_origins(input.D, td, cfg.overlap);

  std::vector<TilePrediction> tiles;
  tiles.reserve(oxs.size() * oys.size() * ozs.size());
  for (std::size_t oz : ozs)
    for (std::size_t oy : oys)
      for (std::size_t ox : oxs) {
        const Vol tile = crop(input, ox, oy, oz, tw, th, td);
        tiles.push_back({network_forward(tile, ckpt.net), ox, oy, oz});
      }

  const Vol prob = stitch(tiles, input.W, input.H, input.D, cfg.sigma_frac);
  const std::string prob_path = (out / "prob.vol").string();
  const std::string label_path = (out / "labels.vol").string();
  write_vol(prob_path, prob);
  write_labels(label_path, argmax_labels(prob));
  std::cout << "predict: " << tiles.size() << " tile(s) of " << tw << "x" << th
            << "x" << td << ", wrote " << prob_path << " and " << label_path
            << "\n";
}

void run_evaluate(const RunConfig& cfg) {
  if (cfg.eval_predicted.empty())
    throw ConfigError("evaluate: [evaluate] predicted is empty");
  if (cfg.eval_reference.empty())
    throw ConfigError("evaluate: [evaluate] reference is empty");
  const fs::path out = prepare_out(cfg);

  const SegmentationPair pair = make_segmentation_pair(
      read_labels(cfg.eval_predicted), read_labels(cfg.eval_reference),
      cfg.spacing);

  const std::string csv_path = (out / "metrics.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw DataError(csv_path + ": cannot write metrics");
  csv << "metric,class,value\n" << std::setprecision(17);

  const auto put = [&csv](const std::string& metric, const std::string& cls,
                          const std::optional<double>& v) {
    csv << metric << ',' << cls << ',';
    if (v) csv << *v;
    else csv << "empty";
    csv << '\n';
  };

  std::cout << std::setprecision(6) << std::left;
  const double re = rand_error(pair, cfg.rand_connectivity);
  put("rand_error", "all", re);
  std::cout << "rand_error (all classes): " << re << "\n";
  for (std::uint32_t k = 1; k < pair.predicted.num_classes; ++k) {
    const std::string cls = std::to_string(k);
    const auto u8k = static_cast<std::uint8_t>(k);
    const double dc = dice(pair, u8k);
    const auto hd = hausdorff95(pair, u8k);
    const auto av = avd(pair, u8k);
    const double pe = pixel_error(pair, u8k);
    put("dice", cls, dc);
    put("hausdorff95", cls, hd);
    put("avd", cls, av);
    put("pixel_error", cls, pe);
    std::cout << "class " << k << ": dice " << dc << ", hausdorff95 ";
    if (hd) std::cout << *hd << " mm";
    else std::cout << "empty";
    std::cout << ", avd ";
    if (av) std::cout << *av << " %";
    else std::cout << "empty";
    std::cout << ", pixel_error " << pe << "\n";
  }
  std::cout << "evaluate: wrote " << csv_path << "\n";
}

void run_bench(const RunConfig& cfg) {
  const fs::path out = prepare_out(cfg);
  Network net =
      build_network(cfg.arch, cfg.bench_channels, cfg.classes, cfg.filter);
  validate_network(net, cfg.bench_channels);
  init_uniform(net, cfg.seed);

  Vol x(cfg.bench_w, cfg.bench_h, cfg.bench_d, cfg.bench_channels);
  Rng rng = substream(cfg.seed, "bench");
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);

  const std::string csv_path = (out / "bench.csv").string();
  std::ofstream csv(csv_path);
  if (!csv) throw DataError(csv_path + ": cannot write bench results");
  csv << "threads,wall_ms,speedup\n";

  ThreadGuard guard;
  const bool f32 = cfg.bench_precision == BenchPrecision::F32;
  NetworkT<float> fnet;
  VolT<float> xf(1, 1, 1, 1);
  if (f32) {
    fnet = to_float(net);
    xf = VolT<float>(x.W, x.H, x.D, x.C);
    for (std::size_t i = 0; i < x.data.size(); ++i)
      xf.data[i] = static_cast<float>(x.data[i]);
  }

  // One untimed pass so the first measurement is not a cold-start outlier.
  set_threads(cfg.bench_threads.front());
  if (f32) network_forward(xf, fnet);
  else network_forward(x, net);

  double base_ms = 0.0;
  std::vector<double> ref64;
  std::vector<float> ref32;
  bool identical = true;
  std::cout << std::setprecision(4);
  for (std::size_t i = 0; i < cfg.bench_threads.size(); ++i) {
    set_threads(cfg.bench_threads[i]);
    const auto t0 = std::chrono::steady_clock::now();
    double ms = 0.0;
    if (f32) {
      const VolT<float> y = network_forward(xf, fnet);
      ms = wall_ms_since(t0);
      if (i == 0) ref32 = y.data;
      else if (std::memcmp(ref32.data(), y.data.data(),
                           ref32.size() * sizeof(float)) != 0)
        identical = false;
    } else {
      const Vol y = network_forward(x, net);
      ms = wall_ms_since(t0);
      if (i == 0) ref64 = y.data;
      else if (std::memcmp(ref64.data(), y.data.data(),
                           ref64.size() * sizeof(double)) != 0)
        identical = false;
    }
    if (i == 0) base_ms = ms;
    const double speedup = ms > 0.0 ? base_ms / ms : 0.0;
    csv << cfg.bench_threads[i] << ',' << std::setprecision(6) << ms << ','
        << speedup << '\n';
    std::cout << "bench: threads " << cfg.bench_threads[i] << ", wall "
              << ms << " ms, speedup " << speedup << "\n";
  }
  std::cout << "bench: outputs bit-identical across thread counts: "
            << (identical ? "yes" : "NO") << "\n"
            << "bench: wrote " << csv_path << "\n";
  if (!identical)
    throw ShapeError("bench: forward pass is not thread-count invariant");
}

void run_param_count(const RunConfig& cfg) {
  const Network net =
      build_network(cfg.arch, cfg.input_channels, cfg.classes, cfg.filter);
  std::size_t total = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::size_t n = std::visit(
        [](const auto& layer) { return layer.param_count(); }, net.layers[i]);
    total += n;
    std::cout << "layer " << (i + 1) << ": " << layer_desc(net.layers[i])
              << ": " << n << "\n";
  }
  std::cout << "total: " << total << "\n";
}

}  // namespace pyra
