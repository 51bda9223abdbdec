#include "pyra/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace pyra {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

[[noreturn]] void fail(const ConfigEntry& e, const std::string& why) {
  throw ConfigError("config line " + std::to_string(e.line) + ": [" +
                    e.section + "] " + e.key + ": " + why);
}

bool to_bool(const ConfigEntry& e, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(e, "expected a boolean, got '" + v + "'");
}

std::uint64_t to_u64(const ConfigEntry& e, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(e, "expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_f64(const ConfigEntry& e, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail(e, "expected a number, got '" + v + "'");
  }
}

// "AxBxC" triples, e.g. sub-volume or tile dims.
void to_dims(const ConfigEntry& e, const std::string& v, std::size_t& a,
             std::size_t& b, std::size_t& c) {
  const auto parts = split(v, 'x');
  if (parts.size() != 3) fail(e, "expected WxHxD, got '" + v + "'");
  a = to_u64(e, parts[0]);
  b = to_u64(e, parts[1]);
  c = to_u64(e, parts[2]);
  if (a == 0 || b == 0 || c == 0) fail(e, "dims must be >= 1");
}

}  // namespace

std::vector<ConfigEntry> parse_ini(const std::string& text) {
  std::vector<ConfigEntry> out;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    ConfigEntry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << is.rdbuf();
  const auto entries = parse_ini(buf.str());

  RunConfig cfg;
  std::vector<bool> use_orig, use_pre;

  for (const auto& e : entries) {
    const std::string id = e.section + "." + e.key;
    if (id == "run.seed") cfg.seed = to_u64(e, e.value);
    else if (id == "run.threads") {
      cfg.threads = static_cast<int>(to_u64(e, e.value));
      if (cfg.threads < 1) fail(e, "threads must be >= 1");
    } else if (id == "run.out") cfg.out_dir = e.value;
    else if (id == "network.arch") cfg.arch = split(e.value, ',');
    else if (id == "network.filter") {
      cfg.filter = to_u64(e, e.value);
    } else if (id == "network.input_channels") {
      cfg.input_channels = to_u64(e, e.value);
      if (cfg.input_channels == 0) fail(e, "input_channels must be >= 1");
    } else if (id == "network.classes") {
      cfg.classes = static_cast<std::uint32_t>(to_u64(e, e.value));
      if (cfg.classes < 2) fail(e, "classes must be >= 2");
    } else if (id == "data.train_input") cfg.train_input = e.value;
    else if (id == "data.train_labels") cfg.train_labels = e.value;
    else if (id == "preprocess.inputs") cfg.pre_inputs = split(e.value, ',');
    else if (id == "preprocess.use_original" || id == "preprocess.use_preprocessed") {
      auto& dst = e.key == "use_original" ? use_orig : use_pre;
      dst.clear();
      for (const auto& tok : split(e.value, ','))
        dst.push_back(to_bool(e, tok));
    } else if (id == "preprocess.output") cfg.pre_output = e.value;
    else if (id == "train.stages") {
      cfg.schedule.stages.clear();
      for (const auto& tok : split(e.value, ',')) {
        const auto colon = tok.find(':');
        if (colon == std::string::npos)
          fail(e, "expected epochs:WxHxD, got '" + tok + "'");
        Stage st;
        st.epochs = to_u64(e, trim(tok.substr(0, colon)));
        if (st.epochs == 0) fail(e, "stage epochs must be >= 1");
        to_dims(e, trim(tok.substr(colon + 1)), st.sw, st.sh, st.sd);
        cfg.schedule.stages.push_back(st);
      }
      if (cfg.schedule.stages.empty()) fail(e, "no stages given");
    } else if (id == "train.lr_floor") cfg.schedule.lr_floor = to_f64(e, e.value);
    else if (id == "train.lr_scale") cfg.schedule.lr_scale = to_f64(e, e.value);
    else if (id == "train.lr_half_life") {
      cfg.schedule.half_life = to_f64(e, e.value);
      if (!(cfg.schedule.half_life > 0)) fail(e, "half life must be > 0");
    } else if (id == "train.checkpoint_every")
      cfg.checkpoint_every = to_u64(e, e.value);
    else if (id == "train.rotate_z") cfg.augment.rotate_z = to_bool(e, e.value);
    else if (id == "train.flip_x") cfg.augment.flip_x = to_bool(e, e.value);
    else if (id == "train.flip_y") cfg.augment.flip_y = to_bool(e, e.value);
    else if (id == "train.flip_z") cfg.augment.flip_z = to_bool(e, e.value);
    else if (id == "predict.input") cfg.predict_input = e.value;
    else if (id == "predict.checkpoint") cfg.predict_checkpoint = e.value;
    else if (id == "predict.tile")
      to_dims(e, e.value, cfg.tile_w, cfg.tile_h, cfg.tile_d);
    else if (id == "predict.overlap") {
      cfg.overlap = to_f64(e, e.value);
      if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0))
        fail(e, "overlap must be in [0, 1)");
    } else if (id == "predict.sigma_frac") {
      cfg.sigma_frac = to_f64(e, e.value);
      if (!(cfg.sigma_frac > 0.0)) fail(e, "sigma_frac must be > 0");
    } else if (id == "evaluate.predicted") cfg.eval_predicted = e.value;
    else if (id == "evaluate.reference") cfg.eval_reference = e.value;
    else if (id == "evaluate.spacing") {
      const auto parts = split(e.value, ',');
      if (parts.size() != 3) fail(e, "expected sx,sy,sz");
      cfg.spacing.sx = to_f64(e, parts[0]);
      cfg.spacing.sy = to_f64(e, parts[1]);
      cfg.spacing.sz = to_f64(e, parts[2]);
      if (!(cfg.spacing.sx > 0 && cfg.spacing.sy > 0 && cfg.spacing.sz > 0))
        fail(e, "spacing must be positive");
    } else if (id == "evaluate.rand_connectivity") {
      if (e.value == "volume6") cfg.rand_connectivity = Connectivity::Volume6;
      else if (e.value == "slice4") cfg.rand_connectivity = Connectivity::Slice4;
      else fail(e, "expected volume6 or slice4");
    } else if (id == "bench.volume") {
      to_dims(e, e.value, cfg.bench_w, cfg.bench_h, cfg.bench_d);
    } else if (id == "bench.channels") {
      cfg.bench_channels = to_u64(e, e.value);
      if (cfg.bench_channels == 0) fail(e, "channels must be >= 1");
    } else if (id == "bench.threads") {
      cfg.bench_threads.clear();
      for (const auto& tok : split(e.value, ',')) {
        const int t = static_cast<int>(to_u64(e, tok));
        if (t < 1) fail(e, "thread counts must be >= 1");
        cfg.bench_threads.push_back(t);
      }
      if (cfg.bench_threads.empty()) fail(e, "no thread counts given");
    } else if (id == "bench.precision") {
      if (e.value == "f64") cfg.bench_precision = BenchPrecision::F64;
      else if (e.value == "f32") cfg.bench_precision = BenchPrecision::F32;
      else fail(e, "expected f64 or f32");
    } else {
      fail(e, "unknown key");
    }
  }

  if (!use_orig.empty() || !use_pre.empty() || !cfg.pre_inputs.empty()) {
    const std::size_t n = cfg.pre_inputs.size();
    if (use_orig.empty()) use_orig.assign(n, true);
    if (use_pre.empty()) use_pre.assign(n, false);
    if (use_orig.size() != n || use_pre.size() != n)
      throw ConfigError(
          "config: [preprocess] use_original/use_preprocessed must list one "
          "flag per input");
    cfg.pre_modalities.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      cfg.pre_modalities[i] = {use_orig[i], use_pre[i]};
  }
  return cfg;
}

Network build_network(const std::vector<std::string>& arch,
                      std::size_t input_channels, std::uint32_t classes,
                      std::size_t filter) {
  if (arch.empty()) throw ConfigError("network arch is empty");
  bool has_pyramid = false;
  for (const auto& tok : arch)
    if (tok.rfind("pyramid:", 0) == 0) has_pyramid = true;
  if (has_pyramid && (filter < 3 || filter % 2 == 0))
    throw ConfigError("network filter must be odd and >= 3, got " +
                      std::to_string(filter));
  Network net;
  std::size_t ch = input_channels;
  for (const auto& tok : arch) {
    if (tok == "softmax") {
      net.add_fc(ch, classes, Activation::Softmax);
      ch = classes;
      continue;
    }
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ConfigError("network arch: bad token '" + tok + "'");
    const std::string kind = tok.substr(0, colon);
    std::size_t width = 0;
    try {
      width = std::stoul(tok.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("network arch: bad width in '" + tok + "'");
    }
    if (width == 0) throw ConfigError("network arch: zero width in '" + tok + "'");
    if (kind == "pyramid") {
      net.add_pyramid(ch, width, filter);
    } else if (kind == "fc") {
      net.add_fc(ch, width, Activation::Tanh);
    } else {
      throw ConfigError("network arch: unknown layer kind '" + kind + "'");
    }
    ch = width;
  }
  return net;
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot write resolved config");
  os.precision(17);
  os << "[run]\n"
     << "seed = " << cfg.seed << "\n"
     << "threads = " << cfg.threads << "\n"
     << "out = " << cfg.out_dir << "\n\n";
  os << "[network]\narch = ";
  for (std::size_t i = 0; i < cfg.arch.size(); ++i)
    os << (i ? "," : "") << cfg.arch[i];
  os << "\nfilter = " << cfg.filter
     << "\ninput_channels = " << cfg.input_channels
     << "\nclasses = " << cfg.classes << "\n\n";
  os << "[data]\n"
     << "train_input = " << cfg.train_input << "\n"
     << "train_labels = " << cfg.train_labels << "\n\n";
  os << "[preprocess]\ninputs = ";
  for (std::size_t i = 0; i < cfg.pre_inputs.size(); ++i)
    os << (i ? "," : "") << cfg.pre_inputs[i];
  os << "\nuse_original = ";
  for (std::size_t i = 0; i < cfg.pre_modalities.size(); ++i)
    os << (i ? "," : "") << (cfg.pre_modalities[i].use_original ? "true" : "false");
  os << "\nuse_preprocessed = ";
  for (std::size_t i = 0; i < cfg.pre_modalities.size(); ++i)
    os << (i ? "," : "")
       << (cfg.pre_modalities[i].use_preprocessed ? "true" : "false");
  os << "\noutput = " << cfg.pre_output << "\n\n";
  os << "[train]\nstages = ";
  for (std::size_t i = 0; i < cfg.schedule.stages.size(); ++i) {
    const auto& st = cfg.schedule.stages[i];
    os << (i ? "," : "") << st.epochs << ":" << st.sw << "x" << st.sh << "x"
       << st.sd;
  }
  os << "\nlr_floor = " << cfg.schedule.lr_floor
     << "\nlr_scale = " << cfg.schedule.lr_scale
     << "\nlr_half_life = " << cfg.schedule.half_life
     << "\ncheckpoint_every = " << cfg.checkpoint_every
     << "\nrotate_z = " << (cfg.augment.rotate_z ? "true" : "false")
     << "\nflip_x = " << (cfg.augment.flip_x ? "true" : "false")
     << "\nflip_y = " << (cfg.augment.flip_y ? "true" : "false")
     << "\nflip_z = " << (cfg.augment.flip_z ? "true" : "false") << "\n\n";
  os << "[predict]\n"
     << "input = " << cfg.predict_input << "\n"
     << "checkpoint = " << cfg.predict_checkpoint << "\n"
     << "tile = " << cfg.tile_w << "x" << cfg.tile_h << "x" << cfg.tile_d << "\n"
     << "overlap = " << cfg.overlap << "\n"
     << "sigma_frac = " << cfg.sigma_frac << "\n\n";
  os << "[evaluate]\n"
     << "predicted = " << cfg.eval_predicted << "\n"
     << "reference = " << cfg.eval_reference << "\n"
     << "spacing = " << cfg.spacing.sx << "," << cfg.spacing.sy << ","
     << cfg.spacing.sz << "\n"
     << "rand_connectivity = "
     << (cfg.rand_connectivity == Connectivity::Volume6 ? "volume6" : "slice4")
     << "\n\n";
  os << "[bench]\n"
     << "volume = " << cfg.bench_w << "x" << cfg.bench_h << "x" << cfg.bench_d
     << "\n"
     << "channels = " << cfg.bench_channels << "\n"
     << "threads = ";
  for (std::size_t i = 0; i < cfg.bench_threads.size(); ++i)
    os << (i ? "," : "") << cfg.bench_threads[i];
  os << "\nprecision = "
     << (cfg.bench_precision == BenchPrecision::F64 ? "f64" : "f32") << "\n";
  if (!os) throw DataError(path + ": write failed");
}

}  // namespace pyra
