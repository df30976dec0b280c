#include "scarfcn/fcn.hpp"

#include <cstring>

#include "scarfcn/error.hpp"
#include "scarfcn/io_util.hpp"
#include "scarfcn/random.hpp"

namespace scarfcn {

namespace {

using nlohmann::json;
using nn::ConvLayerParams;

constexpr char kMagic[4] = {'F', 'C', 'N', 'S'};

std::array<ConvLayerParams, 4> architecture(PaddingMode mode, int time_points) {
  const int pw1 = mode == PaddingMode::Horizontal ? 0 : 1;
  return {ConvLayerParams::conv(time_points, 32, 3, 3, 1, 1, 1, pw1),
          ConvLayerParams::conv(32, 64, 3, 3, 2, 2, 1, 1),
          ConvLayerParams::conv(64, 128, 3, 3, 1, 1, 1, 1),
          ConvLayerParams::transpose(128, 2, 2, 2, 1, 2, 0, 0)};
}

bool same_geometry(const ConvLayerParams& a, const ConvLayerParams& b) {
  return a.role == b.role && a.in_ch == b.in_ch && a.out_ch == b.out_ch && a.kh == b.kh &&
         a.kw == b.kw && a.sh == b.sh && a.sw == b.sw && a.ph == b.ph && a.pw == b.pw;
}

json layer_shape_json(const ConvLayerParams& l) {
  return {{"role", l.role == nn::LayerRole::Conv ? "conv" : "transpose"},
          {"in_ch", l.in_ch},
          {"out_ch", l.out_ch},
          {"kernel", {l.kh, l.kw}},
          {"stride", {l.sh, l.sw}},
          {"zero_pad", {l.ph, l.pw}},
          {"weights", l.weights.size()},
          {"bias", l.bias.size()}};
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw CheckpointError("checkpoint field '" + field + "': " + why);
}

}  // namespace

Shape3 FcnParameters::input_shape() const {
  return {time_points(), kGridRows, padding_mode == PaddingMode::Horizontal ? kGridCols + 2 : kGridCols};
}

std::size_t FcnParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void FcnParameters::validate() const {
  if (arch_version != kArchVersion) {
    throw ShapeError("unsupported arch_version " + std::to_string(arch_version));
  }
  const auto expect = architecture(padding_mode, time_points());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (!same_geometry(layers[i], expect[i])) {
      throw ShapeError("layer " + std::to_string(i + 1) + " does not match the architecture for " +
                       std::string(padding_name(padding_mode)) + " padding");
    }
  }
}

FcnParameters make_zero_fcn(PaddingMode mode, int time_points) {
  if (time_points < 1) throw ConfigError("time_points must be >= 1");
  FcnParameters p;
  p.padding_mode = mode;
  p.layers = architecture(mode, time_points);
  return p;
}

FcnParameters make_fcn(PaddingMode mode, int time_points, std::uint64_t seed) {
  FcnParameters p = make_zero_fcn(mode, time_points);
  p.rng_seed = seed;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    nn::init_layer(p.layers[i], mix_seed(seed, 1000 + i));
  }
  return p;
}

BatchTensor fcn_forward(const FcnParameters& params, const BatchTensor& input,
                        ForwardCache* cache) {
  if (input.item_shape() != params.input_shape()) {
    throw ShapeError("input " + to_string(input.item_shape()) + " does not match " +
                     std::string(padding_name(params.padding_mode)) + " padding input " +
                     to_string(params.input_shape()));
  }
  BatchTensor x = input;
  if (cache) cache->input = input;
  for (int i = 0; i < 3; ++i) {
    BatchTensor z = nn::conv2d_forward(x, params.layers[i]);
    if (cache) cache->pre[i] = z;
    nn::relu_inplace(z.data());
    if (cache) cache->post[i] = z;
    x = std::move(z);
  }
  return nn::convtranspose2d_forward(x, params.layers[3]);
}

GridTensor forward(const FcnParameters& params, const GridTensor& input) {
  return fcn_forward(params, BatchTensor::from_item(input)).item_tensor(0);
}

FcnGradients fcn_backward(const FcnParameters& params, const ForwardCache& cache,
                          const BatchTensor& dlogits, bool need_input_grad) {
  FcnGradients g;
  g.layers[3] = nn::convtranspose2d_backward(cache.post[2], params.layers[3], dlogits, true);
  BatchTensor upstream = std::move(g.layers[3].input);
  for (int i = 2; i >= 0; --i) {
    nn::relu_backward_inplace(cache.pre[i].data(), upstream.data());
    const BatchTensor& x = i == 0 ? cache.input : cache.post[i - 1];
    const bool want_input = i > 0 || need_input_grad;
    g.layers[i] = nn::conv2d_backward(x, params.layers[i], upstream, want_input);
    upstream = std::move(g.layers[i].input);
  }
  if (need_input_grad) g.input = std::move(upstream);
  return g;
}

GridTensor build_input(std::span<const double> strain, int time_points, PaddingMode mode,
                       const SegmentGridMap& map) {
  const int p = mode == PaddingMode::Horizontal ? 1 : 0;
  GridTensor g(time_points, kGridRows, kGridCols + 2 * p);
  write_padded_grid(strain, time_points, p, map, g.data());
  return g;
}

BatchTensor build_batch(const Dataset& ds, std::span<const int> rows, PaddingMode mode) {
  const int p = mode == PaddingMode::Horizontal ? 1 : 0;
  BatchTensor b(static_cast<int>(rows.size()), {ds.n_points(), kGridRows, kGridCols + 2 * p});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    write_padded_grid(ds.patient(rows[i]), ds.n_points(), p, ds.grid_map,
                      b.item(static_cast<int>(i)));
  }
  return b;
}

GridTensor label_grid(const std::array<int, kSegments>& labels, const SegmentGridMap& map) {
  GridTensor g(2, kGridRows, kGridCols);
  for (int s = 1; s <= kSegments; ++s) {
    const GridCell c = map.cell(s);
    const double y = labels[s - 1] ? 1.0 : 0.0;
    g.at(kScarChannel, c.row, c.col) = y;
    g.at(kNoScarChannel, c.row, c.col) = 1.0 - y;
  }
  return g;
}

BatchTensor build_targets(const Dataset& ds, std::span<const int> rows) {
  BatchTensor b(static_cast<int>(rows.size()), {2, kGridRows, kGridCols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const GridTensor g = label_grid(ds.labels[rows[i]], ds.grid_map);
    std::copy(g.data().begin(), g.data().end(), b.item(static_cast<int>(i)).begin());
  }
  return b;
}

SegmentPrediction predictions_from_logits(const GridTensor& logits, const SegmentGridMap& map) {
  if (logits.shape() != Shape3{2, kGridRows, kGridCols}) {
    throw ShapeError("logits " + to_string(logits.shape()) + " are not (2,3,6)");
  }
  SegmentPrediction pred;
  pred.logits = logits;
  for (int s = 1; s <= kSegments; ++s) {
    const GridCell c = map.cell(s);
    const double scar = logits.at(kScarChannel, c.row, c.col);
    const double clear = logits.at(kNoScarChannel, c.row, c.col);
    pred.predicted[s - 1] = scar > clear ? 1 : 0;
    pred.scores[s - 1] = scar - clear;
  }
  return pred;
}

SegmentPrediction predict_segments(const FcnParameters& params, const GridTensor& input,
                                   const SegmentGridMap& map) {
  return predictions_from_logits(forward(params, input), map);
}

std::string checkpoint_bytes(const FcnParameters& params) {
  params.validate();
  json shapes = json::array();
  std::uint64_t payload = 0;
  for (const auto& l : params.layers) {
    shapes.push_back(layer_shape_json(l));
    payload += l.weights.size() + l.bias.size();
  }
  std::string body;
  for (const auto& l : params.layers) {
    io::append_f64_le(body, l.weights);
    io::append_f64_le(body, l.bias);
  }
  const json header = {{"arch_version", params.arch_version},
                       {"padding_mode", std::string(padding_name(params.padding_mode))},
                       {"layer_shapes", shapes},
                       {"train_config", params.train_config},
                       {"rng_seed", params.rng_seed},
                       {"created_unix", params.created_unix},
                       {"payload_values", payload},
                       {"payload_fnv1a", io::hex64(io::fnv1a(body))}};
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  io::append_u32_le(out, kCheckpointVersion);
  io::append_u64_le(out, text.size());
  out += text;
  out += body;
  return out;
}

void save_checkpoint(const FcnParameters& params, const std::filesystem::path& path) {
  io::write_text(path, checkpoint_bytes(params));
}

FcnParameters parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16) bad_field("magic", "file too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) bad_field("magic", "expected \"FCNS\"");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    bad_field("version", std::to_string(version) + " is not supported");
  }
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) {
    bad_field("header_length", std::to_string(header_len) + " exceeds the file");
  }
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::parse_error& e) {
    bad_field("header", e.what());
  }

  FcnParameters p;
  try {
    p.arch_version = header.at("arch_version").get<int>();
    p.padding_mode = parse_padding(header.at("padding_mode").get<std::string>());
    p.train_config = header.value("train_config", json::object());
    p.rng_seed = header.value("rng_seed", std::uint64_t{0});
    p.created_unix = header.value("created_unix", std::int64_t{0});
  } catch (const json::exception& e) {
    bad_field("header", e.what());
  } catch (const ConfigError& e) {
    bad_field("padding_mode", e.what());
  }
  if (p.arch_version != kArchVersion) {
    bad_field("arch_version", std::to_string(p.arch_version) + " is not supported");
  }
  const json& shapes = header.contains("layer_shapes") ? header.at("layer_shapes") : json();
  if (!shapes.is_array() || shapes.size() != 4) bad_field("layer_shapes", "expected 4 layers");
  int time_points = 0;
  try {
    time_points = shapes[0].at("in_ch").get<int>();
  } catch (const json::exception&) {
    bad_field("layer_shapes[0].in_ch", "missing");
  }
  if (time_points < 1) bad_field("layer_shapes[0].in_ch", "must be >= 1");
  p.layers = architecture(p.padding_mode, time_points);
  for (std::size_t i = 0; i < 4; ++i) {
    const json expect = layer_shape_json(p.layers[i]);
    for (const auto& [key, value] : expect.items()) {
      if (!shapes[i].contains(key) || shapes[i].at(key) != value) {
        bad_field("layer_shapes[" + std::to_string(i) + "]." + key,
                  "expected " + value.dump() + ", found " +
                      (shapes[i].contains(key) ? shapes[i].at(key).dump() : "nothing"));
      }
    }
  }

  const std::size_t payload_bytes = bytes.size() - 16 - header_len;
  const std::size_t expect_values = p.parameter_count();
  if (header.contains("payload_values") &&
      header.at("payload_values") != json(static_cast<std::uint64_t>(expect_values))) {
    bad_field("payload_values", "header says " + header.at("payload_values").dump() +
                                    ", architecture needs " + std::to_string(expect_values));
  }
  if (payload_bytes != expect_values * sizeof(double)) {
    bad_field("payload", std::to_string(payload_bytes) + " bytes, expected " +
                             std::to_string(expect_values * sizeof(double)));
  }
  const std::string_view body = bytes.substr(16 + header_len);
  const std::string digest = io::hex64(io::fnv1a(body));
  const auto stored = header.find("payload_fnv1a");
  const std::string want =
      stored != header.end() && stored->is_string() ? stored->get<std::string>() : "(missing)";
  if (want != digest) {
    bad_field("payload_fnv1a", "payload hash " + digest + " does not match header " + want);
  }
  const char* cursor = body.data();
  for (auto& l : p.layers) {
    std::memcpy(l.weights.data(), cursor, l.weights.size() * sizeof(double));
    cursor += l.weights.size() * sizeof(double);
    std::memcpy(l.bias.data(), cursor, l.bias.size() * sizeof(double));
    cursor += l.bias.size() * sizeof(double);
  }
  try {
    p.validate();
  } catch (const ShapeError& e) {
    bad_field("payload", e.what());
  }
  return p;
}

FcnParameters load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(io::read_text(path));
}

}  // namespace scarfcn
