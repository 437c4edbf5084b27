#include "dmtlr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace dmtlr {

namespace {

constexpr char kMagic[6] = {'D', 'M', 'T', 'L', 'R', '1'};
constexpr std::uint8_t kKindBackbone = 1;
constexpr std::uint8_t kKindModel = 2;

void put_u8(std::ostream& os, std::uint8_t v) {
  os.write(reinterpret_cast<const char*>(&v), 1);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint8_t get_u8(std::istream& is) {
  std::uint8_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 1);
  return v;
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_tensor(std::ostream& os, const nn::Tensor& t) {
  put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
  for (double v : t.data) put_f64(os, v);
}

nn::Tensor get_tensor(std::istream& is) {
  const std::uint32_t rank = get_u32(is);
  if (rank > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
  if (rank == 0) return nn::Tensor{};
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(get_u32(is));
  nn::Tensor t(shape);
  for (double& v : t.data) v = get_f64(is);
  return t;
}

void put_section(std::ostream& os, const std::string& tag,
                 const std::vector<nn::ParamSet>& params) {
  put_u8(os, static_cast<std::uint8_t>(tag.size()));
  os.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const nn::ParamSet& p : params) {
    put_u8(os, p.trainable ? 1 : 0);
    put_tensor(os, p.weights);
    put_tensor(os, p.biases);
  }
}

// Loads a tagged section into existing ParamSets; shapes must line up with
// the architecture rebuilt from the stored spec.
void get_section(std::istream& is, const std::string& expected_tag,
                 std::vector<nn::ParamSet>& params) {
  const std::uint8_t tag_len = get_u8(is);
  std::string tag(tag_len, '\0');
  is.read(tag.data(), tag_len);
  if (tag != expected_tag)
    throw std::runtime_error("checkpoint: expected section '" + expected_tag +
                             "', found '" + tag + "'");
  const std::uint32_t count = get_u32(is);
  if (count != params.size())
    throw std::runtime_error("checkpoint: section '" + tag + "' has " +
                             std::to_string(count) + " param sets, expected " +
                             std::to_string(params.size()));
  for (nn::ParamSet& p : params) {
    p.trainable = get_u8(is) != 0;
    nn::Tensor weights = get_tensor(is);
    nn::Tensor biases = get_tensor(is);
    if (weights.shape != p.weights.shape || biases.shape != p.biases.shape)
      throw std::runtime_error("checkpoint: section '" + tag + "' shape mismatch");
    p.weights = std::move(weights);
    p.biases = std::move(biases);
    p.zero_grads();
  }
}

void put_spec(std::ostream& os, const BackboneSpec& spec) {
  put_u32(os, static_cast<std::uint32_t>(spec.input_h));
  put_u32(os, static_cast<std::uint32_t>(spec.input_w));
  put_u32(os, static_cast<std::uint32_t>(spec.input_c));
  put_u32(os, static_cast<std::uint32_t>(spec.blocks.size()));
  for (const auto& [channels, count] : spec.blocks) {
    put_u32(os, static_cast<std::uint32_t>(channels));
    put_u32(os, static_cast<std::uint32_t>(count));
  }
  put_u32(os, static_cast<std::uint32_t>(spec.ft_head_dims.size()));
  for (int d : spec.ft_head_dims) put_u32(os, static_cast<std::uint32_t>(d));
}

BackboneSpec get_spec(std::istream& is) {
  BackboneSpec spec;
  spec.input_h = static_cast<int>(get_u32(is));
  spec.input_w = static_cast<int>(get_u32(is));
  spec.input_c = static_cast<int>(get_u32(is));
  spec.blocks.resize(get_u32(is));
  for (auto& [channels, count] : spec.blocks) {
    channels = static_cast<int>(get_u32(is));
    count = static_cast<int>(get_u32(is));
  }
  spec.ft_head_dims.resize(get_u32(is));
  for (int& d : spec.ft_head_dims) d = static_cast<int>(get_u32(is));
  return spec;
}

void put_backbone_body(std::ostream& os, const PretrainedBackbone& backbone) {
  put_spec(os, backbone.spec);
  put_u8(os, backbone.frozen ? 1 : 0);
  put_u8(os, backbone.source_task_report.trained ? 1 : 0);
  put_f64(os, backbone.source_task_report.initial_holdout_loss);
  put_f64(os, backbone.source_task_report.final_holdout_loss);
  put_f64(os, backbone.source_task_report.final_holdout_accuracy);
  put_section(os, "w_f", backbone.conv.params);
}

PretrainedBackbone get_backbone_body(std::istream& is) {
  const BackboneSpec spec = get_spec(is);
  PretrainedBackbone backbone = build_backbone(spec, 0);
  const bool frozen = get_u8(is) != 0;
  backbone.source_task_report.trained = get_u8(is) != 0;
  backbone.source_task_report.initial_holdout_loss = get_f64(is);
  backbone.source_task_report.final_holdout_loss = get_f64(is);
  backbone.source_task_report.final_holdout_accuracy = get_f64(is);
  get_section(is, "w_f", backbone.conv.params);
  if (frozen) backbone = freeze(std::move(backbone));
  return backbone;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  return is;
}

}  // namespace

void save_backbone(const PretrainedBackbone& backbone, const std::string& path) {
  std::ofstream os = open_out(path);
  put_u8(os, kKindBackbone);
  put_backbone_body(os, backbone);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

PretrainedBackbone load_backbone(const std::string& path) {
  std::ifstream is = open_in(path);
  if (get_u8(is) != kKindBackbone)
    throw std::runtime_error("checkpoint: " + path + " is not a backbone file");
  PretrainedBackbone backbone = get_backbone_body(is);
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
  return backbone;
}

void save_model(const DMTLRModel& model, const std::string& path) {
  std::ofstream os = open_out(path);
  put_u8(os, kKindModel);
  put_u8(os, static_cast<std::uint8_t>(model.kind));
  put_u32(os, static_cast<std::uint32_t>(model.d_descriptor));
  put_u32(os, static_cast<std::uint32_t>(model.n_output));
  put_f64(os, model.dropout_rate);
  put_u8(os, model.has_image_branch() ? 1 : 0);
  if (model.has_image_branch()) put_backbone_body(os, model.backbone);
  put_section(os, "w_FT", model.ft_head.dense.params);
  put_section(os, "w_MLP", model.descriptor_branch.params);
  put_section(os, "w_r", model.fusion.params);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

DMTLRModel load_model(const std::string& path) {
  std::ifstream is = open_in(path);
  if (get_u8(is) != kKindModel)
    throw std::runtime_error("checkpoint: " + path + " is not a model file");
  const auto kind = static_cast<ModelKind>(get_u8(is));
  const int d_descriptor = static_cast<int>(get_u32(is));
  const int n_output = static_cast<int>(get_u32(is));
  const double dropout_rate = get_f64(is);
  const bool has_backbone = get_u8(is) != 0;

  DMTLRModel model;
  if (has_backbone) {
    PretrainedBackbone backbone = get_backbone_body(is);
    if (!backbone.frozen) backbone = freeze(std::move(backbone));
    model = kind == ModelKind::kDmtlr
                ? build_dmtlr(backbone, d_descriptor, n_output, 0, dropout_rate)
                : build_image_only(backbone, n_output, 0, dropout_rate);
    model.backbone = std::move(backbone);
  } else {
    model = build_stats_only(d_descriptor, n_output, 0);
  }
  get_section(is, "w_FT", model.ft_head.dense.params);
  get_section(is, "w_MLP", model.descriptor_branch.params);
  get_section(is, "w_r", model.fusion.params);
  if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
  return model;
}

}  // namespace dmtlr
