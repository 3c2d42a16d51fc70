#include "deh/network.hpp"

namespace deh {

void ModelSpec::validate() const {
  require(input_dim >= 2, ErrorKind::config, "input_dim must be at least 2");
  require(points >= 1, ErrorKind::config, "points must be at least 1");
  require(!layers.empty(), ErrorKind::config, "layers must not be empty");
  for (const LayerSpec& layer : layers)
    require(layer.width >= 1, ErrorKind::config, "every layer width must be at least 1");
  require(fc_hidden >= 1, ErrorKind::config, "fc_hidden must be at least 1");
  require(output_dim >= 1, ErrorKind::config, "output_dim must be at least 1");
}

std::size_t ModelSpec::channels_after(std::size_t layer_count) const {
  std::size_t channels = 1;
  for (std::size_t l = 0; l < layer_count && l < layers.size(); ++l) channels *= layers[l].width;
  return channels;
}

std::size_t ModelSpec::invariant_size() const {
  const std::size_t k = channels_after(layers.size());
  const std::size_t pool = pooling == Pooling::max_and_mean ? 2 : 1;
  if (invariant == InvariantOp::delta || invariant == InvariantOp::delta_edge) {
    if (permutation_invariant) return points * k * pool;
    if (gram_entries == GramEntries::upper) return points * (points + 1) / 2 * k;
    return points * points * k;
  }
  if (permutation_invariant) return k * pool;
  return points * k;
}

ModelSpec regression_model_spec() {
  ModelSpec spec;
  spec.input_dim = 5;
  spec.points = 2;
  spec.layers = {LayerSpec{2, true, NormMode::nonlinear, true}};
  spec.invariant = InvariantOp::delta;
  spec.gram_entries = GramEntries::upper;
  spec.permutation_invariant = false;
  spec.fc_hidden = 32;
  spec.output_dim = 1;
  return spec;
}

std::size_t TensorInfo::size() const {
  std::size_t s = 1;
  for (std::size_t d : shape) s *= d;
  return s;
}

ModelLayout::ModelLayout(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t param = 0;
  std::size_t prepared = 0;
  std::size_t channels = 1;
  auto add_tensor = [&](std::string name, std::vector<std::size_t> shape) {
    TensorInfo info{std::move(name), param, std::move(shape)};
    const std::size_t offset = param;
    param += info.size();
    tensors_.push_back(std::move(info));
    return offset;
  };
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    const LayerSpec& layer = spec_.layers[l];
    const std::size_t dim = spec_.input_dim + l;
    layer_begin_.push_back(neurons_.size());
    for (std::size_t parent = 0; parent < channels; ++parent) {
      for (std::size_t k = 0; k < layer.width; ++k) {
        const std::string prefix =
            "layer" + std::to_string(l) + ".neuron" + std::to_string(parent * layer.width + k);
        NeuronSlot slot;
        slot.layer = l;
        slot.dim = dim;
        slot.parent = parent;
        slot.sphere = add_tensor(prefix + ".sphere", {dim + 2});
        if (layer.use_bias) slot.bias = add_tensor(prefix + ".bias", {1});
        if (layer.norm == NormMode::nonlinear && layer.learnable_norm)
          slot.scale = add_tensor(prefix + ".scale", {1});
        slot.bank = prepared;
        prepared += (dim + 1) * (dim + 2);
        if (layer.use_bias) slot.prepared_bias = prepared++;
        if (layer.norm == NormMode::nonlinear) slot.prepared_scale = prepared++;
        neurons_.push_back(slot);
      }
    }
    channels *= layer.width;
  }
  layer_begin_.push_back(neurons_.size());

  const std::size_t in = spec_.invariant_size();
  fc_params_ = param;
  fc_prepared_ = prepared;
  add_tensor("fc.hidden.weight", {spec_.fc_hidden, in});
  add_tensor("fc.hidden.bias", {spec_.fc_hidden});
  add_tensor("fc.out.weight", {spec_.output_dim, spec_.fc_hidden});
  add_tensor("fc.out.bias", {spec_.output_dim});
  param_count_ = param;
  prepared_size_ = prepared + fc_size();
}

std::size_t ModelLayout::fc_size() const {
  const std::size_t in = spec_.invariant_size();
  return spec_.fc_hidden * in + spec_.fc_hidden + spec_.output_dim * spec_.fc_hidden +
         spec_.output_dim;
}

std::vector<Matrix<double>> neuron_rotations(const ModelLayout& layout,
                                             std::span<const double> params) {
  std::vector<Matrix<double>> out;
  out.reserve(layout.neurons().size());
  for (const NeuronSlot& slot : layout.neurons()) {
    const Vec<double> sphere(params.begin() + static_cast<std::ptrdiff_t>(slot.sphere),
                             params.begin() + static_cast<std::ptrdiff_t>(slot.sphere + slot.dim + 2));
    const auto basis = simplex_basis(slot.dim);
    out.push_back(geodesic_rotation(sphere_center(sphere), basis->vertex(0)));
  }
  return out;
}

namespace {

template <class E, std::size_t N>
E parse_enum(const std::string& text, const char* what,
             const std::pair<const char*, E> (&table)[N]) {
  for (const auto& [name, value] : table)
    if (text == name) return value;
  std::string allowed;
  for (const auto& entry : table) allowed += std::string(allowed.empty() ? "" : ", ") + entry.first;
  fail(ErrorKind::config, std::string("unknown ") + what + " '" + text + "' (expected " + allowed + ")");
}

const std::pair<const char*, NormMode> kNormModes[] = {
    {"none", NormMode::none}, {"unit", NormMode::unit}, {"nonlinear", NormMode::nonlinear}};
const std::pair<const char*, InvariantOp> kInvariantOps[] = {{"delta", InvariantOp::delta},
                                                             {"delta_edge", InvariantOp::delta_edge},
                                                             {"sum", InvariantOp::sum},
                                                             {"l2norm", InvariantOp::l2norm}};
const std::pair<const char*, Pooling> kPoolings[] = {
    {"max", Pooling::max}, {"mean", Pooling::mean}, {"max_and_mean", Pooling::max_and_mean}};
const std::pair<const char*, GramEntries> kGramEntries[] = {{"full", GramEntries::full},
                                                            {"upper", GramEntries::upper}};
const std::pair<const char*, RotationGrad> kRotationGrads[] = {{"full", RotationGrad::full},
                                                               {"stop", RotationGrad::stop}};

template <class E, std::size_t N>
std::string name_of(E value, const std::pair<const char*, E> (&table)[N]) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

}  // namespace

std::string to_string(NormMode mode) { return name_of(mode, kNormModes); }
std::string to_string(InvariantOp op) { return name_of(op, kInvariantOps); }
std::string to_string(Pooling mode) { return name_of(mode, kPoolings); }
std::string to_string(GramEntries entries) { return name_of(entries, kGramEntries); }
std::string to_string(RotationGrad mode) { return name_of(mode, kRotationGrads); }

NormMode parse_norm_mode(const std::string& text) { return parse_enum(text, "norm mode", kNormModes); }
InvariantOp parse_invariant_op(const std::string& text) {
  return parse_enum(text, "invariant operation", kInvariantOps);
}
Pooling parse_pooling(const std::string& text) { return parse_enum(text, "pooling", kPoolings); }
GramEntries parse_gram_entries(const std::string& text) {
  return parse_enum(text, "gram entries", kGramEntries);
}
RotationGrad parse_rotation_grad(const std::string& text) {
  return parse_enum(text, "rotation gradient mode", kRotationGrads);
}

}  // namespace deh
