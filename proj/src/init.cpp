#include "rectnet/init.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rectnet {

InitScheme InitScheme::parse(const std::string& name) {
  if (name == "he-fwd") return he_forward();
  if (name == "he-bwd") return he_backward();
  if (name == "xavier") return xavier();
  if (name.rfind("fixed:", 0) == 0) {
    return fixed(std::stod(name.substr(6)));
  }
  if (name.rfind("prelu:", 0) == 0) {
    const std::string rest = name.substr(6);
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      const std::string dir = rest.substr(colon + 1);
      if (dir == "fwd" || dir == "bwd") {
        return prelu_aware(std::stod(rest.substr(0, colon)),
                           dir == "fwd" ? FanDirection::Forward
                                        : FanDirection::Backward);
      }
    }
  }
  throw std::invalid_argument(
      "unknown init scheme '" + name +
      "' (expected he-fwd|he-bwd|xavier|fixed:<sigma>|prelu:<a>:fwd|bwd)");
}

std::string InitScheme::name() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::HeForward:
      return "he-fwd";
    case Kind::HeBackward:
      return "he-bwd";
    case Kind::Xavier:
      return "xavier";
    case Kind::FixedStd:
      os << "fixed:" << sigma;
      return os.str();
    case Kind::PReluAware:
      os << "prelu:" << a << ':'
         << (direction == FanDirection::Forward ? "fwd" : "bwd");
      return os.str();
  }
  return "?";
}

std::size_t fan_in(const NetworkSpec& spec, std::size_t layer_index) {
  return spec.weighted_at(layer_index).fan_in();
}

std::size_t fan_out(const NetworkSpec& spec, std::size_t layer_index) {
  return spec.weighted_at(layer_index).fan_out();
}

double init_std(const InitScheme& scheme, const WeightedLayer& layer) {
  switch (scheme.kind) {
    case InitScheme::Kind::HeForward:
      return std::sqrt(2.0 / static_cast<double>(layer.fan_in()));
    case InitScheme::Kind::HeBackward:
      return std::sqrt(2.0 / static_cast<double>(layer.fan_out()));
    case InitScheme::Kind::Xavier:
      return std::sqrt(1.0 / static_cast<double>(layer.fan_in()));
    case InitScheme::Kind::FixedStd:
      if (scheme.sigma < 0) {
        throw std::invalid_argument("fixed std must be >= 0");
      }
      return scheme.sigma;
    case InitScheme::Kind::PReluAware: {
      const double fan = static_cast<double>(
          scheme.direction == FanDirection::Forward ? layer.fan_in()
                                                    : layer.fan_out());
      return std::sqrt(2.0 / ((1.0 + scheme.a * scheme.a) * fan));
    }
  }
  throw std::logic_error("unreachable init scheme kind");
}

double effective_std(const InitScheme& scheme, const WeightedLayer& layer) {
  if (layer.std_override) return *layer.std_override;
  return init_std(scheme, layer);
}

Params initialize_network(const NetworkSpec& spec, const InitScheme& scheme,
                          std::uint64_t seed) {
  Params params;
  params.layers.resize(spec.layer_count());
  RngStream rng(seed);
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const LayerSpec& layer = spec.layer(i);
    if (is_weighted(layer)) {
      const WeightedLayer& wl = spec.weighted_at(i);
      const double std = effective_std(scheme, wl);
      std::vector<std::size_t> wshape =
          wl.is_conv ? std::vector<std::size_t>{wl.d, wl.c, wl.k, wl.k}
                     : std::vector<std::size_t>{wl.d, wl.c};
      params.layers[i].weight = sample_gaussian(wshape, 0.0, std, rng);
      params.layers[i].bias = Tensor({wl.d});  // b = 0
    } else if (const auto* act = std::get_if<ActSpec>(&layer)) {
      if (act->parametric()) {
        const std::size_t n =
            act->kind == ActKind::PReLUShared ? 1 : spec.act_channels(i);
        params.layers[i].slopes = Tensor::full({n}, act->a);
      }
    }
  }
  return params;
}

}  // namespace rectnet
