#ifndef DMTLR_CHECKPOINT_HPP
#define DMTLR_CHECKPOINT_HPP

#include <string>

#include "dmtlr/backbone.hpp"
#include "dmtlr/regressor.hpp"

namespace dmtlr {

// Versioned binary container, magic "DMTLR1", little-endian throughout.
// Backbone files carry the spec, frozen flag, source-task report and one
// "w_f" section; model files embed the backbone and add "w_FT", "w_MLP" and
// "w_r" sections. Section payloads are order-stable 64-bit reals.
void save_backbone(const PretrainedBackbone& backbone, const std::string& path);
PretrainedBackbone load_backbone(const std::string& path);

void save_model(const DMTLRModel& model, const std::string& path);
DMTLRModel load_model(const std::string& path);

}  // namespace dmtlr

#endif  // DMTLR_CHECKPOINT_HPP
