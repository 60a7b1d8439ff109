#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace sdt {

struct GradcheckOptions {
    std::uint64_t seed = 0;
    std::size_t length = 3;   // N
    std::size_t d_model = 8;  // d
    std::size_t heads = 2;
    std::size_t d_ff = 8;
    std::size_t num_classes = 3;
    std::array<std::size_t, 3> feature_dims{6, 5, 4};
    double tau = 2.0;
    double step = 1e-5;
    double tolerance = 1e-4;
    bool kl_backprop_teacher = false;
};

struct GradcheckEntry {
    std::string name;
    std::size_t size = 0;
    double relative_error = 0.0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;  // one per parameter tensor
    double max_error = 0.0;
    std::string worst;
    bool passed = false;
    double seconds = 0.0;
};

/// Central-difference check of dL/dtheta for every parameter tensor of a
/// random tiny model with dropout off. With the teacher detached, its
/// softened targets are frozen at the base point so the numeric and analytic
/// derivatives describe the same function. Relative error per tensor is
/// ||g_a - g_n|| / max(||g_a||, ||g_n||, 1e-10).
GradcheckReport gradcheck(const GradcheckOptions& options);

nlohmann::json to_json(const GradcheckReport& report);

}  // namespace sdt
