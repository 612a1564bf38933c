#pragma once
// Known 7-cell genomes, top cell first, and baseline conv stacks.

#include <array>
#include <cstdio>
#include <vector>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cellnas/search_space.hpp"

namespace fixtures {

inline constexpr std::array<std::string_view, 7> kModelA = {
    "invertBotConE2_f48_k1_b4_noskip", "invertBotConE2_f16_k3_b4_noskip", "invertBotConE2_f16_k1_b4_isskip",
    "groupConG2_f16_k1_b1_noskip",     "invertBotConE2_f64_k3_b4_noskip", "groupConG4_f64_k1_b1_isskip",
    "invertBotConE2_f48_k3_b4_noskip",
};

inline constexpr std::array<std::string_view, 7> kModelB = {
    "groupConG2_f16_k1_b2_isskip",     "groupConG2_f48_k1_b2_noskip",     "conv_f64_k1_b2_isskip",
    "invertBotConE2_f48_k3_b4_isskip", "invertBotConE2_f32_k3_b4_noskip", "invertBotConE2_f16_k1_b1_noskip",
    "invertBotConE2_f64_k3_b4_noskip",
};

// Reference costs at 480x480 LR input.
inline constexpr double kModelAParams = 1039e3;
inline constexpr double kModelAMultiAdds = 238.6e9;

/// Parses "type_fF_kK_bB_skip" independently of the library's printer.
inline cellnas::OperatorDescriptor parse_label(std::string_view label) {
    using cellnas::ConvType;
    cellnas::OperatorDescriptor op;
    const auto cut = label.find("_f");
    const std::string_view type = label.substr(0, cut);
    if (type == "conv") op.conv_type = ConvType::Conv2D;
    else if (type == "invertBotConE2") op.conv_type = ConvType::InvBottleneckE2;
    else if (type == "groupConG2") op.conv_type = ConvType::GroupConvG2;
    else if (type == "groupConG4") op.conv_type = ConvType::GroupConvG4;
    else throw std::invalid_argument("bad label type");
    unsigned f = 0, k = 0, b = 0;
    char skip[16] = {};
    const std::string rest(label.substr(cut));
    if (std::sscanf(rest.c_str(), "_f%u_k%u_b%u_%15s", &f, &k, &b, skip) != 4) throw std::invalid_argument("bad label");
    op.filters = f;
    op.kernel = k;
    op.repeats = b;
    op.skip = std::string_view(skip) == "isskip";
    return op;
}

template <std::size_t N>
cellnas::Genome genome_from_labels(const std::array<std::string_view, N>& labels) {
    cellnas::Genome g;
    for (auto l : labels) g.cells.push_back(cellnas::encode_operator(parse_label(l)));
    return g;
}

inline constexpr cellnas::PlainConv kSrcnn[] = {{9, 1, 64}, {5, 64, 32}, {5, 32, 1}};

inline std::vector<cellnas::PlainConv> vdsr_stack() {
    std::vector<cellnas::PlainConv> v{{3, 1, 64}};
    for (int i = 0; i < 18; ++i) v.push_back({3, 64, 64});
    v.push_back({3, 64, 1});
    return v;
}

}  // namespace fixtures
