#include "cellnas/search_space.hpp"

#include <algorithm>
#include <charconv>

#include "cellnas/errors.hpp"

namespace cellnas {

namespace {

constexpr std::uint32_t kNumKernels = std::size(kKernels);
constexpr std::uint32_t kNumFilters = std::size(kFilters);
constexpr std::uint32_t kNumSkip = 2;
constexpr std::uint32_t kNumRepeats = std::size(kRepeats);

template <std::size_t N>
std::uint32_t digit_of(const std::uint32_t (&table)[N], std::uint32_t value, const char* field) {
    const auto* it = std::find(std::begin(table), std::end(table), value);
    if (it == std::end(table)) throw DomainError(std::string("encode_operator: invalid ") + field);
    return static_cast<std::uint32_t>(it - std::begin(table));
}

std::uint32_t groups_of(ConvType t) {
    switch (t) {
        case ConvType::GroupConvG2: return 2;
        case ConvType::GroupConvG4: return 4;
        default: return 1;
    }
}

}  // namespace

OperatorDescriptor decode_operator(std::uint32_t index) {
    if (index >= kNumOperators)
        throw DomainError("decode_operator: index " + std::to_string(index) + " outside [0, 192)");
    OperatorDescriptor op;
    op.repeats = kRepeats[index % kNumRepeats];
    index /= kNumRepeats;
    op.skip = (index % kNumSkip) == 1;
    index /= kNumSkip;
    op.filters = kFilters[index % kNumFilters];
    index /= kNumFilters;
    op.kernel = kKernels[index % kNumKernels];
    index /= kNumKernels;
    op.conv_type = static_cast<ConvType>(index);
    return op;
}

std::uint32_t encode_operator(const OperatorDescriptor& op) {
    const auto type = static_cast<std::uint32_t>(op.conv_type);
    if (type >= kNumConvTypes) throw DomainError("encode_operator: invalid conv_type");
    std::uint32_t index = type;
    index = index * kNumKernels + digit_of(kKernels, op.kernel, "kernel");
    index = index * kNumFilters + digit_of(kFilters, op.filters, "filters");
    index = index * kNumSkip + (op.skip ? 1u : 0u);
    index = index * kNumRepeats + digit_of(kRepeats, op.repeats, "repeats");
    return index;
}

std::string_view conv_type_label(ConvType t) {
    switch (t) {
        case ConvType::Conv2D: return "conv";
        case ConvType::InvBottleneckE2: return "invertBotConE2";
        case ConvType::GroupConvG2: return "groupConG2";
        case ConvType::GroupConvG4: return "groupConG4";
    }
    return "?";
}

std::string describe(const OperatorDescriptor& op) {
    std::string s(conv_type_label(op.conv_type));
    s += "_f" + std::to_string(op.filters);
    s += "_k" + std::to_string(op.kernel);
    s += "_b" + std::to_string(op.repeats);
    s += op.skip ? "_isskip" : "_noskip";
    return s;
}

std::size_t GenomeHash::operator()(const Genome& g) const noexcept {
    return static_cast<std::size_t>(fnv1a(g));
}

std::uint64_t fnv1a(const Genome& g) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint32_t idx : g.cells) {
        for (int b = 0; b < 4; ++b) {
            h ^= (idx >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string to_text(const Genome& g) {
    std::string s;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(g[i]);
    }
    return s;
}

Genome parse_genome(std::string_view text) {
    Genome g;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view tok = text.substr(pos, end - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        std::uint32_t v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size())
            throw DomainError("parse_genome: bad token '" + std::string(tok) + "'");
        if (v >= kNumOperators) throw DomainError("parse_genome: index " + std::to_string(v) + " out of range");
        g.cells.push_back(v);
        pos = end + 1;
    }
    return g;
}

std::string describe(const Genome& g) {
    std::string s;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) s += '|';
        s += describe(decode_operator(g[i]));
    }
    return s;
}

void SpaceConfig::validate() const {
    if (n < 1) throw ConfigError("space.n must be >= 1");
    if (scale < 1) throw ConfigError("space.scale must be >= 1");
    if (eval_width < 1 || eval_height < 1) throw ConfigError("space eval dimensions must be >= 1");
    if (head_filters < 1 || input_channels < 1) throw ConfigError("space channel counts must be >= 1");
    if (head_filters % 4 != 0) throw ConfigError("space.head_filters must be divisible by 4 (grouped convs)");
}

void validate_genome(const Genome& g, const SpaceConfig& cfg) {
    if (g.size() != cfg.n)
        throw DomainError("genome has " + std::to_string(g.size()) + " cells, expected " + std::to_string(cfg.n));
    for (std::uint32_t idx : g.cells)
        if (idx >= kNumOperators) throw DomainError("genome index " + std::to_string(idx) + " out of range");
}

boost::multiprecision::cpp_int space_size(const SpaceConfig& cfg) {
    boost::multiprecision::cpp_int size = 1;
    for (std::uint32_t i = 0; i < cfg.n; ++i) size *= kNumOperators;
    return size;
}

std::string_view layer_kind_label(LayerKind k) {
    switch (k) {
        case LayerKind::HeadConv: return "head_conv";
        case LayerKind::CellConv: return "cell_conv";
        case LayerKind::SkipProjection: return "skip_projection";
        case LayerKind::ChannelAdapter: return "channel_adapter";
        case LayerKind::ResidualAdd: return "residual_add";
        case LayerKind::UpsampleConv: return "upsample_conv";
        case LayerKind::PixelShuffle: return "pixel_shuffle";
    }
    return "?";
}

std::vector<Layer> expand_cell(const OperatorDescriptor& op, std::uint32_t c_in, int cell_index) {
    std::vector<Layer> layers;
    auto conv = [&](std::uint32_t k, std::uint32_t in, std::uint32_t out, std::uint32_t groups) {
        layers.push_back(Layer{LayerKind::CellConv, in, out, k, groups, cell_index});
    };
    std::uint32_t in = c_in;
    for (std::uint32_t b = 0; b < op.repeats; ++b) {
        if (op.conv_type == ConvType::InvBottleneckE2) {
            const std::uint32_t wide = 2 * in;
            conv(1, in, wide, 1);
            conv(op.kernel, wide, wide, 1);
            conv(1, wide, op.filters, 1);
        } else {
            conv(op.kernel, in, op.filters, groups_of(op.conv_type));
        }
        in = op.filters;
    }
    if (op.skip) {
        if (c_in != op.filters)
            layers.push_back(Layer{LayerKind::SkipProjection, c_in, op.filters, 1, 1, cell_index});
        layers.push_back(Layer{LayerKind::ResidualAdd, op.filters, op.filters, 0, 1, cell_index});
    }
    return layers;
}

std::vector<Layer> build_architecture(const Genome& g, const SpaceConfig& cfg) {
    validate_genome(g, cfg);
    std::vector<Layer> layers;
    layers.push_back(Layer{LayerKind::HeadConv, cfg.input_channels, cfg.head_filters, 3, 1, -1});
    std::uint32_t channels = cfg.head_filters;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const OperatorDescriptor op = decode_operator(g[i]);
        auto cell = expand_cell(op, channels, static_cast<int>(i));
        layers.insert(layers.end(), cell.begin(), cell.end());
        channels = op.filters;
    }
    if (channels != cfg.head_filters) {
        layers.push_back(Layer{LayerKind::ChannelAdapter, channels, cfg.head_filters, 1, 1, -1});
    }
    layers.push_back(Layer{LayerKind::ResidualAdd, cfg.head_filters, cfg.head_filters, 0, 1, -1});
    const std::uint32_t up = cfg.scale * cfg.scale * cfg.input_channels;
    layers.push_back(Layer{LayerKind::UpsampleConv, cfg.head_filters, up, 3, 1, -1});
    layers.push_back(Layer{LayerKind::PixelShuffle, up, cfg.input_channels, 0, 1, -1});
    return layers;
}

ConvCost conv_cost(std::uint32_t kernel, std::uint32_t c_in, std::uint32_t c_out, std::uint32_t groups,
                   std::uint32_t out_w, std::uint32_t out_h) {
    if (kernel < 1 || c_in < 1 || c_out < 1 || groups < 1 || out_w < 1 || out_h < 1)
        throw DomainError("conv_cost: all arguments must be >= 1");
    if (c_in % groups != 0 || c_out % groups != 0)
        throw DomainError("conv_cost: groups must divide both channel counts");
    ConvCost c;
    c.params = std::uint64_t{kernel} * kernel * c_in * c_out / groups;
    c.multi_adds = c.params * out_w * out_h;
    return c;
}

CostReport cost_of_layers(std::span<const Layer> layers, std::uint32_t width, std::uint32_t height) {
    CostReport report;
    report.per_layer.reserve(layers.size());
    for (const Layer& l : layers) {
        ConvCost c;
        if (l.is_conv()) c = conv_cost(l.kernel, l.in_channels, l.out_channels, l.groups, width, height);
        report.per_layer.push_back({l.kind, l.in_channels, l.out_channels, l.kernel, c.params, c.multi_adds});
        report.params += c.params;
        report.multi_adds += c.multi_adds;
    }
    return report;
}

CostReport cost_of(const Genome& g, const SpaceConfig& cfg) {
    const auto layers = build_architecture(g, cfg);
    return cost_of_layers(layers, cfg.eval_width, cfg.eval_height);
}

ConvCost cell_cost(std::uint32_t op_index, const SpaceConfig& cfg) {
    const auto layers = expand_cell(decode_operator(op_index), cfg.head_filters);
    const auto report = cost_of_layers(layers, cfg.eval_width, cfg.eval_height);
    return {report.params, report.multi_adds};
}

std::vector<Layer> plain_stack(std::span<const PlainConv> convs) {
    std::vector<Layer> layers;
    for (const auto& c : convs) layers.push_back(Layer{LayerKind::CellConv, c.c_in, c.c_out, c.kernel, 1, -1});
    return layers;
}

}  // namespace cellnas
