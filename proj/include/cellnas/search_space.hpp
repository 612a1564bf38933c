#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace cellnas {

enum class ConvType : std::uint8_t { Conv2D, InvBottleneckE2, GroupConvG2, GroupConvG4 };

inline constexpr std::size_t kNumConvTypes = 4;
inline constexpr std::uint32_t kKernels[] = {1, 3};
inline constexpr std::uint32_t kFilters[] = {16, 32, 48, 64};
inline constexpr std::uint32_t kRepeats[] = {1, 2, 4};
/// Distinct operator descriptors per cell: 4 conv types x 2 kernels x 4 filters x 2 skip x 3 repeats.
inline constexpr std::uint32_t kNumOperators = 192;

/// One decoded cell choice.
struct OperatorDescriptor {
    ConvType conv_type = ConvType::Conv2D;
    std::uint32_t kernel = 1;
    std::uint32_t filters = 16;
    bool skip = false;
    std::uint32_t repeats = 1;

    friend bool operator==(const OperatorDescriptor&, const OperatorDescriptor&) = default;
};

/// Mixed-radix decode with digit order (conv_type, kernel, filters, skip, repeats),
/// repeats being the least significant digit.
OperatorDescriptor decode_operator(std::uint32_t index);
std::uint32_t encode_operator(const OperatorDescriptor& op);

/// Label in the style "invertBotConE2_f48_k1_b4_noskip".
std::string describe(const OperatorDescriptor& op);
std::string_view conv_type_label(ConvType t);

/// Fixed-length vector of operator indices, one per cell.
struct Genome {
    std::vector<std::uint32_t> cells;

    Genome() = default;
    explicit Genome(std::vector<std::uint32_t> c) : cells(std::move(c)) {}
    Genome(std::initializer_list<std::uint32_t> c) : cells(c) {}

    std::size_t size() const noexcept { return cells.size(); }
    std::uint32_t operator[](std::size_t i) const { return cells[i]; }
    std::uint32_t& operator[](std::size_t i) { return cells[i]; }

    friend bool operator==(const Genome&, const Genome&) = default;
    friend auto operator<=>(const Genome& a, const Genome& b) { return a.cells <=> b.cells; }
};

struct GenomeHash {
    std::size_t operator()(const Genome& g) const noexcept;
};

/// 64-bit FNV-1a over the genome's indices, each as 4 little-endian bytes.
std::uint64_t fnv1a(const Genome& g);

/// "12,0,85,191,3,3,77"
std::string to_text(const Genome& g);
Genome parse_genome(std::string_view text);
/// Cell labels joined by '|'.
std::string describe(const Genome& g);

struct SpaceConfig {
    std::uint32_t n = 7;
    std::uint32_t head_filters = 32;
    std::uint32_t scale = 2;
    std::uint32_t eval_width = 480;
    std::uint32_t eval_height = 480;
    std::uint32_t input_channels = 1;

    void validate() const;
    friend bool operator==(const SpaceConfig&, const SpaceConfig&) = default;
};

/// Throws DomainError unless g has cfg.n cells, all in [0, 192).
void validate_genome(const Genome& g, const SpaceConfig& cfg);

/// 192^n, exact.
boost::multiprecision::cpp_int space_size(const SpaceConfig& cfg);

enum class LayerKind : std::uint8_t {
    HeadConv,
    CellConv,
    SkipProjection,
    ChannelAdapter,
    ResidualAdd,
    UpsampleConv,
    PixelShuffle,
};

std::string_view layer_kind_label(LayerKind k);

/// One node of the symbolic network. Conv layers carry kernel/groups;
/// ResidualAdd and PixelShuffle are zero-cost markers.
struct Layer {
    LayerKind kind = LayerKind::CellConv;
    std::uint32_t in_channels = 0;
    std::uint32_t out_channels = 0;
    std::uint32_t kernel = 0;
    std::uint32_t groups = 1;
    /// Index of the owning cell, or -1 outside the backbone.
    int cell = -1;

    bool is_conv() const noexcept {
        return kind != LayerKind::ResidualAdd && kind != LayerKind::PixelShuffle;
    }
};

/// Head conv, the n decoded cells, optional channel adapter, global residual add,
/// upsample conv and pixel shuffle, in execution order.
std::vector<Layer> build_architecture(const Genome& g, const SpaceConfig& cfg);

/// Layers of one cell fed with c_in channels. cell_index tags the layers.
std::vector<Layer> expand_cell(const OperatorDescriptor& op, std::uint32_t c_in, int cell_index = -1);

struct ConvCost {
    std::uint64_t params = 0;
    std::uint64_t multi_adds = 0;
};

/// params = k^2 * c_in * c_out / groups (no bias); multi_adds = params * out_w * out_h.
ConvCost conv_cost(std::uint32_t kernel, std::uint32_t c_in, std::uint32_t c_out, std::uint32_t groups,
                   std::uint32_t out_w, std::uint32_t out_h);

struct LayerCost {
    LayerKind kind;
    std::uint32_t in_channels;
    std::uint32_t out_channels;
    std::uint32_t kernel;
    std::uint64_t params;
    std::uint64_t multi_adds;
};

struct CostReport {
    std::uint64_t params = 0;
    std::uint64_t multi_adds = 0;
    std::vector<LayerCost> per_layer;
};

/// Costs an arbitrary layer list with every conv evaluated at width x height.
CostReport cost_of_layers(std::span<const Layer> layers, std::uint32_t width, std::uint32_t height);

CostReport cost_of(const Genome& g, const SpaceConfig& cfg);

/// Cost of a single cell fed with head_filters channels, evaluated at the LR resolution.
ConvCost cell_cost(std::uint32_t op_index, const SpaceConfig& cfg);

/// Plain conv stack [(kernel, c_in, c_out), ...] as generic layers, for baseline networks.
struct PlainConv {
    std::uint32_t kernel, c_in, c_out;
};
std::vector<Layer> plain_stack(std::span<const PlainConv> convs);

}  // namespace cellnas
