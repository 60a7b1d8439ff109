#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace sdt {

enum class Modality : std::uint8_t { Text = 0, Audio = 1, Visual = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::Text, Modality::Audio, Modality::Visual};

constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

constexpr char tag_of(Modality m) {
    constexpr std::array<char, 3> tags{'t', 'a', 'v'};
    return tags[index_of(m)];
}

constexpr std::string_view name_of(Modality m) {
    constexpr std::array<std::string_view, 3> names{"text", "audio", "visual"};
    return names[index_of(m)];
}

/// Parses "t"/"a"/"v" or "text"/"audio"/"visual".
Modality parse_modality(std::string_view s);

/// Subset of {t, a, v}, iterated in canonical t, a, v order.
class ModalitySet {
public:
    constexpr ModalitySet() = default;
    static constexpr ModalitySet all() { return ModalitySet(0b111); }
    /// Parses e.g. "tav", "t", "av".
    static ModalitySet parse(std::string_view s);

    constexpr bool contains(Modality m) const { return (bits_ >> index_of(m)) & 1u; }
    constexpr void insert(Modality m) { bits_ |= static_cast<std::uint8_t>(1u << index_of(m)); }
    constexpr std::size_t size() const { return (bits_ & 1u) + ((bits_ >> 1) & 1u) + ((bits_ >> 2) & 1u); }
    constexpr bool empty() const { return bits_ == 0; }
    std::string str() const;
    constexpr bool operator==(const ModalitySet&) const = default;

    template <typename F>
    void for_each(F&& fn) const {
        for (Modality m : kModalities)
            if (contains(m)) fn(m);
    }

private:
    constexpr explicit ModalitySet(std::uint8_t bits) : bits_(bits) {}
    std::uint8_t bits_ = 0;
};

}  // namespace sdt
