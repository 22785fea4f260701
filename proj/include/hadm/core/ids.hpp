#pragma once

#include <compare>
#include <cstddef>
#include <functional>

namespace hadm::core {

/// Dense index into one of the problem's symbol tables. The tag keeps state,
/// action and observation indices from being mixed up.
template <typename Tag>
struct Index {
    std::size_t value = 0;

    constexpr Index() = default;
    constexpr explicit Index(std::size_t v) : value(v) {}

    friend constexpr auto operator<=>(Index, Index) = default;
};

using StateId = Index<struct StateTag>;
using ActionId = Index<struct ActionTag>;
using ObservationId = Index<struct ObservationTag>;

}  // namespace hadm::core

template <typename Tag>
struct std::hash<hadm::core::Index<Tag>> {
    std::size_t operator()(hadm::core::Index<Tag> id) const noexcept {
        return std::hash<std::size_t>{}(id.value);
    }
};
