#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace semap {

/// One semantic class: numeric id (as stored in point labels), display name,
/// and an RGB color used when exporting colored geometry.
struct ClassInfo {
    std::uint16_t id = 0;
    std::string name;
    std::array<std::uint8_t, 3> color{128, 128, 128};
};

/// Ordered set of semantic classes. Order is significant: probability
/// vectors, classifier lists, and serialized count arrays all use this
/// order, and argmax ties break toward the lowest position.
class ClassSet {
public:
    ClassSet() = default;

    /// Ids must be unique and at least two classes are required.
    explicit ClassSet(std::vector<ClassInfo> classes);

    int size() const { return static_cast<int>(classes_.size()); }
    const ClassInfo& at(int index) const { return classes_.at(static_cast<std::size_t>(index)); }
    const std::vector<ClassInfo>& classes() const { return classes_; }

    /// Position of a class id in the set, or nullopt for unknown ids.
    std::optional<int> index_of(std::uint16_t id) const;
    bool contains(std::uint16_t id) const { return index_of(id).has_value(); }

    bool operator==(const ClassSet& other) const;

    /// JSON side file: [{"id": 1, "name": "floor", "color": [r,g,b]}, ...].
    /// Color is optional in the file and defaults to grey.
    static ClassSet load_json(const std::string& path);
    void save_json(const std::string& path) const;

    static ClassSet parse_json(const std::string& text);
    std::string to_json() const;

private:
    std::vector<ClassInfo> classes_;
};

}  // namespace semap
