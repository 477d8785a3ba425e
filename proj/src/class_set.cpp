#include "semap/class_set.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "semap/errors.hpp"

namespace semap {

ClassSet::ClassSet(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) {
        throw InputError("class set needs at least two classes, got " +
                         std::to_string(classes_.size()));
    }
    std::set<std::uint16_t> seen;
    for (const ClassInfo& c : classes_) {
        if (!seen.insert(c.id).second) {
            throw InputError("duplicate class id " + std::to_string(c.id));
        }
    }
}

std::optional<int> ClassSet::index_of(std::uint16_t id) const {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].id == id) return static_cast<int>(i);
    }
    return std::nullopt;
}

bool ClassSet::operator==(const ClassSet& other) const {
    if (classes_.size() != other.classes_.size()) return false;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        const ClassInfo& a = classes_[i];
        const ClassInfo& b = other.classes_[i];
        if (a.id != b.id || a.name != b.name || a.color != b.color) return false;
    }
    return true;
}

ClassSet ClassSet::parse_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("class set JSON: ") + e.what(),
                         static_cast<std::size_t>(e.byte));
    }
    if (!doc.is_array()) {
        throw ParseError("class set JSON: expected a top-level array", 0);
    }
    std::vector<ClassInfo> classes;
    for (const auto& entry : doc) {
        ClassInfo info;
        if (!entry.contains("id") || !entry.contains("name")) {
            throw ParseError("class set JSON: entry missing \"id\" or \"name\"", 0);
        }
        const auto id = entry.at("id").get<std::int64_t>();
        if (id < 0 || id > 0xFFFE) {
            // 65535 is the unlabeled sentinel and can never name a class
            throw ParseError("class set JSON: id " + std::to_string(id) + " out of range", 0);
        }
        info.id = static_cast<std::uint16_t>(id);
        info.name = entry.at("name").get<std::string>();
        if (entry.contains("color")) {
            const auto& col = entry.at("color");
            if (!col.is_array() || col.size() != 3) {
                throw ParseError("class set JSON: color must be [r,g,b]", 0);
            }
            for (int k = 0; k < 3; ++k) {
                const auto v = col.at(static_cast<std::size_t>(k)).get<std::int64_t>();
                if (v < 0 || v > 255) {
                    throw ParseError("class set JSON: color channel out of range", 0);
                }
                info.color[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v);
            }
        }
        classes.push_back(std::move(info));
    }
    return ClassSet(std::move(classes));
}

std::string ClassSet::to_json() const {
    nlohmann::json doc = nlohmann::json::array();
    for (const ClassInfo& c : classes_) {
        doc.push_back({{"id", c.id},
                       {"name", c.name},
                       {"color", {c.color[0], c.color[1], c.color[2]}}});
    }
    return doc.dump(2) + "\n";
}

ClassSet ClassSet::load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open class set file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str());
}

void ClassSet::save_json(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write class set file: " + path);
    }
    out << to_json();
}

}  // namespace semap
