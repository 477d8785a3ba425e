#include "semap/ply_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "semap/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "ply_io reads and writes little-endian scalars via memcpy");

namespace semap {

namespace {

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<ScalarType> scalar_type_from_name(const std::string& name) {
    if (name == "char" || name == "int8") return ScalarType::I8;
    if (name == "uchar" || name == "uint8") return ScalarType::U8;
    if (name == "short" || name == "int16") return ScalarType::I16;
    if (name == "ushort" || name == "uint16") return ScalarType::U16;
    if (name == "int" || name == "int32") return ScalarType::I32;
    if (name == "uint" || name == "uint32") return ScalarType::U32;
    if (name == "float" || name == "float32") return ScalarType::F32;
    if (name == "double" || name == "float64") return ScalarType::F64;
    return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
    switch (t) {
        case ScalarType::I8:
        case ScalarType::U8:
            return 1;
        case ScalarType::I16:
        case ScalarType::U16:
            return 2;
        case ScalarType::I32:
        case ScalarType::U32:
        case ScalarType::F32:
            return 4;
        case ScalarType::F64:
            return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    ScalarType type = ScalarType::F32;
};

struct Header {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<Property> vertex_props;
    std::size_t body_offset = 0;  // first byte after end_header's newline
};

/// Reads one header line; the returned offset is where the line started.
std::string read_header_line(std::istream& in, std::size_t& line_offset) {
    line_offset = static_cast<std::size_t>(in.tellg());
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("unexpected end of file inside PLY header", line_offset);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

Header parse_header(std::istream& in) {
    Header h;
    std::size_t off = 0;
    if (read_header_line(in, off) != "ply") {
        throw ParseError("not a PLY file (missing magic)", off);
    }

    bool format_seen = false;
    bool in_vertex_element = false;
    bool vertex_seen = false;
    bool trailing_element_seen = false;
    while (true) {
        const std::string line = read_header_line(in, off);
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
        if (keyword == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "ascii") {
                h.binary = false;
            } else if (fmt == "binary_little_endian") {
                h.binary = true;
            } else {
                throw ParseError("unsupported PLY format \"" + fmt + "\"", off);
            }
            format_seen = true;
        } else if (keyword == "element") {
            std::string name;
            std::size_t count = 0;
            ls >> name >> count;
            if (ls.fail()) {
                throw ParseError("malformed element line", off);
            }
            if (name == "vertex") {
                if (vertex_seen) throw ParseError("duplicate vertex element", off);
                vertex_seen = true;
                in_vertex_element = true;
                h.vertex_count = count;
            } else {
                if (!vertex_seen) {
                    // vertices must come first or we cannot locate them in a
                    // binary body without understanding every other element
                    throw ParseError("element \"" + name + "\" precedes vertex element", off);
                }
                in_vertex_element = false;
                trailing_element_seen = true;
            }
        } else if (keyword == "property") {
            if (!in_vertex_element) {
                if (!trailing_element_seen) {
                    throw ParseError("property outside any element", off);
                }
                continue;  // property of a trailing element we ignore
            }
            std::string type_name;
            ls >> type_name;
            if (type_name == "list") {
                throw ParseError("list property on vertex element is not supported", off);
            }
            const auto type = scalar_type_from_name(type_name);
            if (!type) {
                throw ParseError("unknown property type \"" + type_name + "\"", off);
            }
            Property p;
            p.type = *type;
            ls >> p.name;
            if (p.name.empty()) {
                throw ParseError("property without a name", off);
            }
            h.vertex_props.push_back(std::move(p));
        } else {
            throw ParseError("unrecognized header keyword \"" + keyword + "\"", off);
        }
    }
    if (!format_seen) throw ParseError("header has no format line", off);
    if (!vertex_seen) throw ParseError("header has no vertex element", off);
    h.body_offset = static_cast<std::size_t>(in.tellg());
    return h;
}

double scalar_to_double(ScalarType t, const unsigned char* p) {
    switch (t) {
        case ScalarType::I8: {
            std::int8_t v;
            std::memcpy(&v, p, 1);
            return static_cast<double>(v);
        }
        case ScalarType::U8: {
            std::uint8_t v;
            std::memcpy(&v, p, 1);
            return static_cast<double>(v);
        }
        case ScalarType::I16: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            return static_cast<double>(v);
        }
        case ScalarType::U16: {
            std::uint16_t v;
            std::memcpy(&v, p, 2);
            return static_cast<double>(v);
        }
        case ScalarType::I32: {
            std::int32_t v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        case ScalarType::U32: {
            std::uint32_t v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        case ScalarType::F32: {
            float v;
            std::memcpy(&v, p, 4);
            return static_cast<double>(v);
        }
        case ScalarType::F64: {
            double v;
            std::memcpy(&v, p, 8);
            return v;
        }
    }
    return 0.0;
}

struct PropertyLayout {
    int x = -1, y = -1, z = -1;
    int red = -1, green = -1, blue = -1;
    int label = -1;

    bool has_color() const { return red >= 0 && green >= 0 && blue >= 0; }
};

PropertyLayout resolve_layout(const Header& h) {
    PropertyLayout lay;
    for (std::size_t i = 0; i < h.vertex_props.size(); ++i) {
        const int idx = static_cast<int>(i);
        const std::string& name = h.vertex_props[i].name;
        if (name == "x") lay.x = idx;
        else if (name == "y") lay.y = idx;
        else if (name == "z") lay.z = idx;
        else if (name == "red") lay.red = idx;
        else if (name == "green") lay.green = idx;
        else if (name == "blue") lay.blue = idx;
        else if (name == "label") lay.label = idx;
    }
    if (lay.x < 0 || lay.y < 0 || lay.z < 0) {
        throw ParseError("vertex element lacks x, y, z properties", 0);
    }
    return lay;
}

LabeledPointCloud read_body(std::istream& in, const Header& h, const PropertyLayout& lay) {
    const std::size_t n_props = h.vertex_props.size();
    LabeledPointCloud cloud;
    cloud.points.resize(3, static_cast<Eigen::Index>(h.vertex_count));
    if (lay.label >= 0) cloud.labels.reserve(h.vertex_count);
    if (lay.has_color()) cloud.colors.reserve(h.vertex_count);

    std::vector<double> row(n_props, 0.0);
    if (h.binary) {
        std::vector<std::size_t> offsets(n_props, 0);
        std::size_t record_size = 0;
        for (std::size_t i = 0; i < n_props; ++i) {
            offsets[i] = record_size;
            record_size += scalar_size(h.vertex_props[i].type);
        }
        std::vector<unsigned char> record(record_size);
        for (std::size_t v = 0; v < h.vertex_count; ++v) {
            in.read(reinterpret_cast<char*>(record.data()),
                    static_cast<std::streamsize>(record_size));
            if (static_cast<std::size_t>(in.gcount()) != record_size) {
                throw ParseError("truncated PLY body at vertex " + std::to_string(v),
                                 h.body_offset + v * record_size +
                                     static_cast<std::size_t>(in.gcount()));
            }
            for (std::size_t i = 0; i < n_props; ++i) {
                row[i] = scalar_to_double(h.vertex_props[i].type, record.data() + offsets[i]);
            }
            cloud.points(0, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.x)];
            cloud.points(1, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.y)];
            cloud.points(2, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.z)];
            if (lay.label >= 0) {
                cloud.labels.push_back(
                    static_cast<std::uint16_t>(row[static_cast<std::size_t>(lay.label)]));
            }
            if (lay.has_color()) {
                cloud.colors.push_back(
                    {static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.red)]),
                     static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.green)]),
                     static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.blue)])});
            }
        }
    } else {
        for (std::size_t v = 0; v < h.vertex_count; ++v) {
            for (std::size_t i = 0; i < n_props; ++i) {
                if (!(in >> row[i])) {
                    throw ParseError("truncated ascii PLY body at vertex " + std::to_string(v),
                                     static_cast<std::size_t>(std::max<std::streamoff>(
                                         0, static_cast<std::streamoff>(in.tellg()))));
                }
            }
            cloud.points(0, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.x)];
            cloud.points(1, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.y)];
            cloud.points(2, static_cast<Eigen::Index>(v)) = row[static_cast<std::size_t>(lay.z)];
            if (lay.label >= 0) {
                cloud.labels.push_back(
                    static_cast<std::uint16_t>(row[static_cast<std::size_t>(lay.label)]));
            }
            if (lay.has_color()) {
                cloud.colors.push_back(
                    {static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.red)]),
                     static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.green)]),
                     static_cast<std::uint8_t>(row[static_cast<std::size_t>(lay.blue)])});
            }
        }
    }
    return cloud;
}

}  // namespace

LabeledPointCloud load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open PLY file: " + path);
    }
    const Header h = parse_header(in);
    const PropertyLayout lay = resolve_layout(h);
    return read_body(in, h, lay);
}

void save_ply(const LabeledPointCloud& cloud, const std::string& path) {
    cloud.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write PLY file: " + path);
    }
    const bool with_color = cloud.has_colors();
    const bool with_label = cloud.has_labels();

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << cloud.n() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (with_color) {
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    if (with_label) {
        out << "property ushort label\n";
    }
    out << "end_header\n";

    for (Eigen::Index i = 0; i < cloud.n(); ++i) {
        const float xyz[3] = {static_cast<float>(cloud.points(0, i)),
                              static_cast<float>(cloud.points(1, i)),
                              static_cast<float>(cloud.points(2, i))};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        const std::size_t si = static_cast<std::size_t>(i);
        if (with_color) {
            out.write(reinterpret_cast<const char*>(cloud.colors[si].data()), 3);
        }
        if (with_label) {
            const std::uint16_t lab = cloud.labels[si];
            out.write(reinterpret_cast<const char*>(&lab), sizeof(lab));
        }
    }
    if (!out) {
        throw InputError("write failed for PLY file: " + path);
    }
}

}  // namespace semap
