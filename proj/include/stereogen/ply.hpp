#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stereogen/common.hpp"

namespace stereogen::ply {

enum class Format { kAscii, kBinaryLittleEndian };

enum class Type { kChar, kUChar, kShort, kUShort, kInt, kUInt, kFloat, kDouble };

inline Type type_from_name(const std::string& name) {
    if (name == "char" || name == "int8") return Type::kChar;
    if (name == "uchar" || name == "uint8") return Type::kUChar;
    if (name == "short" || name == "int16") return Type::kShort;
    if (name == "ushort" || name == "uint16") return Type::kUShort;
    if (name == "int" || name == "int32") return Type::kInt;
    if (name == "uint" || name == "uint32") return Type::kUInt;
    if (name == "float" || name == "float32") return Type::kFloat;
    if (name == "double" || name == "float64") return Type::kDouble;
    throw ParseError("unknown PLY property type '" + name + "'");
}

inline std::size_t type_size(Type t) {
    switch (t) {
        case Type::kChar:
        case Type::kUChar: return 1;
        case Type::kShort:
        case Type::kUShort: return 2;
        case Type::kInt:
        case Type::kUInt:
        case Type::kFloat: return 4;
        case Type::kDouble: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    Type type = Type::kFloat;
    bool is_list = false;
    Type count_type = Type::kUChar;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

/// Parsed element data. Scalar properties become double columns; list
/// properties become per-row index vectors. Columns filtered out by the
/// read predicate stay empty.
struct ElementData {
    Element schema;
    std::vector<std::vector<double>> columns;            // [property][row]
    std::vector<std::vector<std::vector<double>>> lists; // [property][row][k]

    int property_index(const std::string& name) const {
        for (std::size_t i = 0; i < schema.properties.size(); ++i) {
            if (schema.properties[i].name == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    }
    const std::vector<double>* column(const std::string& name) const {
        const int i = property_index(name);
        if (i < 0 || columns[i].empty()) {
            return nullptr;
        }
        return &columns[i];
    }
};

struct File {
    Format format = Format::kBinaryLittleEndian;
    std::vector<ElementData> elements;

    const ElementData* element(const std::string& name) const {
        for (const auto& e : elements) {
            if (e.schema.name == name) {
                return &e;
            }
        }
        return nullptr;
    }
};

using KeepPredicate = std::function<bool(const std::string& element, const std::string& property)>;

namespace detail {

inline double decode_value(const unsigned char* buf, Type t) {
    switch (t) {
        case Type::kChar: return static_cast<double>(static_cast<std::int8_t>(buf[0]));
        case Type::kUChar: return static_cast<double>(buf[0]);
        case Type::kShort: {
            std::int16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case Type::kUShort: {
            std::uint16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case Type::kInt: {
            std::int32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case Type::kUInt: {
            std::uint32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case Type::kFloat: {
            float v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case Type::kDouble: {
            double v;
            std::memcpy(&v, buf, 8);
            return v;
        }
    }
    return 0.0;
}

inline double read_binary_value(std::istream& in, Type t, const std::string& ctx) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(type_size(t)))) {
        throw ParseError("truncated PLY body in " + ctx);
    }
    return decode_value(buf, t);
}

inline double read_ascii_value(std::istream& in, const std::string& ctx) {
    double v;
    if (!(in >> v)) {
        throw ParseError("truncated PLY body in " + ctx);
    }
    return v;
}

inline void write_binary_value(std::ostream& out, Type t, double value) {
    switch (t) {
        case Type::kChar: {
            auto v = static_cast<std::int8_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 1);
            break;
        }
        case Type::kUChar: {
            auto v = static_cast<std::uint8_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 1);
            break;
        }
        case Type::kShort: {
            auto v = static_cast<std::int16_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 2);
            break;
        }
        case Type::kUShort: {
            auto v = static_cast<std::uint16_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 2);
            break;
        }
        case Type::kInt: {
            auto v = static_cast<std::int32_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 4);
            break;
        }
        case Type::kUInt: {
            auto v = static_cast<std::uint32_t>(value);
            out.write(reinterpret_cast<const char*>(&v), 4);
            break;
        }
        case Type::kFloat: {
            auto v = static_cast<float>(value);
            out.write(reinterpret_cast<const char*>(&v), 4);
            break;
        }
        case Type::kDouble: {
            out.write(reinterpret_cast<const char*>(&value), 8);
            break;
        }
    }
}

}  // namespace detail

/// Reads a PLY file (ascii or binary little-endian). `keep` filters which
/// scalar columns are retained; list properties are always parsed (their
/// lengths are data-dependent, so they cannot be skipped).
inline File read(const std::filesystem::path& path, const KeepPredicate& keep = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::string ctx = path.string();

    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty PLY file " + ctx);
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "ply") {
        throw ParseError("missing 'ply' magic in " + ctx);
    }

    File file;
    bool format_seen = false;
    std::vector<Element> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream ss(line);
        std::string keyword;
        ss >> keyword;
        if (keyword.empty() || keyword == "comment" || keyword == "obj_info") {
            continue;
        }
        if (keyword == "format") {
            std::string fmt, version;
            ss >> fmt >> version;
            if (fmt == "ascii") {
                file.format = Format::kAscii;
            } else if (fmt == "binary_little_endian") {
                file.format = Format::kBinaryLittleEndian;
            } else if (fmt == "binary_big_endian") {
                throw ParseError("big-endian PLY is not supported: " + ctx);
            } else {
                throw ParseError("unknown PLY format '" + fmt + "' in " + ctx);
            }
            format_seen = true;
        } else if (keyword == "element") {
            Element e;
            if (!(ss >> e.name >> e.count)) {
                throw ParseError("malformed element line in " + ctx);
            }
            elements.push_back(std::move(e));
        } else if (keyword == "property") {
            if (elements.empty()) {
                throw ParseError("property before element in " + ctx);
            }
            std::string t1;
            ss >> t1;
            Property p;
            if (t1 == "list") {
                std::string count_type, value_type;
                if (!(ss >> count_type >> value_type >> p.name)) {
                    throw ParseError("malformed list property in " + ctx);
                }
                p.is_list = true;
                p.count_type = type_from_name(count_type);
                p.type = type_from_name(value_type);
            } else {
                p.type = type_from_name(t1);
                if (!(ss >> p.name)) {
                    throw ParseError("malformed property line in " + ctx);
                }
            }
            elements.back().properties.push_back(std::move(p));
        } else if (keyword == "end_header") {
            break;
        } else {
            throw ParseError("unexpected header keyword '" + keyword + "' in " + ctx);
        }
    }
    if (!format_seen) {
        throw ParseError("PLY header missing format line in " + ctx);
    }

    for (const Element& schema : elements) {
        ElementData data;
        data.schema = schema;
        data.columns.resize(schema.properties.size());
        data.lists.resize(schema.properties.size());
        std::vector<bool> wanted(schema.properties.size());
        for (std::size_t p = 0; p < schema.properties.size(); ++p) {
            wanted[p] = !keep || keep(schema.name, schema.properties[p].name);
            if (wanted[p]) {
                if (schema.properties[p].is_list) {
                    data.lists[p].reserve(schema.count);
                } else {
                    data.columns[p].reserve(schema.count);
                }
            }
        }
        // Fast path for binary elements without lists (splat files routinely
        // carry tens of scalar properties per vertex): whole rows are read at
        // once and only the wanted columns decoded.
        const bool fixed_rows =
            file.format == Format::kBinaryLittleEndian &&
            std::none_of(schema.properties.begin(), schema.properties.end(),
                         [](const Property& p) { return p.is_list; });
        if (fixed_rows) {
            std::vector<std::size_t> offsets(schema.properties.size());
            std::size_t row_size = 0;
            for (std::size_t p = 0; p < schema.properties.size(); ++p) {
                offsets[p] = row_size;
                row_size += type_size(schema.properties[p].type);
            }
            std::vector<unsigned char> row(row_size);
            for (std::size_t r = 0; r < schema.count; ++r) {
                if (!in.read(reinterpret_cast<char*>(row.data()),
                             static_cast<std::streamsize>(row_size))) {
                    throw ParseError("truncated PLY body in " + ctx);
                }
                for (std::size_t p = 0; p < schema.properties.size(); ++p) {
                    if (wanted[p]) {
                        data.columns[p].push_back(
                            detail::decode_value(row.data() + offsets[p],
                                                 schema.properties[p].type));
                    }
                }
            }
            file.elements.push_back(std::move(data));
            continue;
        }

        for (std::size_t row = 0; row < schema.count; ++row) {
            for (std::size_t p = 0; p < schema.properties.size(); ++p) {
                const Property& prop = schema.properties[p];
                if (prop.is_list) {
                    const double count_value =
                        file.format == Format::kAscii
                            ? detail::read_ascii_value(in, ctx)
                            : detail::read_binary_value(in, prop.count_type, ctx);
                    if (count_value < 0.0 || count_value > 1e7) {
                        throw ParseError("implausible list length in " + ctx);
                    }
                    const auto n = static_cast<std::size_t>(count_value);
                    std::vector<double> entries(n);
                    for (std::size_t k = 0; k < n; ++k) {
                        entries[k] = file.format == Format::kAscii
                                         ? detail::read_ascii_value(in, ctx)
                                         : detail::read_binary_value(in, prop.type, ctx);
                    }
                    if (wanted[p]) {
                        data.lists[p].push_back(std::move(entries));
                    }
                } else {
                    const double v = file.format == Format::kAscii
                                         ? detail::read_ascii_value(in, ctx)
                                         : detail::read_binary_value(in, prop.type, ctx);
                    if (wanted[p]) {
                        data.columns[p].push_back(v);
                    }
                }
            }
        }
        file.elements.push_back(std::move(data));
    }
    return file;
}

}  // namespace stereogen::ply
