#include "lfa/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

namespace lfa::npy {

static_assert(std::endian::native == std::endian::little, "NPY payloads are written in host order");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

[[noreturn]] void header_error(const std::string& what) { throw Error("HeaderParse", what); }

}  // namespace

std::string encode(const Matrix& m, Dtype dtype) {
    std::ostringstream dict;
    dict << "{'descr': '" << (dtype == Dtype::f4 ? "<f4" : "<f8") << "', 'fortran_order': False, 'shape': ("
         << m.rows() << ", " << m.cols() << "), }";
    std::string header = dict.str();
    // magic(6) + version(2) + length(2) + header + '\n' is a multiple of 64.
    const std::size_t unpadded = kMagicLen + 2 + 2 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kMagic, kMagicLen);
    out.push_back('\x01');
    out.push_back('\x00');
    const auto len = static_cast<std::uint16_t>(header.size());
    out.push_back(static_cast<char>(len & 0xff));
    out.push_back(static_cast<char>(len >> 8));
    out += header;

    const std::size_t count = static_cast<std::size_t>(m.size());
    if (dtype == Dtype::f4) {
        std::string payload(count * sizeof(float), '\0');
        for (std::size_t i = 0; i < count; ++i) {
            const auto v = static_cast<float>(m.data()[i]);
            std::memcpy(payload.data() + i * sizeof(float), &v, sizeof(float));
        }
        out += payload;
    } else {
        out.append(reinterpret_cast<const char*>(m.data()), count * sizeof(double));
    }
    return out;
}

Matrix decode(const std::string& bytes) {
    if (bytes.size() < kMagicLen + 4 || bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0) {
        throw Error("BadMagic", "missing \\x93NUMPY prefix");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) header_error("truncated v2 header length");
        for (int b = 3; b >= 0; --b) {
            header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + static_cast<std::size_t>(b)]);
        }
        offset = 12;
    } else {
        header_error("unsupported NPY version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) {
        header_error("header extends past end of file");
    }
    const std::string header = bytes.substr(offset, header_len);

    static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
    static const std::regex fortran_re(R"('fortran_order'\s*:\s*(True|False))");
    static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
    std::smatch match;
    if (!std::regex_search(header, match, descr_re)) header_error("no descr");
    const std::string descr = match[1];
    if (!std::regex_search(header, match, fortran_re)) header_error("no fortran_order");
    if (match[1] == "True") throw Error("UnsupportedDtype", "fortran-ordered arrays are not supported");
    if (!std::regex_search(header, match, shape_re)) header_error("no shape");

    std::vector<long long> dims;
    {
        std::string shape = match[1];
        std::stringstream ss(shape);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto first = item.find_first_not_of(" \t");
            if (first == std::string::npos) continue;
            try {
                std::size_t used = 0;
                dims.push_back(std::stoll(item.substr(first), &used));
            } catch (const std::exception&) {
                header_error("bad shape entry '" + item + "'");
            }
        }
    }
    if (dims.size() != 2 || dims[0] < 0 || dims[1] < 0) {
        throw Error("ShapeMismatch", "expected a 2-D array");
    }

    std::size_t width = 0;
    if (descr == "<f4") {
        width = 4;
    } else if (descr == "<f8") {
        width = 8;
    } else {
        throw Error("UnsupportedDtype", "descr '" + descr + "' (expected '<f4' or '<f8')");
    }

    const auto rows = static_cast<Index>(dims[0]);
    const auto cols = static_cast<Index>(dims[1]);
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    const std::size_t data_start = offset + header_len;
    if (bytes.size() - data_start != count * width) {
        throw Error("ShapeMismatch", "payload holds " + std::to_string(bytes.size() - data_start) +
                                         " bytes, shape needs " + std::to_string(count * width));
    }
    Matrix m(rows, cols);
    const char* src = bytes.data() + data_start;
    for (std::size_t i = 0; i < count; ++i) {
        if (width == 4) {
            float v;
            std::memcpy(&v, src + i * 4, 4);
            m.data()[i] = static_cast<double>(v);
        } else {
            std::memcpy(m.data() + i, src + i * 8, 8);
        }
    }
    return m;
}

void save(const std::filesystem::path& path, const Matrix& m, Dtype dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    const std::string bytes = encode(m, dtype);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("IoFailure", "cannot write " + path.string());
    }
}

Matrix load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("ArchiveNotFound", path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

}  // namespace lfa::npy
