#include "gae/image_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "gae/error.hpp"

namespace gae {

namespace {

unsigned char to_byte(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(v * 255.0 + 0.5);
}

} // namespace

void write_ppm(const std::string& path, const std::vector<double>& chw, std::int64_t height, std::int64_t width) {
    if (static_cast<std::int64_t>(chw.size()) != 3 * height * width) {
        throw IoError("write_ppm: buffer size does not match 3xHxW");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("write_ppm: cannot open " + path);
    }
    os << "P6\n" << width << " " << height << "\n255\n";
    const std::int64_t px = height * width;
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * 3);
    for (std::int64_t r = 0; r < height; ++r) {
        for (std::int64_t c = 0; c < width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                row[static_cast<std::size_t>(c * 3 + ch)] = to_byte(chw[static_cast<std::size_t>(ch * px + r * width + c)]);
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) {
        throw IoError("write_ppm: write failed for " + path);
    }
}

void write_pgm_normalized(const std::string& path, const std::vector<double>& values, std::int64_t height,
                          std::int64_t width) {
    if (static_cast<std::int64_t>(values.size()) != height * width) {
        throw IoError("write_pgm_normalized: buffer size does not match HxW");
    }
    double lo = values.empty() ? 0.0 : values[0];
    double hi = lo;
    for (const double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? (hi - lo) : 1.0;

    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("write_pgm_normalized: cannot open " + path);
    }
    os << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        buf[i] = to_byte((values[i] - lo) / span);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) {
        throw IoError("write_pgm_normalized: write failed for " + path);
    }

    std::ofstream sidecar(path + ".range.txt");
    sidecar << "min=" << lo << "\nmax=" << hi << "\n";
}

std::vector<double> read_ppm(const std::string& path, std::int64_t& height, std::int64_t& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("read_ppm: cannot open " + path);
    }
    std::string magic;
    std::int64_t maxval = 0;
    is >> magic >> width >> height >> maxval;
    if (magic != "P6" || maxval != 255 || width <= 0 || height <= 0) {
        throw IoError("read_ppm: unsupported PPM header in " + path);
    }
    is.get();  // single whitespace after header
    std::vector<unsigned char> raw(static_cast<std::size_t>(3 * height * width));
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) {
        throw IoError("read_ppm: truncated pixel data in " + path);
    }
    std::vector<double> chw(raw.size());
    const std::int64_t px = height * width;
    for (std::int64_t r = 0; r < height; ++r) {
        for (std::int64_t c = 0; c < width; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                chw[static_cast<std::size_t>(ch * px + r * width + c)] =
                    raw[static_cast<std::size_t>((r * width + c) * 3 + ch)] / 255.0;
            }
        }
    }
    return chw;
}

std::vector<double> read_pgm(const std::string& path, std::int64_t& height, std::int64_t& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("read_pgm: cannot open " + path);
    }
    std::string magic;
    std::int64_t maxval = 0;
    is >> magic >> width >> height >> maxval;
    if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0) {
        throw IoError("read_pgm: unsupported PGM header in " + path);
    }
    is.get();
    std::vector<unsigned char> raw(static_cast<std::size_t>(height * width));
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) {
        throw IoError("read_pgm: truncated pixel data in " + path);
    }
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = raw[i] / 255.0;
    }
    return out;
}

} // namespace gae
