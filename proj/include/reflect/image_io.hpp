#pragma once

// PNG (8/16-bit, gray/RGB, palette expanded, alpha stripped) and JPEG (read-only)
// decoding into ImageBuffer, plus 8-bit PNG encoding.

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "reflect/field.hpp"

namespace reflect {

struct DecodeInfo {
    int bit_depth = 8;
    bool alpha_stripped = false;
    bool jpeg = false;
};

namespace detail {

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

inline void png_read_from_span(png_structp png, png_bytep out, png_size_t len) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->offset + len > st->bytes.size()) {
        png_error(png, "truncated PNG data");
    }
    std::memcpy(out, st->bytes.data() + st->offset, len);
    st->offset += len;
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

inline void png_flush_noop(png_structp) {}

inline void png_store_message(png_structp png, png_const_charp msg) {
    auto* dst = static_cast<std::string*>(png_get_error_ptr(png));
    if (dst != nullptr) *dst = msg;
    png_longjmp(png, 1);
}

inline void png_ignore_warning(png_structp, png_const_charp) {}

inline bool is_png(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

inline bool is_jpeg(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

inline ImageBuffer decode_png(std::span<const std::uint8_t> bytes, DecodeInfo& info) {
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_store_message,
                                             png_ignore_warning);
    if (png == nullptr) throw IoError("png: cannot allocate read struct");
    png_infop pinfo = png_create_info_struct(png);
    if (pinfo == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot allocate info struct");
    }

    PngReadState state{bytes, 0};
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &pinfo, nullptr);
        throw IoError("png: " + (message.empty() ? std::string("decode failed") : message));
    }

    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, pinfo);

    const int color = png_get_color_type(png, pinfo);
    const int depth = png_get_bit_depth(png, pinfo);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if ((color & PNG_COLOR_MASK_ALPHA) != 0) {
        png_set_strip_alpha(png);
        info.alpha_stripped = true;
    }
    if (png_get_valid(png, pinfo, PNG_INFO_tRNS)) {
        // tRNS would otherwise be expanded into an alpha channel; drop it.
        png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
        info.alpha_stripped = true;
    }
    png_read_update_info(png, pinfo);

    const png_uint_32 width = png_get_image_width(png, pinfo);
    const png_uint_32 height = png_get_image_height(png, pinfo);
    const int out_depth = png_get_bit_depth(png, pinfo);
    const int channels = png_get_channels(png, pinfo);
    const std::size_t rowbytes = png_get_rowbytes(png, pinfo);

    raw.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &pinfo, nullptr);

    if (channels != 1 && channels != 3) {
        throw IoError("png: unsupported channel count " + std::to_string(channels));
    }
    info.bit_depth = out_depth;

    ImageBuffer img(Shape{height, width, static_cast<std::size_t>(channels)});
    const double scale = out_depth == 16 ? 65535.0 : 255.0;
    for (std::size_t r = 0; r < height; ++r) {
        const std::uint8_t* src = raw.data() + r * rowbytes;
        for (std::size_t col = 0; col < width; ++col) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t k = col * channels + c;
                const unsigned v = out_depth == 16 ? (static_cast<unsigned>(src[2 * k]) << 8) | src[2 * k + 1]
                                                   : src[k];
                img.at(r, col, c) = v / scale;
            }
        }
    }
    return img;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline void jpeg_silence(j_common_ptr, int) {}

inline ImageBuffer decode_jpeg(std::span<const std::uint8_t> bytes, DecodeInfo& info) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_silence;
    std::vector<std::uint8_t> raw;

    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError(std::string("jpeg: ") + err.message);
    }

    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
        std::snprintf(err.message, sizeof err.message, "CMYK images are not supported");
        std::longjmp(err.jump, 1);
    }
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const std::size_t width = cinfo.output_width;
    const std::size_t height = cinfo.output_height;
    const std::size_t channels = static_cast<std::size_t>(cinfo.output_components);
    raw.resize(width * height * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = raw.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    info.jpeg = true;
    info.bit_depth = 8;
    ImageBuffer img(Shape{height, width, channels});
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t col = 0; col < width; ++col) {
            for (std::size_t c = 0; c < channels; ++c) {
                img.at(r, col, c) = raw[(r * width + col) * channels + c] / 255.0;
            }
        }
    }
    return img;
}

} // namespace detail

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read error on " + path.string());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write error on " + path.string());
}

/// Decodes PNG or JPEG bytes; values are mapped to [0,1] by v / (2^depth - 1).
inline ImageBuffer decode_image(std::span<const std::uint8_t> bytes, DecodeInfo* info = nullptr) {
    DecodeInfo local;
    DecodeInfo& di = info != nullptr ? *info : local;
    if (detail::is_png(bytes)) return detail::decode_png(bytes, di);
    if (detail::is_jpeg(bytes)) return detail::decode_jpeg(bytes, di);
    throw IoError("unrecognised image data (expected PNG or JPEG)");
}

inline ImageBuffer load_image(const std::filesystem::path& path, DecodeInfo* info = nullptr) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes, info);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

inline std::uint8_t quantize8(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Clamps to [0,1], quantizes to 8 bits and encodes as gray or RGB PNG.
/// Output bytes depend only on the pixel values.
template <typename Tag>
std::vector<std::uint8_t> encode_png(const BasicField<Tag>& img) {
    const std::size_t h = img.height();
    const std::size_t w = img.width();
    const std::size_t ch = img.channels();
    if (ch != 1 && ch != 3) throw IoError("encode_png: unsupported channel count " + std::to_string(ch));
    if (h == 0 || w == 0) throw IoError("encode_png: empty image");

    std::vector<std::uint8_t> raw(h * w * ch);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
            for (std::size_t c = 0; c < ch; ++c) raw[(r * w + col) * ch + c] = quantize8(img.at(r, col, c));
        }
    }

    std::string message;
    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows(h);
    for (std::size_t r = 0; r < h; ++r) rows[r] = raw.data() + r * w * ch;

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_store_message,
                                              detail::png_ignore_warning);
    if (png == nullptr) throw IoError("png: cannot allocate write struct");
    png_infop pinfo = png_create_info_struct(png);
    if (pinfo == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: cannot allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &pinfo);
        throw IoError("png: " + (message.empty() ? std::string("encode failed") : message));
    }
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, pinfo, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, pinfo);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &pinfo);
    return out;
}

template <typename Tag>
void save_image(const BasicField<Tag>& img, const std::filesystem::path& path) {
    write_file_bytes(path, encode_png(img));
}

} // namespace reflect
