#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include <png.h>

#include "error.hpp"
#include "imaging.hpp"

namespace scoreforge::imaging {

/// Reads an 8-bit PNG as gray (1 channel) or RGB (3 channels). Alpha is
/// composited over white; 16-bit input is reduced to 8 bits.
inline Raster read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw Error(ErrorKind::io, "cannot read PNG " + path.string() + ": " + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    Raster out;
    out.width = int(image.width);
    out.height = int(image.height);
    out.channels = color ? 3 : 1;
    out.data.resize(PNG_IMAGE_SIZE(image));
    png_color white{255, 255, 255};
    if (!png_image_finish_read(&image, &white, out.data.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorKind::io, "cannot decode PNG " + path.string() + ": " + image.message);
    }
    return out;
}

inline GrayImage read_gray_png(const std::filesystem::path& path) { return to_grayscale(read_png(path)); }

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
    if (img.empty()) {
        throw Error(ErrorKind::geometry, "cannot write an empty image");
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = png_uint_32(img.width);
    image.height = png_uint_32(img.height);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, img.data.data(), 0, nullptr)) {
        throw Error(ErrorKind::io, "cannot write PNG " + path.string() + ": " + image.message);
    }
}

/// Writes a mask as 0 (background) / 255 (ink).
inline void write_png(const std::filesystem::path& path, const BinaryMask& mask) {
    GrayImage img(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        img.data[i] = mask.data[i] ? 255 : 0;
    }
    write_png(path, img);
}

} // namespace scoreforge::imaging
