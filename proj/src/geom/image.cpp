#include "hsdf/geom/image.hpp"

#include "hsdf/geom/error.hpp"

#include <algorithm>
#include <cmath>

namespace hsdf {

Image::Image(int w, int h, int c, float fill) : width(w), height(h), channels(c)
{
    require(w >= 0 && h >= 0 && c >= 1, ErrorCode::InvalidArgument, "bad image shape");
    data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

void Image::validate() const
{
    require(data.size() == pixel_count() * channels, ErrorCode::SizeMismatch, "image pixel count mismatch");
}

namespace {

struct BilinearTap {
    int x0, x1, y0, y1;
    double tx, ty;
};

BilinearTap make_tap(const Image& img, double u, double v)
{
    const double x = std::clamp(u, 0.0, static_cast<double>(img.width - 1));
    const double y = std::clamp(v, 0.0, static_cast<double>(img.height - 1));
    BilinearTap tap{};
    tap.x0 = static_cast<int>(std::floor(x));
    tap.y0 = static_cast<int>(std::floor(y));
    tap.x1 = std::min(tap.x0 + 1, img.width - 1);
    tap.y1 = std::min(tap.y0 + 1, img.height - 1);
    tap.tx = x - tap.x0;
    tap.ty = y - tap.y0;
    return tap;
}

} // namespace

double bilinear_sample(const Image& img, double u, double v, int c)
{
    const BilinearTap t = make_tap(img, u, v);
    const double a = img.at(t.x0, t.y0, c) * (1.0 - t.tx) + img.at(t.x1, t.y0, c) * t.tx;
    const double b = img.at(t.x0, t.y1, c) * (1.0 - t.tx) + img.at(t.x1, t.y1, c) * t.tx;
    return a * (1.0 - t.ty) + b * t.ty;
}

std::vector<double> bilinear_sample(const Image& img, double u, double v)
{
    require(img.width > 0 && img.height > 0, ErrorCode::InvalidArgument, "bilinear_sample on empty image");
    std::vector<double> out(img.channels);
    for (int c = 0; c < img.channels; ++c) {
        out[c] = bilinear_sample(img, u, v, c);
    }
    return out;
}

Image slice_channels(const Image& img, int first, int count)
{
    require(first >= 0 && count >= 1 && first + count <= img.channels, ErrorCode::InvalidArgument,
            "channel slice out of range");
    Image out(img.width, img.height, count);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        for (int c = 0; c < count; ++c) {
            out.data[p * count + c] = img.data[p * img.channels + first + c];
        }
    }
    return out;
}

} // namespace hsdf
