#include "plae/augment.hpp"

#include <algorithm>
#include <cmath>

namespace plae {
namespace {

constexpr float kPi = 3.14159265358979323846f;

float bilinear(const float* plane, int s, float y, float x) {
    if (y <= -1.0f || y >= float(s) || x <= -1.0f || x >= float(s)) return 0.0f;
    const int y0 = int(std::floor(y));
    const int x0 = int(std::floor(x));
    const float fy = y - float(y0);
    const float fx = x - float(x0);
    auto at = [&](int yy, int xx) -> float {
        if (yy < 0 || yy >= s || xx < 0 || xx >= s) return 0.0f; // exposed region
        return plane[yy * s + xx];
    };
    const float top = at(y0, x0) * (1.0f - fx) + at(y0, x0 + 1) * fx;
    const float bot = at(y0 + 1, x0) * (1.0f - fx) + at(y0 + 1, x0 + 1) * fx;
    return top * (1.0f - fy) + bot * fy;
}

float luma(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

void clamp01(std::span<float> v) {
    for (auto& x : v) x = std::clamp(x, 0.0f, 1.0f);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    v = mx;
    const float d = mx - mn;
    s = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) {
        h = 0.0f;
        return;
    }
    if (mx == r) {
        h = (g - b) / d;
    } else if (mx == g) {
        h = 2.0f + (b - r) / d;
    } else {
        h = 4.0f + (r - g) / d;
    }
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    if (s <= 0.0f) {
        r = g = b = v;
        return;
    }
    h = h - std::floor(h);
    const float hh = h * 6.0f;
    const int i = std::min(5, int(hh));
    const float f = hh - float(i);
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * f);
    const float t = v * (1.0f - s * (1.0f - f));
    switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
    }
}

// Inverse affine map applied per channel: dst(y,x) <- src(inverse * (dst - c) + c).
void warp(const Tensor& in, Tensor& out, float inv00, float inv01, float inv10, float inv11) {
    const int s = in.shape()[1];
    const float c = float(s - 1) / 2.0f;
    auto src = in.data();
    auto dst = out.data();
    for (int ch = 0; ch < 3; ++ch) {
        const float* plane = src.data() + std::size_t(ch) * s * s;
        float* oplane = dst.data() + std::size_t(ch) * s * s;
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const float dy = float(y) - c;
                const float dx = float(x) - c;
                const float sy = inv00 * dy + inv01 * dx + c;
                const float sx = inv10 * dy + inv11 * dx + c;
                oplane[y * s + x] = bilinear(plane, s, sy, sx);
            }
        }
    }
}

Tensor apply_one(const Transform& t, const Tensor& in, Rng& rng) {
    const int s = in.shape()[1];
    Tensor out = in.clone();
    auto px = out.data();

    switch (t.kind) {
    case TransformKind::Identity:
        break;
    case TransformKind::Rotation: {
        const float theta = rng.uniform(-t.max_rotation_deg, t.max_rotation_deg) * kPi / 180.0f;
        const float co = std::cos(theta), si = std::sin(theta);
        warp(in, out, co, si, -si, co);
        break;
    }
    case TransformKind::Affine: {
        const float theta = rng.uniform(-t.max_rotation_deg, t.max_rotation_deg) * kPi / 180.0f;
        const float scale = rng.uniform(t.min_scale, t.max_scale);
        const float co = std::cos(theta) / scale, si = std::sin(theta) / scale;
        warp(in, out, co, si, -si, co);
        break;
    }
    case TransformKind::Crop: {
        const int w = std::min(t.crop_size, s);
        const int top = rng.uniform_int(s - w + 1);
        const int left = rng.uniform_int(s - w + 1);
        auto src = in.data();
        for (int ch = 0; ch < 3; ++ch) {
            const float* plane = src.data() + std::size_t(ch) * s * s;
            float* oplane = px.data() + std::size_t(ch) * s * s;
            for (int y = 0; y < s; ++y) {
                // window corners map to image corners
                const float sy = float(top) + float(y) * float(w - 1) / float(s - 1);
                for (int x = 0; x < s; ++x) {
                    const float sx = float(left) + float(x) * float(w - 1) / float(s - 1);
                    oplane[y * s + x] = bilinear(plane, s, sy, sx);
                }
            }
        }
        break;
    }
    case TransformKind::Cutout: {
        const int w = std::min(t.cutout_size, s);
        const int top = rng.uniform_int(s - w + 1);
        const int left = rng.uniform_int(s - w + 1);
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = top; y < top + w; ++y) {
                for (int x = left; x < left + w; ++x) {
                    px[std::size_t(ch) * s * s + std::size_t(y) * s + x] = 0.0f;
                }
            }
        }
        break;
    }
    case TransformKind::GaussianNoise: {
        for (auto& v : px) v += rng.normal(0.0f, t.noise_sigma);
        break;
    }
    case TransformKind::ColourJitter: {
        const float fb = rng.uniform(std::max(0.0f, 1.0f - t.brightness), 1.0f + t.brightness);
        const float fc = rng.uniform(std::max(0.0f, 1.0f - t.contrast), 1.0f + t.contrast);
        const float fs = rng.uniform(std::max(0.0f, 1.0f - t.saturation), 1.0f + t.saturation);
        const float dh = rng.uniform(-t.hue, t.hue);
        const std::size_t plane = std::size_t(s) * s;
        for (auto& v : px) v = std::clamp(v * fb, 0.0f, 1.0f);
        float mean_l = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) {
            mean_l += luma(px[i], px[plane + i], px[2 * plane + i]);
        }
        mean_l /= float(plane);
        for (auto& v : px) v = std::clamp(mean_l + fc * (v - mean_l), 0.0f, 1.0f);
        for (std::size_t i = 0; i < plane; ++i) {
            const float l = luma(px[i], px[plane + i], px[2 * plane + i]);
            px[i] = std::clamp(l + fs * (px[i] - l), 0.0f, 1.0f);
            px[plane + i] = std::clamp(l + fs * (px[plane + i] - l), 0.0f, 1.0f);
            px[2 * plane + i] = std::clamp(l + fs * (px[2 * plane + i] - l), 0.0f, 1.0f);
        }
        for (std::size_t i = 0; i < plane; ++i) {
            float h, sat, val;
            rgb_to_hsv(px[i], px[plane + i], px[2 * plane + i], h, sat, val);
            hsv_to_rgb(h + dh, sat, val, px[i], px[plane + i], px[2 * plane + i]);
        }
        break;
    }
    case TransformKind::Grayscale: {
        const std::size_t plane = std::size_t(s) * s;
        for (std::size_t i = 0; i < plane; ++i) {
            const float l = luma(px[i], px[plane + i], px[2 * plane + i]);
            px[i] = l;
            px[plane + i] = l;
            px[2 * plane + i] = l;
        }
        break;
    }
    case TransformKind::HFlip: {
        auto src = in.data();
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    px[std::size_t(ch) * s * s + std::size_t(y) * s + x] =
                        src[std::size_t(ch) * s * s + std::size_t(y) * s + (s - 1 - x)];
                }
            }
        }
        break;
    }
    case TransformKind::VFlip: {
        auto src = in.data();
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < s; ++y) {
                for (int x = 0; x < s; ++x) {
                    px[std::size_t(ch) * s * s + std::size_t(y) * s + x] =
                        src[std::size_t(ch) * s * s + std::size_t(s - 1 - y) * s + x];
                }
            }
        }
        break;
    }
    }
    clamp01(px);
    return out;
}

const std::vector<std::pair<TransformKind, const char*>>& kind_names() {
    static const std::vector<std::pair<TransformKind, const char*>> names = {
        {TransformKind::Identity, "identity"},
        {TransformKind::Rotation, "rotation"},
        {TransformKind::Affine, "affine"},
        {TransformKind::Crop, "crop"},
        {TransformKind::Cutout, "cutout"},
        {TransformKind::GaussianNoise, "gaussian_noise"},
        {TransformKind::ColourJitter, "colour_jitter"},
        {TransformKind::Grayscale, "grayscale"},
        {TransformKind::HFlip, "hflip"},
        {TransformKind::VFlip, "vflip"},
    };
    return names;
}

TransformKind kind_from_name(const std::string& name) {
    for (const auto& [kind, kname] : kind_names()) {
        if (name == kname) return kind;
    }
    throw ConfigError("unknown transform name '" + name + "'");
}

} // namespace

std::string transform_kind_name(TransformKind kind) {
    for (const auto& [k, name] : kind_names()) {
        if (k == kind) return name;
    }
    return "?";
}

std::string TransformSpec::name() const {
    std::string n = transform_kind_name(first.kind);
    if (second) n += "+" + transform_kind_name(second->kind);
    return n;
}

TransformSpec TransformSpec::parse(const std::string& text) {
    const auto plus = text.find('+');
    if (plus == std::string::npos) return single(kind_from_name(text));
    return pair(kind_from_name(text.substr(0, plus)), kind_from_name(text.substr(plus + 1)));
}

TransformSpec TransformSpec::single(TransformKind kind) {
    TransformSpec s;
    s.first.kind = kind;
    return s;
}

TransformSpec TransformSpec::pair(TransformKind a, TransformKind b) {
    TransformSpec s;
    s.first.kind = a;
    s.second = Transform{};
    s.second->kind = b;
    return s;
}

Tensor apply(const TransformSpec& spec, const Tensor& image, Rng& rng) {
    if (image.shape().size() != 3 || image.shape()[0] != 3 ||
        image.shape()[1] != image.shape()[2]) {
        throw ShapeError("augment expects [3,S,S] images, got " + shape_str(image.shape()));
    }
    Tensor out = apply_one(spec.first, image, rng);
    if (spec.second) out = apply_one(*spec.second, out, rng);
    return out;
}

TransformSpec sample(const Policy& policy, Rng& rng) {
    if (policy.allowed.empty()) throw ConfigError("cannot sample from an empty policy");
    return policy.allowed[size_t(rng.uniform_int(int(policy.allowed.size())))];
}

std::vector<TransformKind> table1_transforms(const std::string& dataset) {
    if (dataset == "mnist") {
        return {TransformKind::Rotation, TransformKind::Affine, TransformKind::Crop,
                TransformKind::Cutout, TransformKind::GaussianNoise};
    }
    if (dataset == "cifar10") {
        return {TransformKind::Rotation, TransformKind::Affine, TransformKind::Crop,
                TransformKind::Cutout, TransformKind::GaussianNoise, TransformKind::ColourJitter,
                TransformKind::Grayscale, TransformKind::HFlip, TransformKind::VFlip};
    }
    if (dataset == "svhn") {
        return {TransformKind::Rotation, TransformKind::Affine, TransformKind::Crop,
                TransformKind::Cutout, TransformKind::GaussianNoise, TransformKind::ColourJitter,
                TransformKind::Grayscale};
    }
    throw ConfigError("no transform table for dataset '" + dataset + "'");
}

std::vector<TransformSpec> grid_specs_from(const std::vector<TransformKind>& singles) {
    std::vector<TransformSpec> specs;
    for (TransformKind k : singles) specs.push_back(TransformSpec::single(k));
    for (std::size_t i = 0; i < singles.size(); ++i) {
        for (std::size_t j = i + 1; j < singles.size(); ++j) {
            specs.push_back(TransformSpec::pair(singles[i], singles[j]));
        }
    }
    return specs;
}

std::vector<TransformSpec> grid_specs(const std::string& dataset) {
    return grid_specs_from(table1_transforms(dataset));
}

Policy policy_for_dataset(const std::string& dataset) {
    Policy p;
    p.name = dataset;
    if (dataset == "mnist") {
        p.mode = Policy::Mode::UniformAll;
        p.allowed = grid_specs("mnist");
        return p;
    }
    p.mode = Policy::Mode::TopTen;
    if (dataset == "cifar10") {
        p.allowed = {
            TransformSpec::parse("affine"),
            TransformSpec::parse("cutout"),
            TransformSpec::parse("hflip"),
            TransformSpec::parse("rotation+affine"),
            TransformSpec::parse("rotation+cutout"),
            TransformSpec::parse("rotation+hflip"),
            TransformSpec::parse("rotation+vflip"),
            TransformSpec::parse("affine+cutout"),
            TransformSpec::parse("affine+hflip"),
            TransformSpec::parse("cutout+colour_jitter"),
        };
        return p;
    }
    if (dataset == "svhn") {
        p.allowed = {
            TransformSpec::parse("cutout"),
            TransformSpec::parse("grayscale"),
            TransformSpec::parse("colour_jitter"),
            TransformSpec::parse("rotation"),
            TransformSpec::parse("rotation+grayscale"),
            TransformSpec::parse("cutout+gaussian_noise"),
            TransformSpec::parse("cutout+grayscale"),
            TransformSpec::parse("cutout+colour_jitter"),
            TransformSpec::parse("gaussian_noise+colour_jitter"),
            TransformSpec::parse("grayscale+colour_jitter"),
        };
        return p;
    }
    throw ConfigError("no sampling policy for dataset '" + dataset + "'");
}

Policy identity_policy() {
    Policy p;
    p.name = "identity";
    p.mode = Policy::Mode::Single;
    p.allowed = {TransformSpec::single(TransformKind::Identity)};
    return p;
}

Policy single_spec_policy(const TransformSpec& spec) {
    Policy p;
    p.name = "only:" + spec.name();
    p.mode = Policy::Mode::Single;
    p.allowed = {spec};
    return p;
}

Policy parse_policy(const std::string& text) {
    if (text == "identity") return identity_policy();
    if (text.rfind("only:", 0) == 0) {
        return single_spec_policy(TransformSpec::parse(text.substr(5)));
    }
    return policy_for_dataset(text);
}

Tensor augment_batch(const Tensor& clean, const Policy& policy, std::uint64_t augment_seed,
                     int epoch, std::span<const int> dataset_indices) {
    const auto& shape = clean.shape();
    if (shape.size() != 4 || shape[0] != int(dataset_indices.size())) {
        throw ShapeError("augment_batch: batch " + shape_str(shape) + " vs " +
                         std::to_string(dataset_indices.size()) + " indices");
    }
    const int s = shape[2];
    Tensor out = Tensor::zeros(shape);
    const std::size_t frame = std::size_t(3) * s * s;
    for (int b = 0; b < shape[0]; ++b) {
        Tensor img = Tensor::zeros({3, s, s});
        std::copy_n(clean.data().data() + std::size_t(b) * frame, frame, img.data().data());
        Rng rng = Rng::derive(augment_seed,
                              {std::uint64_t(epoch), std::uint64_t(dataset_indices[size_t(b)])});
        const TransformSpec spec = sample(policy, rng);
        Tensor aug = apply(spec, img, rng);
        std::copy_n(aug.data().data(), frame, out.data().data() + std::size_t(b) * frame);
    }
    return out;
}

} // namespace plae
