// Demo: synthesize a small scene, re-encode it in each of the five spaces
// and print the intra-channel embedding of the red channel per space.

#include <iomanip>
#include <iostream>

#include "csid/csid.hpp"

int main() {
    using namespace csid;

    // a smooth gradient with a few hard-edged boxes and light noise
    rng r(7);
    ImageRGB img = make_image(96, 96, ColorSpaceId::sRGB);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            img.planes[0].at(y, x) = 0.2 + 0.6 * x / (img.width - 1.0);
            img.planes[1].at(y, x) = 0.3 + 0.4 * y / (img.height - 1.0);
            img.planes[2].at(y, x) = 0.5;
        }
    }
    for (int box = 0; box < 4; ++box) {
        const int bx = static_cast<int>(r.below(64)), by = static_cast<int>(r.below(64));
        const double v = r.real01();
        for (int y = by; y < by + 16; ++y) {
            for (int x = bx; x < bx + 16; ++x) {
                img.planes[box % 3].at(y, x) = v;
            }
        }
    }
    for (auto& plane : img.planes) {
        for (auto& s : plane.samples) {
            s = std::clamp(s + 0.01 * r.normal01(), 0.0, 1.0);
        }
    }

    FitConfig fit;
    fit.seed = 11;
    fit.restarts = 1;
    std::cout << std::fixed << std::setprecision(4);
    for (ColorSpaceId target : kAllSpaces) {
        const ImageRGB converted = convert_image(img, plan_conversion(ColorSpaceId::sRGB, target));
        const EmbeddingModel model =
            fit_embedding(converted.planes[0], converted.planes[0], {0, 0}, 1, 2, fit);
        std::cout << std::setw(14) << to_string(target) << "  pi0=" << model.pi[0]
                  << "  sigma=" << model.embeddable.sigma << "  gamma[0..3]=";
        for (int i = 0; i < 4; ++i) std::cout << model.embeddable.gamma[i] << " ";
        std::cout << "\n";
    }
    return 0;
}
