// Stand-in for the external encoder/decoder, used by the harness tests.
//   fake_codec encode IN SCALE QP PRESET OUT   Lanczos-5 downscale (ceil), then a
//                                              QP-dependent coarse quantisation
//   fake_codec decode IN OUT                   copies the pixels
// Every invocation is appended to $FAKE_CODEC_LOG when it is set.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "rtsr/image_io.hpp"
#include "rtsr/resample.hpp"

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "";
    if (const char* log = std::getenv("FAKE_CODEC_LOG")) {
        std::ofstream out(log, std::ios::app);
        for (int i = 1; i < argc; ++i) out << (i > 1 ? " " : "") << argv[i];
        out << "\n";
    }
    try {
        if (mode == "encode" && argc == 7) {
            const int scale = std::stoi(argv[3]);
            const int qp = std::stoi(argv[4]);
            rtsr::Tensor img = rtsr::read_image(argv[2]);
            const auto& s = img.shape();
            img = rtsr::resample_image(img, (s.h + scale - 1) / scale, (s.w + scale - 1) / scale,
                                       rtsr::ResampleKernel::lanczos(5));
            const float step = static_cast<float>(1 + qp / 8) / 255.0f;
            for (float& v : img.data()) v = std::round(v / step) * step;
            rtsr::write_png(argv[6], img);
            return 0;
        }
        if (mode == "decode" && argc == 4) {
            rtsr::write_png(argv[3], rtsr::read_image(argv[2]));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "fake_codec: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "usage: fake_codec encode IN SCALE QP PRESET OUT | decode IN OUT\n";
    return 2;
}
