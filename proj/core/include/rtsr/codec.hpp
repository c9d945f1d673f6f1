#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rtsr/resample.hpp"

namespace rtsr {

/// Downscale plus AV1 image encode. Placeholders: {input} {scale} {qp} {preset} {output}.
inline constexpr const char* kDefaultEncodeTemplate =
    "ffmpeg -hide_banner -y -loglevel error -i {input} -vf "
    "'scale=ceil(iw/{scale}):ceil(ih/{scale}):flags=lanczos+accurate_rnd+full_chroma_int:sws_dither=none:param0=5' "
    "-c:v libsvtav1 -qp {qp} -preset {preset} {output}";

/// Decode of the encoded file back to PNG. Placeholders: {input} {output}.
inline constexpr const char* kDefaultDecodeTemplate = "ffmpeg -hide_banner -y -loglevel error -i {input} {output}";

inline constexpr int kDefaultPreset = 5;

/// Substitutes {key} placeholders. Values containing shell metacharacters are single-quoted.
/// Throws UsageError on unknown or unterminated placeholders.
std::string render_command(const std::string& tmpl, const std::map<std::string, std::string>& values);

/// Quotes a word for /bin/sh when it holds anything outside [A-Za-z0-9_./:=+-].
std::string shell_quote(const std::string& word);

struct CodecCommands {
    std::string encode = kDefaultEncodeTemplate;
    std::string decode = kDefaultDecodeTemplate;
    int preset = kDefaultPreset;
    std::string encoded_extension = ".avif";
};

/// Runs the encode and decode templates as subprocesses.
class SubprocessCodec : public ImageCodec {
public:
    /// Probes the encoder program once; throws CodecUnavailable listing the probe command
    /// when it cannot be found.
    explicit SubprocessCodec(CodecCommands cmds = {});

    /// Encodes `hr_png` with the given downscale factor and decodes to `lr_png`.
    void encode_file(const std::filesystem::path& hr_png, int scale, int qp, const std::filesystem::path& lr_png) const;

    /// In-memory round trip at unit scale through temporary files.
    Tensor roundtrip(const Tensor& img, int qp) override;

    const CodecCommands& commands() const { return cmds_; }
    const std::string& probe_command() const { return probe_; }

private:
    CodecCommands cmds_;
    std::string probe_;
};

/// First word of a command template.
std::string command_program(const std::string& tmpl);

}  // namespace rtsr
