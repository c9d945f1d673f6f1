#include "rtsr/codec.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <vector>

#include "rtsr/errors.hpp"
#include "rtsr/image_io.hpp"

namespace rtsr {

namespace {

bool plain_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
           c == '/' || c == ':' || c == '=' || c == '+' || c == '-';
}

// Exit status of a /bin/sh command line, or -1 when it did not exit normally.
int run_shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

class TempDir {
public:
    TempDir() {
        std::string pattern = (std::filesystem::temp_directory_path() / "rtsr-codec-XXXXXX").string();
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        if (mkdtemp(buf.data()) == nullptr) throw DataError("cannot create a temporary directory");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace

std::string shell_quote(const std::string& word) {
    if (!word.empty()) {
        bool plain = true;
        for (char c : word) plain = plain && plain_char(c);
        if (plain) return word;
    }
    std::string out = "'";
    for (char c : word) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out += c;
        }
    }
    return out + "'";
}

std::string render_command(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('{', pos);
        if (open == std::string::npos) {
            out += tmpl.substr(pos);
            break;
        }
        out += tmpl.substr(pos, open - pos);
        const std::size_t close = tmpl.find('}', open);
        if (close == std::string::npos) throw UsageError("unterminated placeholder in command template: " + tmpl);
        const std::string key = tmpl.substr(open + 1, close - open - 1);
        auto it = values.find(key);
        if (it == values.end()) throw UsageError("unknown placeholder {" + key + "} in command template");
        out += shell_quote(it->second);
        pos = close + 1;
    }
    return out;
}

std::string command_program(const std::string& tmpl) {
    const std::size_t begin = tmpl.find_first_not_of(" \t");
    if (begin == std::string::npos) throw UsageError("empty codec command template");
    const std::size_t end = tmpl.find_first_of(" \t", begin);
    return tmpl.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
}

SubprocessCodec::SubprocessCodec(CodecCommands cmds) : cmds_(std::move(cmds)) {
    probe_ = "command -v " + shell_quote(command_program(cmds_.encode));
    if (run_shell(probe_ + " >/dev/null 2>&1") != 0) {
        throw CodecUnavailable("codec program '" + command_program(cmds_.encode) + "' not found (probed: " + probe_ + ")");
    }
    const std::string dec = command_program(cmds_.decode);
    if (dec != command_program(cmds_.encode) &&
        run_shell("command -v " + shell_quote(dec) + " >/dev/null 2>&1") != 0) {
        throw CodecUnavailable("codec program '" + dec + "' not found (probed: command -v " + shell_quote(dec) + ")");
    }
}

void SubprocessCodec::encode_file(const std::filesystem::path& hr_png, int scale, int qp,
                                  const std::filesystem::path& lr_png) const {
    std::filesystem::path encoded = lr_png;
    encoded.replace_extension(cmds_.encoded_extension);
    const std::string enc = render_command(cmds_.encode, {{"input", hr_png.string()},
                                                          {"scale", std::to_string(scale)},
                                                          {"qp", std::to_string(qp)},
                                                          {"preset", std::to_string(cmds_.preset)},
                                                          {"output", encoded.string()}});
    if (run_shell(enc) != 0) throw DataError("encode failed: " + enc);
    const std::string dec = render_command(cmds_.decode, {{"input", encoded.string()}, {"output", lr_png.string()}});
    const int rc = run_shell(dec);
    std::error_code ec;
    std::filesystem::remove(encoded, ec);
    if (rc != 0) throw DataError("decode failed: " + dec);
}

Tensor SubprocessCodec::roundtrip(const Tensor& img, int qp) {
    const TempDir dir;
    const auto in = dir.path() / "in.png";
    const auto out = dir.path() / "out.png";
    write_png(in, img);
    encode_file(in, 1, qp, out);
    Tensor back = read_image(out);
    if (back.shape() != img.shape()) {
        throw DataError("codec changed the image size from " + to_string(img.shape()) + " to " + to_string(back.shape()));
    }
    return back;
}

}  // namespace rtsr
