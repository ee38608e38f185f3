#include "webgym/prompts.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace webgym {

std::string fill_template(std::string_view tpl,
                          const std::map<std::string, std::string>& values) {
    std::string out(tpl);
    for (const auto& [key, value] : values) {
        const std::string placeholder = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return out;
}

std::string load_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string default_asset_dir() {
    if (const char* env = std::getenv("WEBGYM_ASSETS")) return env;
    return "assets/prompts";
}

}  // namespace webgym
