#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sys/wait.h>
#include <random>
#include <sstream>
#include <string>

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "sf") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

/// Single-quoted path for a shell command line.
inline std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

/// Runs the CLI with `args` and returns its exit status. Output goes to
/// `log` when given.
inline int run_cli(const std::string& args, const std::filesystem::path& log = {}) {
    std::string cmd = std::string(SCOREFORGE_CLI) + " " + args;
    cmd += log.empty() ? " > /dev/null 2>&1" : " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) {
        return -1;
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Relative path -> file bytes for every regular file under `root`.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out[std::filesystem::relative(e.path(), root).generic_string()] = slurp(e.path());
        }
    }
    return out;
}

} // namespace testutil
