#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <sys/wait.h>
#include <unistd.h>

namespace vt {

namespace fs = std::filesystem;

inline fs::path fixture(std::string_view name) { return fs::path(VCTRACE_FIXTURES) / name; }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        auto base = fs::temp_directory_path();
        for (;;) {
            path_ = base / ("vctrace-test-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
            if (fs::create_directory(path_)) {
                break;
            }
        }
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(std::string_view name) const { return path_ / name; }

private:
    fs::path path_;
};

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') {
            q += "'\\''";
        } else {
            q += c;
        }
    }
    return q + "'";
}

// Runs the CLI with `args` (already shell-quoted where needed) from `cwd`.
inline CliResult run_cli(const std::string& args, const fs::path& cwd = VCTRACE_FIXTURES) {
    TempDir io;
    auto out = io / "stdout";
    auto err = io / "stderr";
    std::string cmd = "cd " + shell_quote(cwd.string()) + " && env -u VCTRACE_JOBS " + shell_quote(VCTRACE_CLI) +
                      " " + args + " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
    int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace vt
