// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Helpers for tests that spawn the command-line binary and inspect the
// artifacts it writes.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spawn {

namespace fs = std::filesystem;

// Empties and recreates a scratch directory under the system temp root.
inline fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Runs `bin` with the given arguments; stdout goes to `capture` when set,
// stderr is discarded either way.  Returns the process exit code.
inline int run(const std::string& bin, const std::string& args, const fs::path& capture = {}) {
  std::string cmd = bin + " " + args;
  cmd += capture.empty() ? " > /dev/null 2> /dev/null"
                         : " > " + capture.string() + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status))
    throw std::runtime_error("spawn: failed to run: " + cmd);
  return WEXITSTATUS(status);
}

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("spawn: cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace spawn
