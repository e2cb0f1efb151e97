#pragma once

#include <csignal>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "vidcensor/errors.hpp"

namespace vidcensor {

/// Runs `argv` with `input` on its standard input and returns everything it
/// writes to standard output. Throws InputError if the process cannot be
/// spawned or exits nonzero.
inline std::vector<std::uint8_t> run_process(
    const std::vector<std::string>& argv,
    std::span<const std::uint8_t> input) {
  if (argv.empty()) throw InputError("empty command");

  // A child that exits early would otherwise kill us on write().
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw InputError("pipe creation failed: " + std::string(strerror(errno)));
  }

  const pid_t pid = fork();
  if (pid < 0) {
    throw InputError("fork failed: " + std::string(strerror(errno)));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const std::string& a : argv) {
      cargv.push_back(const_cast<char*>(a.c_str()));
    }
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }

  close(in_pipe[0]);
  close(out_pipe[1]);

  std::thread writer([fd = in_pipe[1], input] {
    std::size_t off = 0;
    while (off < input.size()) {
      const ssize_t n = write(fd, input.data() + off, input.size() - off);
      if (n <= 0) break;  // child closed its stdin; let it finish anyway
      off += static_cast<std::size_t>(n);
    }
    close(fd);
  });

  std::vector<std::uint8_t> output;
  std::uint8_t buf[65536];
  while (true) {
    const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    output.insert(output.end(), buf, buf + n);
  }
  close(out_pipe[0]);
  writer.join();

  int status = 0;
  waitpid(pid, &status, 0);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    throw InputError("external command '" + argv[0] + "' failed (status " +
                     std::to_string(code) + ")");
  }
  return output;
}

}  // namespace vidcensor
