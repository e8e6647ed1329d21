#include "cbo/evaluators.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <regex>

#include <nlohmann/json.hpp>

#include "cbo/error.hpp"
#include "cbo/serialization.hpp"

namespace cbo {
namespace {

SyntheticProblem MakeGardner1() {
  SyntheticProblem p;
  p.name = "gardner1";
  p.space = SearchSpace({ParamSpec::Continuous("x", 0.0, 6.0), ParamSpec::Continuous("y", 0.0, 6.0)});
  p.task = Task::kRegression;
  // cos(x)cos(y) − sin(x)sin(y) <= 0.5, exponentiated so the metric stays positive.
  p.threshold = std::exp(0.5);
  p.objective = [](std::span<const double> v) {
    return std::cos(2.0 * v[0]) * std::cos(v[1]) + std::sin(v[0]);
  };
  p.constraint_metric = [](std::span<const double> v) {
    return std::exp(std::cos(v[0]) * std::cos(v[1]) - std::sin(v[0]) * std::sin(v[1]));
  };
  return p;
}

// Faster training (larger "compression") costs accuracy; the unconstrained
// optimum at compression = 1 violates the error bound.
SyntheticProblem MakeEnergyTradeoff() {
  SyntheticProblem p;
  p.name = "energy_tradeoff";
  p.space = SearchSpace({ParamSpec::Continuous("compression", 0.0, 1.0),
                         ParamSpec::Continuous("width", 0.0, 1.0)});
  p.task = Task::kRegression;
  p.threshold = 1.0;
  p.objective = [](std::span<const double> v) {
    return 1.5 * (1.0 - v[0]) + 0.5 * (v[1] - 0.3) * (v[1] - 0.3) - 0.5;
  };
  p.constraint_metric = [](std::span<const double> v) {
    return std::exp(2.0 * v[0] + (v[1] - 0.6) * (v[1] - 0.6) - 1.2);
  };
  return p;
}

const std::map<std::string, SyntheticProblem>& Registry() {
  static const std::map<std::string, SyntheticProblem> problems = [] {
    std::map<std::string, SyntheticProblem> m;
    for (auto p : {MakeGardner1(), MakeEnergyTradeoff()}) m.emplace(p.name, std::move(p));
    return m;
  }();
  return problems;
}

/// Temporary file removed on every exit path.
class TempFile {
 public:
  TempFile() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "cbo-params-XXXXXX.json").string();
    fd_ = ::mkstemps(pattern.data(), 5);
    if (fd_ < 0) throw Error("cannot create temporary params file");
    path_ = pattern;
  }
  ~TempFile() {
    if (fd_ >= 0) ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

  void Write(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(fd_, data.data() + off, data.size() - off);
      if (n < 0) throw Error("cannot write temporary params file");
      off += static_cast<std::size_t>(n);
    }
    ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
  std::string path_;
};

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_.data(), O_CLOEXEC) != 0) throw Error("pipe() failed");
  }
  ~Pipe() {
    CloseRead();
    CloseWrite();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  int read_fd() const { return fds_[0]; }
  int write_fd() const { return fds_[1]; }
  void CloseRead() { Close(0); }
  void CloseWrite() { Close(1); }

 private:
  void Close(int i) {
    if (fds_[i] >= 0) ::close(fds_[i]);
    fds_[i] = -1;
  }
  std::array<int, 2> fds_{-1, -1};
};

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string LastNonEmptyLine(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0) {
    std::size_t start = text.rfind('\n', end - 1);
    start = start == std::string::npos ? 0 : start + 1;
    std::string line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    if (start == 0) break;
    end = start - 1;
  }
  return {};
}

std::string Tail(const std::string& s, std::size_t n = 512) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

// Python's json module emits bare NaN / Infinity; treat them as null.
nlohmann::json ParseResultLine(const std::string& line) {
  auto parsed = nlohmann::json::parse(line, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  static const std::regex kNonFinite(R"((-?Infinity|NaN))");
  return nlohmann::json::parse(std::regex_replace(line, kNonFinite, "null"), nullptr, false);
}

}  // namespace

EvaluationResult EvaluationResult::Failed(std::string why, double runtime, double metric) {
  EvaluationResult r;
  r.status = EvalStatus::kFailed;
  r.diagnostic = std::move(why);
  r.runtime_seconds = runtime;
  r.metric = metric;
  return r;
}

std::vector<double> SyntheticProblem::RawPoint(const ParamValues& values) const {
  space.Encode(values);  // validates presence and bounds
  std::vector<double> out;
  for (const auto& p : space.params()) {
    const auto& v = values.at(p.name);
    out.push_back(std::holds_alternative<double>(v)
                      ? std::get<double>(v)
                      : static_cast<double>(std::get<std::int64_t>(v)));
  }
  return out;
}

bool SyntheticProblem::Feasible(double metric) const {
  return task == Task::kRegression ? metric <= threshold : metric >= threshold;
}

const SyntheticProblem& GetSyntheticProblem(const std::string& name) {
  const auto& reg = Registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw InvalidArgument("unknown synthetic problem '" + name + "'");
  return it->second;
}

std::vector<std::string> SyntheticProblemNames() {
  std::vector<std::string> out;
  for (const auto& [name, _] : Registry()) out.push_back(name);
  return out;
}

EvaluationResult EvaluateSynthetic(const SyntheticProblem& problem, const ParamValues& values,
                                   std::uint64_t noise_seed, double noise_scale) {
  const auto x = problem.RawPoint(values);
  std::mt19937_64 rng(noise_seed);
  const double eps = noise_scale > 0.0 ? std::normal_distribution<double>(0.0, noise_scale)(rng) : 0.0;
  EvaluationResult r;
  r.runtime_seconds = std::exp(problem.objective(x)) * std::max(1.0 + eps, 1e-3);
  r.metric = problem.constraint_metric(x);
  r.runtime_reported = true;
  return r;
}

GridOptimum GridSearchOptimum(const SyntheticProblem& problem, std::size_t resolution) {
  if (resolution < 2) throw InvalidArgument("grid resolution must be >= 2");
  const auto& params = problem.space.params();
  const std::size_t dim = params.size();
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> x(dim);
  GridOptimum best;
  best.resolution = resolution;
  best.objective = std::numeric_limits<double>::infinity();
  while (true) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = static_cast<double>(idx[d]) / static_cast<double>(resolution - 1);
      x[d] = params[d].low + t * (params[d].high - params[d].low);
    }
    const double metric = problem.constraint_metric(x);
    if (problem.Feasible(metric)) {
      const double f = problem.objective(x);
      if (f < best.objective) best = {x, f, metric, resolution};
    }
    std::size_t d = 0;
    while (d < dim && ++idx[d] == resolution) idx[d++] = 0;
    if (d == dim) break;
  }
  return best;
}

EvaluationResult EvaluateExternal(const std::string& command_template, const ParamValues& values,
                                  std::optional<double> timeout_seconds) {
  using Clock = std::chrono::steady_clock;
  if (command_template.find(kParamsPlaceholder) == std::string::npos) {
    return EvaluationResult::Failed("command template lacks the {params_file} placeholder");
  }
  try {
    TempFile params;
    params.Write(ToJson(values).dump());

    std::string command = command_template;
    const std::string quoted = ShellQuote(params.path());
    for (auto pos = command.find(kParamsPlaceholder); pos != std::string::npos;
         pos = command.find(kParamsPlaceholder, pos + quoted.size())) {
      command.replace(pos, kParamsPlaceholder.size(), quoted);
    }

    Pipe out;
    Pipe err;
    const auto start = Clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) return EvaluationResult::Failed("fork() failed");
    if (pid == 0) {
      ::setpgid(0, 0);
      ::dup2(out.write_fd(), STDOUT_FILENO);
      ::dup2(err.write_fd(), STDERR_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);
    out.CloseWrite();
    err.CloseWrite();

    std::string stdout_text;
    std::string stderr_text;
    bool timed_out = false;
    std::array<pollfd, 2> fds{{{out.read_fd(), POLLIN, 0}, {err.read_fd(), POLLIN, 0}}};
    int open_fds = 2;
    std::array<char, 4096> buf{};
    while (open_fds > 0) {
      int wait_ms = -1;
      if (timeout_seconds) {
        const double left =
            *timeout_seconds - std::chrono::duration<double>(Clock::now() - start).count();
        if (left <= 0.0) {
          timed_out = true;
          break;
        }
        wait_ms = static_cast<int>(std::ceil(left * 1000.0));
      }
      const int ready = ::poll(fds.data(), fds.size(), wait_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        break;
      }
      for (std::size_t i = 0; i < fds.size(); ++i) {
        if (fds[i].fd < 0 || fds[i].revents == 0) continue;
        const ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
        if (n > 0) {
          (i == 0 ? stdout_text : stderr_text).append(buf.data(), static_cast<std::size_t>(n));
        } else if (n == 0 || errno != EINTR) {
          fds[i].fd = -1;
          --open_fds;
        }
      }
    }
    if (timed_out) ::kill(-pid, SIGKILL);

    // Wait for exit without reaping so the process group id stays reserved,
    // then take down any grandchildren the shell left behind.
    siginfo_t info{};
    while (::waitid(P_PID, static_cast<id_t>(pid), &info, WEXITED | WNOWAIT) < 0 &&
           errno == EINTR) {
    }
    const double wallclock = std::chrono::duration<double>(Clock::now() - start).count();
    ::kill(-pid, SIGKILL);
    int status = 0;
    rusage usage{};
    while (::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
    }

    const double cpu = static_cast<double>(usage.ru_utime.tv_sec + usage.ru_stime.tv_sec) +
                       1e-6 * static_cast<double>(usage.ru_utime.tv_usec + usage.ru_stime.tv_usec);
    auto failed = [&](std::string why, double metric = std::numeric_limits<double>::quiet_NaN()) {
      auto r = EvaluationResult::Failed(std::move(why), wallclock, metric);
      r.cpu_seconds = cpu;
      return r;
    };

    if (timed_out) {
      return failed("timed out after " + std::to_string(*timeout_seconds) + " s");
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      const std::string how = WIFEXITED(status)
                                  ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                  : "terminated by signal " + std::to_string(WTERMSIG(status));
      return failed("evaluator " + how + ": " + Tail(stderr_text));
    }

    const std::string line = LastNonEmptyLine(stdout_text);
    const nlohmann::json result = ParseResultLine(line);
    if (result.is_discarded() || !result.is_object() || !result.contains("metric")) {
      return failed("unparsable result line: " + Tail(line));
    }
    const auto& metric_field = result["metric"];
    if (!metric_field.is_number() && !metric_field.is_null()) {
      return failed("result metric is not a number");
    }
    const double metric = metric_field.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                 : metric_field.get<double>();
    if (!std::isfinite(metric)) return failed("evaluator reported a non-finite metric", metric);

    EvaluationResult r;
    r.metric = metric;
    r.runtime_seconds = wallclock;
    r.cpu_seconds = cpu;
    if (result.contains("runtime_seconds") && !result["runtime_seconds"].is_null()) {
      const auto& rt = result["runtime_seconds"];
      if (!rt.is_number() || !std::isfinite(rt.get<double>()) || rt.get<double>() <= 0.0) {
        return failed("reported runtime_seconds must be a positive number", metric);
      }
      r.runtime_seconds = rt.get<double>();
      r.runtime_reported = true;
    }
    if (!(r.runtime_seconds > 0.0)) return failed("non-positive runtime", metric);
    return r;
  } catch (const std::exception& e) {
    return EvaluationResult::Failed(std::string("external evaluation error: ") + e.what());
  }
}

}  // namespace cbo
