#include "brief/trainer.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

extern char** environ;

namespace brief {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json make_trainer_request(const std::string& run_id, const ModelSpec& model, const ChannelConfig& config,
                                  const TrainingBudget& budget) {
  ordered_json j;
  j["run_id"] = run_id;
  j["channels"] = config.channels;
  j["macroblock_starts"] = config.macroblock_starts;
  j["dataset"] = model.metadata.dataset;
  j["num_classes"] = model.metadata.num_classes;
  j["epochs"] = budget.epochs;
  j["lr_initial"] = budget.lr_initial;
  j["lr_milestones"] = budget.lr_milestones;
  j["lr_divisor"] = budget.lr_divisor;
  j["momentum"] = budget.momentum;
  j["weight_decay"] = budget.weight_decay;
  j["batch_size"] = budget.batch_size;
  j["seed"] = budget.seed;
  return j;
}

TrainerReply parse_trainer_reply(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("trainer reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("trainer reply is not an object");
  try {
    TrainerReply r;
    r.run_id = j.at("run_id").get<std::string>();
    r.status = parse_eval_status(j.at("status").get<std::string>());
    if (j.contains("top1") && !j.at("top1").is_null()) {
      r.top1 = j.at("top1").get<double>();
    } else if (r.status == EvalStatus::ok) {
      throw std::invalid_argument("trainer reply with status ok lacks top1");
    }
    if (j.contains("top5") && !j.at("top5").is_null()) r.top5 = j.at("top5").get<double>();
    if (j.contains("wall_seconds") && !j.at("wall_seconds").is_null()) r.wall_seconds = j.at("wall_seconds").get<double>();
    if (r.status == EvalStatus::ok) {
      if (!(r.top1 >= 0.0 && r.top1 <= 1.0)) throw std::invalid_argument("trainer top1 outside [0, 1]");
      if (r.top5 && !(*r.top5 >= r.top1 && *r.top5 <= 1.0)) throw std::invalid_argument("trainer top5 outside [top1, 1]");
    }
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed trainer reply: ") + e.what());
  }
}

ExternalTrainerOracle::ExternalTrainerOracle(TrainerOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw std::invalid_argument("external trainer command is empty");
  if (options_.parallelism == 0) options_.parallelism = 1;
  workers_.resize(options_.parallelism);
  busy_.assign(options_.parallelism, false);
}

ExternalTrainerOracle::~ExternalTrainerOracle() {
  for (auto& w : workers_) stop(w, false);
}

std::size_t ExternalTrainerOracle::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    for (std::size_t i = 0; i < busy_.size(); ++i) {
      if (!busy_[i]) {
        busy_[i] = true;
        return i;
      }
    }
    freed_.wait(lock);
  }
}

void ExternalTrainerOracle::release(std::size_t slot) {
  {
    std::lock_guard lock(mutex_);
    busy_[slot] = false;
  }
  freed_.notify_one();
}

bool ExternalTrainerOracle::ensure_running(Worker& w, std::string& error) {
  if (w.pid > 0) return true;
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    error = std::string("socketpair: ") + std::strerror(errno);
    return false;
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

  std::vector<char*> argv;
  for (auto& a : options_.command) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    error = "cannot start trainer '" + options_.command.front() + "': " + std::strerror(rc);
    return false;
  }
  w.pid = pid;
  w.fd = fds[0];
  w.pending.clear();
  return true;
}

void ExternalTrainerOracle::stop(Worker& w, bool force) {
  if (w.fd >= 0) ::close(w.fd);
  w.fd = -1;
  w.pending.clear();
  if (w.pid <= 0) return;
  if (force) ::kill(w.pid, SIGKILL);
  for (int i = 0; i < 200; ++i) {
    int status = 0;
    pid_t r = ::waitpid(w.pid, &status, WNOHANG);
    if (r == w.pid || r < 0) {
      w.pid = -1;
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(w.pid, SIGKILL);
  ::waitpid(w.pid, nullptr, 0);
  w.pid = -1;
}

bool ExternalTrainerOracle::read_line(Worker& w, std::string& line, std::string& error) {
  using clock = std::chrono::steady_clock;
  const bool bounded = options_.timeout_seconds > 0;
  const auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(
                                           std::chrono::duration<double>(bounded ? options_.timeout_seconds : 0.0));
  for (;;) {
    if (auto nl = w.pending.find('\n'); nl != std::string::npos) {
      line = w.pending.substr(0, nl);
      w.pending.erase(0, nl + 1);
      return true;
    }
    int wait_ms = -1;
    if (bounded) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
      if (left <= 0) {
        error = "trainer did not reply within " + std::to_string(options_.timeout_seconds) + " s";
        return false;
      }
      wait_ms = static_cast<int>(std::min<long long>(left, 1 << 30));
    }
    pollfd pfd{w.fd, POLLIN, 0};
    int rc = ::poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      error = std::string("poll: ") + std::strerror(errno);
      return false;
    }
    if (rc == 0) continue;
    char buf[4096];
    ssize_t n = ::recv(w.fd, buf, sizeof(buf), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      error = std::string("recv: ") + std::strerror(errno);
      return false;
    }
    if (n == 0) {
      error = "trainer closed its output";
      return false;
    }
    w.pending.append(buf, static_cast<std::size_t>(n));
  }
}

EvaluationRecord ExternalTrainerOracle::evaluate(const ModelSpec& model, const ChannelConfig& config,
                                                 const TrainingBudget& budget) {
  EvaluationRecord record = make_record(model, config, budget);
  const std::string run_id = record.config_digest + "-" + std::to_string(sequence_.fetch_add(1));
  const std::string request = make_trainer_request(run_id, model, config, budget).dump() + "\n";

  const std::size_t slot = acquire();
  Worker& w = workers_[slot];
  const auto started = std::chrono::steady_clock::now();
  std::string error;
  std::string line;

  auto finish = [&](EvalStatus status, std::string message) {
    record.status = status;
    record.message = std::move(message);
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  if (!ensure_running(w, error)) {
    release(slot);
    finish(EvalStatus::timeout, error);
    return record;
  }

  bool sent = true;
  for (std::size_t off = 0; off < request.size();) {
    ssize_t n = ::send(w.fd, request.data() + off, request.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      error = std::string("trainer unreachable: ") + std::strerror(errno);
      sent = false;
      break;
    }
    off += static_cast<std::size_t>(n);
  }
  if (sent) dispatched_.fetch_add(1);

  if (!sent || !read_line(w, line, error)) {
    stop(w, true);
    release(slot);
    finish(EvalStatus::timeout, error);
    return record;
  }
  release(slot);

  TrainerReply reply;
  try {
    reply = parse_trainer_reply(line);
  } catch (const std::invalid_argument& e) {
    finish(EvalStatus::failed, e.what());
    return record;
  }
  if (reply.run_id != run_id) {
    finish(EvalStatus::failed, "trainer echoed run_id '" + reply.run_id + "', expected '" + run_id + "'");
    return record;
  }
  finish(reply.status, reply.status == EvalStatus::ok ? "" : "trainer reported " + std::string(to_string(reply.status)));
  record.top1 = reply.top1;
  record.top5 = reply.top5;
  if (reply.wall_seconds) record.wall_seconds = *reply.wall_seconds;
  if (!record.ok()) record.top1 = std::clamp(record.top1, 0.0, 1.0);
  return record;
}

}  // namespace brief
