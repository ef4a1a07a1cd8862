#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "flowcorr/trace.hpp"

namespace testutil {

using flowcorr::ConnectionId;
using flowcorr::Direction;
using flowcorr::Flow;
using flowcorr::PacketRecord;
using flowcorr::Side;

inline Flow make_flow(const std::string& id,
                      std::vector<std::tuple<double, Direction, uint64_t>> packets) {
  Flow flow;
  Side side = flowcorr::side_from_id(id);
  flow.conn = ConnectionId{id,
                           {side == Side::ServerSide ? "10.0.0.5" : "10.0.0.9",
                            static_cast<uint16_t>(side == Side::ServerSide ? 443 : 51000)},
                           {side == Side::ServerSide ? "10.0.0.7" : "10.0.0.2", 9001},
                           side};
  for (auto& [ts, dir, size] : packets) flow.packets.push_back({ts, dir, size});
  return flow;
}

/// Downstream-only flow from (timestamp, size) pairs.
inline Flow down_flow(const std::string& id, std::vector<std::pair<double, uint64_t>> packets) {
  Flow flow = make_flow(id, {});
  for (auto& [ts, size] : packets) flow.packets.push_back({ts, Direction::Downstream, size});
  return flow;
}

/// Random downstream flow whose metrics land in sane ranges.
inline Flow random_flow(const std::string& id, std::mt19937_64& rng, double start_lo = 0.0,
                        double start_hi = 10.0, size_t max_packets = 40) {
  std::uniform_real_distribution<double> start(start_lo, start_hi);
  std::uniform_int_distribution<size_t> count(1, max_packets);
  std::uniform_real_distribution<double> gap(0.0, 0.5);
  std::uniform_int_distribution<uint64_t> size(1, 1500);

  Flow flow = make_flow(id, {});
  double t = start(rng);
  size_t n = count(rng);
  for (size_t i = 0; i < n; ++i) {
    flow.packets.push_back({t, Direction::Downstream, size(rng)});
    t += gap(rng);
  }
  return flow;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("flowcorr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
