#include "rtplan/core/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset files are little-endian; big-endian hosts unsupported");

namespace rtplan {

namespace {

using nlohmann::json;

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  json header;
  header["env_id"] = data.meta.env_id;
  header["behavior_id"] = data.meta.behavior_id;
  header["seed"] = data.meta.seed;
  header["n"] = data.meta.transition_count;
  header["state_dim"] = data.meta.state_dim;
  header["action_dim"] = data.meta.action_dim;
  std::vector<std::size_t> lengths;
  std::vector<int> starts;
  for (const auto& t : data.trajectories) {
    lengths.push_back(t.size());
    starts.push_back(t.start_time);
  }
  header["trajectory_lengths"] = lengths;
  header["start_times"] = starts;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open " + path);
  os << header.dump() << '\n';

  std::vector<double> rec;
  for (const auto& traj : data.trajectories) {
    for (const auto& tr : traj.transitions) {
      rec.clear();
      rec.insert(rec.end(), tr.state.begin(), tr.state.end());
      rec.insert(rec.end(), tr.action.begin(), tr.action.end());
      rec.push_back(tr.reward);
      rec.insert(rec.end(), tr.next_state.begin(), tr.next_state.end());
      rec.push_back(tr.done ? 1.0 : 0.0);
      write_doubles(os, rec);
    }
  }
  if (!os) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_dataset: missing header");
  json header = json::parse(line);

  Dataset data;
  data.meta.env_id = header.at("env_id").get<std::string>();
  data.meta.behavior_id = header.at("behavior_id").get<std::string>();
  data.meta.seed = header.at("seed").get<std::uint64_t>();
  data.meta.transition_count = header.at("n").get<std::size_t>();
  data.meta.state_dim = header.at("state_dim").get<int>();
  data.meta.action_dim = header.at("action_dim").get<int>();
  auto lengths = header.at("trajectory_lengths").get<std::vector<std::size_t>>();
  auto starts = header.at("start_times").get<std::vector<int>>();

  const int sd = data.meta.state_dim;
  const int ad = data.meta.action_dim;
  const std::size_t rec_len = 2 * sd + ad + 2;
  std::vector<double> rec(rec_len);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    Trajectory traj;
    traj.start_time = starts[i];
    for (std::size_t k = 0; k < lengths[i]; ++k) {
      if (!is.read(reinterpret_cast<char*>(rec.data()),
                   static_cast<std::streamsize>(rec_len * sizeof(double))))
        throw std::runtime_error("load_dataset: truncated file " + path);
      Transition tr;
      auto it = rec.begin();
      tr.state.assign(it, it + sd);
      it += sd;
      tr.action.assign(it, it + ad);
      it += ad;
      tr.reward = *it++;
      tr.next_state.assign(it, it + sd);
      it += sd;
      tr.done = *it != 0.0;
      traj.transitions.push_back(std::move(tr));
    }
    data.trajectories.push_back(std::move(traj));
  }
  if (data.transition_count() != data.meta.transition_count)
    throw std::runtime_error("load_dataset: header transition count mismatch");
  return data;
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("export_dataset_csv: cannot open " + path);
  os.precision(17);
  for (int i = 0; i < data.meta.state_dim; ++i) os << "s" << i << ",";
  for (int i = 0; i < data.meta.action_dim; ++i) os << "a" << i << ",";
  os << "reward,";
  for (int i = 0; i < data.meta.state_dim; ++i) os << "s_next" << i << ",";
  os << "done\n";
  for (const auto& traj : data.trajectories) {
    for (const auto& tr : traj.transitions) {
      for (double x : tr.state) os << x << ",";
      for (double x : tr.action) os << x << ",";
      os << tr.reward << ",";
      for (double x : tr.next_state) os << x << ",";
      os << (tr.done ? 1 : 0) << "\n";
    }
  }
}

}  // namespace rtplan
