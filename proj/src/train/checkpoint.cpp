#include "neurmap/train/checkpoint.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "neurmap/blur/synth.hpp"
#include "neurmap/io/binary.hpp"

namespace neurmap::train {

using diff::ParameterSet;

TrainState TrainState::initial(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  s.d = nets::init_params(config.arch, nets::Role::Deblur, config.seed);
  s.m = nets::init_params(config.arch, nets::Role::Motion, config.seed);
  s.n = nets::init_params(config.arch, nets::Role::Discriminator, config.seed);
  s.adam_d = diff::AdamState<float>::for_params(s.d.params);
  s.adam_m = diff::AdamState<float>::for_params(s.m.params);
  s.adam_n = diff::AdamState<float>::for_params(s.n.params);
  s.rng.seed(blur::mix_seed(config.seed ^ 0xda7a5eedULL));
  return s;
}

namespace {

struct NetSlot {
  const char* tag;
  nets::NetParams<float> TrainState::*net;
  diff::AdamState<float> TrainState::*adam;
};
constexpr NetSlot kSlots[] = {{"D", &TrainState::d, &TrainState::adam_d},
                              {"M", &TrainState::m, &TrainState::adam_m},
                              {"N", &TrainState::n, &TrainState::adam_n}};

void put_payload(std::ostream& os, std::span<const float> v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void get_payload(std::istream& is, std::span<float> v, const std::string& what) {
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float))))
    throw std::runtime_error("checkpoint: truncated payload of " + what);
}

}  // namespace

std::string serialize_checkpoint(const TrainState& s) {
  std::ostringstream os(std::ios::binary);
  os.write("NMCK", 4);
  io::put_u32(os, kCheckpointVersion);
  std::uint32_t count = 0;
  for (const auto& slot : kSlots) count += static_cast<std::uint32_t>((s.*slot.net).params.size());
  io::put_u32(os, count);
  for (const auto& slot : kSlots) {
    for (const auto& it : (s.*slot.net).params.items()) {
      io::put_bytes(os, std::string(slot.tag) + "/" + it.name);
      io::put_u32(os, static_cast<std::uint32_t>(it.value.rank()));
      for (auto e : it.value.shape()) io::put_u32(os, static_cast<std::uint32_t>(e));
      put_payload(os, it.value.values());
    }
  }
  for (const auto& slot : kSlots) {
    const auto& adam = s.*slot.adam;
    io::put_bytes(os, std::string("adam/") + slot.tag);
    io::put_u64(os, static_cast<std::uint64_t>(adam.t));
    io::put_u32(os, static_cast<std::uint32_t>(adam.moments.size()));
    for (const auto& mo : adam.moments) {
      io::put_u32(os, static_cast<std::uint32_t>(mo.m.size()));
      put_payload(os, mo.m);
      put_payload(os, mo.v);
    }
  }
  io::put_u64(os, static_cast<std::uint64_t>(s.step));
  std::ostringstream rng;
  rng << s.rng;
  io::put_bytes(os, rng.str());
  io::put_bytes(os, s.config.to_text());
  return os.str();
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "NMCK")
    throw std::runtime_error("checkpoint: bad magic (not a NeurMAP checkpoint)");
  const auto version = io::get_u32(is, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error(fmt::format("checkpoint: version {} is not supported (expected {})", version,
                                         kCheckpointVersion));
  struct Record {
    diff::Shape shape;
    std::vector<float> values;
  };
  std::map<std::string, Record> records;
  const auto count = io::get_u32(is, "record count");
  for (std::uint32_t r = 0; r < count; ++r) {
    auto name = io::get_bytes(is, "tensor name", 4096);
    Record rec;
    const auto rank = io::get_u32(is, "rank");
    if (rank > 8) throw std::runtime_error("checkpoint: implausible rank for " + name);
    for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(io::get_u32(is, "extent"));
    rec.values.resize(diff::shape_numel(rec.shape));
    get_payload(is, rec.values, name);
    records.emplace(std::move(name), std::move(rec));
  }
  struct AdamBlock {
    std::string tag;
    diff::AdamState<float> state;
  };
  std::vector<AdamBlock> adams;
  for (int k = 0; k < 3; ++k) {
    AdamBlock b{io::get_bytes(is, "optimizer tag", 64), {}};
    b.state.t = static_cast<std::int64_t>(io::get_u64(is, "adam step"));
    const auto n = io::get_u32(is, "moment count");
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto len = io::get_u32(is, "moment size");
      diff::AdamMoments<float> mo{std::vector<float>(len), std::vector<float>(len)};
      get_payload(is, mo.m, b.tag);
      get_payload(is, mo.v, b.tag);
      b.state.moments.push_back(std::move(mo));
    }
    adams.push_back(std::move(b));
  }
  const auto step = io::get_u64(is, "step");
  const auto rng_text = io::get_bytes(is, "rng state");
  const auto config_text = io::get_bytes(is, "config");
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");

  TrainState s = TrainState::initial(TrainConfig::parse(config_text));
  s.step = static_cast<std::int64_t>(step);
  std::istringstream rs(rng_text);
  rs >> s.rng;
  if (!rs) throw std::runtime_error("checkpoint: corrupt RNG state");
  std::size_t used = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& slot = kSlots[k];
    auto& net = s.*slot.net;
    for (auto& it : net.params.items()) {
      const auto key = std::string(slot.tag) + "/" + it.name;
      auto rec = records.find(key);
      if (rec == records.end()) throw std::runtime_error("checkpoint: missing tensor " + key);
      if (rec->second.shape != it.value.shape())
        throw std::runtime_error("checkpoint: tensor " + key + " has shape " + diff::shape_str(rec->second.shape) +
                                 ", the configured network expects " + diff::shape_str(it.value.shape()));
      std::copy(rec->second.values.begin(), rec->second.values.end(), it.value.mutable_values().begin());
      ++used;
    }
    if (adams[k].tag != std::string("adam/") + slot.tag)
      throw std::runtime_error("checkpoint: optimizer block " + adams[k].tag + " out of order");
    const auto& st = adams[k].state;
    if (st.moments.size() != net.params.size())
      throw std::runtime_error(std::string("checkpoint: optimizer state of ") + slot.tag + " does not match");
    for (std::size_t i = 0; i < st.moments.size(); ++i)
      if (st.moments[i].m.size() != net.params.items()[i].value.numel())
        throw std::runtime_error(std::string("checkpoint: optimizer moment size mismatch in ") + slot.tag);
    s.*slot.adam = st;
  }
  if (used != records.size()) throw std::runtime_error("checkpoint: unexpected extra tensors");
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_checkpoint(ss.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

InferenceNets load_networks(const std::filesystem::path& path) {
  auto s = load_checkpoint(path);
  return {s.config, std::move(s.d), std::move(s.m)};
}

}  // namespace neurmap::train
