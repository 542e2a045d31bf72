#include "ciisod/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include "ciisod/config.hpp"
#include "ciisod/error.hpp"

namespace ciisod {

namespace {

constexpr std::size_t kMagicLength = 8;
const char* const kTrackedSuffix = ".batches_tracked";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError("checkpoint truncated reading " + std::string(what) + " at byte " +
                        std::to_string(pos_));
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint32_t> dims_of(const Shape& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

std::string dims_str(const std::vector<std::uint32_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

std::string tracked_name(const std::string& running_mean_name) {
  const std::string suffix = ".running_mean";
  return running_mean_name.substr(0, running_mean_name.size() - suffix.size()) + kTrackedSuffix;
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + kMagicLength);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.model_config.size()));
  out.insert(out.end(), ckpt.model_config.begin(), ckpt.model_config.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    std::size_t count = 1;
    for (auto d : e.dims) {
      put_u32(out, d);
      count *= d;
    }
    if (count != e.values.size()) {
      throw ContractError("checkpoint entry " + e.name + " has " + std::to_string(e.values.size()) +
                          " values for shape " + dims_str(e.dims));
    }
    for (float v : e.values) put_f32(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.text(kMagicLength, "magic");
  if (magic != std::string(kCheckpointMagic, kMagicLength)) {
    throw FormatError("not a checkpoint: bad magic at byte 0");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at byte 8");
  }
  Checkpoint ckpt;
  const std::uint32_t config_len = r.u32("config length");
  ckpt.model_config = r.text(config_len, "config");
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = r.u32("name length");
    e.name = r.text(name_len, "entry name");
    const std::size_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank > 4) {
      throw FormatError("entry " + e.name + ": rank " + std::to_string(rank) + " at byte " +
                        std::to_string(rank_at) + " exceeds 4");
    }
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims.push_back(r.u32("dims"));
      numel *= e.dims.back();
    }
    r.need(numel * 4, "values");
    e.values.resize(numel);
    for (auto& v : e.values) v = r.f32("values");
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.done()) {
    throw FormatError("trailing bytes after the last entry at byte " + std::to_string(r.offset()));
  }
  return ckpt;
}

template <class T>
Checkpoint snapshot(SaliencyModel<T>& model) {
  Checkpoint ckpt;
  ckpt.model_config = to_json(model.config()).dump();
  for (const auto& s : model.state()) {
    CheckpointEntry e;
    e.name = s.name;
    e.dims = dims_of(s.shape);
    e.values.assign(s.values, s.values + s.count());
    ckpt.entries.push_back(std::move(e));
    if (s.batches_tracked) {
      ckpt.entries.push_back(
          {tracked_name(s.name), {1}, {static_cast<float>(*s.batches_tracked)}});
    }
  }
  return ckpt;
}

template <class T>
void restore(SaliencyModel<T>& model, const Checkpoint& ckpt) {
  StateList<T> state = model.state();
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) by_name[e.name] = &e;

  std::size_t expected = 0;
  for (const auto& s : state) {
    ++expected;
    auto it = by_name.find(s.name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing " + s.name);
    if (it->second->dims != dims_of(s.shape)) {
      throw FormatError("shape mismatch for " + s.name + ": checkpoint " +
                        dims_str(it->second->dims) + " vs model " + dims_str(dims_of(s.shape)));
    }
    if (s.batches_tracked) {
      ++expected;
      auto t = by_name.find(tracked_name(s.name));
      if (t == by_name.end()) throw FormatError("checkpoint is missing " + tracked_name(s.name));
      if (t->second->values.size() != 1) {
        throw FormatError("shape mismatch for " + tracked_name(s.name));
      }
    }
  }
  if (expected != ckpt.entries.size() || by_name.size() != ckpt.entries.size()) {
    std::unordered_map<std::string, int> known;
    for (const auto& s : state) {
      known[s.name] = 1;
      if (s.batches_tracked) known[tracked_name(s.name)] = 1;
    }
    for (const auto& e : ckpt.entries) {
      if (!known.count(e.name)) throw FormatError("checkpoint has unexpected entry " + e.name);
    }
    throw FormatError("checkpoint has duplicate entries");
  }

  for (auto& s : state) {
    const auto& values = by_name.at(s.name)->values;
    for (std::size_t i = 0; i < values.size(); ++i) s.values[i] = static_cast<T>(values[i]);
    if (s.batches_tracked) {
      *s.batches_tracked =
          static_cast<std::int64_t>(by_name.at(tracked_name(s.name))->values[0]);
    }
  }
}

template <class T>
void save_checkpoint(SaliencyModel<T>& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(snapshot(model));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

template <class T>
SaliencyModel<T> load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.model_config.empty()) throw FormatError(path.string() + ": no model config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.model_config);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": bad model config: " + e.what());
  }
  SaliencyModel<T> model(model_config_from_json(j), 0);
  restore(model, ckpt);
  return model;
}

template Checkpoint snapshot(SaliencyModel<float>&);
template Checkpoint snapshot(SaliencyModel<double>&);
template void restore(SaliencyModel<float>&, const Checkpoint&);
template void restore(SaliencyModel<double>&, const Checkpoint&);
template void save_checkpoint(SaliencyModel<float>&, const std::filesystem::path&);
template void save_checkpoint(SaliencyModel<double>&, const std::filesystem::path&);
template SaliencyModel<float> load_model(const std::filesystem::path&);
template SaliencyModel<double> load_model(const std::filesystem::path&);

}  // namespace ciisod
