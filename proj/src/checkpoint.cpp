#include "seu/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "seu/config.hpp"

namespace seu {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'U', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& metadata_json,
                     const std::vector<std::pair<std::string, Tensor>>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint64_t>(os, metadata_json.size());
  os.write(metadata_json.data(), static_cast<std::streamsize>(metadata_json.size()));
  write_pod<uint64_t>(os, params.size());
  for (const auto& [name, t] : params) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_pod<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.size())));
  }
  if (!os) throw FormatError("checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in " + path);
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion)
    throw FormatError("checkpoint: version " + std::to_string(version) +
                      " unsupported (expected " + std::to_string(kVersion) + ")");
  Checkpoint ckpt;
  const uint64_t mlen = read_pod<uint64_t>(is);
  ckpt.metadata_json.resize(mlen);
  is.read(ckpt.metadata_json.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw FormatError("checkpoint: truncated metadata");
  const uint64_t nblocks = read_pod<uint64_t>(is);
  for (uint64_t b = 0; b < nblocks; ++b) {
    CheckpointBlock blk;
    const uint32_t nlen = read_pod<uint32_t>(is);
    blk.name.resize(nlen);
    is.read(blk.name.data(), nlen);
    const uint32_t ndim = read_pod<uint32_t>(is);
    size_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      blk.shape.push_back(static_cast<int>(read_pod<int64_t>(is)));
      n *= static_cast<size_t>(blk.shape.back());
    }
    blk.data.resize(n);
    is.read(reinterpret_cast<char*>(blk.data.data()),
            static_cast<std::streamsize>(sizeof(double) * n));
    if (!is) throw FormatError("checkpoint: truncated block '" + blk.name + "'");
    ckpt.blocks.push_back(std::move(blk));
  }
  return ckpt;
}

void load_into(const Checkpoint& ckpt,
               std::vector<std::pair<std::string, Tensor>> params) {
  if (ckpt.blocks.size() != params.size())
    throw FormatError("checkpoint: has " + std::to_string(ckpt.blocks.size()) +
                      " blocks, model expects " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const CheckpointBlock& blk = ckpt.blocks[i];
    Tensor& t = params[i].second;
    if (blk.name != params[i].first)
      throw FormatError("checkpoint: block '" + blk.name + "' where model expects '" +
                        params[i].first + "'");
    if (blk.shape != t.shape()) {
      std::string want, got;
      for (int d : t.shape()) want += std::to_string(d) + " ";
      for (int d : blk.shape) got += std::to_string(d) + " ";
      throw FormatError("checkpoint: block '" + blk.name + "' shape [" + got +
                        "] does not match model shape [" + want + "]");
    }
    std::memcpy(t.data(), blk.data.data(), sizeof(double) * blk.data.size());
  }
}

}  // namespace seu
