#include "mvkid/config.hpp"
#include "mvkid/mvmc.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mvkid {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'V', 'K', 'D'};

template <class T>
void put(std::string& out, T value)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view bytes, std::size_t& pos)
{
    if (bytes.size() - pos < sizeof(T))
        throw CheckpointError(CheckpointError::Kind::Checksum, "corrupt checkpoint: truncated");
    T value;
    std::memcpy(&value, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

std::uint32_t crc32_of(std::string_view bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1U << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace

std::string serialize_model(const MvmcModel& model)
{
    json header;
    header["config"] = to_json(model.config);
    header["labels"] = model.labels;
    header["normalizer"] = to_json(model.normalizer);
    header["metadata"] = model.metadata;
    json tensors = json::array();
    for (const auto& t : model.net.tensors())
        tensors.push_back({{"name", t.name}, {"size", t.values.size()}});
    header["tensors"] = tensors;
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out += text;
    for (const auto& t : model.net.tensors())
        for (double x : t.values)
            put<double>(out, x);
    put<std::uint32_t>(out, crc32_of(out));
    return out;
}

MvmcModel deserialize_model(std::string_view bytes)
{
    using Kind = CheckpointError::Kind;
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw CheckpointError(Kind::Format, "not an MVKD checkpoint (bad magic)");
    std::size_t pos = sizeof kMagic;
    const auto version = take<std::uint32_t>(bytes, pos);
    if (version != kCheckpointVersion)
        throw CheckpointError(Kind::Version, "unsupported checkpoint version " + std::to_string(version)
                                                 + " (this build reads version "
                                                 + std::to_string(kCheckpointVersion) + ")");
    if (bytes.size() < pos + sizeof(std::uint32_t))
        throw CheckpointError(Kind::Checksum, "corrupt checkpoint: truncated");
    const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint32_t));
    std::size_t crc_pos = body.size();
    if (take<std::uint32_t>(bytes, crc_pos) != crc32_of(body))
        throw CheckpointError(Kind::Checksum, "corrupt checkpoint: CRC32 mismatch");

    const auto header_len = take<std::uint64_t>(body, pos);
    if (body.size() - pos < header_len)
        throw CheckpointError(Kind::Format, "corrupt checkpoint: header overruns file");
    json header;
    try {
        header = json::parse(body.substr(pos, header_len));
    } catch (const json::exception& e) {
        throw CheckpointError(Kind::Format, std::string("corrupt checkpoint header: ") + e.what());
    }
    pos += header_len;

    MvmcModel model;
    try {
        model.config = model_config_from_json(header.at("config"));
        model.labels = header.at("labels").get<std::vector<std::string>>();
        model.normalizer = normalizer_from_json(header.at("normalizer"));
        model.metadata = header.at("metadata").get<std::map<std::string, std::string>>();
        model.net = Network::zeros(model.config.shape());
    } catch (const std::exception& e) {
        throw CheckpointError(Kind::Format, std::string("invalid checkpoint header: ") + e.what());
    }
    if (model.labels.size() != model.config.n_classes)
        throw CheckpointError(Kind::Format, "checkpoint label count does not match n_classes");

    const json& declared = header.at("tensors");
    auto tensors = model.net.tensors();
    if (!declared.is_array() || declared.size() != tensors.size())
        throw CheckpointError(Kind::Format, "checkpoint tensor list does not match the configured network");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        if (declared[k].at("name") != tensors[k].name || declared[k].at("size") != tensors[k].values.size())
            throw CheckpointError(Kind::Format, "checkpoint tensor " + tensors[k].name + " has unexpected shape");
        for (double& x : tensors[k].values)
            x = take<double>(body, pos);
    }
    if (pos != body.size())
        throw CheckpointError(Kind::Format, "corrupt checkpoint: trailing bytes");
    return model;
}

void save_model(const MvmcModel& model, const std::filesystem::path& path)
{
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw CheckpointError(CheckpointError::Kind::Io, "write failure on " + path.string());
}

MvmcModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace mvkid
