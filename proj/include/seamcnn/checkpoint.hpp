#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seamcnn/model.hpp"

namespace seamcnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as native f32 and declared little-endian");

inline constexpr const char* kCheckpointMagic = "seamcnn-checkpoint v1";

// Layout: a text manifest (key=value lines, closed by "end") that names each
// parameter tensor with its shape and byte offset, then the raw f32 data in
// manifest order.
inline void save_checkpoint(const Model& model, const std::string& path) {
    std::ostringstream manifest;
    manifest << kCheckpointMagic << "\n";
    manifest << "format=f32-le\n";
    manifest << "pool_kind=" << pool_kind_name(model.pool_kind()) << "\n";

    const auto named = model.named_parameters();
    manifest << "tensors=" << named.size() << "\n";
    std::vector<float> payload;
    std::size_t offset = 0;
    for (std::size_t t = 0; t < named.size(); ++t) {
        const auto& [name, tensor] = named[t];
        manifest << "tensor." << t << ".name=" << name << "\n";
        manifest << "tensor." << t << ".shape=" << tensor->shape_str() << "\n";
        manifest << "tensor." << t << ".offset=" << offset << "\n";
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            payload.push_back(static_cast<float>(tensor->at(i)));
        }
        offset += tensor->size() * sizeof(float);
    }
    manifest << "data_bytes=" << offset << "\n";
    manifest << "end\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot write checkpoint '" + path + "'");
    const std::string head = manifest.str();
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!f.good()) throw CheckpointError("failed while writing checkpoint '" + path + "'");
}

namespace detail {

inline std::string checkpoint_line(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) {
        throw CheckpointError("checkpoint '" + path + "' ended mid-manifest");
    }
    return line;
}

inline std::string manifest_value(const std::string& line, const std::string& key,
                                  const std::string& path) {
    const std::string prefix = key + "=";
    if (line.rfind(prefix, 0) != 0) {
        throw CheckpointError("checkpoint '" + path + "': expected '" + key + "=...', got '" +
                              line + "'");
    }
    return line.substr(prefix.size());
}

inline std::size_t manifest_number(const std::string& value, const std::string& path) {
    try {
        std::size_t used = 0;
        const std::size_t n = std::stoul(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return n;
    } catch (const std::exception&) {
        throw CheckpointError("checkpoint '" + path + "' has a non-numeric manifest field '" +
                              value + "'");
    }
}

} // namespace detail

// Rebuilds a model of the recorded pool kind and overwrites every parameter
// from the stored f32 payload. Any structural mismatch with the current
// architecture is a checkpoint error.
inline Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
    if (detail::checkpoint_line(f, path) != kCheckpointMagic) {
        throw CheckpointError("'" + path + "' is not a checkpoint (bad magic line)");
    }
    const std::string format =
        detail::manifest_value(detail::checkpoint_line(f, path), "format", path);
    if (format != "f32-le") {
        throw CheckpointError("checkpoint '" + path + "' has unsupported format '" + format + "'");
    }
    const PoolKind kind = [&] {
        const std::string v =
            detail::manifest_value(detail::checkpoint_line(f, path), "pool_kind", path);
        try {
            return pool_kind_from(v);
        } catch (const ConfigError&) {
            throw CheckpointError("checkpoint '" + path + "' names unknown pool kind '" + v + "'");
        }
    }();

    Model model(kind, 0);
    auto named = model.named_parameters();
    const std::size_t tensors = detail::manifest_number(
        detail::manifest_value(detail::checkpoint_line(f, path), "tensors", path), path);
    if (tensors != named.size()) {
        throw CheckpointError("checkpoint '" + path + "' stores " + std::to_string(tensors) +
                              " tensors; the model has " + std::to_string(named.size()));
    }
    std::size_t expect_offset = 0;
    for (std::size_t t = 0; t < tensors; ++t) {
        const std::string tag = "tensor." + std::to_string(t);
        const std::string name =
            detail::manifest_value(detail::checkpoint_line(f, path), tag + ".name", path);
        const std::string shape =
            detail::manifest_value(detail::checkpoint_line(f, path), tag + ".shape", path);
        const std::size_t offset = detail::manifest_number(
            detail::manifest_value(detail::checkpoint_line(f, path), tag + ".offset", path), path);
        if (name != named[t].first || shape != named[t].second->shape_str()) {
            throw CheckpointError("checkpoint '" + path + "' tensor " + std::to_string(t) +
                                  " is " + name + " " + shape + "; the model expects " +
                                  named[t].first + " " + named[t].second->shape_str());
        }
        if (offset != expect_offset) {
            throw CheckpointError("checkpoint '" + path + "' tensor " + name +
                                  " has offset " + std::to_string(offset) + "; expected " +
                                  std::to_string(expect_offset));
        }
        expect_offset += named[t].second->size() * sizeof(float);
    }
    const std::size_t data_bytes = detail::manifest_number(
        detail::manifest_value(detail::checkpoint_line(f, path), "data_bytes", path), path);
    if (data_bytes != expect_offset) {
        throw CheckpointError("checkpoint '" + path + "' declares " + std::to_string(data_bytes) +
                              " data bytes; the manifest implies " +
                              std::to_string(expect_offset));
    }
    if (detail::checkpoint_line(f, path) != "end") {
        throw CheckpointError("checkpoint '" + path + "' manifest is not closed by 'end'");
    }

    std::vector<float> payload(data_bytes / sizeof(float));
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(data_bytes));
    if (f.gcount() != static_cast<std::streamsize>(data_bytes)) {
        throw CheckpointError("checkpoint '" + path + "' payload is truncated");
    }
    std::size_t cursor = 0;
    for (auto& [name, tensor] : named) {
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            tensor->at(i) = static_cast<double>(payload[cursor++]);
        }
    }
    return model;
}

} // namespace seamcnn
