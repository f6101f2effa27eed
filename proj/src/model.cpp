#include "l2cl/model.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace l2cl {

namespace {
constexpr char kMagic[8] = {'L', '2', 'C', 'L', 'E', 'M', 'B', '1'};
constexpr uint32_t kVersion = 1;
}  // namespace

template <class S>
void export_embeddings_text(const std::string& path, const Mat<S>& emb,
                            std::span<const int64_t> node_indices) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write embedding file: " + path);
    char buf[64];
    for (int64_t v : node_indices) {
        std::snprintf(buf, sizeof(buf), "%" PRId64 "\t", v);
        out << buf;
        const S* row = emb.row(v);
        for (int64_t k = 0; k < emb.cols; ++k) {
            std::snprintf(buf, sizeof(buf), "%s%.9g", k ? "," : "", double(row[k]));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("short write to embedding file: " + path);
}

template <class S>
void export_embeddings_binary(const std::string& path, const Mat<S>& emb, int32_t num_users,
                              int32_t num_items) {
    if (emb.rows != int64_t(num_users) + num_items)
        throw std::invalid_argument("binary embedding export expects the full M+N table");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write embedding file: " + path);
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    out.write(reinterpret_cast<const char*>(&num_users), sizeof(num_users));
    out.write(reinterpret_cast<const char*>(&num_items), sizeof(num_items));
    int64_t d = emb.cols;
    out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    std::vector<float> row(static_cast<size_t>(d));
    for (int64_t v = 0; v < emb.rows; ++v) {
        const S* src = emb.row(v);
        for (int64_t k = 0; k < d; ++k) row[k] = static_cast<float>(src[k]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("short write to embedding file: " + path);
}

EmbeddingFile load_embeddings_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("bad embedding file magic: " + path);
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion) throw std::runtime_error("unsupported embedding file version");

    EmbeddingFile f;
    in.read(reinterpret_cast<char*>(&f.num_users), sizeof(f.num_users));
    in.read(reinterpret_cast<char*>(&f.num_items), sizeof(f.num_items));
    int64_t d = 0;
    in.read(reinterpret_cast<char*>(&d), sizeof(d));
    if (!in || d < 1) throw std::runtime_error("truncated embedding file: " + path);
    f.rows.resize(int64_t(f.num_users) + f.num_items, d);
    in.read(reinterpret_cast<char*>(f.rows.a.data()),
            static_cast<std::streamsize>(f.rows.a.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated embedding file: " + path);
    return f;
}

template void export_embeddings_text<float>(const std::string&, const Mat<float>&,
                                            std::span<const int64_t>);
template void export_embeddings_text<double>(const std::string&, const Mat<double>&,
                                             std::span<const int64_t>);
template void export_embeddings_binary<float>(const std::string&, const Mat<float>&, int32_t,
                                              int32_t);
template void export_embeddings_binary<double>(const std::string&, const Mat<double>&, int32_t,
                                               int32_t);

}  // namespace l2cl
