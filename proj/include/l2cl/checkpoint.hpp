#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include "l2cl/trainer.hpp"

namespace l2cl {

namespace ckpt_detail {

constexpr char kMagic[8] = {'L', '2', 'C', 'L', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <class T>
void wr(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void rd(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

template <class S>
void wr_mat(std::ofstream& out, const Mat<S>& m) {
    wr(out, m.rows);
    wr(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.a.data()),
              static_cast<std::streamsize>(m.a.size() * sizeof(S)));
}
template <class S>
void rd_mat(std::ifstream& in, Mat<S>& m) {
    int64_t r = 0, c = 0;
    rd(in, r);
    rd(in, c);
    m.resize(r, c);
    in.read(reinterpret_cast<char*>(m.a.data()),
            static_cast<std::streamsize>(m.a.size() * sizeof(S)));
}

inline void wr_str(std::ofstream& out, const std::string& s) {
    uint64_t n = s.size();
    wr(out, n);
    out.write(s.data(), static_cast<std::streamsize>(n));
}
inline void rd_str(std::ifstream& in, std::string& s) {
    uint64_t n = 0;
    rd(in, n);
    s.resize(n);
    in.read(s.data(), static_cast<std::streamsize>(n));
}

}  // namespace ckpt_detail

template <class S>
void save_checkpoint(const std::string& path, const TrainerState<S>& st) {
    using namespace ckpt_detail;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    wr(out, kVersion);
    uint8_t prec = sizeof(S);
    wr(out, prec);
    wr(out, st.config_hash);
    wr(out, st.num_users);
    wr(out, st.num_items);
    wr(out, st.epoch);
    wr(out, st.adam.t);
    wr(out, st.adam.lr);
    wr(out, st.adam.beta1);
    wr(out, st.adam.beta2);
    wr(out, st.adam.eps);
    wr_mat(out, st.table);
    wr_mat(out, st.adam.m);
    wr_mat(out, st.adam.v);
    wr(out, st.best_epoch);
    wr(out, st.best_metric);
    wr_mat(out, st.best_table);
    wr_str(out, st.rng_state);
    uint64_t nval = st.val_records.size();
    wr(out, nval);
    for (const auto& [e, m] : st.val_records) {
        wr(out, e);
        wr(out, m);
    }
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

inline int checkpoint_precision(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = 0;
    rd(in, version);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
    uint8_t prec = 0;
    rd(in, prec);
    return prec == 4 ? 32 : 64;
}

template <class S>
TrainerState<S> load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    uint32_t version = 0;
    rd(in, version);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
    uint8_t prec = 0;
    rd(in, prec);
    if (prec != sizeof(S))
        throw std::runtime_error("checkpoint precision mismatch (stored " +
                                 std::to_string(prec * 8) + "-bit)");

    TrainerState<S> st;
    rd(in, st.config_hash);
    rd(in, st.num_users);
    rd(in, st.num_items);
    rd(in, st.epoch);
    rd(in, st.adam.t);
    rd(in, st.adam.lr);
    rd(in, st.adam.beta1);
    rd(in, st.adam.beta2);
    rd(in, st.adam.eps);
    rd_mat(in, st.table);
    rd_mat(in, st.adam.m);
    rd_mat(in, st.adam.v);
    rd(in, st.best_epoch);
    rd(in, st.best_metric);
    rd_mat(in, st.best_table);
    rd_str(in, st.rng_state);
    uint64_t nval = 0;
    rd(in, nval);
    st.val_records.resize(nval);
    for (auto& [e, m] : st.val_records) {
        rd(in, e);
        rd(in, m);
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return st;
}

}  // namespace l2cl
