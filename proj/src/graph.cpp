#include "l2cl/graph.hpp"

#include <cstring>
#include <fstream>

namespace l2cl {

InteractionGraph build_graph(const InteractionSet& train) {
    if (train.num_pairs() == 0) throw std::invalid_argument("build_graph: empty training set");

    InteractionGraph g;
    g.num_users = train.num_users;
    g.num_items = train.num_items;
    const int64_t n = g.num_nodes();
    const int64_t m_off = train.num_users;

    g.offsets.assign(static_cast<size_t>(n) + 1, 0);
    for (int32_t u = 0; u < train.num_users; ++u) {
        g.offsets[u + 1] = train.degree(u);
        for (int32_t i : train.items_of(u)) ++g.offsets[m_off + i + 1];
    }
    for (size_t k = 1; k < g.offsets.size(); ++k) g.offsets[k] += g.offsets[k - 1];

    g.cols.resize(static_cast<size_t>(g.offsets[n]));
    std::vector<int64_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (int32_t u = 0; u < train.num_users; ++u) {
        for (int32_t i : train.items_of(u)) {
            g.cols[cursor[u]++] = static_cast<int32_t>(m_off + i);
            g.cols[cursor[m_off + i]++] = u;
        }
    }
    // User rows are already sorted (items_of is sorted); item rows collect
    // users in ascending u, so the whole CSR is sorted.
    return g;
}

PropagationOperator normalize(const InteractionGraph& graph) {
    PropagationOperator op;
    op.num_users = graph.num_users;
    op.num_items = graph.num_items;
    op.offsets = graph.offsets;
    op.cols = graph.cols;
    op.weights.resize(graph.cols.size());

    const int64_t n = graph.num_nodes();
    for (int64_t v = 0; v < n; ++v) {
        const double dv = static_cast<double>(graph.degree(v));
        for (int64_t e = graph.offsets[v]; e < graph.offsets[v + 1]; ++e) {
            const double dw = static_cast<double>(graph.degree(graph.cols[e]));
            op.weights[e] = 1.0 / std::sqrt(dv * dw);
        }
    }
    return op;
}

namespace {

constexpr char kMagic[8] = {'L', '2', 'C', 'L', 'P', 'R', 'O', 'P'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

template <class T>
void write_vec(std::ofstream& out, const std::vector<T>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
void read_vec(std::ifstream& in, std::vector<T>& v, size_t count) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
}

}  // namespace

void save_operator(const std::string& path, const PropagationOperator& op) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write operator cache: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, op.num_users);
    write_pod(out, op.num_items);
    int64_t nnz = op.nnz();
    write_pod(out, nnz);
    write_vec(out, op.offsets);
    write_vec(out, op.cols);
    write_vec(out, op.weights);
    if (!out) throw std::runtime_error("short write to operator cache: " + path);
}

PropagationOperator load_operator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open operator cache: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("bad operator cache magic: " + path);
    uint32_t version = 0;
    read_pod(in, version);
    if (version != kVersion)
        throw std::runtime_error("unsupported operator cache version: " + std::to_string(version));

    PropagationOperator op;
    read_pod(in, op.num_users);
    read_pod(in, op.num_items);
    int64_t nnz = 0;
    read_pod(in, nnz);
    read_vec(in, op.offsets, static_cast<size_t>(op.num_nodes()) + 1);
    read_vec(in, op.cols, static_cast<size_t>(nnz));
    read_vec(in, op.weights, static_cast<size_t>(nnz));
    if (!in) throw std::runtime_error("truncated operator cache: " + path);
    return op;
}

}  // namespace l2cl
