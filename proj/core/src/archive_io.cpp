#include "promptqd/archive.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace promptqd {

namespace {

using nlohmann::json;

constexpr char kEmbeddingMagic[8] = {'P', 'Q', 'D', 'E', 'M', 'B', '0', '1'};

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

json descriptor_json(const BehaviorDescriptor& d) {
    return {{"fused", vec_json(d.fused)},
            {"semantic", vec_json(d.semantic)},
            {"explicit", vec_json(d.explicit_part)},
            {"alpha", d.alpha}};
}

BehaviorDescriptor json_descriptor(const json& j) {
    BehaviorDescriptor d;
    d.fused = json_vec(j.at("fused"));
    d.semantic = json_vec(j.at("semantic"));
    d.explicit_part = json_vec(j.at("explicit"));
    d.alpha = j.at("alpha").get<double>();
    return d;
}

json embedding_json(const PromptEmbedding& p) {
    const Vector flat = p.flat();
    return {{"n", p.tokens()}, {"d", p.dim()}, {"values", vec_json(flat)}};
}

PromptEmbedding json_embedding(const json& j) {
    return PromptEmbedding::from_flat(json_vec(j.at("values")), j.at("n").get<std::size_t>(),
                                      j.at("d").get<std::size_t>());
}

json header_json(const Archive& a) {
    json centroids = json::array();
    for (const auto& c : a.centroids()) centroids.push_back(vec_json(c));
    json h = {{"kind", "archive"},
              {"format", "promptqd-archive"},
              {"version", 1},
              {"cells", a.cells()},
              {"c_max", a.c_max()},
              {"buffer_size", a.buffer_size()},
              {"dim", a.dim()},
              {"occupied", a.occupied()},
              {"explicit_kind", a.metadata_kind},
              {"centroids", std::move(centroids)}};
    h["tau"] = std::isfinite(a.tau()) ? json(a.tau()) : json(nullptr);
    if (!a.normalizer_maxima.empty()) h["normalizer_maxima"] = a.normalizer_maxima;
    return h;
}

json cell_json(const Archive& a, std::size_t cell, json embedding_field) {
    const auto& slot = *a.slot(cell);
    const auto& buf = slot.fitness.values();
    return {{"kind", "cell"},
            {"cell_index", cell},
            {"centroid", vec_json(a.centroids()[cell])},
            {"descriptor", descriptor_json(slot.candidate.descriptor)},
            {"fitness_buffer", std::vector<double>(buf.begin(), buf.end())},
            {"median", slot.fitness.median()},
            {"text", slot.candidate.text},
            {"eval_count", slot.candidate.eval_count},
            {"raw_features", slot.candidate.raw_features},
            {"embedding", std::move(embedding_field)}};
}

Archive archive_from_header(const json& h) {
    if (h.value("format", "") != "promptqd-archive") throw LoadError("not a promptqd archive snapshot");
    if (h.value("version", 0) != 1) throw LoadError("unsupported archive snapshot version");
    std::vector<Vector> centroids;
    for (const auto& c : h.at("centroids")) centroids.push_back(json_vec(c));
    if (centroids.size() != h.at("cells").get<std::size_t>())
        throw LoadError("snapshot centroid count does not match header");
    Archive a(std::move(centroids), h.at("c_max").get<std::size_t>(),
              h.at("buffer_size").get<std::size_t>());
    a.metadata_kind = h.value("explicit_kind", "");
    a.normalizer_maxima = h.value("normalizer_maxima", std::vector<double>{});
    if (!h.at("tau").is_null() && h.at("tau").get<double>() != a.tau())
        throw LoadError("snapshot expansion threshold is inconsistent with its centroids");
    return a;
}

EliteSlot slot_from_json(const json& r, PromptEmbedding embedding, std::size_t buffer_size) {
    Candidate c{r.at("text").get<std::string>(), std::move(embedding),
                json_descriptor(r.at("descriptor")), r.at("eval_count").get<std::size_t>(),
                r.value("raw_features", std::vector<double>{})};
    FitnessBuffer buf(buffer_size);
    for (double f : r.at("fitness_buffer").get<std::vector<double>>()) buf.push(f);
    if (buf.size() == 0) throw LoadError("snapshot cell has an empty fitness buffer");
    if (buf.median() != r.at("median").get<double>())
        throw LoadError("snapshot median disagrees with its fitness buffer");
    return EliteSlot{std::move(c), std::move(buf)};
}

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw LoadError("embedding matrix file truncated");
    return v;
}

}  // namespace

void write_embedding_matrix(const std::filesystem::path& path,
                            const std::vector<const PromptEmbedding*>& embeddings) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kEmbeddingMagic, sizeof kEmbeddingMagic);
    const std::uint64_t n = embeddings.empty() ? 0 : embeddings.front()->tokens();
    const std::uint64_t d = embeddings.empty() ? 0 : embeddings.front()->dim();
    put<std::uint64_t>(out, embeddings.size());
    put<std::uint64_t>(out, n);
    put<std::uint64_t>(out, d);
    for (const auto* e : embeddings) {
        if (e->tokens() != n || e->dim() != d) throw Error("embeddings differ in shape");
        for (Eigen::Index i = 0; i < e->values().size(); ++i) put<double>(out, e->values().data()[i]);
    }
}

std::vector<PromptEmbedding> read_embedding_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kEmbeddingMagic, sizeof magic) != 0)
        throw LoadError("not an embedding matrix file: " + path.string());
    const auto count = get<std::uint64_t>(in);
    const auto n = get<std::uint64_t>(in);
    const auto d = get<std::uint64_t>(in);
    std::vector<PromptEmbedding> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in);
        out.emplace_back(std::move(m));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw LoadError("embedding matrix file has trailing bytes");
    return out;
}

void export_archive(const Archive& archive, const std::filesystem::path& jsonl_path,
                    const std::filesystem::path& embeddings_path, const std::string& embeddings_name) {
    std::ofstream out(jsonl_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + jsonl_path.string());
    const std::string sidecar = embeddings_name.empty() ? embeddings_path.filename().string() : embeddings_name;
    json header = header_json(archive);
    header["embeddings_file"] = sidecar;
    out << header.dump() << '\n';

    std::vector<const PromptEmbedding*> embeddings;
    for (std::size_t cell : archive.occupied_cells()) {
        const std::string ref = sidecar + "#" + std::to_string(embeddings.size());
        embeddings.push_back(&archive.slot(cell)->candidate.embedding);
        json rec = cell_json(archive, cell, nullptr);
        rec.erase("embedding");
        rec["embedding_ref"] = ref;
        out << rec.dump() << '\n';
    }
    write_embedding_matrix(embeddings_path, embeddings);
}

Archive import_archive(const std::filesystem::path& jsonl_path,
                       const std::filesystem::path& embeddings_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw LoadError("cannot open archive snapshot " + jsonl_path.string());
    try {
        std::string line;
        if (!std::getline(in, line)) throw LoadError("archive snapshot is empty");
        const json header = json::parse(line);
        if (header.value("kind", "") != "archive") throw LoadError("archive snapshot lacks a header record");
        Archive a = archive_from_header(header);

        std::filesystem::path emb_path = embeddings_path;
        if (emb_path.empty())
            emb_path = jsonl_path.parent_path() / header.value("embeddings_file", "embeddings.bin");
        const auto embeddings = read_embedding_matrix(emb_path);

        std::size_t records = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json r = json::parse(line);
            if (r.value("kind", "") != "cell") throw LoadError("unexpected record kind in snapshot");
            const std::string ref = r.at("embedding_ref").get<std::string>();
            const auto hash = ref.rfind('#');
            if (hash == std::string::npos) throw LoadError("malformed embedding_ref " + ref);
            const std::size_t row = std::stoul(ref.substr(hash + 1));
            if (row >= embeddings.size()) throw LoadError("embedding_ref " + ref + " out of range");
            const std::size_t cell = r.at("cell_index").get<std::size_t>();
            if (cell >= a.cells() || json_vec(r.at("centroid")) != a.centroids()[cell])
                throw LoadError("snapshot cell record does not match header centroids");
            a.restore_slot(cell, slot_from_json(r, embeddings[row], a.buffer_size()));
            ++records;
        }
        if (records != header.at("occupied").get<std::size_t>())
            throw LoadError("snapshot record count does not match header");
        return a;
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed archive snapshot: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("invalid archive snapshot: ") + e.what());
    }
}

json archive_to_json(const Archive& archive) {
    json j = header_json(archive);
    json cells = json::array();
    for (std::size_t cell : archive.occupied_cells())
        cells.push_back(cell_json(archive, cell, embedding_json(archive.slot(cell)->candidate.embedding)));
    j["cell_records"] = std::move(cells);
    return j;
}

Archive archive_from_json(const json& j) {
    try {
        Archive a = archive_from_header(j);
        for (const auto& r : j.at("cell_records"))
            a.restore_slot(r.at("cell_index").get<std::size_t>(),
                           slot_from_json(r, json_embedding(r.at("embedding")), a.buffer_size()));
        return a;
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed archive state: ") + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(std::string("invalid archive state: ") + e.what());
    }
}

}  // namespace promptqd
