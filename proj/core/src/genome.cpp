#include "promptqd/genome.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace promptqd {

namespace {

double unit_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                     bool& zero_norm) {
    const double na = a.norm();
    const double nb = b.norm();
    zero_norm = (na == 0.0 || nb == 0.0);
    const Vector ua = na > 0.0 ? Vector(a / na) : Vector(a);
    const Vector ub = nb > 0.0 ? Vector(b / nb) : Vector(b);
    return (ua - ub).norm();
}

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

}  // namespace

PromptEmbedding::PromptEmbedding(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
        throw ConfigError("prompt embedding needs at least one token and one dimension");
    if (!values_.allFinite()) throw ConfigError("prompt embedding has non-finite entries");
}

PromptEmbedding PromptEmbedding::zeros(std::size_t n_tokens, std::size_t dim) {
    return PromptEmbedding(Matrix::Zero(static_cast<Eigen::Index>(n_tokens),
                                        static_cast<Eigen::Index>(dim)));
}

PromptEmbedding PromptEmbedding::from_flat(const Eigen::Ref<const Vector>& flat,
                                           std::size_t n_tokens, std::size_t dim) {
    if (static_cast<std::size_t>(flat.size()) != n_tokens * dim)
        throw ConfigError("flat embedding length does not match n*d");
    Matrix m(static_cast<Eigen::Index>(n_tokens), static_cast<Eigen::Index>(dim));
    std::memcpy(m.data(), flat.data(), sizeof(double) * n_tokens * dim);
    return PromptEmbedding(std::move(m));
}

Vector PromptEmbedding::flat() const {
    return Eigen::Map<const Vector>(values_.data(), values_.size());
}

VocabularyTable::VocabularyTable(std::vector<std::string> tokens, Matrix embeddings,
                                 std::vector<std::size_t> subset)
    : tokens_(std::move(tokens)), embeddings_(std::move(embeddings)), subset_(std::move(subset)) {
    if (tokens_.size() < 2) throw ConfigError("vocabulary needs at least two tokens");
    if (static_cast<std::size_t>(embeddings_.rows()) != tokens_.size())
        throw ConfigError("vocabulary embedding rows do not match token count");
    if (embeddings_.cols() < 1) throw ConfigError("vocabulary embedding dimension is zero");
    if (!embeddings_.allFinite()) throw ConfigError("vocabulary has non-finite embeddings");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], i).second)
            throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
    mean_ = Vector::Zero(embeddings_.cols());
    if (subset_.empty()) {
        mean_ = embeddings_.colwise().mean().transpose();
    } else {
        for (std::size_t row : subset_) {
            if (row >= tokens_.size()) throw ConfigError("vocabulary subset index out of range");
            mean_ += embeddings_.row(static_cast<Eigen::Index>(row)).transpose();
        }
        mean_ /= static_cast<double>(subset_.size());
    }
}

std::optional<std::size_t> VocabularyTable::index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

VocabularyTable VocabularyTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open vocabulary file " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line)) throw LoadError("vocabulary file has no header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("vocabulary header is not JSON: ") + e.what());
    }
    if (header.value("format", "") != "promptqd-vocab")
        throw LoadError("not a promptqd vocabulary file");

    std::vector<std::string> tokens;
    std::size_t n = 0, dim = 0;
    std::string dtype;
    std::vector<std::size_t> subset;
    try {
        tokens = header.at("tokens").get<std::vector<std::string>>();
        n = header.at("n_tokens").get<std::size_t>();
        dim = header.at("dim").get<std::size_t>();
        dtype = header.value("dtype", "f32le");
        if (header.contains("subset")) subset = header["subset"].get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("vocabulary header malformed: ") + e.what());
    }
    if (tokens.size() != n)
        throw LoadError("vocabulary header lists " + std::to_string(tokens.size()) +
                        " tokens but n_tokens is " + std::to_string(n));
    if (dtype != "f32le" && dtype != "f64le") throw LoadError("unsupported dtype " + dtype);

    Matrix emb(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n * dim; ++i) {
        double v = dtype == "f32le" ? static_cast<double>(read_le<float>(in)) : read_le<double>(in);
        if (!in) throw LoadError("vocabulary data truncated: expected " + std::to_string(n) +
                                 " rows of dim " + std::to_string(dim));
        emb.data()[i] = v;
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw LoadError("vocabulary data has trailing bytes beyond n_tokens rows");
    try {
        return VocabularyTable(std::move(tokens), std::move(emb), std::move(subset));
    } catch (const ConfigError& e) {
        throw LoadError(e.what());
    }
}

void VocabularyTable::save(const std::filesystem::path& path, bool double_precision) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write vocabulary file " + path.string());
    nlohmann::json header = {{"format", "promptqd-vocab"},
                             {"version", 1},
                             {"n_tokens", size()},
                             {"dim", dim()},
                             {"dtype", double_precision ? "f64le" : "f32le"},
                             {"tokens", tokens_}};
    if (!subset_.empty()) header["subset"] = subset_;
    out << header.dump() << '\n';
    for (Eigen::Index i = 0; i < embeddings_.size(); ++i) {
        if (double_precision)
            write_le<double>(out, embeddings_.data()[i]);
        else
            write_le<float>(out, static_cast<float>(embeddings_.data()[i]));
    }
}

VocabularyTable VocabularyTable::synthetic(std::size_t size, std::size_t dim, std::uint64_t seed,
                                           double spread) {
    Rng rng(seed);
    std::vector<std::string> tokens;
    tokens.reserve(size);
    Matrix emb(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < size; ++i) {
        tokens.push_back("tok" + std::to_string(i));
        for (std::size_t j = 0; j < dim; ++j)
            emb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spread * rng.normal();
    }
    return VocabularyTable(std::move(tokens), std::move(emb));
}

PromptEmbedding init_embedding(const VocabularyTable& vocab, std::size_t n_tokens,
                               double sigma_init, Rng& rng) {
    if (!(sigma_init >= 0.0) || !std::isfinite(sigma_init))
        throw ConfigError("sigma_init must be a finite nonnegative value");
    if (n_tokens == 0) throw ConfigError("prompt must have at least one virtual token");
    const auto d = static_cast<Eigen::Index>(vocab.dim());
    Matrix m(static_cast<Eigen::Index>(n_tokens), d);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = vocab.mean()(c) + sigma_init * rng.normal();
    return PromptEmbedding(std::move(m));
}

Projection project_to_vocab(const PromptEmbedding& p, const VocabularyTable& vocab) {
    if (p.dim() != vocab.dim())
        throw ConfigError("embedding dimension " + std::to_string(p.dim()) +
                          " does not match vocabulary dimension " + std::to_string(vocab.dim()));
    Projection out;
    const Matrix& emb = vocab.embeddings();
    double err_sum = 0.0, raw_sum = 0.0;
    for (std::size_t r = 0; r < p.tokens(); ++r) {
        const auto row = p.values().row(static_cast<Eigen::Index>(r));
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (Eigen::Index v = 0; v < emb.rows(); ++v) {
            const double d2 = (emb.row(v) - row).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<std::size_t>(v);
            }
        }
        bool zero = false;
        err_sum += unit_distance(row.transpose(),
                                 emb.row(static_cast<Eigen::Index>(best)).transpose(), zero);
        raw_sum += std::sqrt(best_d2);
        out.token_ids.push_back(best);
        out.tokens.push_back(vocab.token(best));
        out.zero_norm.push_back(zero);
    }
    out.error = err_sum / static_cast<double>(p.tokens());
    out.raw_error = raw_sum / static_cast<double>(p.tokens());
    return out;
}

PromptEmbedding embed_tokens(std::span<const std::size_t> token_ids, const VocabularyTable& vocab) {
    if (token_ids.empty()) throw ConfigError("cannot embed an empty token list");
    Matrix m(static_cast<Eigen::Index>(token_ids.size()), static_cast<Eigen::Index>(vocab.dim()));
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        if (token_ids[i] >= vocab.size()) throw ConfigError("token id out of vocabulary range");
        m.row(static_cast<Eigen::Index>(i)) =
            vocab.embeddings().row(static_cast<Eigen::Index>(token_ids[i]));
    }
    return PromptEmbedding(std::move(m));
}

}  // namespace promptqd
