#include "promptqd/generation.hpp"

#include <httplib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

namespace promptqd {

using nlohmann::json;

// ---------------------------------------------------------------------------
// base64 and matrix payloads

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const auto v = (std::uint32_t(std::uint8_t(bytes[i])) << 16) |
                       (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) | std::uint8_t(bytes[i + 2]);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const auto v = std::uint32_t(std::uint8_t(bytes[i])) << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const auto v = (std::uint32_t(std::uint8_t(bytes[i])) << 16) | (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
    std::string out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::array<int, 4> v{};
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                v[j] = 0;
                ++pad;
                continue;
            }
            if (pad) throw ProtocolError("base64 padding in the middle of a quantum");
            v[j] = b64_value(c);
            if (v[j] < 0) throw ProtocolError("invalid base64 character");
        }
        const std::uint32_t w = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) |
                                (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
        out += static_cast<char>((w >> 16) & 0xFF);
        if (pad < 2) out += static_cast<char>((w >> 8) & 0xFF);
        if (pad < 1) out += static_cast<char>(w & 0xFF);
    }
    return out;
}

json encode_matrix_f32(const Matrix& m) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
    std::string bytes(static_cast<std::size_t>(m.size()) * 4, '\0');
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const float f = static_cast<float>(m.data()[i]);
        std::memcpy(bytes.data() + 4 * i, &f, 4);
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "f32le"}, {"data", base64_encode(bytes)}};
}

Matrix decode_matrix_f32(const json& j) {
    try {
        if (j.at("dtype").get<std::string>() != "f32le") throw ProtocolError("matrix dtype must be f32le");
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        if (rows < 0 || cols < 0) throw ProtocolError("negative matrix shape");
        const std::string bytes = base64_decode(j.at("data").get<std::string>());
        if (bytes.size() != static_cast<std::size_t>(rows * cols) * 4)
            throw ProtocolError("matrix payload size does not match its shape");
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            float f;
            std::memcpy(&f, bytes.data() + 4 * i, 4);
            if (!std::isfinite(f)) throw ProtocolError("matrix payload has non-finite values");
            m.data()[i] = f;
        }
        return m;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed matrix payload: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Configuration

void RemoteConfig::apply_environment() {
    if (const char* e = std::getenv("PROMPTQD_ENDPOINT"); e && *e) endpoint = e;
    if (const char* t = std::getenv("PROMPTQD_AUTH_TOKEN"); t && *t) auth_token = t;
    if (const char* ms = std::getenv("PROMPTQD_TIMEOUT_MS"); ms && *ms) {
        try {
            timeout_ms = std::stoi(ms);
        } catch (const std::exception&) {
            throw ConfigError("PROMPTQD_TIMEOUT_MS is not an integer");
        }
        if (timeout_ms <= 0) throw ConfigError("PROMPTQD_TIMEOUT_MS must be positive");
    }
}

// ---------------------------------------------------------------------------
// HTTP transport

struct HttpTransport::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string base_path;
    std::mutex mutex;
};

HttpTransport::HttpTransport(const RemoteConfig& config) : impl_(std::make_unique<Impl>()) {
    const std::string& url = config.endpoint;
    if (url.empty()) throw ConfigError("remote endpoint is not set (PROMPTQD_ENDPOINT)");
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("remote endpoint must include a scheme");
    const std::string scheme = url.substr(0, scheme_end);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (scheme != "http") throw ConfigError("only http:// endpoints are supported in this build");
#endif
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string host = url.substr(0, path_start);
    impl_->base_path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!impl_->base_path.empty() && impl_->base_path.back() == '/') impl_->base_path.pop_back();

    impl_->client = std::make_unique<httplib::Client>(host);
    const auto sec = config.timeout_ms / 1000;
    const auto usec = (config.timeout_ms % 1000) * 1000;
    impl_->client->set_connection_timeout(sec, usec);
    impl_->client->set_read_timeout(sec, usec);
    impl_->client->set_write_timeout(sec, usec);
    if (!config.auth_token.empty()) impl_->client->set_bearer_token_auth(config.auth_token);
}

HttpTransport::~HttpTransport() = default;

json HttpTransport::post(const std::string& path, const json& body) {
    httplib::Result res;
    {
        std::lock_guard lock(impl_->mutex);
        res = impl_->client->Post(impl_->base_path + path, body.dump(), "application/json");
    }
    if (!res) throw TransportError("request to " + path + " failed: " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 429)
        throw TransportError(path + " returned HTTP " + std::to_string(res->status));
    if (res->status != 200) throw ProtocolError(path + " returned HTTP " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProtocolError(path + " returned invalid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Fixture transport

FixtureTransport::FixtureTransport(std::vector<json> records) {
    for (auto& r : records) {
        if (!r.contains("path")) throw LoadError("fixture record lacks a path");
        queues_[r.at("path").get<std::string>()].push_back(std::move(r));
    }
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open fixture " + path.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw LoadError("malformed fixture line in " + path.string() + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

FixtureTransport::FixtureTransport(const std::filesystem::path& jsonl) : FixtureTransport(read_jsonl(jsonl)) {}

json FixtureTransport::post(const std::string& path, const json& body) {
    std::lock_guard lock(mutex_);
    sent_.emplace_back(path, body);
    auto it = queues_.find(path);
    if (it == queues_.end() || it->second.empty()) throw TransportError("fixture exhausted for " + path);
    json rec = std::move(it->second.front());
    it->second.pop_front();
    if (rec.contains("fail")) throw TransportError(rec.at("fail").get<std::string>());
    return rec.at("response");
}

std::vector<std::pair<std::string, json>> FixtureTransport::sent() const {
    std::lock_guard lock(mutex_);
    return sent_;
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteBackend::RemoteBackend(RemoteConfig config, std::shared_ptr<Transport> transport,
                             std::shared_ptr<const VocabularyTable> vocab)
    : config_(std::move(config)), transport_(std::move(transport)), vocab_(std::move(vocab)) {
    if (!transport_) throw ConfigError("remote backend needs a transport");
    if (config_.max_retries < 0) throw ConfigError("max_retries must be non-negative");
}

json RemoteBackend::call(const std::string& path, const json& body, const std::string& request_id) {
    std::string last;
    bool protocol = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0 && config_.backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
        try {
            return transport_->post(path, body);
        } catch (const ProtocolError& e) {
            last = e.what();
            protocol = true;
        } catch (const TransportError& e) {
            last = e.what();
            protocol = false;
        }
    }
    const std::string msg = path + " failed after " + std::to_string(config_.max_retries + 1) +
                            " attempts: " + last;
    if (protocol) throw ProtocolError(msg, request_id);
    throw BackendUnavailable(msg, request_id);
}

namespace {

std::string text_field(const json& r, const std::string& path, const std::string& request_id) {
    if (!r.is_object() || !r.contains("text") || !r.at("text").is_string())
        throw ProtocolError(path + " response lacks a text field", request_id);
    return r.at("text").get<std::string>();
}

json metadata_of(const json& r) {
    json m = json::object();
    if (r.contains("model_id")) m["model_id"] = r.at("model_id");
    if (r.contains("usage")) m["usage"] = r.at("usage");
    return m;
}

}  // namespace

json RemoteBackend::generate_body(const GenerationRequest& request) const {
    request.validate();
    json body = {{"request_id", request.request_id},
                 {"mode", prompt_mode_name(request.mode)},
                 {"task", request.task},
                 {"decode_seed", request.decode_seed},
                 {"decode_config", request.decode_config.empty() ? config_.decode_config : request.decode_config}};
    if (request.mode == PromptMode::SoftPrompt) {
        body["embedding"] = encode_matrix_f32(request.embedding->values());
    } else {
        body["token_ids"] = request.token_ids;
        std::vector<std::string> tokens = request.tokens;
        if (tokens.empty() && vocab_)
            for (auto id : request.token_ids) tokens.push_back(vocab_->token(id));
        body["tokens"] = std::move(tokens);
    }
    return body;
}

GenerationResult RemoteBackend::generate(const GenerationRequest& request) {
    const json r = call("/generate", generate_body(request), request.request_id);
    return {text_field(r, "/generate", request.request_id), metadata_of(r)};
}

std::string RemoteBackend::recombine(const RecombinationRequest& request, const std::string& request_id,
                                     std::uint64_t decode_seed) {
    const json body = {{"request_id", request_id},
                       {"parent_a", request.parent_a},
                       {"parent_b", request.parent_b},
                       {"task", request.task},
                       {"prompt", request.prompt()},
                       {"decode_seed", decode_seed},
                       {"decode_config", config_.decode_config}};
    return text_field(call("/recombine", body, request_id), "/recombine", request_id);
}

double RemoteBackend::evaluate_fitness(const std::string& text, const std::string& task,
                                       const std::string& request_id, std::uint64_t) {
    const json body = {{"request_id", request_id}, {"text", text}, {"task", task}};
    const json r = call("/fitness", body, request_id);
    if (!r.is_object() || !r.contains("value") || !r.at("value").is_number())
        throw ProtocolError("/fitness response lacks a numeric value", request_id);
    const double v = r.at("value").get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw ProtocolError("/fitness value outside [0, 1]", request_id);
    return v;
}

std::vector<Vector> RemoteBackend::embed_texts(const std::vector<std::string>& texts,
                                               const std::string& request_id) {
    const json r = call("/embed_text", {{"request_id", request_id}, {"texts", texts}}, request_id);
    if (!r.is_object() || !r.contains("embeddings"))
        throw ProtocolError("/embed_text response lacks embeddings", request_id);
    const Matrix m = decode_matrix_f32(r.at("embeddings"));
    if (static_cast<std::size_t>(m.rows()) != texts.size())
        throw ProtocolError("/embed_text returned the wrong number of rows", request_id);
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).transpose());
    return out;
}

VocabularyTable RemoteBackend::fetch_vocabulary() {
    const json r = call("/vocab", json::object(), "vocab");
    try {
        auto tokens = r.at("tokens").get<std::vector<std::string>>();
        Matrix m = decode_matrix_f32(r.at("embeddings"));
        std::vector<std::size_t> subset;
        if (r.contains("subset")) subset = r.at("subset").get<std::vector<std::size_t>>();
        return VocabularyTable(std::move(tokens), std::move(m), std::move(subset));
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed /vocab response: ") + e.what(), "vocab");
    } catch (const ConfigError& e) {
        throw ProtocolError(std::string("invalid /vocab table: ") + e.what(), "vocab");
    }
}

RemoteEmbedder::RemoteEmbedder(std::shared_ptr<RemoteBackend> backend, std::size_t dim)
    : backend_(std::move(backend)), dim_(dim) {
    if (!backend_) throw ConfigError("remote embedder needs a backend");
}

Vector RemoteEmbedder::embed(std::string_view text) const {
    auto rows = backend_->embed_texts({std::string(text)}, "embed-" + std::to_string(fnv1a64(text)));
    if (static_cast<std::size_t>(rows.front().size()) != dim_)
        throw ProtocolError("/embed_text returned the wrong dimension");
    return rows.front();
}

}  // namespace promptqd
