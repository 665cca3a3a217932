#ifndef PROMPTQD_COMMON_HPP
#define PROMPTQD_COMMON_HPP

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace promptqd {

using Vector = Eigen::VectorXd;
// Row-major so that a matrix flattens to vec(p) row by row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or a precondition on user-supplied parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A reducer or clustering fit could not be performed on the given data.
class FitError : public Error {
public:
    using Error::Error;
};

/// Snapshot, checkpoint, vocabulary or fixture file could not be read.
class LoadError : public Error {
public:
    using Error::Error;
};

/// A variation operator could not produce an offspring.
class OperatorError : public Error {
public:
    using Error::Error;
};

/// Generation, embedding or fitness evaluation failed for one request.
class EvaluationError : public Error {
public:
    EvaluationError(const std::string& what, std::string request_id = {})
        : Error(what), request_id_(std::move(request_id)) {}
    const std::string& request_id() const noexcept { return request_id_; }

private:
    std::string request_id_;
};

/// Response from a remote service violated the wire protocol.
class ProtocolError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

/// The backend could not be reached at all after bounded retries.
class BackendUnavailable : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

/// Directory holding bundled fixture files (lexicon, POS lists, paradigm corpus).
/// Honors PROMPTQD_DATA_DIR, then the source tree, then the install prefix.
std::filesystem::path default_data_dir();

bool all_finite(const Eigen::Ref<const Matrix>& m);

}  // namespace promptqd

#endif
