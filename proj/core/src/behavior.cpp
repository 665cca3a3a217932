#include "promptqd/behavior.hpp"
#include "promptqd/cvt.hpp"
#include "promptqd/rng.hpp"

#include <set>

namespace promptqd {

HybridCharacterizer::HybridCharacterizer(SemanticPipeline pipeline, ExplicitKind kind, double alpha,
                                         CodeFeatureOptions code_options,
                                         const WritingLexicons* lexicons)
    : pipeline_(std::move(pipeline)), kind_(kind), alpha_(alpha),
      code_options_(std::move(code_options)), lexicons_(lexicons) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (kind_ == ExplicitKind::Writing && !lexicons_) lexicons_ = &WritingLexicons::bundled();
}

Vector HybridCharacterizer::explicit_descriptor(std::string_view text) {
    if (kind_ == ExplicitKind::Code) {
        const auto counts = code_feature_counts(text, code_options_);
        last_raw_ = {counts.complexity, counts.loc};
        return normalizer_.observe(counts).as_vector();
    }
    const auto f = writing_features(text, *lexicons_);
    last_raw_ = {f.sentiment, f.formality, f.grade};
    return f.as_vector();
}

BehaviorDescriptor HybridCharacterizer::describe(std::string_view text) {
    const Vector sem = pipeline_.descriptor(text);
    const Vector exp = explicit_descriptor(text);
    return fuse(sem, exp, alpha_);
}

std::vector<double> HybridCharacterizer::normalizer_state() const {
    if (kind_ != ExplicitKind::Code) return {};
    return {normalizer_.max_complexity(), normalizer_.max_loc()};
}

void HybridCharacterizer::restore_normalizer(std::span<const double> state) {
    if (kind_ != ExplicitKind::Code) return;
    if (state.size() != 2) throw LoadError("code normalizer state needs two maxima");
    normalizer_.restore(state[0], state[1]);
}

CoverageTemplates make_coverage_templates(std::size_t d_s, std::size_t d_e, double alpha,
                                          std::size_t cells, std::uint64_t seed,
                                          std::size_t samples_per_cell) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (cells == 0 || samples_per_cell == 0) throw ConfigError("template sizes must be positive");

    auto box_cvt = [&](const Vector& scale, std::string_view stream) {
        Rng rng = Rng::substream(seed, stream);
        std::vector<Vector> pts(cells * samples_per_cell);
        for (auto& p : pts) {
            p.resize(scale.size());
            for (Eigen::Index i = 0; i < scale.size(); ++i) p(i) = scale(i) * rng.uniform();
        }
        return kmeans(pts, cells, rng);
    };

    CoverageTemplates t;
    const auto ds = static_cast<Eigen::Index>(d_s);
    const auto de = static_cast<Eigen::Index>(d_e);
    t.semantic = box_cvt(Vector::Ones(ds), "semantic");
    t.explicit_part = box_cvt(Vector::Ones(de), "explicit");
    Vector hyb_scale(ds + de);
    hyb_scale << Vector::Constant(ds, std::sqrt(alpha)), Vector::Constant(de, std::sqrt(1.0 - alpha));
    t.hybrid = box_cvt(hyb_scale, "hybrid");
    return t;
}

CoverageCounts hybrid_coverage_gain(std::span<const Vector> semantic,
                                    std::span<const Vector> explicit_part, double alpha,
                                    const CoverageTemplates& templates) {
    if (semantic.size() != explicit_part.size())
        throw ConfigError("semantic and explicit sample counts differ");
    if (semantic.size() < 100) throw ConfigError("coverage comparison needs at least 100 samples");
    if (templates.semantic.size() != templates.explicit_part.size() ||
        templates.semantic.size() != templates.hybrid.size())
        throw ConfigError("coverage templates must have equal cell counts");
    std::set<std::size_t> sem, exp, hyb;
    for (std::size_t i = 0; i < semantic.size(); ++i) {
        sem.insert(nearest_index(templates.semantic, semantic[i]));
        exp.insert(nearest_index(templates.explicit_part, explicit_part[i]));
        hyb.insert(nearest_index(templates.hybrid, fuse(semantic[i], explicit_part[i], alpha).fused));
    }
    return {sem.size(), exp.size(), hyb.size()};
}

CoverageCounts hybrid_coverage_gain(std::span<const std::string> texts, HybridCharacterizer& ch,
                                    const CoverageTemplates& templates) {
    std::vector<Vector> sem, exp;
    sem.reserve(texts.size());
    exp.reserve(texts.size());
    for (const auto& t : texts) {
        sem.push_back(ch.pipeline().descriptor(t));
        exp.push_back(ch.explicit_descriptor(t));
    }
    return hybrid_coverage_gain(sem, exp, ch.alpha(), templates);
}

}  // namespace promptqd
