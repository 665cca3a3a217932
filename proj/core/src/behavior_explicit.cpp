#include "promptqd/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace promptqd {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct SourceLine {
    std::string code;       // comment and string contents removed
    std::size_t indent = 0;
    bool continuation = false;  // starts inside an open bracket
};

// Removes comments and string-literal contents, tracking triple-quoted strings
// and bracket depth across lines.
std::vector<SourceLine> scan_source(std::string_view src) {
    std::vector<SourceLine> lines;
    std::string current;
    bool in_triple = false;
    char triple_quote = 0;
    int depth = 0;
    bool line_starts_continued = false;

    auto flush = [&] {
        SourceLine line;
        std::size_t i = 0;
        while (i < current.size() && (current[i] == ' ' || current[i] == '\t')) ++i;
        line.indent = i;
        line.code = current;
        line.continuation = line_starts_continued;
        lines.push_back(std::move(line));
        current.clear();
        line_starts_continued = depth > 0 || in_triple;
    };

    for (std::size_t i = 0; i < src.size(); ++i) {
        const char c = src[i];
        if (c == '\n') {
            flush();
            continue;
        }
        if (in_triple) {
            if (c == triple_quote && src.substr(i, 3) == std::string(3, c)) {
                in_triple = false;
                current += "\"\"";
                i += 2;
            }
            continue;
        }
        if (c == '#') {
            while (i + 1 < src.size() && src[i + 1] != '\n') ++i;
            continue;
        }
        if (c == '"' || c == '\'') {
            if (src.substr(i, 3) == std::string(3, c)) {
                in_triple = true;
                triple_quote = c;
                i += 2;
                continue;
            }
            // Single-line literal: skip to the matching unescaped quote.
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != c && src[j] != '\n') {
                if (src[j] == '\\') ++j;
                ++j;
            }
            current += "\"\"";
            i = (j < src.size() && src[j] == c) ? j : j - 1;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') ++depth;
        if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
        current.push_back(c);
    }
    if (!current.empty()) flush();
    return lines;
}

struct Token {
    std::string text;
    bool call = false;       // identifier directly followed by '('
    bool attribute = false;  // preceded by '.'
};

std::vector<Token> identifiers(std::string_view code) {
    std::vector<Token> out;
    for (std::size_t i = 0; i < code.size();) {
        if (is_ident_start(code[i]) && (i == 0 || !is_ident_char(code[i - 1]))) {
            std::size_t j = i;
            while (j < code.size() && is_ident_char(code[j])) ++j;
            Token t{std::string(code.substr(i, j - i)), false, false};
            std::size_t b = i;
            while (b > 0 && (code[b - 1] == ' ' || code[b - 1] == '\t')) --b;
            t.attribute = b > 0 && code[b - 1] == '.';
            std::size_t k = j;
            while (k < code.size() && (code[k] == ' ' || code[k] == '\t')) ++k;
            t.call = k < code.size() && code[k] == '(';
            out.push_back(std::move(t));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string first_word(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && is_ident_char(s[j])) ++j;
    return std::string(s.substr(i, j - i));
}

// Top-level module names named by an import statement, if the line is one.
std::vector<std::string> imported_modules(const std::string& code) {
    std::vector<std::string> mods;
    const std::string head = first_word(code);
    std::istringstream is(code);
    std::string kw;
    is >> kw;
    if (head == "import" && kw == "import") {
        std::string rest;
        std::getline(is, rest);
        std::stringstream parts(rest);
        std::string item;
        while (std::getline(parts, item, ',')) {
            std::istringstream one(item);
            std::string name;
            one >> name;
            if (!name.empty()) mods.push_back(name.substr(0, name.find('.')));
        }
    } else if (head == "from" && kw == "from") {
        std::string name;
        is >> name;
        if (!name.empty() && name[0] != '.') mods.push_back(name.substr(0, name.find('.')));
    }
    return mods;
}

const std::unordered_set<std::string>& branch_keywords() {
    static const std::unordered_set<std::string> kw{"if",  "elif",   "while", "for",
                                                    "and", "or",     "except", "case"};
    return kw;
}

}  // namespace

const char* paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::Iterative: return "iterative";
        case Paradigm::Recursive: return "recursive";
        case Paradigm::Functional: return "functional";
        case Paradigm::Library: return "library";
    }
    return "iterative";
}

Paradigm paradigm_from_name(std::string_view name) {
    if (name == "iterative") return Paradigm::Iterative;
    if (name == "recursive") return Paradigm::Recursive;
    if (name == "functional") return Paradigm::Functional;
    if (name == "library") return Paradigm::Library;
    throw ConfigError("unknown paradigm '" + std::string(name) + "'");
}

void RunningMax::observe(double v) {
    double cur = value_.load();
    while (v > cur && !value_.compare_exchange_weak(cur, v)) {
    }
}

double RunningMax::normalize(double v) const {
    const double m = value();
    return m > 0.0 ? std::clamp(v / m, 0.0, 1.0) : 0.0;
}

Vector ExplicitFeaturesCode::as_vector() const {
    Vector v(6);
    v << complexity, loc, paradigm[0], paradigm[1], paradigm[2], paradigm[3];
    return v;
}

CodeFeatureCounts code_feature_counts(std::string_view source, const CodeFeatureOptions& options) {
    const auto lines = scan_source(source);
    CodeFeatureCounts out;

    bool has_functional = false, has_library = false, has_recursion = false;
    std::size_t branches = 0, loc = 0;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const auto& line = lines[li];
        if (is_blank(line.code)) continue;
        ++loc;
        for (const auto& tok : identifiers(line.code)) {
            if (branch_keywords().count(tok.text)) ++branches;
            if (tok.text == "map" || tok.text == "filter" || tok.text == "reduce" ||
                tok.text == "lambda")
                has_functional = true;
        }
        for (const auto& mod : imported_modules(line.code))
            if (!options.builtin_modules.count(mod)) has_library = true;

        // def NAME(...): the body is every following line indented deeper,
        // plus bracket continuations.
        const auto toks = identifiers(line.code);
        for (std::size_t t = 0; t + 1 < toks.size(); ++t) {
            if (toks[t].text != "def") continue;
            const std::string& fname = toks[t + 1].text;
            for (std::size_t u = t + 2; u < toks.size(); ++u)
                if (toks[u].call && !toks[u].attribute && toks[u].text == fname) has_recursion = true;
            for (std::size_t lj = li + 1; lj < lines.size() && !has_recursion; ++lj) {
                const auto& body = lines[lj];
                if (is_blank(body.code)) continue;
                if (!body.continuation && body.indent <= line.indent) break;
                for (const auto& bt : identifiers(body.code))
                    if (bt.call && !bt.attribute && bt.text == fname) has_recursion = true;
            }
        }
    }

    out.complexity = 1.0 + static_cast<double>(branches);
    out.loc = static_cast<double>(loc);
    if (has_recursion)
        out.paradigm = Paradigm::Recursive;
    else if (has_functional)
        out.paradigm = Paradigm::Functional;
    else if (has_library)
        out.paradigm = Paradigm::Library;
    else
        out.paradigm = Paradigm::Iterative;  // explicit loops and the no-loop default
    return out;
}

ExplicitFeaturesCode CodeFeatureNormalizer::observe(const CodeFeatureCounts& counts) {
    complexity_.observe(counts.complexity);
    loc_.observe(counts.loc);
    return normalize(counts);
}

ExplicitFeaturesCode CodeFeatureNormalizer::normalize(const CodeFeatureCounts& counts) const {
    ExplicitFeaturesCode f;
    f.complexity = complexity_.normalize(counts.complexity);
    f.loc = loc_.normalize(counts.loc);
    f.paradigm = {0.0, 0.0, 0.0, 0.0};
    f.paradigm[static_cast<std::size_t>(counts.paradigm)] = 1.0;
    return f;
}

void CodeFeatureNormalizer::restore(double max_complexity, double max_loc) {
    complexity_ = RunningMax(max_complexity);
    loc_ = RunningMax(max_loc);
}

// ---------------------------------------------------------------------------
// Writing

namespace {

std::unordered_set<std::string> read_word_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open word list " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

WritingLexicons WritingLexicons::load(const std::filesystem::path& data_dir) {
    WritingLexicons lex;
    const auto lexicon_path = data_dir / "sentiment_lexicon.tsv";
    std::ifstream in(lexicon_path);
    if (!in) throw LoadError("cannot open sentiment lexicon " + lexicon_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw LoadError("sentiment lexicon line " + std::to_string(lineno) + " has no tab");
        double v = 0.0;
        try {
            v = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw LoadError("sentiment lexicon line " + std::to_string(lineno) + " has a bad valence");
        }
        if (v < -1.0 || v > 1.0)
            throw LoadError("sentiment lexicon valence out of [-1, 1] at line " + std::to_string(lineno));
        lex.valence[line.substr(0, tab)] = v;
    }
    const auto pos = data_dir / "pos";
    lex.articles = read_word_list(pos / "articles.txt");
    lex.pronouns = read_word_list(pos / "pronouns.txt");
    lex.prepositions = read_word_list(pos / "prepositions.txt");
    lex.interjections = read_word_list(pos / "interjections.txt");
    lex.verbs = read_word_list(pos / "verbs.txt");
    lex.adverbs = read_word_list(pos / "adverbs.txt");
    lex.adjectives = read_word_list(pos / "adjectives.txt");
    lex.nouns = read_word_list(pos / "nouns.txt");
    return lex;
}

const WritingLexicons& WritingLexicons::bundled() {
    static const WritingLexicons lex = load(default_data_dir());
    return lex;
}

PartOfSpeech tag_word(std::string_view w, const WritingLexicons& lex) {
    const std::string s(w);
    if (lex.articles.count(s)) return PartOfSpeech::Article;
    if (lex.pronouns.count(s)) return PartOfSpeech::Pronoun;
    if (lex.prepositions.count(s)) return PartOfSpeech::Preposition;
    if (lex.interjections.count(s)) return PartOfSpeech::Interjection;
    if (lex.verbs.count(s)) return PartOfSpeech::Verb;
    if (lex.adverbs.count(s)) return PartOfSpeech::Adverb;
    if (lex.adjectives.count(s)) return PartOfSpeech::Adjective;
    if (lex.nouns.count(s)) return PartOfSpeech::Noun;
    if (ends_with(w, "ly")) return PartOfSpeech::Adverb;
    for (auto suf : {"ing", "ed", "ize", "ise", "ify", "ate"})
        if (ends_with(w, suf)) return PartOfSpeech::Verb;
    for (auto suf : {"ous", "ful", "ive", "able", "ible", "al", "ic", "less", "ish"})
        if (ends_with(w, suf)) return PartOfSpeech::Adjective;
    return PartOfSpeech::Noun;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (c == '\'' && !cur.empty() && i + 1 < text.size() &&
                   std::isalpha(static_cast<unsigned char>(text[i + 1]))) {
            cur.push_back('\'');
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::size_t count_sentences(std::string_view text) {
    std::size_t sentences = 0;
    bool words_since_break = false;
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            words_since_break = true;
        } else if ((c == '.' || c == '!' || c == '?') && words_since_break) {
            ++sentences;
            words_since_break = false;
        }
    }
    if (words_since_break) ++sentences;
    return sentences;
}

std::size_t count_syllables(std::string_view word) {
    auto vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    std::string w;
    for (char c : word)
        if (std::isalpha(static_cast<unsigned char>(c)))
            w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (w.empty()) return 0;
    std::size_t groups = 0;
    bool prev = false;
    for (char c : w) {
        const bool v = vowel(c);
        if (v && !prev) ++groups;
        prev = v;
    }
    // Silent final e ("make"), but not "-le" ("table").
    if (groups > 1 && w.back() == 'e' && !(w.size() > 2 && w[w.size() - 2] == 'l' && !vowel(w[w.size() - 3])))
        --groups;
    return std::max<std::size_t>(groups, 1);
}

double flesch_kincaid_grade(std::size_t words, std::size_t sentences, std::size_t syllables) {
    if (words == 0 || sentences == 0) throw ConfigError("readability needs words and sentences");
    return 0.39 * (static_cast<double>(words) / static_cast<double>(sentences)) +
           11.8 * (static_cast<double>(syllables) / static_cast<double>(words)) - 15.59;
}

Vector ExplicitFeaturesWriting::as_vector() const {
    Vector v(3);
    v << (sentiment + 1.0) / 2.0, formality, readability;
    return v;
}

ExplicitFeaturesWriting writing_features(std::string_view text, const WritingLexicons& lex) {
    const auto words = split_words(text);
    if (words.empty()) throw ConfigError("writing features need at least one word");

    ExplicitFeaturesWriting f;
    double valence_sum = 0.0;
    std::size_t hits = 0, syllables = 0;
    std::array<std::size_t, 8> pos_counts{};
    for (const auto& w : words) {
        if (auto it = lex.valence.find(w); it != lex.valence.end()) {
            valence_sum += it->second;
            ++hits;
        }
        syllables += count_syllables(w);
        ++pos_counts[static_cast<std::size_t>(tag_word(w, lex))];
    }
    f.sentiment = hits ? std::clamp(valence_sum / static_cast<double>(hits), -1.0, 1.0) : 0.0;

    const double total = static_cast<double>(words.size());
    auto pct = [&](PartOfSpeech p) {
        return 100.0 * static_cast<double>(pos_counts[static_cast<std::size_t>(p)]) / total;
    };
    const double fscore = (pct(PartOfSpeech::Noun) + pct(PartOfSpeech::Adjective) +
                           pct(PartOfSpeech::Preposition) + pct(PartOfSpeech::Article) -
                           pct(PartOfSpeech::Pronoun) - pct(PartOfSpeech::Verb) -
                           pct(PartOfSpeech::Adverb) - pct(PartOfSpeech::Interjection) + 100.0) /
                          2.0;
    f.formality = std::clamp(fscore / 100.0, 0.0, 1.0);

    const std::size_t sentences = std::max<std::size_t>(count_sentences(text), 1);
    f.grade = flesch_kincaid_grade(words.size(), sentences, syllables);
    f.readability = std::clamp(f.grade, 0.0, 20.0) / 20.0;
    return f;
}

}  // namespace promptqd
