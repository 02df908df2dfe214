#include "ntm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace ntm {

namespace {

bool is_strip_char(unsigned char c) {
    // ASCII punctuation only; multibyte UTF-8 sequences are left intact.
    return std::ispunct(c) != 0;
}

std::string strip_token(const std::string& tok, bool lowercase) {
    std::size_t begin = 0, end = tok.size();
    while (begin < end && is_strip_char(static_cast<unsigned char>(tok[begin]))) ++begin;
    while (end > begin && is_strip_char(static_cast<unsigned char>(tok[end - 1]))) --end;
    std::string out = tok.substr(begin, end - begin);
    if (lowercase) {
        for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::set<std::string> parse_labels(const std::string& field) {
    std::set<std::string> labels;
    std::string cur;
    std::stringstream ss(field);
    while (std::getline(ss, cur, ',')) {
        if (!cur.empty()) labels.insert(cur);
    }
    return labels;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, VocabMode mode)
    : tokens_(std::move(tokens)), mode_(mode) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw std::runtime_error("vocabulary: empty token");
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
        if (!inserted) throw std::runtime_error("vocabulary: duplicate token " + tokens_[i]);
    }
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path, VocabMode mode) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("vocabulary: cannot read " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens), mode);
}

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            std::string t = strip_token(cur, lowercase);
            if (!t.empty()) out.push_back(std::move(t));
            cur.clear();
        }
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

Vocabulary build_vocabulary(const std::vector<RawDocument>& docs, VocabMode mode,
                            std::size_t max_size,
                            const std::set<std::string>& stopwords) {
    if (max_size < 1) throw std::runtime_error("build_vocabulary: max_size must be >= 1");
    std::map<std::string, std::size_t> counts;  // ordered map gives the lexicographic tie order
    for (const auto& doc : docs) {
        for (const auto& tok : doc.tokens) {
            if (mode == VocabMode::RV && stopwords.count(tok)) continue;
            ++counts[tok];
        }
    }
    if (counts.empty())
        throw std::runtime_error("build_vocabulary: no token survives filtering");

    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (items.size() > max_size) items.resize(max_size);

    std::vector<std::string> tokens;
    tokens.reserve(items.size());
    for (auto& [tok, cnt] : items) tokens.push_back(tok);
    return Vocabulary(std::move(tokens), mode);
}

Corpus encode_corpus(const std::vector<RawDocument>& docs, const Vocabulary& vocab,
                     Split split, EncodeReport* report) {
    Corpus corpus;
    corpus.split = split;
    EncodeReport local;
    local.documents_in = docs.size();
    for (const auto& raw : docs) {
        Document doc;
        doc.labels = raw.labels;
        for (const auto& tok : raw.tokens) {
            int id = vocab.id_of(tok);
            if (id >= 0) {
                doc.word_ids.push_back(id);
            } else {
                ++local.tokens_dropped_oov;
            }
        }
        if (doc.word_ids.empty()) {
            ++local.documents_dropped_empty;
            continue;
        }
        for (const auto& l : doc.labels) corpus.label_set.insert(l);
        corpus.documents.push_back(std::move(doc));
    }
    local.documents_kept = corpus.documents.size();
    if (report) *report = local;
    if (!docs.empty() && corpus.documents.empty())
        throw std::runtime_error("encode_corpus: all documents became empty");
    return corpus;
}

std::vector<std::string> decode_document(const Document& doc, const Vocabulary& vocab) {
    std::vector<std::string> out;
    out.reserve(doc.word_ids.size());
    for (int id : doc.word_ids) out.push_back(vocab.token(static_cast<std::size_t>(id)));
    return out;
}

std::vector<RawDocument> read_raw_corpus(const std::string& path, bool lowercase) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot read " + path);
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("corpus: line " + std::to_string(lineno) +
                                     " has no <TAB> separator in " + path);
        RawDocument doc;
        doc.labels = parse_labels(line.substr(0, tab));
        doc.tokens = tokenize(line.substr(tab + 1), lowercase);
        docs.push_back(std::move(doc));
    }
    return docs;
}

Corpus read_encoded_corpus(const std::string& path, const Vocabulary& vocab, Split split) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("corpus: cannot read " + path);
    Corpus corpus;
    corpus.split = split;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("corpus: line " + std::to_string(lineno) +
                                     " has no <TAB> separator in " + path);
        Document doc;
        doc.labels = parse_labels(line.substr(0, tab));
        std::stringstream ss(line.substr(tab + 1));
        long id;
        while (ss >> id) {
            if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
                throw std::runtime_error("corpus: line " + std::to_string(lineno) +
                                         " id out of range in " + path);
            doc.word_ids.push_back(static_cast<int>(id));
        }
        if (doc.word_ids.empty())
            throw std::runtime_error("corpus: line " + std::to_string(lineno) +
                                     " has no word ids in " + path);
        for (const auto& l : doc.labels) corpus.label_set.insert(l);
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

void write_encoded_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("corpus: cannot write " + path);
    for (const auto& doc : corpus.documents) {
        bool first = true;
        for (const auto& l : doc.labels) {
            if (!first) out << ',';
            out << l;
            first = false;
        }
        out << '\t';
        for (std::size_t i = 0; i < doc.word_ids.size(); ++i) {
            if (i) out << ' ';
            out << doc.word_ids[i];
        }
        out << '\n';
    }
}

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("embeddings: cannot read " + path);
    EmbeddingMatrix emb;
    emb.values = Matrix(dim, vocab.size(), 0.0);
    emb.source_name = path;
    std::vector<bool> covered(vocab.size(), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string token;
        if (!(ss >> token))
            throw std::runtime_error("embeddings: malformed line " + std::to_string(lineno));
        Vec values;
        values.reserve(dim);
        double v;
        while (ss >> v) values.push_back(v);
        if (values.size() != dim)
            throw std::runtime_error("embeddings: line " + std::to_string(lineno) +
                                     " has " + std::to_string(values.size()) +
                                     " values, expected " + std::to_string(dim));
        int id = vocab.id_of(token);
        if (id < 0) continue;
        for (std::size_t k = 0; k < dim; ++k)
            emb.values(k, static_cast<std::size_t>(id)) = values[k];
        covered[static_cast<std::size_t>(id)] = true;
    }
    std::size_t found = 0;
    for (bool b : covered) found += b ? 1 : 0;
    emb.coverage = vocab.size() ? static_cast<double>(found) / vocab.size() : 0.0;
    return emb;
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
        "any", "are", "aren't", "as", "at", "be", "because", "been", "before", "being",
        "below", "between", "both", "but", "by", "can", "cannot", "could", "couldn't",
        "did", "didn't", "do", "does", "doesn't", "doing", "don't", "down", "during",
        "each", "few", "for", "from", "further", "had", "hadn't", "has", "hasn't",
        "have", "haven't", "having", "he", "he'd", "he'll", "he's", "her", "here",
        "here's", "hers", "herself", "him", "himself", "his", "how", "how's", "i",
        "i'd", "i'll", "i'm", "i've", "if", "in", "into", "is", "isn't", "it", "it's",
        "its", "itself", "let's", "me", "more", "most", "mustn't", "my", "myself",
        "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other", "ought",
        "our", "ours", "ourselves", "out", "over", "own", "same", "shan't", "she",
        "she'd", "she'll", "she's", "should", "shouldn't", "so", "some", "such",
        "than", "that", "that's", "the", "their", "theirs", "them", "themselves",
        "then", "there", "there's", "these", "they", "they'd", "they'll", "they're",
        "they've", "this", "those", "through", "to", "too", "under", "until", "up",
        "very", "was", "wasn't", "we", "we'd", "we'll", "we're", "we've", "were",
        "weren't", "what", "what's", "when", "when's", "where", "where's", "which",
        "while", "who", "who's", "whom", "why", "why's", "with", "won't", "would",
        "wouldn't", "you", "you'd", "you'll", "you're", "you've", "your", "yours",
        "yourself", "yourselves",
    };
    return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("stopwords: cannot read " + path);
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

}  // namespace ntm
