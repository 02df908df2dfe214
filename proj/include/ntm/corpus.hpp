#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntm/linalg.hpp"

namespace ntm {

enum class VocabMode { RV, FV };

/// Token <-> dense id map. Ids equal the token's position in `tokens`,
/// which is ordered by descending frequency (ties broken lexicographically).
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens, VocabMode mode);

    std::size_t size() const { return tokens_.size(); }
    VocabMode mode() const { return mode_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t id) const { return tokens_.at(id); }

    /// Returns the id for `token`, or -1 if absent.
    int id_of(const std::string& token) const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path, VocabMode mode = VocabMode::FV);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    VocabMode mode_ = VocabMode::FV;
};

/// One document: ordered word ids plus its label set. The id order is the
/// original text order; both the bag-of-words prefix view and the
/// language-model context view are derived from this one sequence.
struct Document {
    std::vector<int> word_ids;
    std::set<std::string> labels;

    std::size_t length() const { return word_ids.size(); }
};

enum class Split { train, validation, test };

struct Corpus {
    std::vector<Document> documents;
    Split split = Split::train;
    std::set<std::string> label_set;

    std::size_t size() const { return documents.size(); }
};

/// H x V matrix of word vectors; column j belongs to vocabulary id j.
struct EmbeddingMatrix {
    Matrix values;  // H x V
    std::string source_name;
    double coverage = 0.0;  // fraction of vocabulary tokens found in the file
};

/// A raw document before vocabulary encoding.
struct RawDocument {
    std::vector<std::string> tokens;
    std::set<std::string> labels;
};

struct EncodeReport {
    std::size_t documents_in = 0;
    std::size_t documents_kept = 0;
    std::size_t documents_dropped_empty = 0;
    std::size_t tokens_dropped_oov = 0;
};

/// Splits on whitespace, strips leading/trailing punctuation from each token
/// and optionally lowercases. Empty tokens are dropped.
std::vector<std::string> tokenize(const std::string& text, bool lowercase = true);

/// Builds a vocabulary of at most `max_size` tokens ordered by descending
/// frequency (ties lexicographic). RV mode removes stopwords first.
/// Throws std::runtime_error if no token survives filtering.
Vocabulary build_vocabulary(const std::vector<RawDocument>& docs, VocabMode mode,
                            std::size_t max_size,
                            const std::set<std::string>& stopwords = {});

/// Maps tokens to ids, dropping out-of-vocabulary tokens in place. Documents
/// that become empty are excluded and counted in the report.
/// Throws std::runtime_error if every document becomes empty.
Corpus encode_corpus(const std::vector<RawDocument>& docs, const Vocabulary& vocab,
                     Split split, EncodeReport* report = nullptr);

/// Decodes word ids back to token strings (inverse of encode for kept tokens).
std::vector<std::string> decode_document(const Document& doc, const Vocabulary& vocab);

/// Reads `label1,label2<TAB>text` lines. Lines without a tab are rejected
/// with the offending line number in the error message.
std::vector<RawDocument> read_raw_corpus(const std::string& path, bool lowercase = true);

/// Reads `labels<TAB>id id id ...` lines produced by the ingest command.
Corpus read_encoded_corpus(const std::string& path, const Vocabulary& vocab, Split split);
void write_encoded_corpus(const Corpus& corpus, const std::string& path);

/// Loads `token v1 ... vH` lines into an H x V matrix aligned to `vocab`.
/// Missing vocabulary tokens get zero columns; tokens outside the vocabulary
/// are ignored. Throws on malformed lines or a dimension mismatch.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                std::size_t dim);

/// Built-in English stopword list used for RV mode when no file is given.
const std::set<std::string>& default_stopwords();

/// One token per line; used to override the built-in stopword list.
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace ntm
