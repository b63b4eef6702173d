#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "genemut/tensor.hpp"

namespace genemut {

// Fixed gene/cancer orderings; indices here define row/column meaning in
// every matrix downstream.
class GeneVocabulary {
public:
    GeneVocabulary() = default;
    GeneVocabulary(std::vector<std::string> genes, std::vector<std::string> cancers);

    std::size_t num_genes() const { return genes_.size(); }
    std::size_t num_cancers() const { return cancers_.size(); }
    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<std::string>& cancers() const { return cancers_; }
    const std::string& gene(std::size_t i) const { return genes_[i]; }
    const std::string& cancer(std::size_t i) const { return cancers_[i]; }

    std::size_t gene_index(const std::string& id) const;    // throws IngestionError
    std::size_t cancer_index(const std::string& id) const;  // throws IngestionError
    bool has_gene(const std::string& id) const;
    bool has_cancer(const std::string& id) const;

private:
    std::vector<std::string> genes_;
    std::vector<std::string> cancers_;
};

struct GeneRecord {
    std::string gene_id;
    std::string description;  // GeneCard-style summary; empty means no text
};

struct CancerAssociation {
    Tensor delta;  // K x C, entries in {0,1}
};

struct PathwayMembership {
    std::vector<std::pair<std::string, std::string>> pairs;  // (pathway_id, gene_id)
};

struct SlideLabel {
    std::string slide_id;
    std::string cancer_type;
    std::vector<std::uint8_t> mutated;  // K bits
};

struct MutationTable {
    std::vector<SlideLabel> rows;
    std::size_t size() const { return rows.size(); }
};

struct GeneGraph {
    GeneVocabulary vocab;
    Tensor initial_features;  // G: K x d
    Tensor delta;             // K x C; the phenotype term is recomputed from
                              // (delta, cancer embeddings) so the embeddings train
    Tensor e_adj;             // K x K normalized pathway adjacency
    Tensor e_con;             // K x K mutation-consistency weights
};

// --- linguistic node features ------------------------------------------------

struct EmbedderSpec {
    enum class Kind { TokenHash, File } kind = Kind::TokenHash;
    std::string path;  // File mode only

    // "token-hash" or "file(<path>)"
    static EmbedderSpec parse(const std::string& text);
};

// Token-hash mode lowercases, splits on non-alphanumerics, strips trailing
// digits (so nomenclature families like BRCA1/BRCA2 collide on "brca"), maps
// each token to a seed-keyed deterministic unit vector and averages. File
// mode loads one "gene_id v1 .. vd" line per gene.
Tensor embed_linguistic(const std::vector<GeneRecord>& records,
                        const EmbedderSpec& embedder, std::size_t d,
                        std::uint64_t seed);

// --- biomedical encodings ----------------------------------------------------

// phi_k = sum_c delta_kc * w_c. Differentiable in w when run on a tape; this
// is the eager value used by tests and graph reports.
Tensor phenotype_encoding(const Tensor& delta, const Tensor& cancer_embed);

// Shared-pathway counts with the max+1 self-loop diagonal.
Tensor pathway_adjacency(const PathwayMembership& membership,
                         const GeneVocabulary& vocab);

// D^-1/2 A D^-1/2 normalization of a symmetric nonnegative matrix.
Tensor normalize_adjacency(const Tensor& a_tilde);

enum class ConcurrenceMode {
    Joint,     // both genes mutated in the same slide (default reading)
    Marginal,  // each gene separately above threshold
};
enum class ConsistencyValue {
    Truncate,     // binary indicator per cancer (default)
    Probability,  // joint concurrence probability per cancer (ablation flag;
                  // ignores ConcurrenceMode)
};

Tensor consistency_encoding(const MutationTable& table, const GeneVocabulary& vocab,
                            double prob_threshold = 0.01,
                            ConcurrenceMode mode = ConcurrenceMode::Joint,
                            ConsistencyValue value = ConsistencyValue::Truncate);

// Validates every matrix against the graph invariants. An all-zero e_adj or
// e_con is accepted as the "encoding disabled" sentinel.
GeneGraph assemble_graph(Tensor initial_features, Tensor delta, Tensor e_adj,
                         Tensor e_con, GeneVocabulary vocab);

// --- dataset text formats ----------------------------------------------------

std::vector<GeneRecord> load_genes_tsv(const std::string& path);
void save_genes_tsv(const std::string& path, const std::vector<GeneRecord>& records);

std::vector<std::string> load_cancers_txt(const std::string& path);
void save_cancers_txt(const std::string& path, const std::vector<std::string>& cancers);

CancerAssociation load_delta_csv(const std::string& path, const GeneVocabulary& vocab);
void save_delta_csv(const std::string& path, const GeneVocabulary& vocab,
                    const Tensor& delta);

PathwayMembership load_pathways_tsv(const std::string& path);
void save_pathways_tsv(const std::string& path, const PathwayMembership& membership);

MutationTable load_labels_csv(const std::string& path, const GeneVocabulary& vocab);
void save_labels_csv(const std::string& path, const GeneVocabulary& vocab,
                     const MutationTable& table);

Tensor load_embeddings_file(const std::string& path, const GeneVocabulary& vocab,
                            std::size_t d);
void save_embeddings_file(const std::string& path, const GeneVocabulary& vocab,
                          const Tensor& features);

}  // namespace genemut
