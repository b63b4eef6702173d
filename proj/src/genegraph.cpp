#include "genemut/genegraph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "genemut/autodiff.hpp"
#include "genemut/errors.hpp"
#include "genemut/format.hpp"
#include "genemut/rng.hpp"

namespace genemut {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& why) {
    throw IngestionError(path + ":" + std::to_string(line) + ": " + why);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IngestionError("cannot open for read: " + path);
    return is;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IngestionError("cannot open for write: " + path);
    return os;
}

int parse_bit(const std::string& cell, const std::string& path, std::size_t line) {
    if (cell == "0") return 0;
    if (cell == "1") return 1;
    parse_fail(path, line, "expected 0 or 1, got '" + cell + "'");
}

}  // namespace

GeneVocabulary::GeneVocabulary(std::vector<std::string> genes,
                               std::vector<std::string> cancers)
    : genes_(std::move(genes)), cancers_(std::move(cancers)) {
    std::unordered_set<std::string> seen;
    for (const auto& g : genes_) {
        if (!seen.insert(g).second) {
            throw IngestionError("duplicate gene id: " + g);
        }
    }
    seen.clear();
    for (const auto& c : cancers_) {
        if (!seen.insert(c).second) {
            throw IngestionError("duplicate cancer id: " + c);
        }
    }
}

std::size_t GeneVocabulary::gene_index(const std::string& id) const {
    auto it = std::find(genes_.begin(), genes_.end(), id);
    if (it == genes_.end()) throw IngestionError("unknown gene id: " + id);
    return static_cast<std::size_t>(it - genes_.begin());
}

std::size_t GeneVocabulary::cancer_index(const std::string& id) const {
    auto it = std::find(cancers_.begin(), cancers_.end(), id);
    if (it == cancers_.end()) throw IngestionError("unknown cancer id: " + id);
    return static_cast<std::size_t>(it - cancers_.begin());
}

bool GeneVocabulary::has_gene(const std::string& id) const {
    return std::find(genes_.begin(), genes_.end(), id) != genes_.end();
}

bool GeneVocabulary::has_cancer(const std::string& id) const {
    return std::find(cancers_.begin(), cancers_.end(), id) != cancers_.end();
}

EmbedderSpec EmbedderSpec::parse(const std::string& text) {
    if (text == "token-hash") return {Kind::TokenHash, ""};
    if (text.rfind("file(", 0) == 0 && text.back() == ')') {
        return {Kind::File, text.substr(5, text.size() - 6)};
    }
    throw IngestionError("unknown embedder '" + text +
                         "' (want token-hash or file(<path>))");
}

namespace {

std::vector<std::string> tokenize_description(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        // strip trailing digits so BRCA1/BRCA2 share a token
        while (!cur.empty() && std::isdigit(static_cast<unsigned char>(cur.back()))) {
            cur.pop_back();
        }
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
    };
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::vector<double> token_unit_vector(const std::string& token, std::size_t d,
                                      std::uint64_t seed) {
    Rng rng(Rng::substream(seed, token));
    std::vector<double> v(d);
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.gauss();
        norm_sq += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace

Tensor embed_linguistic(const std::vector<GeneRecord>& records,
                        const EmbedderSpec& embedder, std::size_t d,
                        std::uint64_t seed) {
    if (d == 0) throw ContractError("embed_linguistic: d must be positive");
    if (embedder.kind == EmbedderSpec::Kind::File) {
        std::vector<std::string> ids;
        ids.reserve(records.size());
        for (const auto& r : records) ids.push_back(r.gene_id);
        GeneVocabulary vocab(ids, {});
        return load_embeddings_file(embedder.path, vocab, d);
    }
    Tensor g(records.size(), d, 0.0);
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto tokens = tokenize_description(records[k].description);
        if (tokens.empty()) continue;  // flagged-empty record embeds as zero
        for (const auto& tok : tokens) {
            const auto v = token_unit_vector(tok, d, seed);
            for (std::size_t j = 0; j < d; ++j) g.at(k, j) += v[j];
        }
        const double inv = 1.0 / static_cast<double>(tokens.size());
        for (std::size_t j = 0; j < d; ++j) g.at(k, j) *= inv;
    }
    return g;
}

Tensor phenotype_encoding(const Tensor& delta, const Tensor& cancer_embed) {
    if (delta.rank() != 2 || cancer_embed.rank() != 2 ||
        delta.shape[1] != cancer_embed.shape[0]) {
        throw DimensionError("phenotype_encoding: delta " + delta.shape_str() +
                             " vs cancer embeddings " + cancer_embed.shape_str());
    }
    return ad::matmul_value(delta, cancer_embed);
}

Tensor pathway_adjacency(const PathwayMembership& membership,
                         const GeneVocabulary& vocab) {
    const std::size_t K = vocab.num_genes();
    // pathway -> member gene indices (set semantics on repeated pairs)
    std::map<std::string, std::set<std::size_t>> by_pathway;
    for (const auto& [pathway, gene] : membership.pairs) {
        by_pathway[pathway].insert(vocab.gene_index(gene));
    }
    Tensor a(K, K, 0.0);
    for (const auto& [pathway, members] : by_pathway) {
        for (auto it = members.begin(); it != members.end(); ++it) {
            for (auto jt = std::next(it); jt != members.end(); ++jt) {
                a.at(*it, *jt) += 1.0;
                a.at(*jt, *it) += 1.0;
            }
        }
    }
    for (std::size_t i = 0; i < K; ++i) {
        double mx = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            if (j != i) mx = std::max(mx, a.at(i, j));
        }
        a.at(i, i) = mx + 1.0;
    }
    return a;
}

Tensor normalize_adjacency(const Tensor& a_tilde) {
    if (a_tilde.rank() != 2 || a_tilde.shape[0] != a_tilde.shape[1]) {
        throw DimensionError("normalize_adjacency: want square matrix, got " +
                             a_tilde.shape_str());
    }
    const std::size_t K = a_tilde.shape[0];
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = i + 1; j < K; ++j) {
            if (a_tilde.at(i, j) != a_tilde.at(j, i)) {
                throw ContractError("normalize_adjacency: asymmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    std::vector<double> inv_sqrt_deg(K);
    for (std::size_t i = 0; i < K; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < K; ++j) deg += a_tilde.at(i, j);
        if (deg <= 0.0) {
            throw NumericError("normalize_adjacency: degenerate graph, row " +
                               std::to_string(i) + " has zero degree");
        }
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    Tensor e(K, K);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            e.at(i, j) = a_tilde.at(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    return e;
}

Tensor consistency_encoding(const MutationTable& table, const GeneVocabulary& vocab,
                            double prob_threshold, ConcurrenceMode mode,
                            ConsistencyValue value) {
    if (table.rows.empty()) {
        throw IngestionError("consistency_encoding: empty mutation table");
    }
    if (!(prob_threshold > 0.0 && prob_threshold < 1.0)) {
        throw ContractError("consistency_encoding: threshold must be in (0,1)");
    }
    const std::size_t K = vocab.num_genes();
    const std::size_t C = vocab.num_cancers();
    const std::size_t N = table.rows.size();

    std::vector<std::size_t> cancer_count(C, 0);
    // per cancer: joint counts (i<j) and marginal counts
    std::vector<std::vector<std::size_t>> joint(C, std::vector<std::size_t>(K * K, 0));
    std::vector<std::vector<std::size_t>> marginal(C, std::vector<std::size_t>(K, 0));
    for (const auto& row : table.rows) {
        const std::size_t c = vocab.cancer_index(row.cancer_type);
        if (row.mutated.size() != K) {
            throw IngestionError("consistency_encoding: slide " + row.slide_id +
                                 " has " + std::to_string(row.mutated.size()) +
                                 " labels, expected " + std::to_string(K));
        }
        ++cancer_count[c];
        for (std::size_t i = 0; i < K; ++i) {
            if (!row.mutated[i]) continue;
            ++marginal[c][i];
            for (std::size_t j = i + 1; j < K; ++j) {
                if (row.mutated[j]) ++joint[c][i * K + j];
            }
        }
    }

    Tensor e(K, K, 0.0);
    for (std::size_t i = 0; i < K; ++i) e.at(i, i) = 1.0;
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = i + 1; j < K; ++j) {
            double weighted = 0.0;  // sum_c zeta_ijc * N_c (or probability-valued)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t nc = cancer_count[c];
                if (nc == 0) continue;
                const double joint_frac =
                    static_cast<double>(joint[c][i * K + j]) / static_cast<double>(nc);
                if (value == ConsistencyValue::Probability) {
                    weighted += joint_frac * static_cast<double>(nc);
                    continue;
                }
                bool zeta = false;
                if (mode == ConcurrenceMode::Joint) {
                    zeta = joint_frac >= prob_threshold;
                } else {
                    const double fi = static_cast<double>(marginal[c][i]) /
                                      static_cast<double>(nc);
                    const double fj = static_cast<double>(marginal[c][j]) /
                                      static_cast<double>(nc);
                    zeta = fi >= prob_threshold && fj >= prob_threshold;
                }
                if (zeta) weighted += static_cast<double>(nc);
            }
            const double val = weighted / static_cast<double>(N);
            e.at(i, j) = val;
            e.at(j, i) = val;
        }
    }
    return e;
}

GeneGraph assemble_graph(Tensor initial_features, Tensor delta, Tensor e_adj,
                         Tensor e_con, GeneVocabulary vocab) {
    const std::size_t K = vocab.num_genes();
    const std::size_t C = vocab.num_cancers();
    auto fail = [](const std::string& matrix, std::size_t i, std::size_t j,
                   const std::string& why) {
        throw ContractError("assemble_graph: " + matrix + " invalid at (" +
                            std::to_string(i) + "," + std::to_string(j) + "): " + why);
    };

    if (initial_features.rank() != 2 || initial_features.shape[0] != K) {
        throw DimensionError("assemble_graph: G must be K x d with K=" +
                             std::to_string(K) + ", got " +
                             initial_features.shape_str());
    }
    if (delta.rank() != 2 || delta.shape[0] != K || delta.shape[1] != C) {
        throw DimensionError("assemble_graph: delta must be " + std::to_string(K) +
                             "x" + std::to_string(C) + ", got " + delta.shape_str());
    }
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            const double v = delta.at(i, j);
            if (v != 0.0 && v != 1.0) fail("delta", i, j, "entry not in {0,1}");
        }
    }
    auto check_square = [&](const Tensor& m, const std::string& name) {
        if (m.rank() != 2 || m.shape[0] != K || m.shape[1] != K) {
            throw DimensionError("assemble_graph: " + name + " must be " +
                                 std::to_string(K) + "x" + std::to_string(K) +
                                 ", got " + m.shape_str());
        }
    };
    check_square(e_adj, "E^adj");
    check_square(e_con, "E^con");

    bool adj_all_zero = true, con_all_zero = true;
    for (double v : e_adj.data) adj_all_zero = adj_all_zero && v == 0.0;
    for (double v : e_con.data) con_all_zero = con_all_zero && v == 0.0;

    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            if (std::fabs(e_adj.at(i, j) - e_adj.at(j, i)) > 1e-12) {
                fail("E^adj", i, j, "asymmetric");
            }
            if (e_adj.at(i, j) < 0.0) fail("E^adj", i, j, "negative entry");
            if (std::fabs(e_con.at(i, j) - e_con.at(j, i)) > 1e-12) {
                fail("E^con", i, j, "asymmetric");
            }
            if (e_con.at(i, j) < 0.0 || e_con.at(i, j) > 1.0) {
                fail("E^con", i, j, "entry outside [0,1]");
            }
        }
        if (!con_all_zero && e_con.at(i, i) != 1.0) {
            fail("E^con", i, i, "diagonal must be exactly 1");
        }
    }
    (void)adj_all_zero;

    GeneGraph g;
    g.vocab = std::move(vocab);
    g.initial_features = std::move(initial_features);
    g.delta = std::move(delta);
    g.e_adj = std::move(e_adj);
    g.e_con = std::move(e_con);
    return g;
}

// --- dataset text formats ----------------------------------------------------

std::vector<GeneRecord> load_genes_tsv(const std::string& path) {
    auto is = open_in(path);
    std::vector<GeneRecord> out;
    std::string line;
    std::size_t lineno = 0;
    std::unordered_set<std::string> seen;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != 2) {
            parse_fail(path, lineno, "expected 'gene_id<TAB>description'");
        }
        if (!seen.insert(cells[0]).second) {
            parse_fail(path, lineno, "duplicate gene id " + cells[0]);
        }
        out.push_back({cells[0], cells[1]});
    }
    if (out.empty()) throw IngestionError(path + ": no gene records");
    return out;
}

void save_genes_tsv(const std::string& path, const std::vector<GeneRecord>& records) {
    auto os = open_out(path);
    for (const auto& r : records) os << r.gene_id << "\t" << r.description << "\n";
}

std::vector<std::string> load_cancers_txt(const std::string& path) {
    auto is = open_in(path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) out.push_back(line);
    }
    if (out.empty()) throw IngestionError(path + ": no cancer ids");
    return out;
}

void save_cancers_txt(const std::string& path, const std::vector<std::string>& cancers) {
    auto os = open_out(path);
    for (const auto& c : cancers) os << c << "\n";
}

CancerAssociation load_delta_csv(const std::string& path, const GeneVocabulary& vocab) {
    auto is = open_in(path);
    const std::size_t K = vocab.num_genes(), C = vocab.num_cancers();
    std::string line;
    if (!std::getline(is, line)) throw IngestionError(path + ": empty file");
    auto header = split(trim(line), ',');
    if (header.size() != C + 1 || header[0] != "gene_id") {
        parse_fail(path, 1, "header must be gene_id,<cancer ids>");
    }
    std::vector<std::size_t> col_to_cancer(C);
    for (std::size_t j = 0; j < C; ++j) {
        col_to_cancer[j] = vocab.cancer_index(header[j + 1]);
    }
    Tensor delta(K, C, 0.0);
    std::vector<bool> seen(K, false);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(trim(line), ',');
        if (cells.size() != C + 1) {
            parse_fail(path, lineno, "expected " + std::to_string(C + 1) + " cells");
        }
        const std::size_t k = vocab.gene_index(cells[0]);
        seen[k] = true;
        for (std::size_t j = 0; j < C; ++j) {
            delta.at(k, col_to_cancer[j]) =
                static_cast<double>(parse_bit(cells[j + 1], path, lineno));
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (!seen[k]) {
            throw IngestionError(path + ": missing row for gene " + vocab.gene(k));
        }
    }
    return {std::move(delta)};
}

void save_delta_csv(const std::string& path, const GeneVocabulary& vocab,
                    const Tensor& delta) {
    auto os = open_out(path);
    os << "gene_id";
    for (const auto& c : vocab.cancers()) os << "," << c;
    os << "\n";
    for (std::size_t k = 0; k < vocab.num_genes(); ++k) {
        os << vocab.gene(k);
        for (std::size_t c = 0; c < vocab.num_cancers(); ++c) {
            os << "," << (delta.at(k, c) != 0.0 ? 1 : 0);
        }
        os << "\n";
    }
}

PathwayMembership load_pathways_tsv(const std::string& path) {
    auto is = open_in(path);
    PathwayMembership out;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line, '\t');
        if (cells.size() != 2) {
            parse_fail(path, lineno, "expected 'pathway_id<TAB>gene_id'");
        }
        if (!seen.insert({cells[0], cells[1]}).second) {
            parse_fail(path, lineno, "duplicate pair " + cells[0] + "/" + cells[1]);
        }
        out.pairs.push_back({cells[0], cells[1]});
    }
    return out;
}

void save_pathways_tsv(const std::string& path, const PathwayMembership& membership) {
    auto os = open_out(path);
    for (const auto& [p, g] : membership.pairs) os << p << "\t" << g << "\n";
}

MutationTable load_labels_csv(const std::string& path, const GeneVocabulary& vocab) {
    auto is = open_in(path);
    const std::size_t K = vocab.num_genes();
    std::string line;
    if (!std::getline(is, line)) throw IngestionError(path + ": empty file");
    auto header = split(trim(line), ',');
    if (header.size() != K + 2 || header[0] != "slide_id" ||
        header[1] != "cancer_type") {
        parse_fail(path, 1, "header must be slide_id,cancer_type,<gene ids>");
    }
    std::vector<std::size_t> col_to_gene(K);
    for (std::size_t j = 0; j < K; ++j) col_to_gene[j] = vocab.gene_index(header[j + 2]);
    MutationTable table;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(trim(line), ',');
        if (cells.size() != K + 2) {
            parse_fail(path, lineno, "expected " + std::to_string(K + 2) + " cells");
        }
        if (!vocab.has_cancer(cells[1])) {
            parse_fail(path, lineno, "unknown cancer type " + cells[1]);
        }
        SlideLabel row;
        row.slide_id = cells[0];
        row.cancer_type = cells[1];
        row.mutated.assign(K, 0);
        for (std::size_t j = 0; j < K; ++j) {
            row.mutated[col_to_gene[j]] =
                static_cast<std::uint8_t>(parse_bit(cells[j + 2], path, lineno));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw IngestionError(path + ": no slides");
    return table;
}

void save_labels_csv(const std::string& path, const GeneVocabulary& vocab,
                     const MutationTable& table) {
    auto os = open_out(path);
    os << "slide_id,cancer_type";
    for (const auto& g : vocab.genes()) os << "," << g;
    os << "\n";
    for (const auto& row : table.rows) {
        os << row.slide_id << "," << row.cancer_type;
        for (std::uint8_t b : row.mutated) os << "," << static_cast<int>(b);
        os << "\n";
    }
}

Tensor load_embeddings_file(const std::string& path, const GeneVocabulary& vocab,
                            std::size_t d) {
    auto is = open_in(path);
    const std::size_t K = vocab.num_genes();
    Tensor g(K, d, 0.0);
    std::vector<bool> seen(K, false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream ss(line);
        std::string id;
        ss >> id;
        if (!vocab.has_gene(id)) continue;  // superset files are fine
        const std::size_t k = vocab.gene_index(id);
        for (std::size_t j = 0; j < d; ++j) {
            if (!(ss >> g.at(k, j))) {
                parse_fail(path, lineno, "expected " + std::to_string(d) +
                                             " values for gene " + id);
            }
        }
        double extra;
        if (ss >> extra) {
            parse_fail(path, lineno, "more than " + std::to_string(d) +
                                         " values for gene " + id);
        }
        seen[k] = true;
    }
    std::string missing;
    for (std::size_t k = 0; k < K; ++k) {
        if (!seen[k]) missing += (missing.empty() ? "" : ", ") + vocab.gene(k);
    }
    if (!missing.empty()) {
        throw IngestionError(path + ": missing embeddings for: " + missing);
    }
    return g;
}

void save_embeddings_file(const std::string& path, const GeneVocabulary& vocab,
                          const Tensor& features) {
    auto os = open_out(path);
    for (std::size_t k = 0; k < vocab.num_genes(); ++k) {
        os << vocab.gene(k);
        for (std::size_t j = 0; j < features.shape[1]; ++j) {
            os << " " << fmt_double(features.at(k, j));
        }
        os << "\n";
    }
}

}  // namespace genemut
