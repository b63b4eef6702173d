#include "genemut/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "genemut/errors.hpp"
#include "genemut/format.hpp"
#include "genemut/rng.hpp"

namespace genemut {

namespace {

const char* kFamilies[] = {"ALPHA", "BETA",  "GAMMA", "DELTA", "EPSILON",
                           "ZETA",  "THETA", "IOTA",  "KAPPA", "SIGMA"};

void validate(const SynthConfig& cfg) {
    auto fail = [](const std::string& why) {
        throw ContractError("generate_dataset: " + why);
    };
    if (cfg.num_slides == 0) fail("num_slides must be >= 1");
    if (cfg.num_genes == 0 || cfg.num_cancers == 0 || cfg.feature_dim == 0) {
        fail("num_genes, num_cancers and feature_dim must be >= 1");
    }
    if (cfg.patches_min == 0 || cfg.patches_min > cfg.patches_max) {
        fail("need 1 <= patches_min <= patches_max");
    }
    if (!(cfg.base_rate > 0.0 && cfg.base_rate < 1.0)) fail("base_rate outside (0,1)");
    if (!(cfg.group_rate > 0.0 && cfg.group_rate < 1.0)) {
        fail("group_rate outside (0,1)");
    }
    if (!(cfg.patch_hit_fraction > 0.0 && cfg.patch_hit_fraction <= 1.0)) {
        fail("patch_hit_fraction outside (0,1]");
    }
    if (cfg.signal_strength < 0.0) fail("signal_strength must be >= 0");
    if (!(cfg.weak_member_scale >= 0.0 && cfg.weak_member_scale <= 1.0)) {
        fail("weak_member_scale outside [0,1]");
    }
    if (cfg.cancer_signal < 0.0) fail("cancer_signal must be >= 0");
    if (!(cfg.delta_threshold > 0.0 && cfg.delta_threshold < 1.0)) {
        fail("delta_threshold outside (0,1)");
    }
    std::set<std::size_t> used;
    for (const auto& g : cfg.groups) {
        if (g.gene_indices.empty()) fail("empty co-mutation group");
        if (!(g.rho > 0.0 && g.rho <= 1.0)) fail("group rho outside (0,1]");
        for (std::size_t idx : g.gene_indices) {
            if (idx >= cfg.num_genes) fail("group gene index out of range");
            if (!used.insert(idx).second) fail("co-mutation groups must be disjoint");
        }
    }
}

std::string slide_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%05zu", i + 1);
    return buf;
}

std::string family_name(std::size_t group) {
    std::string base = kFamilies[group % 10];
    if (group >= 10) base += static_cast<char>('A' + group / 10 - 1);
    return base;
}

}  // namespace

std::vector<CoMutationGroup> default_groups(std::size_t num_genes,
                                            std::size_t group_count,
                                            std::size_t group_size, double rho) {
    if (group_count * group_size > num_genes) {
        throw ContractError("default_groups: groups exceed the gene count");
    }
    std::vector<CoMutationGroup> out;
    std::size_t next = 0;
    for (std::size_t g = 0; g < group_count; ++g) {
        CoMutationGroup grp;
        grp.rho = rho;
        for (std::size_t m = 0; m < group_size; ++m) grp.gene_indices.push_back(next++);
        out.push_back(std::move(grp));
    }
    return out;
}

Dataset generate_dataset(const SynthConfig& cfg) {
    validate(cfg);
    const std::size_t K = cfg.num_genes, C = cfg.num_cancers, d = cfg.feature_dim;

    // vocabulary and descriptions
    std::vector<int> group_of(K, -1);
    std::vector<int> member_no(K, 0);
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        int member = 1;
        for (std::size_t idx : cfg.groups[g].gene_indices) {
            group_of[idx] = static_cast<int>(g);
            member_no[idx] = member++;
        }
    }
    // Scaffold nouns vary per gene so the token-hash features stay close to
    // orthogonal across genes; only the family token is deliberately shared.
    static const char* kRole[] = {"kinase", "ligase",   "helicase", "phosphatase",
                                  "reductase", "synthase", "receptor", "transporter"};
    static const char* kSite[] = {"membrane", "nuclear", "cytosolic", "mitochondrial",
                                  "ribosomal", "vesicular", "chromatin", "stromal"};
    std::vector<std::string> gene_ids(K);
    std::vector<GeneRecord> records(K);
    for (std::size_t k = 0; k < K; ++k) {
        // loc<k>q / rs<N>t tags survive token digit-stripping, so every gene
        // keeps private tokens while families share theirs
        const std::string locus = "loc" + std::to_string(k) + "q";
        const std::string marker = "rs" + std::to_string(7919 + 131 * k) + "t";
        Rng word_rng(Rng::substream(cfg.seed, "gene-words/" + std::to_string(k)));
        const std::string role = kRole[word_rng.below(8)];
        const std::string site = kSite[word_rng.below(8)];
        if (group_of[k] >= 0) {
            const std::string fam = family_name(static_cast<std::size_t>(group_of[k]));
            gene_ids[k] = fam + std::to_string(member_no[k]);
            records[k] = {gene_ids[k], fam + " " + site + " " + role + " " + locus +
                                           " " + marker};
        } else {
            gene_ids[k] = "GN" + std::to_string(k) + "X";
            records[k] = {gene_ids[k],
                          site + " " + role + " " + locus + " " + marker};
        }
    }
    std::vector<std::string> cancer_ids(C);
    for (std::size_t c = 0; c < C; ++c) cancer_ids[c] = "CAN" + std::to_string(c + 1);
    GeneVocabulary vocab(gene_ids, cancer_ids);

    // pathways mirror the groups, plus one linking the first two loose genes
    PathwayMembership pathways;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        for (std::size_t idx : cfg.groups[g].gene_indices) {
            pathways.pairs.push_back({"P" + std::to_string(g + 1), gene_ids[idx]});
        }
    }
    std::vector<std::size_t> loose;
    for (std::size_t k = 0; k < K; ++k) {
        if (group_of[k] < 0) loose.push_back(k);
    }
    if (loose.size() >= 2) {
        pathways.pairs.push_back({"PX", gene_ids[loose[0]]});
        pathways.pairs.push_back({"PX", gene_ids[loose[1]]});
    }

    // which cancers each group / loose gene is active in
    auto pick_active = [&](const std::string& label, std::size_t fallback) {
        Rng rng(Rng::substream(cfg.seed, label));
        std::vector<bool> active(C, false);
        bool any = false;
        for (std::size_t c = 0; c < C; ++c) {
            active[c] = rng.uniform() < 0.5;
            any = any || active[c];
        }
        if (!any) active[fallback % C] = true;
        return active;
    };
    std::vector<std::vector<bool>> group_active;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        group_active.push_back(pick_active("group-cancer/" + std::to_string(g), g));
    }
    std::vector<std::vector<bool>> gene_active(K);
    for (std::size_t k : loose) {
        gene_active[k] = pick_active("gene-cancer/" + gene_ids[k], k);
    }

    // fixed per-gene feature directions
    std::vector<std::vector<double>> directions(K, std::vector<double>(d));
    for (std::size_t k = 0; k < K; ++k) {
        Rng rng(Rng::substream(cfg.seed, "gene-dir/" + gene_ids[k]));
        double norm_sq = 0.0;
        for (double& v : directions[k]) {
            v = rng.gauss();
            norm_sq += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : directions[k]) v *= inv;
    }

    std::vector<std::vector<double>> cancer_dirs(C, std::vector<double>(d));
    for (std::size_t c = 0; c < C; ++c) {
        Rng rng(Rng::substream(cfg.seed, "cancer-dir/" + cancer_ids[c]));
        double norm_sq = 0.0;
        for (double& v : cancer_dirs[c]) {
            v = rng.gauss();
            norm_sq += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : cancer_dirs[c]) v *= inv;
    }

    std::vector<double> signal_scale(K, 1.0);
    for (const auto& grp : cfg.groups) {
        for (std::size_t m = 1; m < grp.gene_indices.size(); ++m) {
            signal_scale[grp.gene_indices[m]] = cfg.weak_member_scale;
        }
    }

    Dataset ds;
    ds.vocab = vocab;
    ds.records = records;
    ds.pathways = pathways;

    for (std::size_t i = 0; i < cfg.num_slides; ++i) {
        SlideSample slide;
        slide.slide_id = slide_name(i);
        Rng rng(Rng::substream(cfg.seed, "slide/" + slide.slide_id));
        const std::size_t cancer = static_cast<std::size_t>(rng.below(C));
        slide.cancer_type = cancer_ids[cancer];

        slide.labels.assign(K, 0);
        for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
            const double rate =
                group_active[g][cancer] ? cfg.group_rate : cfg.group_rate * 0.1;
            if (rng.uniform() < rate) {
                for (std::size_t idx : cfg.groups[g].gene_indices) {
                    if (rng.uniform() < cfg.groups[g].rho) slide.labels[idx] = 1;
                }
            }
        }
        for (std::size_t k : loose) {
            const double rate =
                gene_active[k][cancer] ? cfg.base_rate : cfg.base_rate * 0.1;
            if (rng.uniform() < rate) slide.labels[k] = 1;
        }

        const std::size_t n =
            cfg.patches_min + rng.below(cfg.patches_max - cfg.patches_min + 1);
        slide.features = Tensor(n, d);
        for (double& v : slide.features.data) v = rng.gauss();
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t j = 0; j < d; ++j) {
                slide.features.at(p, j) += cfg.cancer_signal * cancer_dirs[cancer][j];
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (!slide.labels[k] || cfg.signal_strength == 0.0) continue;
            for (std::size_t p = 0; p < n; ++p) {
                if (rng.uniform() < cfg.patch_hit_fraction) {
                    for (std::size_t j = 0; j < d; ++j) {
                        slide.features.at(p, j) += cfg.signal_strength *
                                                   signal_scale[k] * directions[k][j];
                    }
                }
            }
        }

        ds.table.rows.push_back({slide.slide_id, slide.cancer_type, slide.labels});
        ds.slides.push_back(std::move(slide));
    }

    // associations from realized per-cancer mutation frequencies at the 1% rule
    Tensor delta(K, C, 0.0);
    std::vector<std::size_t> per_cancer(C, 0);
    for (const auto& row : ds.table.rows) {
        ++per_cancer[vocab.cancer_index(row.cancer_type)];
    }
    for (std::size_t c = 0; c < C; ++c) {
        if (per_cancer[c] == 0) continue;
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t mutated = 0;
            for (const auto& row : ds.table.rows) {
                if (vocab.cancer_index(row.cancer_type) == c && row.mutated[k]) {
                    ++mutated;
                }
            }
            const double freq =
                static_cast<double>(mutated) / static_cast<double>(per_cancer[c]);
            delta.at(k, c) = freq >= cfg.delta_threshold ? 1.0 : 0.0;
        }
    }
    ds.assoc.delta = std::move(delta);

    ds.manifest = {
        "format_version 1",
        "seed " + std::to_string(cfg.seed),
        "num_slides " + std::to_string(cfg.num_slides),
        "num_genes " + std::to_string(K),
        "num_cancers " + std::to_string(C),
        "feature_dim " + std::to_string(d),
        "patches_min " + std::to_string(cfg.patches_min),
        "patches_max " + std::to_string(cfg.patches_max),
        "base_rate " + fmt_double(cfg.base_rate),
        "group_rate " + fmt_double(cfg.group_rate),
        "signal_strength " + fmt_double(cfg.signal_strength),
        "patch_hit_fraction " + fmt_double(cfg.patch_hit_fraction),
        "weak_member_scale " + fmt_double(cfg.weak_member_scale),
        "cancer_signal " + fmt_double(cfg.cancer_signal),
        "delta_threshold " + fmt_double(cfg.delta_threshold),
    };
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        std::string line = "group " + std::to_string(g) + " rho=" +
                           fmt_double(cfg.groups[g].rho) + " genes=";
        for (std::size_t m = 0; m < cfg.groups[g].gene_indices.size(); ++m) {
            line += (m ? "," : "") + std::to_string(cfg.groups[g].gene_indices[m]);
        }
        ds.manifest.push_back(line);
    }
    return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "features");
    save_genes_tsv((fs::path(dir) / "genes.tsv").string(), ds.records);
    save_cancers_txt((fs::path(dir) / "cancers.txt").string(), ds.vocab.cancers());
    save_delta_csv((fs::path(dir) / "delta.csv").string(), ds.vocab, ds.assoc.delta);
    save_pathways_tsv((fs::path(dir) / "pathways.tsv").string(), ds.pathways);
    save_labels_csv((fs::path(dir) / "labels.csv").string(), ds.vocab, ds.table);
    for (const auto& slide : ds.slides) {
        slide.features.save_file(
            (fs::path(dir) / "features" / (slide.slide_id + ".ten")).string());
    }
    std::ofstream os((fs::path(dir) / "manifest.txt").string());
    if (!os) throw IngestionError("cannot open for write: " + dir + "/manifest.txt");
    for (const auto& line : ds.manifest) os << line << "\n";
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.records = load_genes_tsv((fs::path(dir) / "genes.tsv").string());
    std::vector<std::string> gene_ids;
    for (const auto& r : ds.records) gene_ids.push_back(r.gene_id);
    ds.vocab = GeneVocabulary(
        gene_ids, load_cancers_txt((fs::path(dir) / "cancers.txt").string()));
    ds.pathways = load_pathways_tsv((fs::path(dir) / "pathways.tsv").string());
    ds.assoc = load_delta_csv((fs::path(dir) / "delta.csv").string(), ds.vocab);
    ds.table = load_labels_csv((fs::path(dir) / "labels.csv").string(), ds.vocab);
    for (const auto& row : ds.table.rows) {
        SlideSample slide;
        slide.slide_id = row.slide_id;
        slide.cancer_type = row.cancer_type;
        slide.labels = row.mutated;
        try {
            slide.features = Tensor::load_file(
                (fs::path(dir) / "features" / (row.slide_id + ".ten")).string());
        } catch (const IngestionError& e) {
            throw IngestionError("slide " + row.slide_id + ": " + e.what());
        }
        ds.slides.push_back(std::move(slide));
    }
    std::ifstream is((fs::path(dir) / "manifest.txt").string());
    if (is) {
        std::string line;
        while (std::getline(is, line)) ds.manifest.push_back(line);
    }
    return ds;
}

int otsu_threshold(const Raster& raster) {
    if (raster.pixels.empty()) throw ContractError("otsu_threshold: empty raster");
    unsigned long long hist[256] = {0};
    for (std::uint8_t p : raster.pixels) ++hist[p];
    int lo = 255, hi = 0;
    for (int v = 0; v < 256; ++v) {
        if (hist[v]) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (lo == hi) return lo;

    const unsigned long long total_w = raster.pixels.size();
    unsigned long long total_s = 0;
    for (int v = 0; v < 256; ++v) total_s += hist[v] * static_cast<unsigned long long>(v);

    // Single cumulative pass; candidates compared as exact rationals
    // a^2 / (w0 w1) with a = s0 w1 - s1 w0.
    int best_t = -1;
    unsigned __int128 best_num = 0, best_den = 1;
    unsigned long long w0 = 0, s0 = 0;
    for (int t = 0; t <= 254; ++t) {
        w0 += hist[t];
        s0 += hist[t] * static_cast<unsigned long long>(t);
        const unsigned long long w1 = total_w - w0;
        if (w0 == 0 || w1 == 0) continue;
        const unsigned long long s1 = total_s - s0;
        const long long a =
            static_cast<long long>(s0 * w1) - static_cast<long long>(s1 * w0);
        const unsigned long long am = static_cast<unsigned long long>(a < 0 ? -a : a);
        const unsigned __int128 num =
            static_cast<unsigned __int128>(am) * static_cast<unsigned __int128>(am);
        const unsigned __int128 den =
            static_cast<unsigned __int128>(w0) * static_cast<unsigned __int128>(w1);
        if (best_t < 0 || num * best_den > best_num * den) {
            best_t = t;
            best_num = num;
            best_den = den;
        }
    }
    return best_t;
}

std::vector<std::pair<std::size_t, std::size_t>> tile_and_filter(
    const Raster& raster, std::size_t tile_size, double background_fraction_max) {
    if (tile_size == 0 || tile_size > raster.height || tile_size > raster.width) {
        throw DimensionError("tile_and_filter: tile size " +
                             std::to_string(tile_size) + " does not fit a " +
                             std::to_string(raster.height) + "x" +
                             std::to_string(raster.width) + " raster");
    }
    const int threshold = otsu_threshold(raster);
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    const double tile_area = static_cast<double>(tile_size * tile_size);
    for (std::size_t y = 0; y + tile_size <= raster.height; y += tile_size) {
        for (std::size_t x = 0; x + tile_size <= raster.width; x += tile_size) {
            std::size_t background = 0;
            for (std::size_t dy = 0; dy < tile_size; ++dy) {
                for (std::size_t dx = 0; dx < tile_size; ++dx) {
                    if (raster.at(y + dy, x + dx) > threshold) ++background;
                }
            }
            if (static_cast<double>(background) / tile_area <=
                background_fraction_max) {
                kept.push_back({x, y});
            }
        }
    }
    return kept;
}

}  // namespace genemut
