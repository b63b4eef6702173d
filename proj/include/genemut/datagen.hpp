#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "genemut/genegraph.hpp"
#include "genemut/tensor.hpp"

namespace genemut {

// Synthetic stand-in for the slide corpus: planted co-mutation groups give the
// consistency encoding a real signal, planted per-gene feature directions give
// the decoder something to find.

struct CoMutationGroup {
    std::vector<std::size_t> gene_indices;
    double rho = 0.9;  // member mutation probability given the group fires
};

struct SynthConfig {
    std::uint64_t seed = 1;
    std::size_t num_slides = 200;
    std::size_t num_genes = 30;
    std::size_t num_cancers = 9;
    std::size_t feature_dim = 64;
    std::size_t patches_min = 8;
    std::size_t patches_max = 32;
    std::vector<CoMutationGroup> groups;
    double base_rate = 0.08;          // ungrouped per-gene mutation rate
    double group_rate = 0.4;          // latent group-indicator rate
    double signal_strength = 1.0;     // feature shift per mutated gene
    double patch_hit_fraction = 0.5;  // patches receiving each gene's direction
    double weak_member_scale = 1.0;   // signal factor for non-anchor group members;
                                      // below 1 their mutations are visible mostly
                                      // through co-mutation with the group anchor
    double cancer_signal = 0.5;       // tissue-wide shift identifying the cancer type
    double delta_threshold = 0.01;    // 1% rule for the derived associations
};

struct SlideSample {
    std::string slide_id;
    std::string cancer_type;
    Tensor features;  // N x d
    std::vector<std::uint8_t> labels;
    std::vector<std::pair<std::size_t, std::size_t>> coords;  // optional tile x,y
};

struct Dataset {
    GeneVocabulary vocab;
    std::vector<GeneRecord> records;
    PathwayMembership pathways;
    CancerAssociation assoc;
    MutationTable table;
    std::vector<SlideSample> slides;
    std::vector<std::string> manifest;  // config echo, format version
};

// Deterministic per seed down to every emitted byte. Throws before producing
// anything when the config is infeasible.
Dataset generate_dataset(const SynthConfig& cfg);

// genes.tsv cancers.txt delta.csv pathways.tsv labels.csv features/*.ten manifest.txt
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// Evenly sized co-mutation groups over the first genes of the vocabulary.
std::vector<CoMutationGroup> default_groups(std::size_t num_genes,
                                            std::size_t group_count,
                                            std::size_t group_size, double rho);

// --- toy raster preprocessing ------------------------------------------------

struct Raster {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> pixels;  // row-major grayscale

    std::uint8_t at(std::size_t y, std::size_t x) const {
        return pixels[y * width + x];
    }
};

// Threshold maximizing between-class variance over the 256-bin histogram;
// class 0 is values <= t, ties resolved to the smallest t. A constant raster
// returns its single value.
int otsu_threshold(const Raster& raster);

// Non-overlapping L x L grid from the origin (partial edge tiles dropped); a
// tile survives when its fraction of background pixels (brighter than the
// Otsu threshold) is at most background_fraction_max. Returns (x, y) corners.
std::vector<std::pair<std::size_t, std::size_t>> tile_and_filter(
    const Raster& raster, std::size_t tile_size,
    double background_fraction_max = 0.5);

}  // namespace genemut
