#pragma once

#include <set>
#include <string>
#include <vector>

#include "sedw/cnmf.hpp"
#include "sedw/frontend.hpp"
#include "sedw/manifest.hpp"
#include "sedw/training.hpp"

namespace sedw {

// Cache directory resolution: explicit flag > SEDW_CACHE_DIR > fallback.
std::string resolve_cache_dir(const std::string& flag_value, const std::string& fallback);

// Load (or compute and cache) the pre-log mel features of a clip. The cache
// entry is a tensor archive holding the 640 x 64 pre-log matrix.
MelSpectrogram clip_features(const std::string& audio_path, const std::string& cache_dir,
                             const FrontendConfig& cfg = {});

// Model input: log-scaled and standardized per clip (zero mean, unit
// variance). The CNMF path keeps the raw pre-log features.
MelSpectrogram model_features(const std::string& audio_path, const std::string& cache_dir,
                              const FrontendConfig& cfg = {});
MelSpectrogram standardize(const MelSpectrogram& log_mel);

Matrix events_to_frame_targets(const EventList& events, const std::vector<std::string>& class_list,
                               std::size_t frames, double frames_per_second);
std::vector<double> tags_to_clip_targets(const std::set<std::string>& tags,
                                         const std::vector<std::string>& class_list);

// Sorted unique labels across manifests.
std::vector<std::string> collect_class_list(const std::vector<const Manifest*>& manifests);

// Per-class CNMF dictionaries from the strong subset; masks keep only the
// frames overlapping the class's events. Writes <class>.dict.sedw files plus
// classes.txt under out_dir.
std::vector<std::string> extract_dictionaries(const Manifest& strong, const std::string& audio_dir,
                                              const std::string& cache_dir, const CnmfConfig& cfg,
                                              const std::string& out_dir);

std::map<std::string, EventDictionary> load_dictionaries(const std::string& dict_dir);

// Pseudo strong labels for every weak clip; per-clip label archives plus an
// index.tsv (filename, label file, tags) under out_dir.
void build_pseudo_labels(const Manifest& weak, const std::string& audio_dir,
                         const std::string& cache_dir, const std::string& dict_dir,
                         const CnmfConfig& cfg, const std::string& out_dir);

struct PseudoLabelEntry {
    std::string filename;
    std::string label_path;
    std::set<std::string> tags;
};
std::vector<PseudoLabelEntry> read_pseudo_index(const std::string& dir);

struct PoolPaths {
    std::string audio_dir, cache_dir;
    std::string strong_manifest;
    std::string weak_manifest;
    std::string pseudo_dir;
    std::string unlabeled_manifest;
    std::string validation_manifest; // optional
};

// Assembles log-mel features and label tensors for the training loop.
DataPools assemble_pools(const PoolPaths& paths, const FrontendConfig& frontend = {});

} // namespace sedw
