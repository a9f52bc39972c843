#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sedw/audio.hpp"
#include "sedw/eval.hpp"
#include "sedw/manifest.hpp"
#include "sedw/rng.hpp"

namespace sedw {

// Each toy class owns a distinct frequency band so CNMF dictionaries stay
// identifiable; archetypes cycle tone / chirp / noise burst.
struct ToySpec {
    int n_classes = 5;
    int clips_strong = 20;
    int clips_weak = 20;
    int clips_unlabeled = 40;
    int clips_validation = 0; // optional held-out strong subset
    int min_events = 1;
    int max_events = 3;
    // chance that an additional event in a clip reuses the clip's first
    // class; per-tag CNMF inference degrades on heavily multi-class clips,
    // so mixed clips stay a minority by default
    double same_class_bias = 0.7;
    double min_duration = 0.8; // seconds
    double max_duration = 3.0;
    double background_noise = 0.002;
    std::uint64_t seed = 1234;
};

struct ToyClass {
    std::string name;
    std::string archetype; // tone | chirp | noise
    double f_lo = 0.0, f_hi = 0.0;
};

std::vector<ToyClass> toy_classes(int n_classes);

// Renders one event into the waveform (amplitude ~0.25, raised-cosine ramps).
void render_event(Waveform& w, const ToyClass& cls, double onset, double offset, Rng& rng);

struct ToyDataset {
    std::vector<std::string> class_list;
    std::string strong_manifest, weak_manifest, unlabeled_manifest;
    std::string weak_reference; // hidden ground truth for the weak subset
    std::string validation_manifest;
    std::size_t files_written = 0;
};

// Writes WAVs plus manifests under out_dir. The weak subset's true events
// are retained in a separate reference TSV so pseudo labels are measurable.
ToyDataset synth_toy_dataset(const ToySpec& spec, const std::string& out_dir);

} // namespace sedw
