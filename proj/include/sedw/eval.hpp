#pragma once

#include <map>
#include <string>
#include <vector>

#include "sedw/postprocess.hpp"

namespace sedw {

struct ClassCounts {
    long tp = 0, fp = 0, fn = 0;

    double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0; }
    double recall() const { return tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0; }
    double f1() const { return 2 * tp + fp + fn > 0 ? 2.0 * tp / double(2 * tp + fp + fn) : 0.0; }
};

struct EventScores {
    std::map<std::string, ClassCounts> per_class;
    double macro_f1 = 0.0; // mean F1 over classes present in the reference
};

struct EvalConfig {
    double onset_collar = 0.200;         // seconds
    double offset_collar = 0.200;        // seconds, lower bound
    double offset_duration_ratio = 0.2;  // max(collar, ratio * ref duration)
};

// Greedy one-to-one matching per class per clip, earliest reference onset
// first. A prediction is a TP when its label matches and both onset and
// offset fall within the tolerances.
EventScores event_based_scores(const std::map<std::string, EventList>& reference,
                               const std::map<std::string, EventList>& estimated,
                               const EvalConfig& cfg = {});

// DCASE-style TSV: filename<TAB>onset<TAB>offset<TAB>event_label
void write_event_tsv(const std::string& path, const std::map<std::string, EventList>& events);
std::map<std::string, EventList> read_event_tsv(const std::string& path);

void write_scores_csv(const std::string& path, const EventScores& s);
std::string format_scores_table(const EventScores& s);

} // namespace sedw
