#pragma once

#include <set>
#include <string>
#include <vector>

#include "sedw/matrix.hpp"

namespace sedw {

struct Event {
    std::string label;
    double onset = 0.0;  // seconds
    double offset = 0.0; // seconds
};

using EventList = std::vector<Event>;

struct PostprocessConfig {
    double clip_threshold = 0.5;
    double frame_threshold = 0.5;
    int median_window = 7;
    double min_duration = 0.1; // seconds
    double merge_gap = 0.2;    // seconds
    bool merge_before_drop = true;
    double frames_per_second = 64.0; // 640 frames / 10 s
};

// Classes whose clip probability strictly exceeds the threshold.
std::set<std::string> clip_tags(const std::vector<double>& clm_probs,
                                const std::vector<std::string>& class_list,
                                double threshold = 0.5);

// Sliding median with reflected edges; window must be odd.
std::vector<double> median_smooth(const std::vector<double>& x, int window);

// Median-smooth, binarize, decode runs to events, merge same-class events
// closer than the gap, then drop events shorter than the minimum duration.
// Only classes present in `tags` are decoded.
EventList frames_to_events(const Matrix& frame_probs, const std::set<std::string>& tags,
                           const std::vector<std::string>& class_list,
                           const PostprocessConfig& cfg = {});

} // namespace sedw
