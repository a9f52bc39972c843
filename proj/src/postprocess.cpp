#include "sedw/postprocess.hpp"

#include <algorithm>
#include <stdexcept>

namespace sedw {

std::set<std::string> clip_tags(const std::vector<double>& clm_probs,
                                const std::vector<std::string>& class_list,
                                double threshold) {
    if (clm_probs.size() != class_list.size())
        throw std::invalid_argument("clip_tags: class count mismatch");
    std::set<std::string> tags;
    for (std::size_t i = 0; i < clm_probs.size(); ++i)
        if (clm_probs[i] > threshold) tags.insert(class_list[i]);
    return tags;
}

std::vector<double> median_smooth(const std::vector<double>& x, int window) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("median_smooth: window must be odd and positive");
    const long n = static_cast<long>(x.size());
    if (n == 0) return {};
    const long half = window / 2;
    std::vector<double> out(x.size());
    std::vector<double> buf(static_cast<std::size_t>(window));
    for (long i = 0; i < n; ++i) {
        for (long k = -half; k <= half; ++k) {
            long j = i + k;
            // reflect at the edges
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
            j = std::clamp(j, 0L, n - 1);
            buf[static_cast<std::size_t>(k + half)] = x[static_cast<std::size_t>(j)];
        }
        std::nth_element(buf.begin(), buf.begin() + half, buf.end());
        out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(half)];
    }
    return out;
}

namespace {

struct Run {
    std::size_t start, end; // [start, end] inclusive frame indices
};

} // namespace

EventList frames_to_events(const Matrix& frame_probs, const std::set<std::string>& tags,
                           const std::vector<std::string>& class_list,
                           const PostprocessConfig& cfg) {
    if (frame_probs.cols() != class_list.size())
        throw std::invalid_argument("frames_to_events: class count mismatch");
    const double frame_dur = 1.0 / cfg.frames_per_second;

    EventList events;
    for (std::size_t c = 0; c < class_list.size(); ++c) {
        if (!tags.count(class_list[c])) continue;

        std::vector<double> probs(frame_probs.rows());
        for (std::size_t t = 0; t < frame_probs.rows(); ++t) probs[t] = frame_probs(t, c);
        probs = median_smooth(probs, cfg.median_window);

        std::vector<Run> runs;
        bool active = false;
        std::size_t start = 0;
        for (std::size_t t = 0; t < probs.size(); ++t) {
            const bool on = probs[t] > cfg.frame_threshold;
            if (on && !active) {
                active = true;
                start = t;
            } else if (!on && active) {
                active = false;
                runs.push_back({start, t - 1});
            }
        }
        if (active) runs.push_back({start, probs.size() - 1});

        // convert frame runs to second intervals
        std::vector<std::pair<double, double>> spans;
        for (const Run& r : runs)
            spans.emplace_back(r.start * frame_dur, (r.end + 1) * frame_dur);

        auto merge = [&]() {
            std::vector<std::pair<double, double>> merged;
            for (const auto& s : spans) {
                if (!merged.empty() && s.first - merged.back().second < cfg.merge_gap)
                    merged.back().second = s.second;
                else
                    merged.push_back(s);
            }
            spans = std::move(merged);
        };
        auto drop_short = [&]() {
            std::vector<std::pair<double, double>> kept;
            for (const auto& s : spans)
                if (s.second - s.first >= cfg.min_duration) kept.push_back(s);
            spans = std::move(kept);
        };

        if (cfg.merge_before_drop) {
            merge();
            drop_short();
        } else {
            drop_short();
            merge();
        }

        for (const auto& [on, off] : spans) events.push_back({class_list[c], on, off});
    }

    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.onset != b.onset) return a.onset < b.onset;
        if (a.label != b.label) return a.label < b.label;
        return a.offset < b.offset;
    });
    return events;
}

} // namespace sedw
