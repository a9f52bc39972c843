#include "sedw/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sedw {

EventScores event_based_scores(const std::map<std::string, EventList>& reference,
                               const std::map<std::string, EventList>& estimated,
                               const EvalConfig& cfg) {
    EventScores out;
    std::set<std::string> ref_classes;

    std::set<std::string> clips;
    for (const auto& [clip, _] : reference) clips.insert(clip);
    for (const auto& [clip, _] : estimated) clips.insert(clip);

    for (const std::string& clip : clips) {
        static const EventList empty;
        const EventList& ref = reference.count(clip) ? reference.at(clip) : empty;
        const EventList& est = estimated.count(clip) ? estimated.at(clip) : empty;

        std::set<std::string> labels;
        for (const Event& e : ref) labels.insert(e.label);
        for (const Event& e : est) labels.insert(e.label);

        for (const std::string& label : labels) {
            EventList r, e;
            for (const Event& ev : ref)
                if (ev.label == label) r.push_back(ev);
            for (const Event& ev : est)
                if (ev.label == label) e.push_back(ev);
            std::sort(r.begin(), r.end(), [](const Event& a, const Event& b) { return a.onset < b.onset; });
            std::sort(e.begin(), e.end(), [](const Event& a, const Event& b) { return a.onset < b.onset; });

            std::vector<bool> est_used(e.size(), false);
            long tp = 0;
            for (const Event& rev : r) {
                const double off_tol =
                    std::max(cfg.offset_collar, cfg.offset_duration_ratio * (rev.offset - rev.onset));
                for (std::size_t j = 0; j < e.size(); ++j) {
                    if (est_used[j]) continue;
                    if (std::fabs(e[j].onset - rev.onset) <= cfg.onset_collar &&
                        std::fabs(e[j].offset - rev.offset) <= off_tol) {
                        est_used[j] = true;
                        ++tp;
                        break;
                    }
                }
            }
            ClassCounts& cc = out.per_class[label];
            cc.tp += tp;
            cc.fn += static_cast<long>(r.size()) - tp;
            cc.fp += static_cast<long>(e.size()) - tp;
            if (!r.empty()) ref_classes.insert(label);
        }
    }

    if (!ref_classes.empty()) {
        double acc = 0.0;
        for (const std::string& label : ref_classes) acc += out.per_class[label].f1();
        out.macro_f1 = acc / static_cast<double>(ref_classes.size());
    }
    return out;
}

void write_event_tsv(const std::string& path, const std::map<std::string, EventList>& events) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "filename\tonset\toffset\tevent_label\n";
    for (const auto& [clip, list] : events) {
        for (const Event& e : list) {
            os << clip << '\t' << std::fixed << std::setprecision(3) << e.onset << '\t' << e.offset
               << '\t' << e.label << '\n';
        }
    }
}

std::map<std::string, EventList> read_event_tsv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::map<std::string, EventList> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("filename", 0) == 0) continue;
        std::istringstream ss(line);
        std::string fname, onset, offset, label;
        if (!std::getline(ss, fname, '\t') || !std::getline(ss, onset, '\t') ||
            !std::getline(ss, offset, '\t') || !std::getline(ss, label))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed event row");
        Event e{label, std::stod(onset), std::stod(offset)};
        if (!(e.onset < e.offset))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": onset must precede offset");
        out[fname].push_back(e);
    }
    return out;
}

void write_scores_csv(const std::string& path, const EventScores& s) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "class,tp,fp,fn,precision,recall,f1\n";
    for (const auto& [label, c] : s.per_class) {
        os << label << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << std::fixed
           << std::setprecision(6) << c.precision() << ',' << c.recall() << ',' << c.f1() << '\n';
    }
    os << "macro,,,,,," << std::fixed << std::setprecision(6) << s.macro_f1 << '\n';
}

std::string format_scores_table(const EventScores& s) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "class" << std::right << std::setw(6) << "TP"
       << std::setw(6) << "FP" << std::setw(6) << "FN" << std::setw(10) << "prec"
       << std::setw(10) << "recall" << std::setw(10) << "F1" << '\n';
    for (const auto& [label, c] : s.per_class) {
        os << std::left << std::setw(24) << label << std::right << std::setw(6) << c.tp
           << std::setw(6) << c.fp << std::setw(6) << c.fn << std::fixed << std::setprecision(3)
           << std::setw(10) << c.precision() << std::setw(10) << c.recall() << std::setw(10)
           << c.f1() << '\n';
    }
    os << std::left << std::setw(24) << "macro F1" << std::right << std::setw(48) << std::fixed
       << std::setprecision(4) << s.macro_f1 << '\n';
    return os.str();
}

} // namespace sedw
