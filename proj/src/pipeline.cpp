#include "sedw/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "sedw/tensor_io.hpp"

namespace fs = std::filesystem;

namespace sedw {

std::string resolve_cache_dir(const std::string& flag_value, const std::string& fallback) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SEDW_CACHE_DIR"); env && *env) return env;
    return fallback;
}

MelSpectrogram clip_features(const std::string& audio_path, const std::string& cache_dir,
                             const FrontendConfig& cfg) {
    fs::create_directories(cache_dir);
    const std::string cache_path =
        (fs::path(cache_dir) / (fs::path(audio_path).filename().string() + ".mel.sedw")).string();
    if (fs::exists(cache_path)) return load_mel(cache_path);
    const Waveform w = load_clip(audio_path);
    MelSpectrogram mel = compute_mel(w, cfg);
    save_mel(cache_path, mel);
    return mel;
}

MelSpectrogram standardize(const MelSpectrogram& log_mel) {
    MelSpectrogram out = log_mel;
    double mean = 0.0;
    for (double v : out.values.values()) mean += v;
    mean /= static_cast<double>(out.values.size());
    double var = 0.0;
    for (double v : out.values.values()) var += (v - mean) * (v - mean);
    const double inv_std = 1.0 / std::sqrt(var / static_cast<double>(out.values.size()) + 1e-12);
    for (double& v : out.values.values()) v = (v - mean) * inv_std;
    return out;
}

MelSpectrogram model_features(const std::string& audio_path, const std::string& cache_dir,
                              const FrontendConfig& cfg) {
    return standardize(log_scale(clip_features(audio_path, cache_dir, cfg), cfg.log_floor));
}

Matrix events_to_frame_targets(const EventList& events, const std::vector<std::string>& class_list,
                               std::size_t frames, double frames_per_second) {
    Matrix t(frames, class_list.size());
    for (const Event& e : events) {
        std::size_t cls = class_list.size();
        for (std::size_t c = 0; c < class_list.size(); ++c)
            if (class_list[c] == e.label) cls = c;
        if (cls == class_list.size())
            throw std::runtime_error("events_to_frame_targets: unknown label " + e.label);
        for (std::size_t f = 0; f < frames; ++f) {
            const double f_start = static_cast<double>(f) / frames_per_second;
            const double f_end = static_cast<double>(f + 1) / frames_per_second;
            if (e.onset < f_end && e.offset > f_start) t(f, cls) = 1.0;
        }
    }
    return t;
}

std::vector<double> tags_to_clip_targets(const std::set<std::string>& tags,
                                         const std::vector<std::string>& class_list) {
    std::vector<double> out(class_list.size(), 0.0);
    for (std::size_t c = 0; c < class_list.size(); ++c)
        if (tags.count(class_list[c])) out[c] = 1.0;
    return out;
}

std::vector<std::string> collect_class_list(const std::vector<const Manifest*>& manifests) {
    std::set<std::string> labels;
    for (const Manifest* m : manifests)
        for (const ManifestRow& r : m->rows) labels.insert(r.labels.begin(), r.labels.end());
    return {labels.begin(), labels.end()};
}

std::vector<std::string> extract_dictionaries(const Manifest& strong, const std::string& audio_dir,
                                              const std::string& cache_dir, const CnmfConfig& cfg,
                                              const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto events_by_clip = strong.events();
    const std::vector<std::string> class_list = collect_class_list({&strong});

    const double frames_per_second = 64.0;
    for (const std::string& cls : class_list) {
        std::vector<std::pair<MelSpectrogram, FrameMask>> clips;
        for (const auto& [clip, events] : events_by_clip) {
            bool has_class = false;
            for (const Event& e : events) has_class |= e.label == cls;
            if (!has_class) continue;

            MelSpectrogram mel = clip_features((fs::path(audio_dir) / clip).string(), cache_dir);
            FrameMask mask;
            mask.keep.assign(mel.values.rows(), 0);
            for (const Event& e : events) {
                if (e.label != cls) continue;
                for (std::size_t f = 0; f < mask.keep.size(); ++f) {
                    const double f_start = static_cast<double>(f) / frames_per_second;
                    const double f_end = static_cast<double>(f + 1) / frames_per_second;
                    if (e.onset < f_end && e.offset > f_start) mask.keep[f] = 1;
                }
            }
            clips.emplace_back(std::move(mel), std::move(mask));
        }
        if (clips.empty()) {
            std::cerr << "warning: no strong clips for class '" << cls << "', skipping\n";
            continue;
        }
        const EventDictionary dict = extract_event_dictionary(cls, clips, cfg);
        save_dictionary((fs::path(out_dir) / (cls + ".dict.sedw")).string(), dict);
    }

    std::ofstream os(fs::path(out_dir) / "classes.txt");
    for (const std::string& cls : class_list) os << cls << '\n';
    return class_list;
}

std::map<std::string, EventDictionary> load_dictionaries(const std::string& dict_dir) {
    std::map<std::string, EventDictionary> out;
    for (const auto& entry : fs::directory_iterator(dict_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 10 && name.substr(name.size() - 10) == ".dict.sedw") {
            EventDictionary d = load_dictionary(entry.path().string());
            out[d.class_label] = std::move(d);
        }
    }
    if (out.empty()) throw std::runtime_error("no dictionaries found in " + dict_dir);
    return out;
}

void build_pseudo_labels(const Manifest& weak, const std::string& audio_dir,
                         const std::string& cache_dir, const std::string& dict_dir,
                         const CnmfConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto dicts = load_dictionaries(dict_dir);

    std::vector<std::string> class_list;
    {
        std::ifstream is(fs::path(dict_dir) / "classes.txt");
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) class_list.push_back(line);
    }
    if (class_list.empty())
        for (const auto& [cls, _] : dicts) class_list.push_back(cls);

    std::ofstream index(fs::path(out_dir) / "index.tsv");
    index << "filename\tlabel_file\tevent_labels\n";
    for (const auto& [clip, tags] : weak.tags()) {
        const MelSpectrogram mel = clip_features((fs::path(audio_dir) / clip).string(), cache_dir);
        const PseudoStrongLabel label = build_pseudo_label(mel, tags, dicts, class_list, cfg);
        const std::string label_file = clip + ".pseudo.sedw";
        TensorArchive a;
        a.attrs["kind"] = "pseudo_label";
        a.attrs["filename"] = clip;
        std::string tag_str;
        for (const std::string& t : tags) {
            if (!tag_str.empty()) tag_str += ",";
            tag_str += t;
        }
        a.attrs["event_labels"] = tag_str;
        a.put("labels", label.labels);
        a.save((fs::path(out_dir) / label_file).string());
        index << clip << '\t' << label_file << '\t' << tag_str << '\n';
    }
}

std::vector<PseudoLabelEntry> read_pseudo_index(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "index.tsv");
    if (!is) throw std::runtime_error("cannot open pseudo label index in " + dir);
    std::vector<PseudoLabelEntry> out;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("filename", 0) == 0) continue;
        }
        std::istringstream ss(line);
        PseudoLabelEntry e;
        std::string tags;
        if (!std::getline(ss, e.filename, '\t') || !std::getline(ss, e.label_path, '\t') ||
            !std::getline(ss, tags))
            throw std::runtime_error("malformed pseudo label index row: " + line);
        std::istringstream ts(tags);
        std::string tag;
        while (std::getline(ts, tag, ','))
            if (!tag.empty()) e.tags.insert(tag);
        e.label_path = (fs::path(dir) / e.label_path).string();
        out.push_back(std::move(e));
    }
    return out;
}

DataPools assemble_pools(const PoolPaths& paths, const FrontendConfig& frontend) {
    DataPools pools;
    const double frames_per_second = 64.0;

    const Manifest strong = read_manifest(paths.strong_manifest, ManifestKind::kStrong);
    const Manifest weak = read_manifest(paths.weak_manifest, ManifestKind::kWeak);
    const Manifest unlabeled = read_manifest(paths.unlabeled_manifest, ManifestKind::kUnlabeled);
    pools.class_list = collect_class_list({&strong, &weak});

    auto features_of = [&](const std::string& clip) {
        return model_features((fs::path(paths.audio_dir) / clip).string(), paths.cache_dir,
                              frontend);
    };

    for (const auto& [clip, events] : strong.events()) {
        TrainingClip tc;
        tc.id = clip;
        tc.features = features_of(clip);
        tc.frame_targets = events_to_frame_targets(events, pools.class_list,
                                                   tc.features.values.rows(), frames_per_second);
        std::set<std::string> tags;
        for (const Event& e : events) tags.insert(e.label);
        tc.clip_targets = tags_to_clip_targets(tags, pools.class_list);
        pools.synthetic.push_back(std::move(tc));
    }

    for (const PseudoLabelEntry& entry : read_pseudo_index(paths.pseudo_dir)) {
        TrainingClip tc;
        tc.id = entry.filename;
        tc.features = features_of(entry.filename);
        TensorArchive a = TensorArchive::load(entry.label_path);
        tc.frame_targets = a.get("labels").to_matrix();
        tc.clip_targets = tags_to_clip_targets(entry.tags, pools.class_list);
        pools.pseudo.push_back(std::move(tc));
    }

    for (const std::string& clip : unlabeled.filenames()) {
        TrainingClip tc;
        tc.id = clip;
        tc.features = features_of(clip);
        pools.unlabeled.push_back(std::move(tc));
    }

    if (!paths.validation_manifest.empty()) {
        const Manifest val = read_manifest(paths.validation_manifest, ManifestKind::kStrong);
        pools.validation_ref = val.events();
        for (const std::string& clip : val.filenames()) {
            TrainingClip tc;
            tc.id = clip;
            tc.features = features_of(clip);
            pools.validation.push_back(std::move(tc));
        }
    }
    return pools;
}

} // namespace sedw
