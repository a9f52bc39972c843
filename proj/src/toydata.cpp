#include "sedw/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace sedw {

namespace {

// time-extended archetypes (chirps) are what convolutive templates buy over
// static ones, so they get a solid share of the class table
const char* kArchetypes[10] = {"tone",  "chirp", "noise", "chirp", "noise",
                               "tone",  "chirp", "noise", "tone",  "chirp"};
const char* kNames[10] = {"beep",  "chirp", "buzz",   "sweep", "hiss",
                          "ring",  "glide", "static", "hum",   "drone"};

struct ClipDraw {
    EventList events;
};

ClipDraw draw_clip_events(const ToySpec& spec, const std::vector<ToyClass>& classes, Rng& rng) {
    ClipDraw out;
    const int n_events = spec.min_events + static_cast<int>(rng.index(
                             static_cast<std::size_t>(spec.max_events - spec.min_events + 1)));
    std::size_t first_class = 0;
    for (int e = 0; e < n_events; ++e) {
        std::size_t cls_idx = rng.index(classes.size());
        if (e == 0)
            first_class = cls_idx;
        else if (rng.uniform() < spec.same_class_bias)
            cls_idx = first_class;
        const ToyClass& cls = classes[cls_idx];
        const double dur = rng.uniform(spec.min_duration, spec.max_duration);
        // overlap is allowed but kept occasional: redraw colliding onsets a
        // few times and keep the last draw if none is free
        double onset = rng.uniform(0.0, kClipSeconds - dur);
        for (int attempt = 0; attempt < 4; ++attempt) {
            bool collides = false;
            for (const Event& prev : out.events)
                collides |= onset < prev.offset && prev.onset < onset + dur;
            if (!collides) break;
            onset = rng.uniform(0.0, kClipSeconds - dur);
        }
        out.events.push_back({cls.name, onset, onset + dur});
    }
    std::sort(out.events.begin(), out.events.end(),
              [](const Event& a, const Event& b) { return a.onset < b.onset; });
    return out;
}

Waveform render_clip(const EventList& events, const std::vector<ToyClass>& classes,
                     double background_noise, Rng& rng) {
    Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.assign(kClipSamples, 0.0);
    for (double& s : w.samples) s = background_noise * rng.normal();
    for (const Event& e : events) {
        const ToyClass* cls = nullptr;
        for (const ToyClass& c : classes)
            if (c.name == e.label) cls = &c;
        if (!cls) throw std::logic_error("render_clip: unknown class " + e.label);
        render_event(w, *cls, e.onset, e.offset, rng);
    }
    return w;
}

} // namespace

std::vector<ToyClass> toy_classes(int n_classes) {
    if (n_classes < 1 || n_classes > 10)
        throw std::invalid_argument("toy_classes: 1..10 classes supported");
    std::vector<ToyClass> out;
    const double f_min = 250.0, f_max = 9000.0;
    for (int i = 0; i < n_classes; ++i) {
        ToyClass c;
        c.name = kNames[i];
        c.archetype = kArchetypes[i];
        const double lo_frac = static_cast<double>(i) / n_classes;
        const double hi_frac = (static_cast<double>(i) + 0.6) / n_classes;
        c.f_lo = f_min * std::pow(f_max / f_min, lo_frac);
        c.f_hi = f_min * std::pow(f_max / f_min, hi_frac);
        out.push_back(std::move(c));
    }
    return out;
}

void render_event(Waveform& w, const ToyClass& cls, double onset, double offset, Rng& rng) {
    const std::size_t i0 = static_cast<std::size_t>(onset * w.sample_rate);
    const std::size_t i1 =
        std::min(w.samples.size(), static_cast<std::size_t>(offset * w.sample_rate));
    if (i1 <= i0) return;
    const std::size_t n = i1 - i0;
    const double ramp = std::min(0.05 * w.sample_rate, n / 4.0); // 50 ms attack/release
    const double amp = 0.25;

    if (cls.archetype == "tone") {
        const double f = 0.5 * (cls.f_lo + cls.f_hi);
        const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / w.sample_rate;
            double env = 1.0;
            if (i < ramp) env = 0.5 * (1.0 - std::cos(M_PI * i / ramp));
            if (n - 1 - i < ramp) env = std::min(env, 0.5 * (1.0 - std::cos(M_PI * (n - 1 - i) / ramp)));
            w.samples[i0 + i] += amp * env * std::sin(2.0 * M_PI * f * t + phase0);
        }
    } else if (cls.archetype == "chirp") {
        const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
        const double dur = static_cast<double>(n) / w.sample_rate;
        const double rate = (cls.f_hi - cls.f_lo) / dur;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / w.sample_rate;
            const double phase = 2.0 * M_PI * (cls.f_lo * t + 0.5 * rate * t * t) + phase0;
            double env = 1.0;
            if (i < ramp) env = 0.5 * (1.0 - std::cos(M_PI * i / ramp));
            if (n - 1 - i < ramp) env = std::min(env, 0.5 * (1.0 - std::cos(M_PI * (n - 1 - i) / ramp)));
            w.samples[i0 + i] += amp * env * std::sin(phase);
        }
    } else { // noise burst: a comb of random-phase partials inside the band
        constexpr int kPartials = 24;
        std::vector<double> freqs(kPartials), phases(kPartials);
        for (int p = 0; p < kPartials; ++p) {
            freqs[p] = rng.uniform(cls.f_lo, cls.f_hi);
            phases[p] = rng.uniform(0.0, 2.0 * M_PI);
        }
        const double part_amp = amp / std::sqrt(static_cast<double>(kPartials));
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / w.sample_rate;
            double env = 1.0;
            if (i < ramp) env = 0.5 * (1.0 - std::cos(M_PI * i / ramp));
            if (n - 1 - i < ramp) env = std::min(env, 0.5 * (1.0 - std::cos(M_PI * (n - 1 - i) / ramp)));
            double acc = 0.0;
            for (int p = 0; p < kPartials; ++p)
                acc += std::sin(2.0 * M_PI * freqs[p] * t + phases[p]);
            w.samples[i0 + i] += part_amp * env * acc;
        }
    }
}

ToyDataset synth_toy_dataset(const ToySpec& spec, const std::string& out_dir) {
    if (spec.clips_strong <= 0 || spec.clips_weak <= 0 || spec.clips_unlabeled <= 0)
        throw std::invalid_argument("synth_toy_dataset: clip counts must be positive");
    if (spec.clips_validation < 0)
        throw std::invalid_argument("synth_toy_dataset: negative validation count");

    const std::vector<ToyClass> classes = toy_classes(spec.n_classes);
    fs::create_directories(fs::path(out_dir) / "audio");

    Rng rng(spec.seed);
    ToyDataset out;
    for (const ToyClass& c : classes) out.class_list.push_back(c.name);

    auto make_subset = [&](const std::string& prefix, int count) {
        std::map<std::string, EventList> events;
        for (int i = 0; i < count; ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04d.wav", prefix.c_str(), i);
            ClipDraw draw = draw_clip_events(spec, classes, rng);
            Waveform w = render_clip(draw.events, classes, spec.background_noise, rng);
            write_wav((fs::path(out_dir) / "audio" / name).string(), w);
            events[name] = draw.events;
            ++out.files_written;
        }
        return events;
    };

    const auto strong_events = make_subset("synthetic", spec.clips_strong);
    const auto weak_events = make_subset("weak", spec.clips_weak);
    const auto unlabeled_events = make_subset("unlabeled", spec.clips_unlabeled);

    out.strong_manifest = (fs::path(out_dir) / "synthetic.tsv").string();
    write_manifest(strong_manifest_from_events(strong_events), out.strong_manifest);

    Manifest weak;
    weak.kind = ManifestKind::kWeak;
    for (const auto& [clip, list] : weak_events) {
        ManifestRow row;
        row.filename = clip;
        for (const Event& e : list) row.labels.insert(e.label);
        weak.rows.push_back(std::move(row));
    }
    out.weak_manifest = (fs::path(out_dir) / "weak.tsv").string();
    write_manifest(weak, out.weak_manifest);

    // hidden truth for measuring pseudo-label quality
    out.weak_reference = (fs::path(out_dir) / "weak_reference.tsv").string();
    write_manifest(strong_manifest_from_events(weak_events), out.weak_reference);

    Manifest unlabeled;
    unlabeled.kind = ManifestKind::kUnlabeled;
    for (const auto& [clip, _] : unlabeled_events) {
        ManifestRow row;
        row.filename = clip;
        unlabeled.rows.push_back(std::move(row));
    }
    out.unlabeled_manifest = (fs::path(out_dir) / "unlabeled.tsv").string();
    write_manifest(unlabeled, out.unlabeled_manifest);

    if (spec.clips_validation > 0) {
        const auto val_events = make_subset("validation", spec.clips_validation);
        out.validation_manifest = (fs::path(out_dir) / "validation.tsv").string();
        write_manifest(strong_manifest_from_events(val_events), out.validation_manifest);
    }
    return out;
}

} // namespace sedw
