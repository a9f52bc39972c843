// Python bindings for the sedw core: feature extraction, CNMF, the two
// Convolutional Macaron Nets, schedules, and event decoding/scoring.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sedw/audio.hpp"
#include "sedw/cnmf.hpp"
#include "sedw/eval.hpp"
#include "sedw/frontend.hpp"
#include "sedw/losses.hpp"
#include "sedw/model.hpp"
#include "sedw/optimizer.hpp"
#include "sedw/postprocess.hpp"

namespace py = pybind11;
using namespace sedw;

namespace {

Matrix matrix_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data());
    return m;
}

py::array_t<double> numpy_from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data(), m.data() + m.size(), out.mutable_data());
    return out;
}

ConvolutiveBasis basis_from_list(const std::vector<py::array_t<double>>& ws) {
    ConvolutiveBasis b;
    for (const auto& w : ws) b.w.push_back(matrix_from_numpy(w));
    return b;
}

CmnConfig config_from_kwargs(const std::string& variant, std::size_t frames, std::size_t bins,
                             const std::vector<std::size_t>& filters,
                             const std::vector<std::size_t>& pools_t,
                             const std::vector<std::size_t>& pools_f, std::size_t layers,
                             std::size_t heads, std::size_t n_classes, bool positional_encoding) {
    CmnConfig c;
    c.variant = variant == "flm" ? CmnVariant::kFlm : CmnVariant::kClm;
    c.input_frames = frames;
    c.input_bins = bins;
    c.conv_filters = filters;
    for (std::size_t i = 0; i < pools_t.size(); ++i)
        c.conv_pools.emplace_back(pools_t[i], pools_f[i]);
    c.encoder_layers = layers;
    c.heads = heads;
    c.n_classes = n_classes;
    c.positional_encoding = positional_encoding;
    return c;
}

// Thin model wrapper holding the parameters of one CMN.
struct PyCmn {
    CmnParameters params;

    py::array_t<double> forward(const py::array_t<double>& features) const {
        MelSpectrogram m;
        m.is_log = true;
        m.values = matrix_from_numpy(features);
        if (params.config.variant == CmnVariant::kFlm)
            return numpy_from_matrix(flm_forward(m, params));
        const auto probs = clm_forward(m, params);
        py::array_t<double> out(probs.size());
        std::copy(probs.begin(), probs.end(), out.mutable_data());
        return out;
    }
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sound event detection workbench core";

    m.def("mish", py::vectorize(static_cast<double (*)(double)>(&mish)),
          "x * tanh(softplus(x))");

    m.def(
        "compute_mel",
        [](const py::array_t<double>& samples, int sample_rate, bool log) {
            Waveform w;
            w.sample_rate = sample_rate;
            w.samples.assign(samples.data(), samples.data() + samples.size());
            if (w.sample_rate != kSampleRate) w = resample(w, kSampleRate);
            w = normalize_duration(w);
            MelSpectrogram mel = compute_mel(w);
            if (log) mel = log_scale(mel, FrontendConfig{}.log_floor);
            return numpy_from_matrix(mel.values);
        },
        py::arg("samples"), py::arg("sample_rate") = kSampleRate, py::arg("log") = false,
        "10 s log-mel features (640 x 64) of a waveform");

    // schedules
    m.def("lambda_curr",
          [](long t, long t_i, double lo, double hi) { return lambda_curr(t, {hi, lo, t_i}); },
          py::arg("t_curr"), py::arg("total_iterations"), py::arg("lambda_min") = 0.6,
          py::arg("lambda_max") = 0.9);
    m.def("ramp_weight", &ramp_weight, py::arg("t_curr"), py::arg("total_iterations"));
    m.def("lr_warmup", &lr_warmup, py::arg("t_curr"), py::arg("total_iterations"),
          py::arg("lr_min") = 1e-6, py::arg("lr_max") = 0.0014);
    m.def("lr_decay", &lr_decay, py::arg("t_curr"), py::arg("total_iterations"),
          py::arg("lr_min") = 1e-6, py::arg("lr_max") = 0.0014);

    m.def(
        "bce",
        [](const py::array_t<double>& p, const py::array_t<double>& y) {
            return bce(matrix_from_numpy(p), matrix_from_numpy(y));
        },
        py::arg("probabilities"), py::arg("targets"));

    m.def(
        "mixup",
        [](const py::array_t<double>& a, const py::array_t<double>& b, double lam) {
            return numpy_from_matrix(mixup_with(matrix_from_numpy(a), matrix_from_numpy(b), lam));
        },
        py::arg("u1"), py::arg("u2"), py::arg("lambda_mix"));

    // CNMF
    m.def(
        "cnmf_fit",
        [](const py::array_t<double>& v, int components, int shifts, int iterations,
           std::uint64_t seed) {
            CnmfConfig cfg;
            cfg.components = components;
            cfg.max_shift = shifts;
            cfg.iterations = iterations;
            cfg.seed = seed;
            auto [basis, act] = fit(matrix_from_numpy(v), cfg);
            std::vector<py::array_t<double>> ws;
            for (const Matrix& w : basis.w) ws.push_back(numpy_from_matrix(w));
            return py::make_tuple(ws, numpy_from_matrix(act.h));
        },
        py::arg("v"), py::arg("components") = 4, py::arg("shifts") = 4,
        py::arg("iterations") = 100, py::arg("seed") = 1,
        "alternating convolutive factorization; returns ([W(t)...], H)");

    m.def(
        "cnmf_reconstruct",
        [](const std::vector<py::array_t<double>>& ws, const py::array_t<double>& h) {
            return numpy_from_matrix(reconstruct(basis_from_list(ws), Activation{matrix_from_numpy(h)}));
        },
        py::arg("ws"), py::arg("h"));

    m.def(
        "kl_divergence",
        [](const py::array_t<double>& v, const py::array_t<double>& v_hat) {
            return kl_divergence(matrix_from_numpy(v), matrix_from_numpy(v_hat));
        },
        py::arg("v"), py::arg("v_hat"));

    m.def(
        "shift_columns",
        [](const py::array_t<double>& m, long t) {
            return numpy_from_matrix(shift_columns(matrix_from_numpy(m), t));
        },
        py::arg("m"), py::arg("t"));

    // models
    py::class_<PyCmn>(m, "Cmn", "one Convolutional Macaron Net (FLM or CLM)")
        .def(py::init([](const std::string& variant, std::size_t frames, std::size_t bins,
                         const std::vector<std::size_t>& filters,
                         const std::vector<std::size_t>& pools_t,
                         const std::vector<std::size_t>& pools_f, std::size_t layers,
                         std::size_t heads, std::size_t n_classes, bool positional_encoding,
                         std::uint64_t seed) {
                 PyCmn net;
                 net.params = init_params(
                     config_from_kwargs(variant, frames, bins, filters, pools_t, pools_f, layers,
                                        heads, n_classes, positional_encoding),
                     seed);
                 return net;
             }),
             py::arg("variant"), py::arg("frames") = 640, py::arg("bins") = 64,
             py::arg("filters"), py::arg("pools_t"), py::arg("pools_f"), py::arg("layers") = 1,
             py::arg("heads") = 4, py::arg("n_classes") = 10,
             py::arg("positional_encoding") = true, py::arg("seed") = 1)
        .def_static("load",
                    [](const std::string& path) {
                        PyCmn net;
                        net.params = load_checkpoint(path);
                        return net;
                    },
                    py::arg("path"))
        .def("forward", &PyCmn::forward, py::arg("features"),
             "frame probabilities [frames x classes] (FLM) or clip probabilities [classes] (CLM)")
        .def_property_readonly("n_classes",
                               [](const PyCmn& n) { return n.params.config.n_classes; })
        .def_property_readonly("variant", [](const PyCmn& n) {
            return n.params.config.variant == CmnVariant::kFlm ? "flm" : "clm";
        });

    m.def(
        "temporal_max_pool",
        [](const py::array_t<double>& frame_probs) {
            const auto pooled = temporal_max_pool(matrix_from_numpy(frame_probs));
            py::array_t<double> out(pooled.size());
            std::copy(pooled.begin(), pooled.end(), out.mutable_data());
            return out;
        },
        py::arg("frame_probs"));

    // post-processing and scoring
    m.def("median_smooth", &median_smooth, py::arg("x"), py::arg("window") = 7);

    m.def(
        "frames_to_events",
        [](const py::array_t<double>& frame_probs, const std::vector<std::string>& tags,
           const std::vector<std::string>& class_list, double frame_threshold, int median_window,
           double min_duration, double merge_gap) {
            PostprocessConfig cfg;
            cfg.frame_threshold = frame_threshold;
            cfg.median_window = median_window;
            cfg.min_duration = min_duration;
            cfg.merge_gap = merge_gap;
            const EventList events =
                frames_to_events(matrix_from_numpy(frame_probs),
                                 std::set<std::string>(tags.begin(), tags.end()), class_list, cfg);
            std::vector<py::tuple> out;
            for (const Event& e : events) out.push_back(py::make_tuple(e.label, e.onset, e.offset));
            return out;
        },
        py::arg("frame_probs"), py::arg("tags"), py::arg("class_list"),
        py::arg("frame_threshold") = 0.5, py::arg("median_window") = 7,
        py::arg("min_duration") = 0.1, py::arg("merge_gap") = 0.2,
        "decode (label, onset, offset) events from frame probabilities");

    m.def(
        "event_based_f1",
        [](const std::map<std::string, std::vector<py::tuple>>& ref,
           const std::map<std::string, std::vector<py::tuple>>& est, double onset_collar) {
            auto convert = [](const std::map<std::string, std::vector<py::tuple>>& in) {
                std::map<std::string, EventList> out;
                for (const auto& [clip, events] : in)
                    for (const py::tuple& t : events)
                        out[clip].push_back({t[0].cast<std::string>(), t[1].cast<double>(),
                                             t[2].cast<double>()});
                return out;
            };
            EvalConfig cfg;
            cfg.onset_collar = onset_collar;
            cfg.offset_collar = onset_collar;
            const EventScores s = event_based_scores(convert(ref), convert(est), cfg);
            py::dict per_class;
            for (const auto& [label, c] : s.per_class)
                per_class[py::str(label)] = py::make_tuple(c.tp, c.fp, c.fn, c.f1());
            return py::make_tuple(s.macro_f1, per_class);
        },
        py::arg("reference"), py::arg("estimated"), py::arg("onset_collar") = 0.2,
        "macro F1 plus per-class (tp, fp, fn, f1); events are (label, onset, offset)");
}
