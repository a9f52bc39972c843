#include "sedw/model.hpp"

#include <cmath>
#include <stdexcept>

#include "sedw/rng.hpp"
#include "sedw/tensor_io.hpp"

namespace sedw {

std::size_t CmnConfig::seq_len() const {
    std::size_t n = input_frames;
    for (const auto& [pt, pf] : conv_pools) {
        if (pt == 0 || n % pt != 0) throw std::invalid_argument("time axis not divisible by pool");
        n /= pt;
    }
    return n;
}

std::size_t CmnConfig::freq_out() const {
    std::size_t n = input_bins;
    for (const auto& [pt, pf] : conv_pools) {
        if (pf == 0 || n % pf != 0) throw std::invalid_argument("freq axis not divisible by pool");
        n /= pf;
    }
    return n;
}

void CmnConfig::validate() const {
    if (conv_filters.empty() || conv_filters.size() != conv_pools.size())
        throw std::invalid_argument("config: conv_filters and conv_pools must align and be nonempty");
    if (n_classes == 0) throw std::invalid_argument("config: n_classes must be positive");
    seq_len();
    freq_out();
    if (d_model() % heads != 0)
        throw std::invalid_argument("config: d_model must be divisible by the head count");
    if (variant == CmnVariant::kFlm) {
        for (const auto& [pt, pf] : conv_pools)
            if (pt != 1) throw std::invalid_argument("FLM must not compress the time axis");
    } else {
        bool any_time_pool = false;
        for (const auto& [pt, pf] : conv_pools) any_time_pool |= pt > 1;
        if (!any_time_pool) throw std::invalid_argument("CLM requires temporal compression");
        for (std::size_t i = 1; i < conv_filters.size(); ++i)
            if (conv_filters[i] < conv_filters[i - 1])
                throw std::invalid_argument("CLM filter counts must be non-decreasing");
    }
}

CmnConfig CmnConfig::flm_default() {
    CmnConfig c;
    c.variant = CmnVariant::kFlm;
    c.conv_filters = {64, 64, 64};
    c.conv_pools = {{1, 4}, {1, 4}, {1, 4}};
    return c;
}

CmnConfig CmnConfig::clm_default() {
    CmnConfig c;
    c.variant = CmnVariant::kClm;
    c.conv_filters = {16, 32, 64, 128, 128};
    c.conv_pools = {{2, 2}, {2, 2}, {2, 2}, {2, 2}, {5, 4}};
    return c;
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// x tanh(softplus(x)), using tanh(ln u) = (u^2 - 1)/(u^2 + 1) with
// u = 1 + e^x so a single exp covers both factors
double mish(double x) {
    if (x > 30.0) return x; // softplus and tanh saturate exactly at double precision
    const double u = 1.0 + std::exp(x);
    const double u2 = u * u;
    return x * (u2 - 1.0) / (u2 + 1.0);
}

double mish_grad(double x) {
    if (x > 30.0) return 1.0;
    const double e = std::exp(x);
    const double u = 1.0 + e;
    const double u2 = u * u;
    const double t = (u2 - 1.0) / (u2 + 1.0);
    return t + x * (1.0 - t * t) * (e / u);
}

Matrix positional_encoding(std::size_t n, std::size_t d_model) {
    Matrix pe(n, d_model);
    for (std::size_t pos = 0; pos < n; ++pos) {
        for (std::size_t i = 0; i < d_model; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
            pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

CmnParameters init_params(const CmnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto uniform_fan_in = [&](std::size_t n, std::size_t fan_in) {
        std::vector<double> v(n);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& x : v) x = rng.uniform(-bound, bound);
        return v;
    };
    auto dense = [&](std::size_t in, std::size_t out) {
        DenseParams d;
        d.w = Matrix(in, out);
        d.w.values() = uniform_fan_in(in * out, in);
        d.b.assign(out, 0.0);
        return d;
    };

    CmnParameters p;
    p.config = cfg;

    std::size_t in_ch = 1;
    for (std::size_t b = 0; b < cfg.conv_filters.size(); ++b) {
        ConvBlockParams cb;
        cb.in_ch = in_ch;
        cb.out_ch = cfg.conv_filters[b];
        cb.pool_t = cfg.conv_pools[b].first;
        cb.pool_f = cfg.conv_pools[b].second;
        cb.kernel = uniform_fan_in(cb.out_ch * cb.in_ch * 9, cb.in_ch * 9);
        cb.bias.assign(cb.out_ch, 0.0);
        p.conv.push_back(std::move(cb));
        in_ch = cfg.conv_filters[b];
    }

    const std::size_t d_model = cfg.d_model();
    const std::size_t d_ff = cfg.d_ff();
    const std::size_t d_k = d_model / cfg.heads;
    for (std::size_t l = 0; l < cfg.encoder_layers; ++l) {
        MacaronLayerParams ml;
        ml.pff1.fc1 = dense(d_model, d_ff);
        ml.pff1.fc2 = dense(d_ff, d_model);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            Matrix wq(d_model, d_k), wk(d_model, d_k), wv(d_model, d_k);
            wq.values() = uniform_fan_in(d_model * d_k, d_model);
            wk.values() = uniform_fan_in(d_model * d_k, d_model);
            wv.values() = uniform_fan_in(d_model * d_k, d_model);
            ml.att.w_q.push_back(std::move(wq));
            ml.att.w_k.push_back(std::move(wk));
            ml.att.w_v.push_back(std::move(wv));
        }
        ml.att.w_o = Matrix(d_model, d_model);
        ml.att.w_o.values() = uniform_fan_in(d_model * d_model, d_model);
        ml.pff2.fc1 = dense(d_model, d_ff);
        ml.pff2.fc2 = dense(d_ff, d_model);
        ml.ln1.gain.assign(d_model, 1.0);
        ml.ln1.bias.assign(d_model, 0.0);
        ml.ln2 = ml.ln1;
        ml.ln3 = ml.ln1;
        p.encoder.push_back(std::move(ml));
    }

    p.classifier = dense(d_model, cfg.n_classes);
    return p;
}

CmnParameters zeros_like(const CmnParameters& p) {
    CmnParameters z = p;
    visit_params(z, [](const std::string&, double* data, std::size_t n) {
        std::fill(data, data + n, 0.0);
    });
    return z;
}

namespace {

template <typename Params, typename Fn>
void visit_impl(Params& p, const Fn& fn) {
    for (std::size_t b = 0; b < p.conv.size(); ++b) {
        const std::string prefix = "conv" + std::to_string(b);
        fn(prefix + ".kernel", p.conv[b].kernel.data(), p.conv[b].kernel.size());
        fn(prefix + ".bias", p.conv[b].bias.data(), p.conv[b].bias.size());
    }
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        const std::string prefix = "enc" + std::to_string(l);
        auto& ml = p.encoder[l];
        fn(prefix + ".pff1.w1", ml.pff1.fc1.w.data(), ml.pff1.fc1.w.size());
        fn(prefix + ".pff1.b1", ml.pff1.fc1.b.data(), ml.pff1.fc1.b.size());
        fn(prefix + ".pff1.w2", ml.pff1.fc2.w.data(), ml.pff1.fc2.w.size());
        fn(prefix + ".pff1.b2", ml.pff1.fc2.b.data(), ml.pff1.fc2.b.size());
        for (std::size_t h = 0; h < ml.att.heads(); ++h) {
            const std::string hp = prefix + ".att.h" + std::to_string(h);
            fn(hp + ".wq", ml.att.w_q[h].data(), ml.att.w_q[h].size());
            fn(hp + ".wk", ml.att.w_k[h].data(), ml.att.w_k[h].size());
            fn(hp + ".wv", ml.att.w_v[h].data(), ml.att.w_v[h].size());
        }
        fn(prefix + ".att.wo", ml.att.w_o.data(), ml.att.w_o.size());
        fn(prefix + ".pff2.w1", ml.pff2.fc1.w.data(), ml.pff2.fc1.w.size());
        fn(prefix + ".pff2.b1", ml.pff2.fc1.b.data(), ml.pff2.fc1.b.size());
        fn(prefix + ".pff2.w2", ml.pff2.fc2.w.data(), ml.pff2.fc2.w.size());
        fn(prefix + ".pff2.b2", ml.pff2.fc2.b.data(), ml.pff2.fc2.b.size());
        fn(prefix + ".ln1.gain", ml.ln1.gain.data(), ml.ln1.gain.size());
        fn(prefix + ".ln1.bias", ml.ln1.bias.data(), ml.ln1.bias.size());
        fn(prefix + ".ln2.gain", ml.ln2.gain.data(), ml.ln2.gain.size());
        fn(prefix + ".ln2.bias", ml.ln2.bias.data(), ml.ln2.bias.size());
        fn(prefix + ".ln3.gain", ml.ln3.gain.data(), ml.ln3.gain.size());
        fn(prefix + ".ln3.bias", ml.ln3.bias.data(), ml.ln3.bias.size());
    }
    fn("classifier.w", p.classifier.w.data(), p.classifier.w.size());
    fn("classifier.b", p.classifier.b.data(), p.classifier.b.size());
}

} // namespace

void visit_params(CmnParameters& p,
                  const std::function<void(const std::string&, double*, std::size_t)>& fn) {
    visit_impl(p, fn);
}

void visit_params(const CmnParameters& p,
                  const std::function<void(const std::string&, const double*, std::size_t)>& fn) {
    visit_impl(p, fn);
}

std::size_t param_count(const CmnParameters& p) {
    std::size_t n = 0;
    visit_params(p, [&](const std::string&, const double*, std::size_t len) { n += len; });
    return n;
}

void save_checkpoint(const std::string& path, const CmnParameters& p,
                     const std::map<std::string, std::string>& extra_attrs) {
    TensorArchive a;
    a.attrs["kind"] = "checkpoint";
    a.attrs["variant"] = p.config.variant == CmnVariant::kFlm ? "flm" : "clm";
    a.attrs["input_frames"] = std::to_string(p.config.input_frames);
    a.attrs["input_bins"] = std::to_string(p.config.input_bins);
    std::string filters, pools;
    for (std::size_t i = 0; i < p.config.conv_filters.size(); ++i) {
        if (i) filters += ",";
        filters += std::to_string(p.config.conv_filters[i]);
        if (i) pools += ",";
        pools += std::to_string(p.config.conv_pools[i].first) + "x" +
                 std::to_string(p.config.conv_pools[i].second);
    }
    a.attrs["conv_filters"] = filters;
    a.attrs["conv_pools"] = pools;
    a.attrs["encoder_layers"] = std::to_string(p.config.encoder_layers);
    a.attrs["heads"] = std::to_string(p.config.heads);
    a.attrs["n_classes"] = std::to_string(p.config.n_classes);
    a.attrs["positional_encoding"] = p.config.positional_encoding ? "1" : "0";
    a.attrs["macaron_half"] = std::to_string(p.config.macaron_half);
    for (const auto& [k, v] : extra_attrs) a.attrs[k] = v;

    visit_params(p, [&](const std::string& name, const double* data, std::size_t n) {
        Tensor t;
        t.dims = {n};
        t.data.assign(data, data + n);
        a.put(name, std::move(t));
    });
    a.save(path);
}

CmnParameters load_checkpoint(const std::string& path) {
    TensorArchive a = TensorArchive::load(path);
    CmnConfig cfg;
    cfg.variant = a.attrs.at("variant") == "flm" ? CmnVariant::kFlm : CmnVariant::kClm;
    cfg.input_frames = std::stoul(a.attrs.at("input_frames"));
    cfg.input_bins = std::stoul(a.attrs.at("input_bins"));
    cfg.encoder_layers = std::stoul(a.attrs.at("encoder_layers"));
    cfg.heads = std::stoul(a.attrs.at("heads"));
    cfg.n_classes = std::stoul(a.attrs.at("n_classes"));
    cfg.positional_encoding = a.attrs.at("positional_encoding") == "1";
    cfg.macaron_half = std::stod(a.attrs.at("macaron_half"));

    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (start <= s.size()) {
            std::size_t end = s.find(sep, start);
            if (end == std::string::npos) end = s.size();
            parts.push_back(s.substr(start, end - start));
            start = end + 1;
        }
        return parts;
    };
    for (const std::string& f : split(a.attrs.at("conv_filters"), ','))
        cfg.conv_filters.push_back(std::stoul(f));
    for (const std::string& pp : split(a.attrs.at("conv_pools"), ',')) {
        const std::size_t x = pp.find('x');
        cfg.conv_pools.emplace_back(std::stoul(pp.substr(0, x)), std::stoul(pp.substr(x + 1)));
    }

    CmnParameters p = init_params(cfg, 0);
    visit_params(p, [&](const std::string& name, double* data, std::size_t n) {
        const Tensor& t = a.get(name);
        if (t.data.size() != n)
            throw std::runtime_error("checkpoint tensor size mismatch: " + name);
        std::copy(t.data.begin(), t.data.end(), data);
    });
    return p;
}

} // namespace sedw
