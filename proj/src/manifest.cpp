#include "sedw/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sedw {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find(sep, start);
        if (end == std::string::npos) end = s.size();
        parts.push_back(s.substr(start, end - start));
        start = end + 1;
    }
    return parts;
}

[[noreturn]] void fail(const std::string& path, std::size_t line_no, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

} // namespace

std::vector<std::string> Manifest::filenames() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const ManifestRow& r : rows)
        if (seen.insert(r.filename).second) out.push_back(r.filename);
    return out;
}

std::map<std::string, EventList> Manifest::events() const {
    if (kind != ManifestKind::kStrong)
        throw std::logic_error("events(): only strong manifests carry onsets/offsets");
    std::map<std::string, EventList> out;
    for (const ManifestRow& r : rows)
        out[r.filename].push_back({*r.labels.begin(), r.onset, r.offset});
    return out;
}

std::map<std::string, std::set<std::string>> Manifest::tags() const {
    std::map<std::string, std::set<std::string>> out;
    for (const ManifestRow& r : rows) out[r.filename].insert(r.labels.begin(), r.labels.end());
    return out;
}

Manifest read_manifest(const std::string& path, ManifestKind kind) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest: " + path);
    Manifest m;
    m.kind = kind;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("filename", 0) == 0) continue; // header
        const std::vector<std::string> f = split(line, '\t');
        ManifestRow row;
        switch (kind) {
        case ManifestKind::kStrong: {
            if (f.size() != 4) fail(path, line_no, "expected filename\\tonset\\toffset\\tevent_label");
            row.filename = f[0];
            try {
                row.onset = std::stod(f[1]);
                row.offset = std::stod(f[2]);
            } catch (const std::exception&) {
                fail(path, line_no, "onset/offset must be numeric");
            }
            if (!(row.onset < row.offset)) fail(path, line_no, "onset must precede offset");
            if (row.onset < 0.0) fail(path, line_no, "negative onset");
            if (f[3].empty()) fail(path, line_no, "empty event label");
            row.labels.insert(f[3]);
            break;
        }
        case ManifestKind::kWeak: {
            if (f.size() != 2) fail(path, line_no, "expected filename\\tevent_labels");
            row.filename = f[0];
            for (const std::string& tag : split(f[1], ','))
                if (!tag.empty()) row.labels.insert(tag);
            if (row.labels.empty()) fail(path, line_no, "weak row carries no tags");
            break;
        }
        case ManifestKind::kUnlabeled: {
            if (f.size() != 1) fail(path, line_no, "expected a bare filename");
            row.filename = f[0];
            break;
        }
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

void write_manifest(const Manifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    switch (m.kind) {
    case ManifestKind::kStrong:
        os << "filename\tonset\toffset\tevent_label\n";
        for (const ManifestRow& r : m.rows)
            os << r.filename << '\t' << std::fixed << std::setprecision(3) << r.onset << '\t'
               << r.offset << '\t' << *r.labels.begin() << '\n';
        break;
    case ManifestKind::kWeak: {
        os << "filename\tevent_labels\n";
        for (const ManifestRow& r : m.rows) {
            os << r.filename << '\t';
            bool first = true;
            for (const std::string& tag : r.labels) {
                if (!first) os << ',';
                os << tag;
                first = false;
            }
            os << '\n';
        }
        break;
    }
    case ManifestKind::kUnlabeled:
        os << "filename\n";
        for (const ManifestRow& r : m.rows) os << r.filename << '\n';
        break;
    }
}

Manifest strong_manifest_from_events(const std::map<std::string, EventList>& events) {
    Manifest m;
    m.kind = ManifestKind::kStrong;
    for (const auto& [clip, list] : events) {
        for (const Event& e : list) {
            ManifestRow row;
            row.filename = clip;
            row.onset = e.onset;
            row.offset = e.offset;
            row.labels.insert(e.label);
            m.rows.push_back(std::move(row));
        }
    }
    return m;
}

} // namespace sedw
