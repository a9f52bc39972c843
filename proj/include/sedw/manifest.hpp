#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sedw/eval.hpp"

namespace sedw {

enum class ManifestKind { kStrong, kWeak, kUnlabeled };

struct ManifestRow {
    std::string filename;
    double onset = 0.0, offset = 0.0;      // strong rows only
    std::set<std::string> labels;          // strong: single label; weak: tag set
};

struct Manifest {
    ManifestKind kind = ManifestKind::kStrong;
    std::vector<ManifestRow> rows;

    std::vector<std::string> filenames() const; // unique, in first-seen order
    std::map<std::string, EventList> events() const;            // strong only
    std::map<std::string, std::set<std::string>> tags() const;  // strong or weak
};

Manifest read_manifest(const std::string& path, ManifestKind kind);
void write_manifest(const Manifest& m, const std::string& path);

Manifest strong_manifest_from_events(const std::map<std::string, EventList>& events);

} // namespace sedw
