#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace mcnet {

struct Sample {
    double score = 0.5;  // uncalibrated probability, strictly inside (0, 1)
    int label = 0;
    int field = 0;
    std::vector<double> features;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    int field_count = 1;
    int feature_dim = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    std::vector<double> scores() const;
    std::vector<int> labels() const;
    std::vector<int> fields() const;

    // Throws if any sample breaks the score / label / field / feature invariants.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

// Comma-separated text:
//   # fields=<count>            (optional; otherwise max field id + 1)
//   score,label,field[,f0,f1,...]
//   0.25,1,2[,...]
Dataset read_dataset(std::istream& in);
void write_dataset(const Dataset& data, std::ostream& out);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

} // namespace mcnet
