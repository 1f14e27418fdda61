#include "mcnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "mcnet/error.hpp"
#include "mcnet/format.hpp"

namespace mcnet {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

Error line_error(long long line, const std::string& what) {
    return Error("line " + std::to_string(line) + ": " + what);
}

} // namespace

std::vector<double> Dataset::scores() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.score);
    return out;
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<int> Dataset::fields() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.field);
    return out;
}

void Dataset::validate() const {
    if (field_count < 1) throw Error("dataset: field count must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!(s.score > 0.0 && s.score < 1.0)) throw Error("dataset: sample " + std::to_string(i) + " score outside (0, 1)");
        if (s.label != 0 && s.label != 1) throw Error("dataset: sample " + std::to_string(i) + " label not in {0, 1}");
        if (s.field < 0 || s.field >= field_count) throw Error("dataset: sample " + std::to_string(i) + " unknown field id");
        if (static_cast<int>(s.features.size()) != feature_dim) {
            throw Error("dataset: sample " + std::to_string(i) + " has wrong feature count");
        }
    }
}

Dataset read_dataset(std::istream& in) {
    Dataset data;
    int declared_fields = -1;
    bool have_header = false;
    long long line_no = 0;
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view key = "# fields=";
            if (line.starts_with(key)) {
                const long long n = parse_integer(trim(line.substr(key.size())));
                if (n < 1) throw line_error(line_no, "declared field count must be positive");
                declared_fields = static_cast<int>(n);
            }
            continue;
        }
        const auto cells = split_commas(line);
        if (!have_header) {
            if (cells.size() < 3 || trim(cells[0]) != "score" || trim(cells[1]) != "label" || trim(cells[2]) != "field") {
                throw line_error(line_no, "expected header 'score,label,field[,f0,...]'");
            }
            for (std::size_t j = 3; j < cells.size(); ++j) {
                if (trim(cells[j]) != "f" + std::to_string(j - 3)) {
                    throw line_error(line_no, "feature columns must be named f0, f1, ...");
                }
            }
            data.feature_dim = static_cast<int>(cells.size()) - 3;
            have_header = true;
            continue;
        }
        if (static_cast<int>(cells.size()) != 3 + data.feature_dim) {
            throw line_error(line_no, "expected " + std::to_string(3 + data.feature_dim) + " columns, got " +
                                          std::to_string(cells.size()));
        }
        Sample s;
        try {
            s.score = parse_double(trim(cells[0]));
            const long long label = parse_integer(trim(cells[1]));
            if (label != 0 && label != 1) throw Error("label not in {0,1}");
            s.label = static_cast<int>(label);
            const long long field = parse_integer(trim(cells[2]));
            if (field < 0) throw Error("negative field id");
            s.field = static_cast<int>(field);
            for (int j = 0; j < data.feature_dim; ++j) s.features.push_back(parse_double(trim(cells[3 + j])));
        } catch (const Error& e) {
            throw line_error(line_no, e.what());
        }
        if (!(s.score > 0.0 && s.score < 1.0)) throw line_error(line_no, "score outside (0,1)");
        if (declared_fields > 0 && s.field >= declared_fields) {
            throw line_error(line_no, "field id " + std::to_string(s.field) + " exceeds declared count " +
                                          std::to_string(declared_fields));
        }
        data.samples.push_back(std::move(s));
    }
    if (!have_header) throw Error("dataset: missing header");
    if (declared_fields > 0) {
        data.field_count = declared_fields;
    } else {
        int max_field = 0;
        for (const auto& s : data.samples) max_field = std::max(max_field, s.field);
        data.field_count = max_field + 1;
    }
    return data;
}

void write_dataset(const Dataset& data, std::ostream& out) {
    out << "# fields=" << data.field_count << '\n';
    out << "score,label,field";
    for (int j = 0; j < data.feature_dim; ++j) out << ",f" << j;
    out << '\n';
    for (const auto& s : data.samples) {
        out << format_double(s.score) << ',' << s.label << ',' << s.field;
        for (double f : s.features) out << ',' << format_double(f);
        out << '\n';
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path.string());
    try {
        return read_dataset(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset " + path.string());
    write_dataset(data, out);
    if (!out) throw Error("write failed for " + path.string());
}

} // namespace mcnet
