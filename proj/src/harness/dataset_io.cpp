#include "hev/harness/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hev/errors.hpp"

namespace hev::harness {

void write_dataset_csv(std::ostream& out, const MultiViewBatch& batch) {
    Eigen::Index width = 0;
    for (const auto& v : batch.views) width = std::max(width, v.cols());
    out << "view,sample,label";
    for (Eigen::Index j = 0; j < width; ++j) out << ",f" << j;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t m = 0; m < batch.view_count(); ++m) {
            if (!batch.present(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m))) continue;
            out << m << ',' << i << ',' << batch.labels[i];
            const auto& v = batch.views[m];
            for (Eigen::Index j = 0; j < width; ++j) {
                out << ',';
                if (j < v.cols()) {
                    std::snprintf(buf, sizeof buf, "%.17g", v(static_cast<Eigen::Index>(i), j));
                    out << buf;
                }
            }
            out << '\n';
        }
    }
}

void write_dataset_csv(const std::string& path, const MultiViewBatch& batch) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_dataset_csv(out, batch);
}

MultiViewBatch read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("view,sample,label", 0) != 0) {
        throw ShapeError("dataset CSV must start with header 'view,sample,label,...'");
    }
    struct Row {
        std::size_t view;
        std::size_t sample;
        int label;
        std::vector<double> features;
    };
    std::vector<Row> rows;
    std::size_t max_view = 0;
    std::size_t max_sample = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() < 4) throw ShapeError("dataset CSV line " + std::to_string(line_no) + ": too few fields");
        try {
            Row r{std::stoul(fields[0]), std::stoul(fields[1]), std::stoi(fields[2]), {}};
            for (std::size_t j = 3; j < fields.size() && !fields[j].empty(); ++j) r.features.push_back(std::stod(fields[j]));
            max_view = std::max(max_view, r.view);
            max_sample = std::max(max_sample, r.sample);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ShapeError("dataset CSV line " + std::to_string(line_no) + ": malformed number");
        }
    }
    if (rows.empty()) throw ShapeError("dataset CSV has no rows");

    const std::size_t M = max_view + 1;
    const std::size_t n = max_sample + 1;
    std::vector<Eigen::Index> width(M, 0);
    for (const auto& r : rows) {
        const auto w = static_cast<Eigen::Index>(r.features.size());
        if (width[r.view] != 0 && width[r.view] != w) throw ShapeError("dataset CSV: inconsistent width for a view");
        width[r.view] = w;
    }
    MultiViewBatch batch;
    for (std::size_t m = 0; m < M; ++m) {
        if (width[m] == 0) throw ShapeError("dataset CSV: view " + std::to_string(m) + " has no rows");
        batch.views.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), width[m]));
    }
    batch.labels.assign(n, -1);
    batch.present.setConstant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(M), false);
    for (const auto& r : rows) {
        const auto i = static_cast<Eigen::Index>(r.sample);
        if (batch.labels[r.sample] != -1 && batch.labels[r.sample] != r.label) {
            throw ShapeError("dataset CSV: sample " + std::to_string(r.sample) + " has conflicting labels");
        }
        batch.labels[r.sample] = r.label;
        for (std::size_t j = 0; j < r.features.size(); ++j) batch.views[r.view](i, static_cast<Eigen::Index>(j)) = r.features[j];
        batch.present(i, static_cast<Eigen::Index>(r.view)) = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.labels[i] < 0) throw ShapeError("dataset CSV: sample " + std::to_string(i) + " has no rows");
    }
    return batch;
}

MultiViewBatch read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_dataset_csv(in);
}

}  // namespace hev::harness
