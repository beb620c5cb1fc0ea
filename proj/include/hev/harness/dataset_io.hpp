#pragma once

#include <iosfwd>
#include <string>

#include "hev/model.hpp"

namespace hev::harness {

/// CSV with header `view,sample,label,f0..f{d-1}` (d = widest view). One row per
/// present (sample, view); narrower views leave trailing fields empty and a
/// missing view has no row.
void write_dataset_csv(std::ostream& out, const MultiViewBatch& batch);
void write_dataset_csv(const std::string& path, const MultiViewBatch& batch);

/// Inverse of write_dataset_csv. View widths are taken from the populated
/// fields; features of missing views are zero with the presence flag cleared.
MultiViewBatch read_dataset_csv(std::istream& in);
MultiViewBatch read_dataset_csv(const std::string& path);

}  // namespace hev::harness
