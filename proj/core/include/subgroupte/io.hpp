#pragma once

#include <iosfwd>
#include <string>

#include "subgroupte/data.hpp"
#include "subgroupte/model.hpp"
#include "subgroupte/train.hpp"

namespace subgroupte {

// 17 significant digits; round-trips through strtod bit-exactly.
std::string format_double(double v);

// Writes to a temp file in the target directory, then renames into place.
void write_text_atomic(const std::string& path, const std::string& content);

// Header `id,x0,...,x{p-1},t,y[,y0,y1,te]`; the three oracle columns appear
// together or not at all. Parse and validation failures carry the 1-based
// data-row number.
Dataset load_csv(const std::string& path, bool require_oracle = false);
void save_csv(const Dataset& data, const std::string& path);

struct Checkpoint {
    SubgroupTEModel model;
    TrainConfig config;
    double best_val_mse = 0.0;
};

// JSON document, format_version 1: net shape, training config, every
// parameter tensor as a named float array, centroids.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// One JSON object per epoch, one line each, flushed as written.
LogSink make_ndjson_sink(std::ostream& os);

}  // namespace subgroupte
