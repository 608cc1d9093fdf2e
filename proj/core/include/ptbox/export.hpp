#pragma once

#include <ostream>

#include "ptbox/model.hpp"

namespace ptbox {

// One CSV row per year in [from_year, to_year]: year, the warped unit-interval
// position x, then the time vector the model actually consumes (normalized
// when the config says so). Throws ConfigError on an empty range.
void export_time_embeddings(const ModelParams& m, int from_year, int to_year,
                            std::ostream& os);

// 2-D PCA of the same vectors, rows (year, pc1, pc2). Component signs are
// canonicalized (largest-magnitude loading positive) so exports repeat
// bit-identically.
void export_time_pca(const ModelParams& m, int from_year, int to_year,
                     std::ostream& os);

}  // namespace ptbox
