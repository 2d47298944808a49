#pragma once

#include "vcd/math.hpp"
#include "vcd/rng.hpp"

namespace vcd {

// Binary observations, one row per datapoint.
struct Dataset {
  Mat rows;  // N x D, entries in {0,1}
  int n() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
  Vec row(int i) const { return rows.row(i).transpose(); }

  Dataset head(int count) const {
    Dataset d;
    d.rows = rows.topRows(count);
    return d;
  }
  Dataset slice(int start, int count) const {
    Dataset d;
    d.rows = rows.middleRows(start, count);
    return d;
  }
};

}  // namespace vcd
