#include "fairbench/preproc.hpp"

namespace fairbench {

ReweighResult reweigh(const TabularDataset& ds) {
  ds.validate();
  double cell[2][2] = {{0, 0}, {0, 0}};  // [s][y]
  for (Index i = 0; i < ds.size(); ++i) cell[ds.sensitive[i]][ds.labels[i]] += ds.weights[i];
  const double total = ds.weights.sum();
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 2; ++y)
      if (!(cell[s][y] > 0.0))
        throw DataError("reweigh: empty cell (group " + std::to_string(s) + ", label " +
                        std::to_string(y) + ")");

  ReweighResult out;
  for (int s = 0; s < 2; ++s) {
    const double p_s = (cell[s][0] + cell[s][1]) / total;
    for (int y = 0; y < 2; ++y) {
      const double p_y = (cell[0][y] + cell[1][y]) / total;
      out.cell_weights[s][y] = p_s * p_y / (cell[s][y] / total);
    }
  }
  out.dataset = ds;
  for (Index i = 0; i < ds.size(); ++i)
    out.dataset.weights[i] *= out.cell_weights[ds.sensitive[i]][ds.labels[i]];
  out.dataset.provenance = extend_provenance(ds.provenance, "RW");
  return out;
}

}  // namespace fairbench
