#include "sls/training.hpp"

#include "sls/csv.hpp"

namespace sls {

void TrainLog::write_csv(const std::string& path) const {
  CsvWriter csv(path);
  csv.row({"step", "stage", "loss", "mask"});
  for (const auto& r : records_)
    csv.row({std::to_string(r.step), std::to_string(r.stage), fmt_full(r.loss), r.mask});
}

}  // namespace sls
